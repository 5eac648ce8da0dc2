#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "hetfuse/metrics.hpp"
#include "hetfuse/nn/loss.hpp"
#include "hetfuse/nn/network.hpp"
#include "hetfuse/preprocess.hpp"
#include "hetfuse/synthgen.hpp"

namespace hetfuse {

struct TrainConfig {
    int64_t epochs = 800;
    double lr = 0.1;
    double momentum = 0.9;
    int64_t batch_size = 8;
    uint64_t seed = 0;
    AugmentPolicy augment;
    bool augment_enabled = true;
    int64_t checkpoint_every = 10;
    int64_t top_k = 5;

    void validate() const {
        check(epochs >= 1, ErrorKind::Config, "epochs must be >= 1");
        check(lr >= 0.0, ErrorKind::Config, "lr must be >= 0");
        check(momentum >= 0.0 && momentum < 1.0, ErrorKind::Config, "momentum must be in [0,1)");
        check(batch_size >= 1, ErrorKind::Config, "batch_size must be >= 1");
        check(checkpoint_every >= 1, ErrorKind::Config, "checkpoint_every must be >= 1");
        check(top_k >= 1, ErrorKind::Config, "top_k must be >= 1");
        augment.validate();
    }

    nlohmann::json to_json() const {
        return {{"epochs", epochs},         {"lr", lr},
                {"momentum", momentum},     {"batch_size", batch_size},
                {"seed", seed},             {"augment_enabled", augment_enabled},
                {"checkpoint_every", checkpoint_every}, {"top_k", top_k}};
    }
};

// ---------------------------------------------------------------------------
// SGD with momentum: v <- mu*v + g;  w <- w - lr*v
// ---------------------------------------------------------------------------

template <typename T>
class SgdMomentum {
public:
    SgdMomentum(double lr, double momentum) : lr_(lr), momentum_(momentum) {}

    void step(nn::ParamStore<T>& store) {
        auto& params = store.params();
        if (velocity_.size() != params.size()) {
            velocity_.clear();
            for (const auto& p : params) velocity_.push_back(Tensor<T>(p.node->value.shape()));
        }
        for (size_t i = 0; i < params.size(); ++i) {
            if (!params[i].trainable) continue;
            auto& p = params[i];
            p.node->ensure_grad();
            auto& v = velocity_[i];
            auto& w = p.node->value;
            const auto& g = p.node->grad;
            for (int64_t j = 0; j < w.numel(); ++j) {
                v[j] = static_cast<T>(momentum_) * v[j] + g[j];
                w[j] -= static_cast<T>(lr_) * v[j];
            }
        }
    }

    void zero_grads(nn::ParamStore<T>& store) {
        for (auto& p : store.params()) p.node->zero_grad();
    }

private:
    double lr_, momentum_;
    std::vector<Tensor<T>> velocity_;
};

// ---------------------------------------------------------------------------
// In-memory training set
// ---------------------------------------------------------------------------

// A preprocessed sample ready for the network: z-scored tensors plus the
// original mask for metric computation.
struct PreparedSample {
    std::string id;
    std::string patient_id;
    StudySample data;  // preprocessed + normalized

    Tensor<float> volume_input() const {
        const auto& v = data.volume;
        return v.reshaped({1, 1, v.size(0), v.size(1), v.size(2)});
    }
    Tensor<float> image_input(const std::string& modality) const {
        const auto it = data.images.find(modality);
        check(it != data.images.end(), ErrorKind::Config, "sample ", id,
              " lacks image modality '", modality, "'");
        return it->second.reshaped({1, 1, it->second.size(0), it->second.size(1)});
    }
    Tensor<float> mask_target() const {
        Tensor<float> t({1, 1, data.mask.size(0), data.mask.size(1)});
        for (int64_t i = 0; i < data.mask.numel(); ++i) t[i] = static_cast<float>(data.mask[i]);
        return t;
    }
};

inline PreparedSample prepare_sample(const StudySample& raw, const std::string& id,
                                     const PrepConfig& prep) {
    PreparedSample p;
    p.id = id;
    p.patient_id = raw.patient_id;
    p.data = normalize_sample(preprocess_geometry(raw, prep));
    return p;
}

inline std::vector<PreparedSample> load_split_samples(const DatasetManifest& manifest,
                                                      const std::set<std::string>& patients,
                                                      const PrepConfig& prep) {
    std::vector<PreparedSample> out;
    for (const auto& e : manifest.samples)
        if (patients.count(e.patient_id))
            out.push_back(prepare_sample(load_sample(manifest.root / e.sample_dir), e.sample_dir,
                                         prep));
    return out;
}

namespace train_detail {

struct Batch {
    Tensor<float> volume;  // (B,1,H,W,D)
    Tensor<float> image;   // (B,1,H,W)
    Tensor<float> target;  // (B,1,H,W)
};

inline Batch collate(const std::vector<const StudySample*>& samples,
                     const std::string& image_modality, bool want_volume, bool want_image) {
    const auto& first = *samples[0];
    const int64_t B = static_cast<int64_t>(samples.size());
    // Target en-face dims: the minimum over the modalities the model uses,
    // matching the network's output contract.
    int64_t Ht = INT64_MAX, Wt = INT64_MAX;
    const int64_t H = first.volume.size(0), W = first.volume.size(1), D = first.volume.size(2);
    if (want_volume) { Ht = std::min(Ht, H); Wt = std::min(Wt, W); }
    int64_t Hi = 0, Wi = 0;
    if (want_image) {
        const auto& img0 = first.images.at(image_modality);
        Hi = img0.size(0); Wi = img0.size(1);
        Ht = std::min(Ht, Hi); Wt = std::min(Wt, Wi);
    }
    Batch b;
    if (want_volume) b.volume = Tensor<float>({B, 1, H, W, D});
    if (want_image) b.image = Tensor<float>({B, 1, Hi, Wi});
    b.target = Tensor<float>({B, 1, Ht, Wt});
    for (int64_t i = 0; i < B; ++i) {
        const auto& s = *samples[static_cast<size_t>(i)];
        if (want_volume) {
            check(s.volume.size(0) == H && s.volume.size(1) == W && s.volume.size(2) == D,
                  ErrorKind::Shape, "batch volumes disagree in shape");
            std::copy(s.volume.data(), s.volume.data() + s.volume.numel(),
                      b.volume.data() + i * H * W * D);
        }
        if (want_image) {
            const auto& img = s.images.at(image_modality);
            check(img.size(0) == Hi && img.size(1) == Wi, ErrorKind::Shape,
                  "batch images disagree in shape");
            std::copy(img.data(), img.data() + img.numel(), b.image.data() + i * Hi * Wi);
        }
        check(s.mask.size(0) == Ht && s.mask.size(1) == Wt, ErrorKind::Shape,
              "mask shape must equal the model output shape (", Ht, ",", Wt, ")");
        for (int64_t j = 0; j < s.mask.numel(); ++j)
            b.target[i * s.mask.numel() + j] = static_cast<float>(s.mask[j]);
    }
    return b;
}

}  // namespace train_detail

// ---------------------------------------------------------------------------
// Run artifacts
// ---------------------------------------------------------------------------

struct CheckpointInfo {
    fs::path path;
    int64_t epoch = 0;
    double val_dice = 0.0;
};

using CheckpointSet = std::vector<CheckpointInfo>;

struct EpochLog {
    int64_t epoch;
    double train_loss;
    double val_dice;
};

struct RunArtifacts {
    fs::path run_dir;
    nn::ArchitectureConfig arch;
    CheckpointSet checkpoints;
    std::vector<EpochLog> log;

    void write_log() const {
        std::ofstream out(run_dir / "log.csv");
        check(out.good(), ErrorKind::Io, "cannot write training log in ", run_dir.string());
        out << "epoch,train_loss,val_dice\n";
        out.precision(8);
        for (const auto& e : log) out << e.epoch << "," << e.train_loss << "," << e.val_dice << "\n";
    }
};

// The k checkpoints with the highest validation Dice (lowest Dice error);
// ties broken in favor of the later epoch. Fewer than k -> all.
inline CheckpointSet select_top_checkpoints(const RunArtifacts& artifacts, int64_t k) {
    check(!artifacts.checkpoints.empty(), ErrorKind::Invariant, "no checkpoints to select from");
    CheckpointSet sorted = artifacts.checkpoints;
    std::stable_sort(sorted.begin(), sorted.end(), [](const CheckpointInfo& a,
                                                      const CheckpointInfo& b) {
        if (a.val_dice != b.val_dice) return a.val_dice > b.val_dice;
        return a.epoch > b.epoch;
    });
    if (static_cast<int64_t>(sorted.size()) > k) sorted.resize(static_cast<size_t>(k));
    return sorted;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

// Optional early-exit predicate, checked after each epoch's log entry.
using StopFn = std::function<bool(const EpochLog&)>;

// Plain SGD with momentum at a constant learning rate. Per-epoch validation
// Dice is computed on un-augmented samples at threshold 0.5; checkpoints are
// written every checkpoint_every epochs and at the last epoch.
inline RunArtifacts train_on_samples(const TrainConfig& config,
                                     const nn::ArchitectureConfig& arch,
                                     const std::vector<PreparedSample>& train_set,
                                     const std::vector<PreparedSample>& val_set,
                                     const fs::path& run_dir, const StopFn& stop_when = {}) {
    config.validate();
    arch.validate();
    check(!train_set.empty(), ErrorKind::Config, "empty training split");
    std::error_code ec;
    fs::create_directories(run_dir, ec);
    check(fs::is_directory(run_dir), ErrorKind::Io, "cannot create run dir: ", run_dir.string());

    nn::Model<float> model(arch, config.seed);
    SgdMomentum<float> opt(config.lr, config.momentum);
    opt.zero_grads(model.store());

    RunArtifacts artifacts;
    artifacts.run_dir = run_dir;
    artifacts.arch = arch;

    {
        std::ofstream echo(run_dir / "train_config.json");
        nlohmann::json j = config.to_json();
        j["arch"] = arch.to_json();
        echo << j.dump(2) << "\n";
    }

    const std::string modality = arch.image_modality;
    std::vector<size_t> order(train_set.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    auto validation_dice = [&]() {
        if (val_set.empty()) return 0.0;
        double acc = 0.0;
        for (const auto& s : val_set) {
            Tensor<float> vol, img;
            const Tensor<float>*volp = nullptr, *imgp = nullptr;
            if (arch.uses_volume()) { vol = s.volume_input(); volp = &vol; }
            if (arch.uses_image()) { img = s.image_input(modality); imgp = &img; }
            const auto prob = model.predict(volp, imgp);
            acc += dice_score(binarize(prob.reshaped({prob.size(2), prob.size(3)})), s.data.mask);
        }
        return acc / static_cast<double>(val_set.size());
    };

    for (int64_t epoch = 1; epoch <= config.epochs; ++epoch) {
        Rng shuffle_rng(mix_seed({config.seed, static_cast<uint64_t>(epoch), 0x54aULL}));
        shuffle_rng.shuffle(order);

        double epoch_loss = 0.0;
        int64_t n_seen = 0;
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(config.batch_size)) {
            const size_t stop = std::min(order.size(), start + static_cast<size_t>(config.batch_size));
            std::vector<StudySample> augmented;
            std::vector<const StudySample*> items;
            augmented.reserve(stop - start);
            for (size_t i = start; i < stop; ++i) {
                const auto& s = train_set[order[i]];
                if (config.augment_enabled) {
                    augmented.push_back(augment_sample(
                        s.data, config.augment,
                        mix_seed({config.seed, static_cast<uint64_t>(epoch), static_cast<uint64_t>(order[i])})));
                    items.push_back(&augmented.back());
                } else {
                    items.push_back(&s.data);
                }
            }
            const auto batch =
                train_detail::collate(items, modality, arch.uses_volume(), arch.uses_image());

            nn::Tape<float> tape(true);
            auto out = model.forward(tape, arch.uses_volume() ? &batch.volume : nullptr,
                                     arch.uses_image() ? &batch.image : nullptr);
            check(out->value.same_shape(batch.target), ErrorKind::Shape,
                  "model output does not match target shape");
            auto loss = nn::dice_bce_loss(tape, out, batch.target);
            tape.backward(loss);
            opt.step(model.store());
            opt.zero_grads(model.store());

            const auto n_items = static_cast<int64_t>(stop - start);
            epoch_loss += static_cast<double>(loss->value[0]) * static_cast<double>(n_items);
            n_seen += n_items;
        }
        epoch_loss /= static_cast<double>(n_seen);

        const double val_dice = validation_dice();
        artifacts.log.push_back({epoch, epoch_loss, val_dice});

        const bool stop = stop_when && stop_when(artifacts.log.back());
        if (epoch % config.checkpoint_every == 0 || epoch == config.epochs || stop) {
            const auto ckpt_path = run_dir / cat("ckpt_epoch", epoch, ".hfck");
            model.save_checkpoint(ckpt_path, {{"epoch", epoch}, {"val_dice", val_dice}});
            artifacts.checkpoints.push_back({ckpt_path, epoch, val_dice});
        }
        if (stop) break;
    }
    artifacts.write_log();
    return artifacts;
}

// Manifest-level wrapper: loads and preprocesses the split partitions, then
// runs the in-memory loop.
inline RunArtifacts train(const TrainConfig& config, const nn::ArchitectureConfig& arch,
                          const DatasetManifest& manifest, const SplitSpec& split,
                          const PrepConfig& prep, const fs::path& run_dir) {
    const auto train_set = load_split_samples(manifest, split.train, prep);
    const auto val_set = load_split_samples(manifest, split.val, prep);
    check(!train_set.empty(), ErrorKind::Config, "training split matches no samples in manifest");
    return train_on_samples(config, arch, train_set, val_set, run_dir);
}

// ---------------------------------------------------------------------------
// Checkpoint-ensemble inference
// ---------------------------------------------------------------------------

// Arithmetic mean of the per-checkpoint sigmoid probability maps. The sum is
// accumulated in double so the result does not depend on checkpoint order.
inline Tensor<float> predict_ensemble(const CheckpointSet& checkpoints,
                                      const nn::ArchitectureConfig& arch,
                                      const Tensor<float>* volume, const Tensor<float>* image) {
    check(!checkpoints.empty(), ErrorKind::Config, "empty checkpoint set");
    Tensor<double> acc;
    std::vector<int64_t> shape;
    for (const auto& info : checkpoints) {
        const auto model = nn::Model<float>::load_checkpoint(info.path);
        check(model.config().fusion_mode == arch.fusion_mode &&
                  model.config().channels() == arch.channels() &&
                  model.config().levels == arch.levels,
              ErrorKind::Config, "checkpoint ", info.path.string(),
              " is incompatible with the requested architecture");
        const auto prob = model.predict(volume, image);
        if (acc.numel() == 0) {
            acc = prob.cast<double>();
            shape = prob.shape();
        } else {
            check(prob.shape() == shape, ErrorKind::Shape, "ensemble member shape mismatch");
            for (int64_t i = 0; i < acc.numel(); ++i) acc[i] += static_cast<double>(prob[i]);
        }
    }
    Tensor<float> mean(shape);
    for (int64_t i = 0; i < acc.numel(); ++i)
        mean[i] = static_cast<float>(acc[i] / static_cast<double>(checkpoints.size()));
    return mean;
}

inline Tensor<float> predict_ensemble(const CheckpointSet& checkpoints,
                                      const nn::ArchitectureConfig& arch,
                                      const PreparedSample& sample) {
    Tensor<float> vol, img;
    const Tensor<float>*volp = nullptr, *imgp = nullptr;
    if (arch.uses_volume()) { vol = sample.volume_input(); volp = &vol; }
    if (arch.uses_image()) { img = sample.image_input(arch.image_modality); imgp = &img; }
    return predict_ensemble(checkpoints, arch, volp, imgp);
}

}  // namespace hetfuse
