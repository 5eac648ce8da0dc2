#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hetfuse/nn/graph.hpp"
#include "hetfuse/rng.hpp"

namespace hetfuse::nn {

namespace fs = std::filesystem;

enum class FusionMode { VolumeOnly, ImageOnly, Late, Multiscale };

inline const char* to_string(FusionMode m) {
    switch (m) {
        case FusionMode::VolumeOnly: return "volume_only";
        case FusionMode::ImageOnly: return "image_only";
        case FusionMode::Late: return "late";
        case FusionMode::Multiscale: return "multiscale";
    }
    return "?";
}

inline FusionMode fusion_mode_from(const std::string& s) {
    if (s == "volume_only") return FusionMode::VolumeOnly;
    if (s == "image_only") return FusionMode::ImageOnly;
    if (s == "late") return FusionMode::Late;
    if (s == "multiscale") return FusionMode::Multiscale;
    fail(ErrorKind::Config, "unknown fusion mode '", s,
         "' (expected volume_only|image_only|late|multiscale)");
}

// Declarative description of the branches. Encoder blocks carry
// enc_convs_per_block convolutions arranged as pre-activation residual units
// of two convs each; decoder blocks likewise with dec_convs_per_block.
struct ArchitectureConfig {
    int64_t levels = 5;
    int64_t base_channels = 16;
    std::vector<int64_t> channel_schedule;  // empty -> base * 2^level, capped at 256
    int64_t enc_convs_per_block = 8;
    int64_t dec_convs_per_block = 4;
    int64_t fpb_convs = 2;
    int64_t fpb_kernel = 3;
    int64_t fpb_depth_stride = 2;  // depth stride of the first FPB conv
    FusionMode fusion_mode = FusionMode::Multiscale;
    std::string image_modality = "slo";
    double norm_eps = 1e-5;

    bool uses_volume() const { return fusion_mode != FusionMode::ImageOnly; }
    bool uses_image() const { return fusion_mode != FusionMode::VolumeOnly; }

    std::vector<int64_t> channels() const {
        if (!channel_schedule.empty()) return channel_schedule;
        std::vector<int64_t> c;
        int64_t w = base_channels;
        for (int64_t l = 0; l < levels; ++l) {
            c.push_back(std::min<int64_t>(w, 256));
            w *= 2;
        }
        return c;
    }

    int64_t downsample_factor() const { return int64_t{1} << (levels - 1); }

    void validate() const {
        check(levels >= 2, ErrorKind::Config, "levels must be >= 2");
        check(enc_convs_per_block >= 2 && enc_convs_per_block % 2 == 0, ErrorKind::Config,
              "enc_convs_per_block must be even (residual pairing)");
        check(dec_convs_per_block >= 2 && dec_convs_per_block % 2 == 0, ErrorKind::Config,
              "dec_convs_per_block must be even (residual pairing)");
        check(fpb_convs >= 1, ErrorKind::Config, "fpb_convs must be >= 1");
        check(fpb_kernel == 1 || fpb_kernel == 3, ErrorKind::Config, "fpb_kernel must be 1 or 3");
        check(fpb_depth_stride == 1 || fpb_depth_stride == 2, ErrorKind::Config,
              "fpb_depth_stride must be 1 or 2");
        const auto c = channels();
        check(static_cast<int64_t>(c.size()) == levels, ErrorKind::Config,
              "channel_schedule length must equal levels");
        for (int64_t w : c) check(w >= 1, ErrorKind::Config, "channel widths must be positive");
    }

    nlohmann::json to_json() const {
        return {{"levels", levels},
                {"base_channels", base_channels},
                {"channel_schedule", channel_schedule},
                {"enc_convs_per_block", enc_convs_per_block},
                {"dec_convs_per_block", dec_convs_per_block},
                {"fpb_convs", fpb_convs},
                {"fpb_kernel", fpb_kernel},
                {"fpb_depth_stride", fpb_depth_stride},
                {"fusion_mode", to_string(fusion_mode)},
                {"image_modality", image_modality},
                {"norm_eps", norm_eps}};
    }

    static ArchitectureConfig from_json(const nlohmann::json& j) {
        ArchitectureConfig c;
        c.levels = j.at("levels").get<int64_t>();
        c.base_channels = j.at("base_channels").get<int64_t>();
        c.channel_schedule = j.at("channel_schedule").get<std::vector<int64_t>>();
        c.enc_convs_per_block = j.at("enc_convs_per_block").get<int64_t>();
        c.dec_convs_per_block = j.at("dec_convs_per_block").get<int64_t>();
        c.fpb_convs = j.at("fpb_convs").get<int64_t>();
        c.fpb_kernel = j.at("fpb_kernel").get<int64_t>();
        c.fpb_depth_stride = j.at("fpb_depth_stride").get<int64_t>();
        c.fusion_mode = fusion_mode_from(j.at("fusion_mode").get<std::string>());
        c.image_modality = j.value("image_modality", std::string("slo"));
        c.norm_eps = j.at("norm_eps").get<double>();
        c.validate();
        return c;
    }
};

// ---------------------------------------------------------------------------
// Parameter store
// ---------------------------------------------------------------------------

template <typename T>
struct Param {
    std::string name;
    NodePtr<T> node;
    bool trainable = true;
};

template <typename T>
class ParamStore {
public:
    explicit ParamStore(uint64_t init_seed) : rng_(mix_seed({init_seed, 0x9a2a3ULL})) {}

    // He-style fan-in scaled uniform init.
    NodePtr<T> conv_weight(const std::string& name, int64_t cout, int64_t cin, int64_t k,
                           int64_t nd) {
        int64_t fan_in = cin;
        for (int64_t i = 0; i < nd; ++i) fan_in *= k;
        std::vector<int64_t> shape{cout, cin};
        for (int64_t i = 0; i < nd; ++i) shape.push_back(k);
        return uniform(name, shape, std::sqrt(6.0 / static_cast<double>(fan_in)));
    }

    NodePtr<T> conv_bias(const std::string& name, int64_t cout, int64_t fan_in) {
        return uniform(name, {cout}, 1.0 / std::sqrt(static_cast<double>(fan_in)));
    }

    NodePtr<T> constant(const std::string& name, int64_t c, T v) {
        auto node = make_leaf(Tensor<T>({c}, v), true);
        params_.push_back({name, node, true});
        return node;
    }

    std::vector<Param<T>>& params() { return params_; }
    const std::vector<Param<T>>& params() const { return params_; }

    NodePtr<T> find(const std::string& name) const {
        for (const auto& p : params_)
            if (p.name == name) return p.node;
        fail(ErrorKind::Invariant, "no parameter named '", name, "'");
    }

    void set_trainable(const std::string& prefix, bool trainable) {
        for (auto& p : params_)
            if (p.name.rfind(prefix, 0) == 0) {
                p.trainable = trainable;
                p.node->needs_grad = trainable;
            }
    }

    int64_t count_trainable() const {
        int64_t n = 0;
        for (const auto& p : params_)
            if (p.trainable) n += p.node->value.numel();
        return n;
    }

private:
    NodePtr<T> uniform(const std::string& name, std::vector<int64_t> shape, double limit) {
        Tensor<T> t(shape);
        for (int64_t i = 0; i < t.numel(); ++i)
            t[i] = static_cast<T>(rng_.uniform(-limit, limit));
        auto node = make_leaf(std::move(t), true);
        params_.push_back({name, node, true});
        return node;
    }

    Rng rng_;
    std::vector<Param<T>> params_;
};

// ---------------------------------------------------------------------------
// Building blocks
// ---------------------------------------------------------------------------

template <typename T>
struct ConvOp {
    NodePtr<T> w, b;
    int64_t sh = 1, sw = 1, sd = 1;
    bool is3d = false;

    NodePtr<T> operator()(Tape<T>& tape, const NodePtr<T>& x) const {
        return is3d ? conv3d(tape, x, w, b, sh, sw, sd) : conv2d(tape, x, w, b, sh, sw);
    }
};

template <typename T>
struct NormOp {
    NodePtr<T> gamma, beta;
    T eps;

    NodePtr<T> operator()(Tape<T>& tape, const NodePtr<T>& x) const {
        return instance_norm(tape, x, gamma, beta, eps);
    }
};

// Pre-activation residual unit of two convolutions. The projection shortcut
// (1x1, applied to the shared pre-activation) appears whenever channels or
// resolution change.
template <typename T>
struct ResUnit {
    NormOp<T> n1, n2;
    ConvOp<T> c1, c2;
    std::optional<ConvOp<T>> proj;

    NodePtr<T> operator()(Tape<T>& tape, const NodePtr<T>& x) const {
        auto a = relu(tape, n1(tape, x));
        auto h = c1(tape, a);
        h = c2(tape, relu(tape, n2(tape, h)));
        auto sc = proj ? (*proj)(tape, a) : x;
        return add(tape, h, sc);
    }
};

template <typename T>
struct ResBlock {
    std::vector<ResUnit<T>> units;

    NodePtr<T> operator()(Tape<T>& tape, NodePtr<T> x) const {
        for (const auto& u : units) x = u(tape, x);
        return x;
    }
};

// Feature Projection Block: convolutions (first one optionally striding the
// depth axis) followed by depth-wise adaptive average pooling of size 1.
// `activations` switches the per-conv norm+relu; the raw-conv variant exists
// for direct operator tests.
template <typename T>
struct Fpb {
    std::vector<ConvOp<T>> convs;
    std::vector<NormOp<T>> norms;
    bool activations = true;

    NodePtr<T> operator()(Tape<T>& tape, NodePtr<T> x) const {
        for (size_t i = 0; i < convs.size(); ++i) {
            x = convs[i](tape, x);
            if (activations) x = relu(tape, norms[i](tape, x));
        }
        return depth_mean(tape, x);
    }
};

namespace model_detail {

template <typename T>
ResUnit<T> make_unit(ParamStore<T>& ps, const std::string& name, int64_t cin, int64_t cout,
                     int64_t stride, bool is3d, int64_t k, double eps) {
    ResUnit<T> u;
    u.n1 = {ps.constant(name + ".n1.g", cin, T(1)), ps.constant(name + ".n1.b", cin, T(0)),
            static_cast<T>(eps)};
    u.n2 = {ps.constant(name + ".n2.g", cout, T(1)), ps.constant(name + ".n2.b", cout, T(0)),
            static_cast<T>(eps)};
    const int64_t nd = is3d ? 3 : 2;
    u.c1 = {ps.conv_weight(name + ".c1.w", cout, cin, k, nd),
            ps.conv_bias(name + ".c1.b", cout, cin * (is3d ? k * k * k : k * k)), stride, stride,
            is3d ? stride : 1, is3d};
    u.c2 = {ps.conv_weight(name + ".c2.w", cout, cout, k, nd),
            ps.conv_bias(name + ".c2.b", cout, cout * (is3d ? k * k * k : k * k)), 1, 1, 1, is3d};
    if (cin != cout || stride != 1) {
        u.proj = ConvOp<T>{ps.conv_weight(name + ".proj.w", cout, cin, 1, nd),
                           ps.conv_bias(name + ".proj.b", cout, cin), stride, stride,
                           is3d ? stride : 1, is3d};
    }
    return u;
}

template <typename T>
ResBlock<T> make_block(ParamStore<T>& ps, const std::string& name, int64_t cin, int64_t cout,
                       int64_t stride, int64_t n_convs, bool is3d, double eps) {
    ResBlock<T> b;
    const int64_t n_units = n_convs / 2;
    for (int64_t i = 0; i < n_units; ++i)
        b.units.push_back(make_unit(ps, cat(name, ".u", i), i == 0 ? cin : cout, cout,
                                    i == 0 ? stride : 1, is3d, 3, eps));
    return b;
}

template <typename T>
Fpb<T> make_fpb(ParamStore<T>& ps, const std::string& name, int64_t c, int64_t n_convs,
                int64_t k, int64_t depth_stride, double eps) {
    Fpb<T> f;
    for (int64_t i = 0; i < n_convs; ++i) {
        f.convs.push_back(ConvOp<T>{ps.conv_weight(cat(name, ".c", i, ".w"), c, c, k, 3),
                                    ps.conv_bias(cat(name, ".c", i, ".b"), c, c * k * k * k), 1, 1,
                                    i == 0 ? depth_stride : 1, true});
        f.norms.push_back(NormOp<T>{ps.constant(cat(name, ".c", i, ".n.g"), c, T(1)),
                                    ps.constant(cat(name, ".c", i, ".n.b"), c, T(0)),
                                    static_cast<T>(eps)});
    }
    return f;
}

}  // namespace model_detail

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

// The joint model. Branch wiring per fusion mode:
//  - volume_only: 3D encoder -> FPB per level -> 2D decoder -> head
//  - image_only:  2D encoder -> 2D decoder -> head
//  - late:        both branches run fully; their 2D decoder outputs are
//                 resized to the common minimum size, concatenated and fed
//                 to the final 1x1 convolution
//  - multiscale:  image encoder features and FPB outputs are resized and
//                 concatenated per level and feed a single shared decoder;
//                 the image decoder does not exist in this mode
template <typename T>
class Model {
public:
    Model(ArchitectureConfig config, uint64_t init_seed)
        : cfg_(std::move(config)), store_(init_seed) {
        cfg_.validate();
        build();
    }

    const ArchitectureConfig& config() const { return cfg_; }
    ParamStore<T>& store() { return store_; }
    const ParamStore<T>& store() const { return store_; }
    int64_t count_parameters() const { return store_.count_trainable(); }

    // volume: (B,1,H,W,D) or null; image: (B,1,H,W) or null. Returns the
    // sigmoid probability map (B,1,outH,outW) where (outH,outW) is the
    // minimum en-face size over the provided inputs.
    NodePtr<T> forward(Tape<T>& tape, const Tensor<T>* volume, const Tensor<T>* image) const {
        check(volume || image, ErrorKind::Config, "forward needs at least one modality");
        check(!cfg_.uses_volume() || volume, ErrorKind::Config, "fusion mode '",
              to_string(cfg_.fusion_mode), "' requires the volume modality");
        check(!cfg_.uses_image() || image, ErrorKind::Config, "fusion mode '",
              to_string(cfg_.fusion_mode), "' requires the image modality");
        const int64_t f = cfg_.downsample_factor();
        int64_t out_h = INT64_MAX, out_w = INT64_MAX;
        int64_t batch = -1;
        if (volume) {
            check(volume->dim() == 5 && volume->size(1) == 1, ErrorKind::Shape,
                  "volume input must be (B,1,H,W,D)");
            if (cfg_.uses_volume())
                check(volume->size(2) % f == 0 && volume->size(3) % f == 0 &&
                          volume->size(4) % f == 0,
                      ErrorKind::Shape, "volume dims must be divisible by ", f,
                      "; pad the input first");
            out_h = std::min(out_h, volume->size(2));
            out_w = std::min(out_w, volume->size(3));
            batch = volume->size(0);
        }
        if (image) {
            check(image->dim() == 4 && image->size(1) == 1, ErrorKind::Shape,
                  "image input must be (B,1,H,W)");
            if (cfg_.uses_image())
                check(image->size(2) % f == 0 && image->size(3) % f == 0, ErrorKind::Shape,
                      "image dims must be divisible by ", f, "; pad the input first");
            check(batch < 0 || image->size(0) == batch, ErrorKind::Shape,
                  "volume/image batch size mismatch");
            out_h = std::min(out_h, image->size(2));
            out_w = std::min(out_w, image->size(3));
        }

        NodePtr<T> x_vol = volume ? tape.leaf(*volume) : nullptr;
        NodePtr<T> x_img = image ? tape.leaf(*image) : nullptr;

        NodePtr<T> feat;  // (B, C, h, w) features entering the head
        switch (cfg_.fusion_mode) {
            case FusionMode::VolumeOnly: {
                auto skips = volume_skips(tape, x_vol);
                feat = run_decoder(tape, dec_, skips);
                break;
            }
            case FusionMode::ImageOnly: {
                auto skips = encode(tape, img_enc_, x_img);
                feat = run_decoder(tape, dec_, skips);
                break;
            }
            case FusionMode::Late: {
                auto vfeat = run_decoder(tape, dec_, volume_skips(tape, x_vol));
                auto ifeat = run_decoder(tape, img_dec_, encode(tape, img_enc_, x_img));
                feat = concat_channels(tape, resize_to_min(tape, {vfeat, ifeat}));
                break;
            }
            case FusionMode::Multiscale: {
                auto vskips = volume_skips(tape, x_vol);
                auto iskips = encode(tape, img_enc_, x_img);
                std::vector<NodePtr<T>> skips;
                for (int64_t l = 0; l < cfg_.levels; ++l)
                    skips.push_back(concat_channels(
                        tape, resize_to_min(tape, {vskips[static_cast<size_t>(l)],
                                                   iskips[static_cast<size_t>(l)]})));
                feat = run_decoder(tape, dec_, skips);
                break;
            }
        }
        feat = adaptive_max_pool2d(tape, feat, out_h, out_w);
        return sigmoid(tape, head_(tape, feat));
    }

    // Evaluation-mode forward: no tape recording, returns the plain tensor.
    Tensor<T> predict(const Tensor<T>* volume, const Tensor<T>* image) const {
        Tape<T> tape(false);
        return forward(tape, volume, image)->value;
    }

    // ------------------------------------------------------------------
    // Checkpoints: magic, JSON header (architecture echo, named shapes,
    // user extras), then the raw little-endian payloads in header order.
    // ------------------------------------------------------------------

    void save_checkpoint(const fs::path& path, const nlohmann::json& extra = {}) const {
        static_assert(std::is_same_v<T, float>, "checkpoints are float32");
        nlohmann::json header;
        header["arch"] = cfg_.to_json();
        header["extra"] = extra;
        header["params"] = nlohmann::json::array();
        for (const auto& p : store_.params())
            header["params"].push_back({{"name", p.name}, {"shape", p.node->value.shape()}});
        const std::string hs = header.dump();
        std::ofstream out(path, std::ios::binary);
        check(out.good(), ErrorKind::Io, "cannot write checkpoint: ", path.string());
        out.write("HFCKPT01", 8);
        const uint64_t n = hs.size();
        out.write(reinterpret_cast<const char*>(&n), 8);
        out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
        for (const auto& p : store_.params())
            out.write(reinterpret_cast<const char*>(p.node->value.data()),
                      static_cast<std::streamsize>(sizeof(T) * p.node->value.numel()));
        check(out.good(), ErrorKind::Io, "checkpoint write failed: ", path.string());
    }

    static Model load_checkpoint(const fs::path& path, nlohmann::json* extra_out = nullptr) {
        static_assert(std::is_same_v<T, float>, "checkpoints are float32");
        std::ifstream in(path, std::ios::binary);
        check(in.good(), ErrorKind::Io, "missing checkpoint: ", path.string());
        char magic[8];
        in.read(magic, 8);
        check(in.good() && std::memcmp(magic, "HFCKPT01", 8) == 0, ErrorKind::Format,
              "not a checkpoint file: ", path.string());
        uint64_t n = 0;
        in.read(reinterpret_cast<char*>(&n), 8);
        std::string hs(n, '\0');
        in.read(hs.data(), static_cast<std::streamsize>(n));
        check(in.good(), ErrorKind::Format, "truncated checkpoint header: ", path.string());
        nlohmann::json header;
        try {
            header = nlohmann::json::parse(hs);
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::Format, "bad checkpoint header: ", e.what());
        }
        Model m(ArchitectureConfig::from_json(header.at("arch")), 0);
        auto& params = m.store_.params();
        const auto& plist = header.at("params");
        check(plist.size() == params.size(), ErrorKind::Format,
              "checkpoint parameter count mismatch");
        for (size_t i = 0; i < params.size(); ++i) {
            check(plist[i].at("name").get<std::string>() == params[i].name, ErrorKind::Format,
                  "checkpoint parameter order mismatch at '", params[i].name, "'");
            const auto shape = plist[i].at("shape").get<std::vector<int64_t>>();
            check(shape == params[i].node->value.shape(), ErrorKind::Shape,
                  "checkpoint shape mismatch for '", params[i].name, "'");
            in.read(reinterpret_cast<char*>(params[i].node->value.data()),
                    static_cast<std::streamsize>(sizeof(T) * params[i].node->value.numel()));
        }
        check(in.good(), ErrorKind::Format, "truncated checkpoint payload: ", path.string());
        if (extra_out) *extra_out = header.value("extra", nlohmann::json::object());
        return m;
    }

private:
    using Branch = std::vector<ResBlock<T>>;

    void build() {
        const auto ch = cfg_.channels();
        const double eps = cfg_.norm_eps;
        if (cfg_.uses_volume()) {
            for (int64_t l = 0; l < cfg_.levels; ++l) {
                vol_enc_.push_back(model_detail::make_block(
                    store_, cat("vol_enc.l", l), l == 0 ? 1 : ch[static_cast<size_t>(l - 1)],
                    ch[static_cast<size_t>(l)], l == 0 ? 1 : 2, cfg_.enc_convs_per_block, true,
                    eps));
                fpb_.push_back(model_detail::make_fpb(store_, cat("fpb.l", l),
                                                      ch[static_cast<size_t>(l)], cfg_.fpb_convs,
                                                      cfg_.fpb_kernel, cfg_.fpb_depth_stride, eps));
            }
        }
        if (cfg_.uses_image()) {
            for (int64_t l = 0; l < cfg_.levels; ++l)
                img_enc_.push_back(model_detail::make_block(
                    store_, cat("img_enc.l", l), l == 0 ? 1 : ch[static_cast<size_t>(l - 1)],
                    ch[static_cast<size_t>(l)], l == 0 ? 1 : 2, cfg_.enc_convs_per_block, false,
                    eps));
        }
        // Skip widths entering the (shared) decoder.
        const int64_t skip_mult = cfg_.fusion_mode == FusionMode::Multiscale ? 2 : 1;
        dec_ = make_decoder("dec", ch, skip_mult);
        if (cfg_.fusion_mode == FusionMode::Late) img_dec_ = make_decoder("img_dec", ch, 1);

        const int64_t head_in =
            ch[0] * (cfg_.fusion_mode == FusionMode::Late ? 2 : 1);
        head_ = ConvOp<T>{store_.conv_weight("head.w", 1, head_in, 1, 2),
                          store_.conv_bias("head.b", 1, head_in), 1, 1, 1, false};
    }

    Branch make_decoder(const std::string& name, const std::vector<int64_t>& ch,
                        int64_t skip_mult) {
        Branch dec(static_cast<size_t>(cfg_.levels));
        for (int64_t l = cfg_.levels - 1; l >= 0; --l) {
            const int64_t skip_ch = ch[static_cast<size_t>(l)] * skip_mult;
            const int64_t in_ch = (l == cfg_.levels - 1)
                                      ? skip_ch
                                      : ch[static_cast<size_t>(l + 1)] + skip_ch;
            dec[static_cast<size_t>(l)] =
                model_detail::make_block(store_, cat(name, ".l", l), in_ch,
                                         ch[static_cast<size_t>(l)], 1,
                                         cfg_.dec_convs_per_block, false, cfg_.norm_eps);
        }
        return dec;
    }

    std::vector<NodePtr<T>> encode(Tape<T>& tape, const Branch& enc, NodePtr<T> x) const {
        std::vector<NodePtr<T>> feats;
        for (const auto& block : enc) {
            x = block(tape, x);
            feats.push_back(x);
        }
        return feats;
    }

    std::vector<NodePtr<T>> volume_skips(Tape<T>& tape, const NodePtr<T>& x_vol) const {
        auto feats3d = encode(tape, vol_enc_, x_vol);
        std::vector<NodePtr<T>> skips;
        for (int64_t l = 0; l < cfg_.levels; ++l)
            skips.push_back(fpb_[static_cast<size_t>(l)](tape, feats3d[static_cast<size_t>(l)]));
        return skips;
    }

    NodePtr<T> run_decoder(Tape<T>& tape, const Branch& dec,
                           const std::vector<NodePtr<T>>& skips) const {
        NodePtr<T> d = dec.back()(tape, skips.back());
        for (int64_t l = cfg_.levels - 2; l >= 0; --l) {
            auto up = upsample2x(tape, d);
            d = dec[static_cast<size_t>(l)](
                tape, concat_channels(tape, {up, skips[static_cast<size_t>(l)]}));
        }
        return d;
    }

    ArchitectureConfig cfg_;
    ParamStore<T> store_;
    Branch vol_enc_, img_enc_, dec_, img_dec_;
    std::vector<Fpb<T>> fpb_;
    ConvOp<T> head_;
};

// Convenience mirrors of the spec-level operations.
template <typename T>
Model<T> build_model(const ArchitectureConfig& cfg, uint64_t init_seed) {
    return Model<T>(cfg, init_seed);
}

template <typename T>
int64_t count_parameters(const Model<T>& m) {
    return m.count_parameters();
}

}  // namespace hetfuse::nn
