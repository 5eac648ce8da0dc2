#pragma once

// Central-finite-difference gradient checking for the full network, shared by
// the unit tests and the acceptance suite. The scalar objective is the
// dice+bce loss of the model output against a fixed random target.
//
// Analytic gradients are computed at precision TA; the finite-difference
// reference is evaluated on a mirrored model at precision TF. Checking
// 32-bit gradients uses a 64-bit FD reference: an FD oracle computed in
// float32 is itself noisier than the 1e-2 tolerance it is meant to enforce.

#include <cstdint>
#include <string>
#include <vector>

#include "hetfuse/nn/loss.hpp"
#include "hetfuse/nn/network.hpp"
#include "hetfuse/rng.hpp"

namespace hetfuse::gradcheck {

struct Result {
    double max_rel_err = 0.0;
    int64_t n_checked = 0;
    std::string worst_param;
};

template <typename TA, typename TF = TA>
Result run_network_gradcheck(const nn::ArchitectureConfig& cfg, uint64_t seed, double fd_step,
                             int64_t entries_per_param) {
    Rng rng(mix_seed({seed, 0x9cULL}));
    const int64_t f = cfg.downsample_factor();
    const int64_t H = 2 * f, W = 4 * f, D = 2 * f;

    Tensor<TA> volume({1, 1, H, W, D});
    for (int64_t i = 0; i < volume.numel(); ++i) volume[i] = static_cast<TA>(rng.normal(0, 1));
    Tensor<TA> image({1, 1, H, W});
    for (int64_t i = 0; i < image.numel(); ++i) image[i] = static_cast<TA>(rng.normal(0, 1));
    Tensor<TA> target({1, 1, H, W});
    for (int64_t i = 0; i < target.numel(); ++i) target[i] = rng.bernoulli(0.4) ? TA(1) : TA(0);

    nn::Model<TA> model(cfg, seed);
    const Tensor<TA>* vol_in = cfg.uses_volume() ? &volume : nullptr;
    const Tensor<TA>* img_in = cfg.uses_image() ? &image : nullptr;

    // Mirror model for the FD reference.
    nn::Model<TF> fd_model(cfg, seed);
    auto& fd_params = fd_model.store().params();
    auto& params = model.store().params();
    for (size_t i = 0; i < params.size(); ++i)
        fd_params[i].node->value = params[i].node->value.template cast<TF>();
    const Tensor<TF> fd_volume = volume.template cast<TF>();
    const Tensor<TF> fd_image = image.template cast<TF>();
    const Tensor<TF> fd_target = target.template cast<TF>();
    const Tensor<TF>* fd_vol_in = cfg.uses_volume() ? &fd_volume : nullptr;
    const Tensor<TF>* fd_img_in = cfg.uses_image() ? &fd_image : nullptr;

    auto fd_loss = [&]() {
        nn::Tape<TF> tape(false);
        auto out = fd_model.forward(tape, fd_vol_in, fd_img_in);
        return static_cast<double>(nn::dice_bce_loss(tape, out, fd_target)->value[0]);
    };

    // Analytic gradients.
    for (auto& p : params) p.node->zero_grad();
    nn::Tape<TA> tape(true);
    auto out = model.forward(tape, vol_in, img_in);
    auto loss = nn::dice_bce_loss(tape, out, target);
    tape.backward(loss);

    Result res;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = params[pi];
        auto& pf = fd_params[pi];
        Rng pick(mix_seed({seed, std::hash<std::string>{}(p.name)}));
        const int64_t n = p.node->value.numel();
        for (int64_t rep = 0; rep < std::min(entries_per_param, n); ++rep) {
            const int64_t i = pick.uniform_int(0, n - 1);
            const TF orig = pf.node->value[i];
            pf.node->value[i] = orig + static_cast<TF>(fd_step);
            const double lp = fd_loss();
            pf.node->value[i] = orig - static_cast<TF>(fd_step);
            const double lm = fd_loss();
            pf.node->value[i] = orig;
            const double fd = (lp - lm) / (2.0 * fd_step);
            const double an = static_cast<double>(p.node->grad[i]);
            const double scale = std::max(1.0, std::abs(fd) + std::abs(an));
            const double rel = std::abs(fd - an) / scale;
            ++res.n_checked;
            if (rel > res.max_rel_err) {
                res.max_rel_err = rel;
                res.worst_param = p.name;
            }
        }
    }
    return res;
}

inline nn::ArchitectureConfig miniature_config(nn::FusionMode mode) {
    nn::ArchitectureConfig cfg;
    cfg.levels = 2;
    cfg.base_channels = 2;
    cfg.enc_convs_per_block = 4;
    cfg.dec_convs_per_block = 2;
    cfg.fpb_convs = 1;
    cfg.fusion_mode = mode;
    return cfg;
}

}  // namespace hetfuse::gradcheck
