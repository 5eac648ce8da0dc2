#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "hetfuse/datamodel.hpp"
#include "hetfuse/rng.hpp"

namespace hetfuse {

// ---------------------------------------------------------------------------
// Geometric preprocessing
// ---------------------------------------------------------------------------

// Shifts every A-scan column so the voxel at surface(h,w) lands at
// anchor_depth. Vacated positions are zero-filled; values shifted past the
// volume boundary are dropped.
inline VoxelGrid flatten_along_surface(const VoxelGrid& volume, const SurfaceMap& surface,
                                       int64_t anchor_depth) {
    const int64_t H = volume.size(0), W = volume.size(1), D = volume.size(2);
    check(surface.dim() == 2 && surface.size(0) == H && surface.size(1) == W,
          ErrorKind::Shape, "surface dims must equal volume (H,W)");
    check(anchor_depth >= 0 && anchor_depth < D, ErrorKind::Invariant,
          "anchor_depth out of range");
    VoxelGrid out({H, W, D}, 0.0f);
    for (int64_t h = 0; h < H; ++h) {
        for (int64_t w = 0; w < W; ++w) {
            const int64_t s = surface(h, w);
            check(s >= 0 && s < D, ErrorKind::Invariant, "surface index out of range at (",
                  h, ",", w, "): ", s);
            const int64_t shift = anchor_depth - s;  // out[d] = in[d - shift]
            const int64_t d_lo = std::max<int64_t>(0, shift);
            const int64_t d_hi = std::min<int64_t>(D, D + shift);
            const float* src = &volume(h, w, int64_t{0});
            float* dst = &out(h, w, int64_t{0});
            for (int64_t d = d_lo; d < d_hi; ++d) dst[d] = src[d - shift];
        }
    }
    return out;
}

// Crops the depth axis to out_depth voxels. The window starts at
// anchor_depth - floor(above_frac * out_depth); parts of the window outside
// the volume are zero-padded. En-face dims stay full size.
inline VoxelGrid crop_depth(const VoxelGrid& volume, int64_t anchor_depth, int64_t out_depth,
                            double above_frac) {
    check(out_depth >= 1, ErrorKind::Config, "out_depth must be >= 1");
    const int64_t H = volume.size(0), W = volume.size(1), D = volume.size(2);
    const int64_t start =
        anchor_depth - static_cast<int64_t>(std::floor(above_frac * static_cast<double>(out_depth)));
    VoxelGrid out({H, W, out_depth}, 0.0f);
    const int64_t d_lo = std::max<int64_t>(0, -start);
    const int64_t d_hi = std::min<int64_t>(out_depth, D - start);
    for (int64_t h = 0; h < H; ++h)
        for (int64_t w = 0; w < W; ++w) {
            const float* src = &volume(h, w, int64_t{0});
            float* dst = &out(h, w, int64_t{0});
            for (int64_t d = d_lo; d < d_hi; ++d) dst[d] = src[d + start];
        }
    return out;
}

// Z-score normalization over the whole grid. Constant inputs map to zeros.
template <typename T>
Tensor<T> zscore(const Tensor<T>& grid) {
    constexpr double kEps = 1e-8;
    const double mu = mean_of(grid);
    const double sd = stddev_of(grid);
    Tensor<T> out(grid.shape());
    if (sd <= kEps) return out;  // all zeros
    for (int64_t i = 0; i < grid.numel(); ++i)
        out[i] = static_cast<T>((static_cast<double>(grid[i]) - mu) / sd);
    return out;
}

// Center-crop to the target aspect ratio followed by bilinear resampling
// (aligned-corners-off convention: output pixel i samples input coordinate
// (i + 0.5) * n / m - 0.5).
inline EnFaceGrid align_enface(const EnFaceGrid& image, int64_t target_h, int64_t target_w) {
    check(target_h >= 1 && target_w >= 1, ErrorKind::Config, "target dims must be >= 1");
    const int64_t H = image.size(0), W = image.size(1);
    if (H == target_h && W == target_w) return image;

    // Center crop to the target aspect ratio.
    const double want = static_cast<double>(target_h) / static_cast<double>(target_w);
    int64_t crop_h = H, crop_w = W;
    const double have = static_cast<double>(H) / static_cast<double>(W);
    if (have > want)
        crop_h = std::max<int64_t>(1, static_cast<int64_t>(std::llround(want * static_cast<double>(W))));
    else if (have < want)
        crop_w = std::max<int64_t>(1, static_cast<int64_t>(std::llround(static_cast<double>(H) / want)));
    const int64_t off_h = (H - crop_h) / 2;
    const int64_t off_w = (W - crop_w) / 2;

    EnFaceGrid out({target_h, target_w});
    for (int64_t i = 0; i < target_h; ++i) {
        const double sy =
            (static_cast<double>(i) + 0.5) * static_cast<double>(crop_h) / static_cast<double>(target_h) - 0.5;
        const int64_t y0 = static_cast<int64_t>(std::floor(sy));
        const double fy = sy - static_cast<double>(y0);
        for (int64_t j = 0; j < target_w; ++j) {
            const double sx =
                (static_cast<double>(j) + 0.5) * static_cast<double>(crop_w) / static_cast<double>(target_w) - 0.5;
            const int64_t x0 = static_cast<int64_t>(std::floor(sx));
            const double fx = sx - static_cast<double>(x0);
            auto sample = [&](int64_t y, int64_t x) {
                y = std::clamp<int64_t>(y, 0, crop_h - 1);
                x = std::clamp<int64_t>(x, 0, crop_w - 1);
                return static_cast<double>(image(off_h + y, off_w + x));
            };
            const double v = (1 - fy) * ((1 - fx) * sample(y0, x0) + fx * sample(y0, x0 + 1)) +
                             fy * ((1 - fx) * sample(y0 + 1, x0) + fx * sample(y0 + 1, x0 + 1));
            out(i, j) = static_cast<float>(v);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Standard input pipeline: flatten along the surface, crop the depth axis,
// align 2D images to the volume en-face grid. Z-scoring is a separate stage
// so corruptions that depend on raw intensities (cutout) can run in between.
// ---------------------------------------------------------------------------

struct PrepConfig {
    int64_t crop_depth = 128;   // clamped to the volume depth
    double above_frac = 0.75;   // fraction of the window above the surface anchor
    bool flatten = true;        // skipped when the sample has no surface

    int64_t anchor_for(int64_t out_depth) const {
        return static_cast<int64_t>(std::floor(above_frac * static_cast<double>(out_depth)));
    }
};

inline StudySample preprocess_geometry(const StudySample& sample, const PrepConfig& cfg) {
    StudySample out = sample;
    const int64_t D = out.volume.size(2);
    const int64_t out_depth = std::min<int64_t>(cfg.crop_depth, D);
    const int64_t anchor = cfg.anchor_for(out_depth);
    if (cfg.flatten && out.surface) {
        out.volume = flatten_along_surface(out.volume, *out.surface, std::min(anchor, D - 1));
        out.surface.reset();  // consumed; subsequent steps work on the flat grid
    }
    if (out_depth != D) out.volume = crop_depth(out.volume, anchor, out_depth, cfg.above_frac);
    for (auto& [name, img] : out.images)
        img = align_enface(img, out.volume.size(0), out.volume.size(1));
    return out;
}

inline StudySample normalize_sample(StudySample sample) {
    sample.volume = zscore(sample.volume);
    for (auto& [name, img] : sample.images) img = zscore(img);
    return sample;
}

// ---------------------------------------------------------------------------
// Training-time augmentation
// ---------------------------------------------------------------------------

struct AugmentPolicy {
    double flip_prob = 0.5;                        // per en-face axis
    double mult_noise_lo = 0.9, mult_noise_hi = 1.1;  // global multiplicative factor
    double add_noise_sigma = 0.05;                 // Gaussian, in Z-score units
    double contrast_lo = 0.9, contrast_hi = 1.1;   // gain around the modality mean
    double shift_lo = -0.1, shift_hi = 0.1;        // additive intensity shift

    static AugmentPolicy none() {
        return {0.0, 1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0};
    }

    void validate() const {
        check(flip_prob >= 0.0 && flip_prob <= 1.0, ErrorKind::Config, "flip_prob out of [0,1]");
        check(mult_noise_lo <= mult_noise_hi, ErrorKind::Config, "mult_noise range unordered");
        check(contrast_lo <= contrast_hi, ErrorKind::Config, "contrast range unordered");
        check(shift_lo <= shift_hi, ErrorKind::Config, "intensity shift range unordered");
        check(add_noise_sigma >= 0.0, ErrorKind::Config, "add_noise_sigma must be >= 0");
    }
};

namespace detail {

template <typename T>
void flip_axis01(Tensor<T>& t, bool flip_h, bool flip_w) {
    const int64_t H = t.size(0), W = t.size(1);
    const int64_t inner = t.numel() / (H * W);  // 1 for 2D, D for 3D
    Tensor<T> src = t;
    for (int64_t h = 0; h < H; ++h)
        for (int64_t w = 0; w < W; ++w) {
            const int64_t sh = flip_h ? H - 1 - h : h;
            const int64_t sw = flip_w ? W - 1 - w : w;
            const T* from = src.data() + (sh * W + sw) * inner;
            T* to = t.data() + (h * W + w) * inner;
            std::copy(from, from + inner, to);
        }
}

// Applies the intensity chain (multiplicative factor, additive Gaussian
// noise, contrast gain around the mean, shift) with draws from rng.
template <typename T>
void intensity_chain(Tensor<T>& t, const AugmentPolicy& p, Rng& rng) {
    const double mult = rng.uniform(p.mult_noise_lo, p.mult_noise_hi);
    const double contrast = rng.uniform(p.contrast_lo, p.contrast_hi);
    const double shift = rng.uniform(p.shift_lo, p.shift_hi);
    double mu = 0.0;
    for (int64_t i = 0; i < t.numel(); ++i) mu += static_cast<double>(t[i]);
    mu /= std::max<int64_t>(1, t.numel());
    for (int64_t i = 0; i < t.numel(); ++i) {
        double v = static_cast<double>(t[i]) * mult;
        if (p.add_noise_sigma > 0.0) v += rng.normal(0.0, p.add_noise_sigma);
        v = mu + (v - mu) * contrast;
        v += shift;
        t[i] = static_cast<T>(v);
    }
}

}  // namespace detail

// Geometric transforms (flips) are applied identically to the volume, every
// image, the mask, the surface and the aux masks; intensity transforms are
// drawn independently per modality and never touch the mask.
inline StudySample augment_sample(const StudySample& sample, const AugmentPolicy& policy,
                                  uint64_t rng_seed) {
    policy.validate();
    StudySample out = sample;
    Rng rng(mix_seed({rng_seed, 0xa46ULL}));

    const bool flip_h = rng.bernoulli(policy.flip_prob);
    const bool flip_w = rng.bernoulli(policy.flip_prob);
    if (flip_h || flip_w) {
        detail::flip_axis01(out.volume, flip_h, flip_w);
        for (auto& [name, img] : out.images) detail::flip_axis01(img, flip_h, flip_w);
        detail::flip_axis01(out.mask, flip_h, flip_w);
        if (out.surface) detail::flip_axis01(*out.surface, flip_h, flip_w);
        for (auto& [name, m] : out.aux_masks) detail::flip_axis01(m, flip_h, flip_w);
    }

    detail::intensity_chain(out.volume, policy, rng);
    for (auto& [name, img] : out.images) detail::intensity_chain(img, policy, rng);
    return out;
}

// ---------------------------------------------------------------------------
// Cutout corruption (robustness study)
// ---------------------------------------------------------------------------

struct CutoutSpec {
    int64_t n_masks = 0;
    double frac_h = 0.95, frac_w = 0.1, frac_d = 0.1;
    double fill_band = 0.1;  // fill ~ Uniform[mu - band*mu, mu + band*mu]

    void validate() const {
        check(n_masks >= 0, ErrorKind::Config, "n_masks must be >= 0");
        check(frac_h > 0 && frac_h <= 1 && frac_w > 0 && frac_w <= 1 && frac_d > 0 && frac_d <= 1,
              ErrorKind::Config, "cutout fractions must be in (0,1]");
    }

    // Box extents for a volume of the given dims (floor rounding).
    std::array<int64_t, 3> box_dims(int64_t H, int64_t W, int64_t D) const {
        return {static_cast<int64_t>(std::floor(frac_h * static_cast<double>(H))),
                static_cast<int64_t>(std::floor(frac_w * static_cast<double>(W))),
                static_cast<int64_t>(std::floor(frac_d * static_cast<double>(D)))};
    }
};

// Replaces n_masks random axis-aligned boxes with draws from
// Uniform[mu - band*mu, mu + band*mu], mu being the pre-corruption mean.
inline VoxelGrid apply_cutout(const VoxelGrid& volume, const CutoutSpec& spec, uint64_t rng_seed) {
    spec.validate();
    check(volume.numel() > 0, ErrorKind::Invariant, "cutout on empty volume");
    const int64_t H = volume.size(0), W = volume.size(1), D = volume.size(2);
    VoxelGrid out = volume;
    if (spec.n_masks == 0) return out;
    const auto [bh, bw, bd] = spec.box_dims(H, W, D);
    check(bh >= 1 && bw >= 1 && bd >= 1 && bh <= H && bw <= W && bd <= D, ErrorKind::Config,
          "cutout box does not fit volume");
    const double mu = mean_of(volume);
    const double lo = mu - spec.fill_band * mu;
    const double hi = mu + spec.fill_band * mu;
    Rng rng(mix_seed({rng_seed, 0xc0ULL}));
    for (int64_t m = 0; m < spec.n_masks; ++m) {
        const int64_t h0 = rng.uniform_int(0, H - bh);
        const int64_t w0 = rng.uniform_int(0, W - bw);
        const int64_t d0 = rng.uniform_int(0, D - bd);
        for (int64_t h = h0; h < h0 + bh; ++h)
            for (int64_t w = w0; w < w0 + bw; ++w)
                for (int64_t d = d0; d < d0 + bd; ++d)
                    out(h, w, d) = static_cast<float>(rng.uniform(std::min(lo, hi), std::max(lo, hi)));
    }
    return out;
}

}  // namespace hetfuse
