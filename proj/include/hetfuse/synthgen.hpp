#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "hetfuse/datamodel.hpp"
#include "hetfuse/rng.hpp"

namespace hetfuse {

enum class SceneTask { Lesion, Vessel };

inline const char* to_string(SceneTask t) {
    return t == SceneTask::Lesion ? "lesion" : "vessel";
}

inline SceneTask scene_task_from(const std::string& s) {
    if (s == "lesion") return SceneTask::Lesion;
    if (s == "vessel") return SceneTask::Vessel;
    fail(ErrorKind::Config, "unknown task '", s, "' (expected lesion|vessel)");
}

// Parameters of the synthetic co-registered scene generator. The generator
// stands in for clinical data: a layered volume with a bright reference band,
// en-face structures visible in both modalities, a dial controlling how much
// of each structure is visible only in the 2D image, and 3D-only confounders
// that mimic structures without being part of the ground truth.
struct SceneSpec {
    int64_t dim_h = 32, dim_w = 128, dim_d = 64;
    SceneTask task = SceneTask::Vessel;
    int64_t n_structures = 3;
    double structure_scale = 2.0;        // voxels (vessel radius / lesion radius unit)
    double modality2d_exclusive_frac = 0.0;
    int64_t confounder_count = 0;
    double noise_sigma = 0.05;
    double surface_tilt = 0.15;          // max |depth slope| per en-face voxel
    uint64_t seed_space = 0;

    void validate() const {
        check(dim_h >= 4 && dim_w >= 4 && dim_d >= 8, ErrorKind::Config,
              "scene dims too small: (", dim_h, ",", dim_w, ",", dim_d, ")");
        check(modality2d_exclusive_frac >= 0.0 && modality2d_exclusive_frac <= 1.0,
              ErrorKind::Config, "modality2d_exclusive_frac must be in [0,1]");
        check(n_structures >= 0 && confounder_count >= 0, ErrorKind::Config,
              "structure counts must be >= 0");
        check(structure_scale > 0.0, ErrorKind::Config, "structure_scale must be > 0");
        check(noise_sigma >= 0.0, ErrorKind::Config, "noise_sigma must be >= 0");
        // Largest structure must fit inside the en-face plane.
        const double max_extent = 2.0 * structure_scale * 1.5 + 2.0;
        check(max_extent <= static_cast<double>(std::min(dim_h, dim_w)), ErrorKind::Config,
              "structures cannot fit dims: scale ", structure_scale, " vs en-face (",
              dim_h, ",", dim_w, ")");
    }
};

// Catalog of what was rendered where; used by tests and by the
// super-resolution evaluation (recall on 2D-exclusive pixels).
struct SceneStructure {
    std::vector<int64_t> pixels;     // flat h*W+w, in traversal order
    std::vector<uint8_t> exclusive;  // parallel to pixels
};

struct SceneTruth {
    MaskGrid mask;             // union of structure footprints
    SurfaceMap surface;
    MaskGrid exclusive2d;      // mask pixels with no volume evidence at all
    MaskGrid confounder_fp;    // volume-rendered pixels absent from mask/image
    std::vector<SceneStructure> structures;
};

namespace synth_detail {

struct BandProfile {
    int64_t thickness;
    static BandProfile for_depth(int64_t D) {
        return {std::max<int64_t>(2, D / 32)};
    }
};

// Background intensity at relative depth r = d - surface(h,w).
inline float background_at(int64_t r, int64_t band, int64_t D) {
    if (r < 0) return 0.22f + 0.06f * std::cos(0.7f * static_cast<float>(r));
    if (r < band) return 0.95f;
    return 0.32f * std::exp(-static_cast<float>(r - band) / (0.3f * static_cast<float>(D)));
}

// Stamps a filled disc, appending newly covered pixels to the structure in
// traversal order.
inline void stamp_disc(SceneStructure& st, std::vector<uint8_t>& covered, int64_t H, int64_t W,
                       double ch, double cw, double radius) {
    const int64_t h0 = std::max<int64_t>(0, static_cast<int64_t>(std::floor(ch - radius)));
    const int64_t h1 = std::min<int64_t>(H - 1, static_cast<int64_t>(std::ceil(ch + radius)));
    const int64_t w0 = std::max<int64_t>(0, static_cast<int64_t>(std::floor(cw - radius)));
    const int64_t w1 = std::min<int64_t>(W - 1, static_cast<int64_t>(std::ceil(cw + radius)));
    for (int64_t h = h0; h <= h1; ++h)
        for (int64_t w = w0; w <= w1; ++w) {
            const double dh = static_cast<double>(h) - ch;
            const double dw = static_cast<double>(w) - cw;
            if (dh * dh + dw * dw > radius * radius) continue;
            const int64_t p = h * W + w;
            if (covered[static_cast<size_t>(p)]) continue;
            covered[static_cast<size_t>(p)] = 1;
            st.pixels.push_back(p);
        }
}

// A smooth vessel-like curve: mostly along W with sinusoidal wiggle in H.
inline SceneStructure trace_curve(Rng& rng, int64_t H, int64_t W, double h_center,
                                  double radius) {
    SceneStructure st;
    std::vector<uint8_t> covered(static_cast<size_t>(H * W), 0);
    const double len_frac = rng.uniform(0.55, 0.85);
    const double span = len_frac * static_cast<double>(W - 1);
    const double w_start = rng.uniform(0.0, static_cast<double>(W - 1) - span);
    const double amp1 = rng.uniform(0.5, 1.0) * std::min(2.5, static_cast<double>(H) / 6.0);
    const double amp2 = rng.uniform(0.2, 0.6) * std::min(1.5, static_cast<double>(H) / 10.0);
    const double lam1 = rng.uniform(0.5, 1.0) * span;
    const double lam2 = rng.uniform(0.15, 0.35) * span;
    const double ph1 = rng.uniform(0.0, 6.283185307);
    const double ph2 = rng.uniform(0.0, 6.283185307);
    for (double t = 0.0; t <= span; t += 0.5) {
        const double w = w_start + t;
        const double h = h_center + amp1 * std::sin(6.283185307 * t / lam1 + ph1) +
                         amp2 * std::sin(6.283185307 * t / lam2 + ph2);
        stamp_disc(st, covered, H, W, std::clamp(h, 0.0, static_cast<double>(H - 1)), w, radius);
    }
    return st;
}

inline SceneStructure trace_ellipse(Rng& rng, int64_t H, int64_t W, double ch, double cw,
                                    double scale) {
    SceneStructure st;
    const double rh = scale * rng.uniform(0.7, 1.5);
    const double rw = scale * rng.uniform(0.7, 1.5);
    // Collect pixels ordered by projection onto a random direction so that a
    // prefix/suffix cut yields one contiguous chord segment.
    const double ang = rng.uniform(0.0, 6.283185307);
    const double uh = std::cos(ang), uw = std::sin(ang);
    std::vector<std::pair<double, int64_t>> proj;
    const int64_t h0 = std::max<int64_t>(0, static_cast<int64_t>(std::floor(ch - rh)));
    const int64_t h1 = std::min<int64_t>(H - 1, static_cast<int64_t>(std::ceil(ch + rh)));
    const int64_t w0 = std::max<int64_t>(0, static_cast<int64_t>(std::floor(cw - rw)));
    const int64_t w1 = std::min<int64_t>(W - 1, static_cast<int64_t>(std::ceil(cw + rw)));
    for (int64_t h = h0; h <= h1; ++h)
        for (int64_t w = w0; w <= w1; ++w) {
            const double dh = (static_cast<double>(h) - ch) / rh;
            const double dw = (static_cast<double>(w) - cw) / rw;
            if (dh * dh + dw * dw > 1.0) continue;
            proj.emplace_back(uh * static_cast<double>(h) + uw * static_cast<double>(w), h * W + w);
        }
    std::sort(proj.begin(), proj.end());
    for (const auto& [p, idx] : proj) st.pixels.push_back(idx);
    return st;
}

// Marks a contiguous run of round(frac*n) pixels (in traversal order) as
// 2D-exclusive.
inline void mark_exclusive(SceneStructure& st, double frac, Rng& rng) {
    const auto n = static_cast<int64_t>(st.pixels.size());
    st.exclusive.assign(st.pixels.size(), 0);
    const auto k = static_cast<int64_t>(std::llround(frac * static_cast<double>(n)));
    if (k <= 0 || n == 0) return;
    const int64_t start = (k >= n) ? 0 : rng.uniform_int(0, n - k);
    for (int64_t i = start; i < std::min(n, start + k); ++i)
        st.exclusive[static_cast<size_t>(i)] = 1;
}

}  // namespace synth_detail

// Generates one co-registered (volume, image, mask) triplet together with its
// full rendering catalog. Deterministic in (spec, seed).
inline StudySample generate_scene_with_truth(const SceneSpec& spec, uint64_t seed,
                                             SceneTruth* truth_out) {
    using namespace synth_detail;
    spec.validate();
    const int64_t H = spec.dim_h, W = spec.dim_w, D = spec.dim_d;
    Rng rng(mix_seed({spec.seed_space, seed, 0x5ce9eULL}));

    const auto band = BandProfile::for_depth(D);
    // Surface: tilted plane, clamped to leave room for the band and the
    // sub-band signal.
    const double base = (0.45 + 0.1 * rng.uniform()) * static_cast<double>(D);
    const double tilt_h = rng.uniform(-spec.surface_tilt, spec.surface_tilt);
    const double tilt_w = rng.uniform(-spec.surface_tilt, spec.surface_tilt);
    const int64_t s_lo = 2;
    const int64_t s_hi = std::max(s_lo, D - band.thickness - std::max<int64_t>(3, D / 8));
    SurfaceMap surface({H, W});
    for (int64_t h = 0; h < H; ++h)
        for (int64_t w = 0; w < W; ++w) {
            const double s = base + tilt_h * (static_cast<double>(h) - 0.5 * static_cast<double>(H)) +
                             tilt_w * (static_cast<double>(w) - 0.5 * static_cast<double>(W));
            surface(h, w) = static_cast<int32_t>(
                std::clamp<int64_t>(static_cast<int64_t>(std::llround(s)), s_lo, s_hi));
        }

    // Layered background around the recorded (clamped) surface.
    VoxelGrid volume({H, W, D});
    for (int64_t h = 0; h < H; ++h)
        for (int64_t w = 0; w < W; ++w) {
            const int64_t s = surface(h, w);
            float* col = &volume(h, w, int64_t{0});
            for (int64_t d = 0; d < D; ++d) col[d] = background_at(d - s, band.thickness, D);
        }

    // 2D image: textured background.
    EnFaceGrid image({H, W});
    {
        const double k1 = rng.uniform(1.0, 3.0), k2 = rng.uniform(1.0, 3.0);
        const double p1 = rng.uniform(0.0, 6.283185307), p2 = rng.uniform(0.0, 6.283185307);
        for (int64_t h = 0; h < H; ++h)
            for (int64_t w = 0; w < W; ++w)
                image(h, w) = static_cast<float>(
                    0.45 +
                    0.05 * std::sin(6.283185307 * k1 * static_cast<double>(w) / static_cast<double>(W) + p1) +
                    0.05 * std::cos(6.283185307 * k2 * static_cast<double>(h) / static_cast<double>(H) + p2));
    }

    // Structures (stratified along H to limit overlap), then confounders.
    std::vector<SceneStructure> structures;
    for (int64_t i = 0; i < spec.n_structures; ++i) {
        const double margin = std::min(3.0, static_cast<double>(H) / 8.0);
        const double slot = (static_cast<double>(H) - 2.0 * margin) /
                            static_cast<double>(std::max<int64_t>(1, spec.n_structures));
        const double hc = margin + slot * (static_cast<double>(i) + rng.uniform(0.3, 0.7));
        SceneStructure st;
        if (spec.task == SceneTask::Vessel) {
            st = trace_curve(rng, H, W, hc, spec.structure_scale * rng.uniform(0.8, 1.2));
        } else {
            const double wc = rng.uniform(0.15, 0.85) * static_cast<double>(W - 1);
            st = trace_ellipse(rng, H, W, hc, wc, spec.structure_scale);
        }
        check(!st.pixels.empty(), ErrorKind::Config, "structure rendered empty footprint");
        mark_exclusive(st, spec.modality2d_exclusive_frac, rng);
        structures.push_back(std::move(st));
    }
    std::vector<SceneStructure> confounders;
    for (int64_t i = 0; i < spec.confounder_count; ++i) {
        const double hc = rng.uniform(0.15, 0.85) * static_cast<double>(H - 1);
        const double wc = rng.uniform(0.15, 0.85) * static_cast<double>(W - 1);
        SceneStructure st;
        if (spec.task == SceneTask::Vessel) {
            // Short vessel-like fragment: same OCT appearance, absent in 2D.
            SceneStructure curve;
            std::vector<uint8_t> covered(static_cast<size_t>(H * W), 0);
            const double span = rng.uniform(0.08, 0.18) * static_cast<double>(W);
            const double ang = rng.uniform(0.0, 6.283185307);
            const double r = spec.structure_scale * rng.uniform(0.8, 1.2);
            for (double t = 0.0; t <= span; t += 0.5)
                stamp_disc(curve, covered, H, W,
                           std::clamp(hc + t * std::sin(ang), 0.0, static_cast<double>(H - 1)),
                           std::clamp(wc + t * std::cos(ang), 0.0, static_cast<double>(W - 1)), r);
            st = std::move(curve);
        } else {
            st = trace_ellipse(rng, H, W, hc, wc, spec.structure_scale * 0.7);
        }
        st.exclusive.assign(st.pixels.size(), 0);
        confounders.push_back(std::move(st));
    }

    // Rasterize. rendered_any marks en-face columns with volume evidence.
    MaskGrid mask({H, W});
    Tensor<uint8_t> rendered_any({H, W});
    MaskGrid confounder_fp({H, W});

    auto render_volume_column = [&](int64_t p) {
        const int64_t h = p / W, w = p % W;
        const int64_t s = surface(h, w);
        float* col = &volume(h, w, int64_t{0});
        if (spec.task == SceneTask::Lesion) {
            // RPE loss plus hypertransmission below.
            for (int64_t d = s; d < std::min(D, s + band.thickness); ++d) col[d] *= 0.12f;
            for (int64_t d = s + band.thickness; d < D; ++d)
                col[d] = std::min(1.0f, col[d] * 2.8f + 0.25f);
        } else {
            // Bright dot sitting on the band, shadow through and below it.
            for (int64_t d = std::max<int64_t>(0, s - std::max<int64_t>(2, band.thickness)); d < s; ++d)
                col[d] = 0.95f;
            for (int64_t d = s; d < D; ++d) col[d] *= 0.4f;
        }
    };

    for (const auto& st : structures)
        for (size_t i = 0; i < st.pixels.size(); ++i) {
            const int64_t p = st.pixels[i];
            mask[p] = 1;
            const int64_t h = p / W, w = p % W;
            image(h, w) += (spec.task == SceneTask::Lesion) ? 0.45f : -0.40f;
            if (!st.exclusive[i] && !rendered_any[p]) {
                rendered_any[p] = 1;
                render_volume_column(p);
            }
        }
    for (const auto& st : confounders)
        for (int64_t p : st.pixels)
            if (!rendered_any[p]) {
                rendered_any[p] = 1;
                confounder_fp[p] = 1;
                render_volume_column(p);
            }
    // Confounder pixels that coincide with mask pixels are not confounders.
    for (int64_t p = 0; p < confounder_fp.numel(); ++p)
        if (mask[p]) confounder_fp[p] = 0;

    for (int64_t i = 0; i < image.numel(); ++i) image[i] = std::clamp(image[i], 0.0f, 1.0f);

    MaskGrid exclusive2d({H, W});
    for (int64_t p = 0; p < mask.numel(); ++p)
        exclusive2d[p] = (mask[p] == 1 && rendered_any[p] == 0) ? 1 : 0;

    if (spec.noise_sigma > 0.0) {
        for (int64_t i = 0; i < volume.numel(); ++i)
            volume[i] += static_cast<float>(rng.normal(0.0, spec.noise_sigma));
        for (int64_t i = 0; i < image.numel(); ++i)
            image[i] += static_cast<float>(rng.normal(0.0, spec.noise_sigma));
    }

    StudySample sample;
    sample.volume = std::move(volume);
    sample.images["slo"] = std::move(image);
    sample.mask = mask;
    sample.surface = surface;
    sample.aux_masks["exclusive2d"] = exclusive2d;
    sample.spacing = {6.0 / static_cast<double>(H), 6.0 / static_cast<double>(W),
                      1.92 / static_cast<double>(D)};

    if (truth_out) {
        truth_out->mask = std::move(mask);
        truth_out->surface = std::move(surface);
        truth_out->exclusive2d = std::move(exclusive2d);
        truth_out->confounder_fp = std::move(confounder_fp);
        truth_out->structures = std::move(structures);
    }
    return sample;
}

inline StudySample generate_scene(const SceneSpec& spec, uint64_t seed) {
    return generate_scene_with_truth(spec, seed, nullptr);
}

// Writes n_patients * samples_per_patient samples; per-patient seeds are
// derived from (seed, patient index) so patients are independent streams.
inline DatasetManifest generate_dataset(const SceneSpec& spec, int64_t n_patients,
                                        int64_t samples_per_patient, uint64_t seed,
                                        const fs::path& out_dir) {
    spec.validate();
    check(n_patients >= 1 && samples_per_patient >= 1, ErrorKind::Config,
          "need at least one patient and one sample per patient");
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    check(fs::is_directory(out_dir), ErrorKind::Io, "cannot create dataset dir: ", out_dir.string());

    DatasetManifest manifest;
    manifest.root = out_dir;
    for (int64_t p = 0; p < n_patients; ++p) {
        const uint64_t patient_seed = mix_seed({spec.seed_space, seed, static_cast<uint64_t>(p)});
        char pid[32];
        std::snprintf(pid, sizeof(pid), "P%04lld", static_cast<long long>(p));
        for (int64_t k = 0; k < samples_per_patient; ++k) {
            StudySample s = generate_scene(spec, mix_seed({patient_seed, static_cast<uint64_t>(k)}));
            s.patient_id = pid;
            s.eye_id = "OD";
            char dirname[64];
            std::snprintf(dirname, sizeof(dirname), "%s_s%lld", pid, static_cast<long long>(k));
            save_sample(s, out_dir / dirname);
            manifest.samples.push_back({dirname, pid});
        }
    }
    save_manifest(manifest);
    return manifest;
}

}  // namespace hetfuse
