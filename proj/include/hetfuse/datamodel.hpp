#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "hetfuse/common.hpp"
#include "hetfuse/rng.hpp"
#include "hetfuse/tensor.hpp"

namespace hetfuse {

namespace fs = std::filesystem;

// Axis convention used everywhere: volumes are (H, W, D) with H the en-face
// height (B-scan index), W the en-face width and D the depth (A-scan axis,
// last and fastest-varying). En-face grids are (H, W).
using VoxelGrid = Tensor<float>;
using EnFaceGrid = Tensor<float>;
using MaskGrid = Tensor<uint8_t>;

// Per-column depth index of the flattening reference surface.
using SurfaceMap = Tensor<int32_t>;

struct Spacing {
    double mm_h = 1.0;
    double mm_w = 1.0;
    double mm_d = 1.0;
};

// One co-registered case: a 3D volume, one or more aligned 2D images, the
// 2D en-face ground-truth mask and (optionally) the flattening surface.
// aux_masks carries extra binary en-face annotations that are never fed to
// the network (e.g. the synthetic generator's 2D-exclusive footprint).
struct StudySample {
    std::string patient_id;
    std::string eye_id;
    VoxelGrid volume;                       // (H, W, D)
    std::map<std::string, EnFaceGrid> images;  // name -> (H, W)
    MaskGrid mask;                          // (H, W)
    std::optional<SurfaceMap> surface;      // (H, W)
    std::map<std::string, MaskGrid> aux_masks;
    Spacing spacing;
};

inline void validate_sample(const StudySample& s) {
    check(s.volume.dim() == 3, ErrorKind::Shape, "volume must be 3D (H,W,D)");
    check(s.mask.dim() == 2, ErrorKind::Shape, "mask must be 2D (H,W)");
    check(s.mask.size(0) == s.volume.size(0) && s.mask.size(1) == s.volume.size(1),
          ErrorKind::Shape, "mask en-face dims must equal the volume's (H,W)");
    check(s.volume.size(2) >= 1, ErrorKind::Shape, "volume depth must be >= 1");
    check(s.spacing.mm_h > 0 && s.spacing.mm_w > 0 && s.spacing.mm_d > 0,
          ErrorKind::Invariant, "spacing components must be strictly positive");
    check(all_finite(s.volume), ErrorKind::Invariant, "volume contains non-finite values");
    for (const auto& [name, img] : s.images) {
        check(img.dim() == 2, ErrorKind::Shape, "image '", name, "' must be 2D");
        check(all_finite(img), ErrorKind::Invariant, "image '", name, "' contains non-finite values");
    }
    for (int64_t i = 0; i < s.mask.numel(); ++i)
        check(s.mask[i] == 0 || s.mask[i] == 1, ErrorKind::Invariant,
              "mask values must be in {0,1}, found ", int(s.mask[i]));
    if (s.surface) {
        check(s.surface->shape() == std::vector<int64_t>({s.volume.size(0), s.volume.size(1)}),
              ErrorKind::Shape, "surface dims must equal volume (H,W)");
        for (int64_t i = 0; i < s.surface->numel(); ++i)
            check((*s.surface)[i] >= 0 && (*s.surface)[i] < s.volume.size(2),
                  ErrorKind::Invariant, "surface index out of depth range");
    }
}

// ---------------------------------------------------------------------------
// Raw tensor payloads: little-endian, row-major, no header (shape lives in
// meta.json). Round trips are bit-exact.
// ---------------------------------------------------------------------------

template <typename T>
void write_raw(const fs::path& path, const Tensor<T>& t) {
    std::ofstream out(path, std::ios::binary);
    check(out.good(), ErrorKind::Io, "cannot open for writing: ", path.string());
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(sizeof(T) * static_cast<size_t>(t.numel())));
    check(out.good(), ErrorKind::Io, "write failed: ", path.string());
}

template <typename T>
Tensor<T> read_raw(const fs::path& path, const std::vector<int64_t>& shape) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    check(in.good(), ErrorKind::Io, "missing file: ", path.string());
    const auto bytes = static_cast<int64_t>(in.tellg());
    const int64_t expect = Tensor<T>::numel_of(shape) * static_cast<int64_t>(sizeof(T));
    check(bytes == expect, ErrorKind::Shape, "file ", path.string(), " holds ", bytes,
          " bytes but meta declares ", expect);
    in.seekg(0);
    Tensor<T> t(shape);
    in.read(reinterpret_cast<char*>(t.data()), expect);
    check(in.good(), ErrorKind::Io, "read failed: ", path.string());
    return t;
}

// ---------------------------------------------------------------------------
// Sample directory layout:
//   meta.json                  descriptor (see below)
//   volume.f32                 (H,W,D) float32
//   image_<name>.f32           (H,W) float32, one per modality
//   mask.u8                    (H,W) uint8 in {0,1}
//   surface.i32                (H,W) int32 depth indices, optional
//   aux_<name>.u8              (H,W) uint8, optional extra annotations
// ---------------------------------------------------------------------------

inline constexpr int kSampleFormatVersion = 1;

namespace detail {

inline nlohmann::json shape_json(const std::vector<int64_t>& shape, const char* dtype) {
    return {{"shape", shape}, {"dtype", dtype}};
}

inline std::vector<int64_t> shape_from(const nlohmann::json& j) {
    check(j.contains("shape"), ErrorKind::Format, "meta entry missing 'shape'");
    return j.at("shape").get<std::vector<int64_t>>();
}

}  // namespace detail

inline void save_sample(const StudySample& sample, const fs::path& dir) {
    validate_sample(sample);
    std::error_code ec;
    fs::create_directories(dir, ec);
    check(!ec && fs::is_directory(dir), ErrorKind::Io, "cannot create directory: ", dir.string());

    nlohmann::json meta;
    meta["format_version"] = kSampleFormatVersion;
    meta["patient_id"] = sample.patient_id;
    meta["eye_id"] = sample.eye_id;
    meta["spacing_mm"] = {sample.spacing.mm_h, sample.spacing.mm_w, sample.spacing.mm_d};
    meta["volume"] = detail::shape_json(sample.volume.shape(), "f32");
    meta["mask"] = detail::shape_json(sample.mask.shape(), "u8");
    meta["images"] = nlohmann::json::object();
    for (const auto& [name, img] : sample.images)
        meta["images"][name] = detail::shape_json(img.shape(), "f32");
    if (sample.surface)
        meta["surface"] = detail::shape_json(sample.surface->shape(), "i32");
    else
        meta["surface"] = nullptr;
    meta["aux_masks"] = nlohmann::json::object();
    for (const auto& [name, m] : sample.aux_masks)
        meta["aux_masks"][name] = detail::shape_json(m.shape(), "u8");

    {
        std::ofstream out(dir / "meta.json");
        check(out.good(), ErrorKind::Io, "cannot open for writing: ", (dir / "meta.json").string());
        out << meta.dump(2) << "\n";
        check(out.good(), ErrorKind::Io, "write failed: ", (dir / "meta.json").string());
    }
    write_raw(dir / "volume.f32", sample.volume);
    write_raw(dir / "mask.u8", sample.mask);
    for (const auto& [name, img] : sample.images) write_raw(dir / ("image_" + name + ".f32"), img);
    if (sample.surface) write_raw(dir / "surface.i32", *sample.surface);
    for (const auto& [name, m] : sample.aux_masks) write_raw(dir / ("aux_" + name + ".u8"), m);
}

inline StudySample load_sample(const fs::path& dir) {
    const fs::path meta_path = dir / "meta.json";
    std::ifstream in(meta_path);
    check(in.good(), ErrorKind::Io, "missing file: ", meta_path.string());
    nlohmann::json meta;
    try {
        in >> meta;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Format, "bad meta.json in ", dir.string(), ": ", e.what());
    }
    check(meta.value("format_version", -1) == kSampleFormatVersion, ErrorKind::Format,
          "unsupported sample format_version in ", meta_path.string());

    StudySample s;
    s.patient_id = meta.at("patient_id").get<std::string>();
    s.eye_id = meta.value("eye_id", "");
    const auto sp = meta.at("spacing_mm").get<std::vector<double>>();
    check(sp.size() == 3, ErrorKind::Format, "spacing_mm must have 3 entries");
    s.spacing = {sp[0], sp[1], sp[2]};

    s.volume = read_raw<float>(dir / "volume.f32", detail::shape_from(meta.at("volume")));
    s.mask = read_raw<uint8_t>(dir / "mask.u8", detail::shape_from(meta.at("mask")));
    for (const auto& [name, j] : meta.at("images").items())
        s.images[name] = read_raw<float>(dir / ("image_" + name + ".f32"), detail::shape_from(j));
    if (!meta.at("surface").is_null())
        s.surface = read_raw<int32_t>(dir / "surface.i32", detail::shape_from(meta.at("surface")));
    if (meta.contains("aux_masks"))
        for (const auto& [name, j] : meta.at("aux_masks").items())
            s.aux_masks[name] = read_raw<uint8_t>(dir / ("aux_" + name + ".u8"), detail::shape_from(j));

    validate_sample(s);
    return s;
}

// ---------------------------------------------------------------------------
// Dataset manifest and patient-wise splitting
// ---------------------------------------------------------------------------

struct ManifestEntry {
    std::string sample_dir;  // relative to manifest root
    std::string patient_id;
};

struct DatasetManifest {
    fs::path root;
    std::vector<ManifestEntry> samples;
    int format_version = kSampleFormatVersion;

    std::vector<std::string> patient_ids() const {
        std::set<std::string> uniq;
        for (const auto& e : samples) uniq.insert(e.patient_id);
        return {uniq.begin(), uniq.end()};
    }

    std::vector<fs::path> dirs_for(const std::set<std::string>& patients) const {
        std::vector<fs::path> out;
        for (const auto& e : samples)
            if (patients.count(e.patient_id)) out.push_back(root / e.sample_dir);
        return out;
    }
};

inline void validate_manifest(const DatasetManifest& m) {
    std::set<std::string> dirs;
    for (const auto& e : m.samples) {
        check(!e.patient_id.empty(), ErrorKind::Invariant,
              "manifest entry with empty patient_id: ", e.sample_dir);
        check(dirs.insert(e.sample_dir).second, ErrorKind::Invariant,
              "duplicate sample_dir in manifest: ", e.sample_dir);
    }
}

inline void save_manifest(const DatasetManifest& m) {
    validate_manifest(m);
    nlohmann::json j;
    j["format_version"] = m.format_version;
    j["samples"] = nlohmann::json::array();
    for (const auto& e : m.samples)
        j["samples"].push_back({{"dir", e.sample_dir}, {"patient_id", e.patient_id}});
    std::ofstream out(m.root / "manifest.json");
    check(out.good(), ErrorKind::Io, "cannot write manifest: ", (m.root / "manifest.json").string());
    out << j.dump(2) << "\n";
}

inline DatasetManifest load_manifest(const fs::path& root) {
    std::ifstream in(root / "manifest.json");
    check(in.good(), ErrorKind::Io, "missing file: ", (root / "manifest.json").string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Format, "bad manifest.json: ", e.what());
    }
    DatasetManifest m;
    m.root = root;
    m.format_version = j.value("format_version", -1);
    check(m.format_version == kSampleFormatVersion, ErrorKind::Format,
          "unsupported manifest format_version");
    for (const auto& e : j.at("samples"))
        m.samples.push_back({e.at("dir").get<std::string>(), e.at("patient_id").get<std::string>()});
    validate_manifest(m);
    return m;
}

struct SplitSpec {
    std::set<std::string> train;
    std::set<std::string> val;
    std::set<std::string> test;
    double train_pct = 1.0;
    uint64_t seed = 0;
};

inline void validate_split(const SplitSpec& s) {
    for (const auto& p : s.train)
        check(!s.val.count(p) && !s.test.count(p), ErrorKind::Invariant,
              "patient in two partitions: ", p);
    for (const auto& p : s.val)
        check(!s.test.count(p), ErrorKind::Invariant, "patient in two partitions: ", p);
}

// Patient-wise split with largest-remainder rounding of the partition sizes.
// Deterministic for a fixed seed.
inline SplitSpec split_patientwise(const DatasetManifest& manifest,
                                   const std::array<double, 3>& fractions,
                                   uint64_t seed) {
    const double fsum = fractions[0] + fractions[1] + fractions[2];
    check(std::abs(fsum - 1.0) < 1e-9, ErrorKind::Config, "split fractions must sum to 1");
    std::vector<std::string> patients = manifest.patient_ids();  // sorted, unique
    const int64_t n = static_cast<int64_t>(patients.size());
    check(n >= 3, ErrorKind::Config, "need at least 3 patients to split, got ", n);

    // Largest-remainder apportionment; ties broken by partition order.
    int64_t sizes[3];
    double rema[3];
    int64_t assigned = 0;
    for (int k = 0; k < 3; ++k) {
        const double exact = fractions[static_cast<size_t>(k)] * static_cast<double>(n);
        sizes[k] = static_cast<int64_t>(std::floor(exact + 1e-12));
        rema[k] = exact - static_cast<double>(sizes[k]);
        assigned += sizes[k];
    }
    while (assigned < n) {
        int best = 0;
        for (int k = 1; k < 3; ++k)
            if (rema[k] > rema[best] + 1e-12) best = k;
        ++sizes[best];
        rema[best] = -1.0;
        ++assigned;
    }

    Rng rng(mix_seed({seed, 0x5917ULL}));
    rng.shuffle(patients);

    SplitSpec out;
    out.seed = seed;
    out.train_pct = 1.0;
    int64_t i = 0;
    for (; i < sizes[0]; ++i) out.train.insert(patients[static_cast<size_t>(i)]);
    for (; i < sizes[0] + sizes[1]; ++i) out.val.insert(patients[static_cast<size_t>(i)]);
    for (; i < n; ++i) out.test.insert(patients[static_cast<size_t>(i)]);
    validate_split(out);
    return out;
}

// Reduces the training partition to ceil(pct * |train|) patients taken as a
// prefix of one seed-determined permutation, so that smaller percentages are
// always subsets of larger ones. Validation and test are untouched.
inline SplitSpec subsample_training(const SplitSpec& split, double pct, uint64_t seed) {
    check(pct > 0.0 && pct <= 1.0, ErrorKind::Config, "train pct must be in (0,1], got ", pct);
    std::vector<std::string> train(split.train.begin(), split.train.end());
    Rng rng(mix_seed({seed, 0x585e7ULL}));
    rng.shuffle(train);
    const auto keep = static_cast<int64_t>(
        std::ceil(pct * static_cast<double>(train.size()) - 1e-12));
    SplitSpec out = split;
    out.train_pct = pct;
    out.train.clear();
    for (int64_t i = 0; i < keep; ++i) out.train.insert(train[static_cast<size_t>(i)]);
    return out;
}

}  // namespace hetfuse
