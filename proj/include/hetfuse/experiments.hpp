#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hetfuse/training.hpp"

namespace hetfuse {

// Desk-scale reproductions of the study designs: fusion-mode ablation,
// data-efficiency sweep, cutout-noise robustness curves and the
// super-resolution setting.

struct ExperimentConfig {
    fs::path dataset_dir;          // expected to hold manifest.json; generated if absent
    SceneSpec scene;               // generator parameters when the dataset is generated
    int64_t n_patients = 30;
    int64_t samples_per_patient = 1;
    nn::ArchitectureConfig arch;
    std::vector<nn::FusionMode> modes{nn::FusionMode::Multiscale, nn::FusionMode::VolumeOnly};
    std::vector<double> pcts{1.0};
    std::vector<int64_t> noise_levels{0, 4, 8, 16, 32};
    std::vector<uint64_t> seeds{1, 2, 3};
    TrainConfig train;
    PrepConfig prep;
    std::array<double, 3> split_fractions{0.6, 0.1, 0.3};
    uint64_t split_seed = 17;
    fs::path out_dir;

    void validate() const {
        check(!modes.empty(), ErrorKind::Config, "experiment needs at least one fusion mode");
        check(!seeds.empty(), ErrorKind::Config, "experiment needs at least one seed");
        check(!pcts.empty(), ErrorKind::Config, "experiment needs at least one training pct");
        arch.validate();
        train.validate();
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["dataset_dir"] = dataset_dir.string();
        j["n_patients"] = n_patients;
        j["samples_per_patient"] = samples_per_patient;
        j["arch"] = arch.to_json();
        j["modes"] = nlohmann::json::array();
        for (auto m : modes) j["modes"].push_back(nn::to_string(m));
        j["pcts"] = pcts;
        j["noise_levels"] = noise_levels;
        j["seeds"] = seeds;
        j["train"] = train.to_json();
        j["split_fractions"] = split_fractions;
        j["split_seed"] = split_seed;
        j["scene"] = {{"dims", {scene.dim_h, scene.dim_w, scene.dim_d}},
                      {"task", to_string(scene.task)},
                      {"n_structures", scene.n_structures},
                      {"structure_scale", scene.structure_scale},
                      {"modality2d_exclusive_frac", scene.modality2d_exclusive_frac},
                      {"confounder_count", scene.confounder_count},
                      {"noise_sigma", scene.noise_sigma},
                      {"surface_tilt", scene.surface_tilt},
                      {"seed_space", scene.seed_space}};
        j["out_dir"] = out_dir.string();
        return j;
    }
};

struct ReportRow {
    nn::FusionMode mode = nn::FusionMode::Multiscale;
    double pct = 1.0;
    uint64_t seed = 0;
    MetricsReport metrics;
    double p_vs_baseline = std::numeric_limits<double>::quiet_NaN();
    double exclusive_recall = std::numeric_limits<double>::quiet_NaN();
    bool failed = false;
    std::string error;
    fs::path run_dir;
    CheckpointSet top_ckpts;
};

struct ReportTable {
    std::vector<ReportRow> rows;

    const ReportRow* find(nn::FusionMode mode, double pct, uint64_t seed) const {
        for (const auto& r : rows)
            if (r.mode == mode && r.pct == pct && r.seed == seed && !r.failed) return &r;
        return nullptr;
    }

    // Seed-mean of a metric over the non-failed rows of one (mode, pct) cell.
    std::optional<double> seed_mean(nn::FusionMode mode, double pct,
                                    double MetricsReport::*field) const {
        double acc = 0;
        int64_t n = 0;
        for (const auto& r : rows)
            if (r.mode == mode && r.pct == pct && !r.failed) {
                acc += r.metrics.*field;
                ++n;
            }
        if (n == 0) return std::nullopt;
        return acc / static_cast<double>(n);
    }
};

struct CurvePoint {
    nn::FusionMode mode;
    int64_t n_masks;
    double aupr;                    // mean over seeds
    std::vector<double> per_seed;
};

struct CurveData {
    std::vector<CurvePoint> points;

    std::optional<double> at(nn::FusionMode mode, int64_t n_masks) const {
        for (const auto& p : points)
            if (p.mode == mode && p.n_masks == n_masks) return p.aupr;
        return std::nullopt;
    }
};

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace exp_detail {

struct EvalSample {
    std::string id;
    PreparedSample prepared;
    MaskGrid exclusive;  // empty when absent
};

// Loads a partition, optionally applying cutout to the raw (pre-zscore)
// volumes; corruption happens in memory and never touches the dataset.
inline std::vector<EvalSample> load_eval_samples(const DatasetManifest& manifest,
                                                 const std::set<std::string>& patients,
                                                 const PrepConfig& prep,
                                                 const CutoutSpec* noise, uint64_t noise_seed) {
    std::vector<EvalSample> out;
    for (const auto& e : manifest.samples) {
        if (!patients.count(e.patient_id)) continue;
        StudySample raw = load_sample(manifest.root / e.sample_dir);
        MaskGrid exclusive;
        if (auto it = raw.aux_masks.find("exclusive2d"); it != raw.aux_masks.end())
            exclusive = it->second;
        StudySample geo = preprocess_geometry(raw, prep);
        if (noise && noise->n_masks > 0)
            geo.volume = apply_cutout(geo.volume, *noise,
                                      mix_seed({noise_seed, std::hash<std::string>{}(e.sample_dir)}));
        PreparedSample p;
        p.id = e.sample_dir;
        p.patient_id = raw.patient_id;
        p.data = normalize_sample(std::move(geo));
        out.push_back({e.sample_dir, std::move(p), std::move(exclusive)});
    }
    return out;
}

}  // namespace exp_detail

// Prediction seam: maps a prepared sample to its (B,1,H,W) probability map.
// Production use wraps the checkpoint ensemble; tests may substitute oracles.
using PredictFn = std::function<Tensor<float>(const PreparedSample&)>;

inline MetricsReport evaluate_with(const PredictFn& predict,
                                   const std::vector<exp_detail::EvalSample>& samples,
                                   double* exclusive_recall_out = nullptr) {
    check(!samples.empty(), ErrorKind::Config, "evaluation split is empty");
    MetricsReport report;
    std::vector<double> scores;
    std::vector<uint8_t> labels;
    int64_t excl_tp = 0, excl_total = 0;
    for (const auto& s : samples) {
        const auto prob = predict(s.prepared);
        const auto prob2d = prob.reshaped({prob.size(2), prob.size(3)});
        const auto& mask = s.prepared.data.mask;
        check(prob2d.shape() == mask.shape(), ErrorKind::Shape,
              "prediction/mask shape mismatch for ", s.id);
        const auto pred = binarize(prob2d);
        report.sample_ids.push_back(s.id);
        report.per_sample_dice.push_back(dice_score(pred, mask));
        report.per_sample_hd95.push_back(
            hd95(pred, mask, s.prepared.data.spacing.mm_h, s.prepared.data.spacing.mm_w));
        for (int64_t i = 0; i < mask.numel(); ++i) {
            scores.push_back(static_cast<double>(prob2d[i]));
            labels.push_back(mask[i]);
        }
        if (s.exclusive.numel() == mask.numel()) {
            for (int64_t i = 0; i < mask.numel(); ++i)
                if (s.exclusive[i] && mask[i]) {
                    ++excl_total;
                    excl_tp += pred[i];
                }
        }
    }
    report.pooled_auroc = auroc(scores, labels);
    report.pooled_aupr = aupr(scores, labels);
    report.finalize();
    if (exclusive_recall_out)
        *exclusive_recall_out = excl_total > 0
                                    ? static_cast<double>(excl_tp) / static_cast<double>(excl_total)
                                    : std::numeric_limits<double>::quiet_NaN();
    return report;
}

inline MetricsReport evaluate_on_samples(const CheckpointSet& checkpoints,
                                         const nn::ArchitectureConfig& arch,
                                         const std::vector<exp_detail::EvalSample>& samples,
                                         double* exclusive_recall_out = nullptr) {
    return evaluate_with(
        [&](const PreparedSample& s) { return predict_ensemble(checkpoints, arch, s); }, samples,
        exclusive_recall_out);
}

// Per-sample checkpoint-ensemble prediction, per-sample Dice/HD95 at
// threshold 0.5 and pooled pixel-level AUROC/AUPR over the whole partition.
inline MetricsReport evaluate_model(const CheckpointSet& checkpoints,
                                    const nn::ArchitectureConfig& arch,
                                    const DatasetManifest& manifest, const SplitSpec& split,
                                    const std::string& split_part, const PrepConfig& prep,
                                    const CutoutSpec* noise = nullptr, uint64_t noise_seed = 0,
                                    double* exclusive_recall_out = nullptr) {
    check(split_part == "val" || split_part == "test", ErrorKind::Config,
          "split_part must be val or test");
    const auto& patients = split_part == "val" ? split.val : split.test;
    const auto samples = exp_detail::load_eval_samples(manifest, patients, prep, noise, noise_seed);
    return evaluate_on_samples(checkpoints, arch, samples, exclusive_recall_out);
}

// ---------------------------------------------------------------------------
// Experiment cells
// ---------------------------------------------------------------------------

namespace exp_detail {

// Every-other-B-scan subsampling of volume and mask (the super-resolution
// training transform); 2D images are untouched.
inline PreparedSample subsample_h(const PreparedSample& s) {
    const auto& v = s.data.volume;
    const int64_t H = v.size(0), W = v.size(1), D = v.size(2);
    check(H >= 2, ErrorKind::Config, "cannot halve the B-scan axis of H=", H);
    PreparedSample out = s;
    VoxelGrid sub({H / 2, W, D});
    for (int64_t h = 0; h < H / 2; ++h)
        std::copy(&v(2 * h, int64_t{0}, int64_t{0}), &v(2 * h, int64_t{0}, int64_t{0}) + W * D,
                  &sub(h, int64_t{0}, int64_t{0}));
    out.data.volume = std::move(sub);
    MaskGrid msub({H / 2, s.data.mask.size(1)});
    for (int64_t h = 0; h < H / 2; ++h)
        for (int64_t w = 0; w < msub.size(1); ++w) msub(h, w) = s.data.mask(2 * h, w);
    out.data.mask = std::move(msub);
    out.data.spacing.mm_h = s.data.spacing.mm_h * 2.0;
    return out;
}

inline std::string run_dir_name(nn::FusionMode mode, double pct, uint64_t seed) {
    return cat("run_", nn::to_string(mode), "_pct", static_cast<int64_t>(std::llround(pct * 100)),
               "_seed", seed);
}

inline DatasetManifest ensure_dataset(const ExperimentConfig& cfg) {
    if (fs::exists(cfg.dataset_dir / "manifest.json")) return load_manifest(cfg.dataset_dir);
    return generate_dataset(cfg.scene, cfg.n_patients, cfg.samples_per_patient, cfg.split_seed,
                            cfg.dataset_dir);
}

struct CellRunner {
    const ExperimentConfig& cfg;
    DatasetManifest manifest;
    SplitSpec base_split;
    bool superres = false;

    explicit CellRunner(const ExperimentConfig& c) : cfg(c) {
        cfg.validate();
        manifest = ensure_dataset(cfg);
        base_split = split_patientwise(manifest, cfg.split_fractions, cfg.split_seed);
    }

    // Trains and evaluates one (mode, pct, seed) cell. Deterministic and
    // independent of every other cell.
    ReportRow run_cell(nn::FusionMode mode, double pct, uint64_t seed) const {
        ReportRow row;
        row.mode = mode;
        row.pct = pct;
        row.seed = seed;
        try {
            const SplitSpec split = subsample_training(base_split, pct, cfg.split_seed);
            nn::ArchitectureConfig arch = cfg.arch;
            arch.fusion_mode = mode;
            TrainConfig tc = cfg.train;
            tc.seed = mix_seed({seed, static_cast<uint64_t>(std::llround(pct * 1000)),
                                std::hash<std::string>{}(nn::to_string(mode))});

            auto train_set = load_split_samples(manifest, split.train, cfg.prep);
            auto val_set = load_split_samples(manifest, split.val, cfg.prep);
            if (superres) {
                for (auto& s : train_set) s = subsample_h(s);
                // validation stays at full resolution (evaluation protocol)
            }
            row.run_dir = cfg.out_dir / run_dir_name(mode, pct, seed);
            const auto artifacts = train_on_samples(tc, arch, train_set, val_set, row.run_dir);
            row.top_ckpts = select_top_checkpoints(artifacts, tc.top_k);

            const auto test_samples = load_eval_samples(manifest, base_split.test, cfg.prep,
                                                        nullptr, 0);
            row.metrics = evaluate_on_samples(row.top_ckpts, arch, test_samples,
                                              &row.exclusive_recall);
            row.metrics.write_kv(row.run_dir / "metrics.txt");
        } catch (const std::exception& e) {
            row.failed = true;
            row.error = e.what();
        }
        return row;
    }
};

inline void attach_p_values(ReportTable& table) {
    for (auto& row : table.rows) {
        if (row.failed || row.mode == nn::FusionMode::VolumeOnly) continue;
        const ReportRow* base = table.find(nn::FusionMode::VolumeOnly, row.pct, row.seed);
        if (!base) continue;
        if (base->metrics.per_sample_dice.size() != row.metrics.per_sample_dice.size()) continue;
        PairedScores pairs;
        pairs.method_a = row.metrics.per_sample_dice;
        pairs.method_b = base->metrics.per_sample_dice;
        row.p_vs_baseline = wilcoxon_signed_rank(pairs);
    }
}

}  // namespace exp_detail

// ---------------------------------------------------------------------------
// CSV output
// ---------------------------------------------------------------------------

inline void write_report_csv(const ReportTable& table, const fs::path& path) {
    std::ofstream out(path);
    check(out.good(), ErrorKind::Io, "cannot write report: ", path.string());
    out << "mode,pct,seed,dice_mean,dice_std,hd95_mean,auroc,aupr,p_vs_baseline\n";
    out.precision(8);
    for (const auto& r : table.rows) {
        out << nn::to_string(r.mode) << "," << r.pct << "," << r.seed << ",";
        if (r.failed) {
            out << ",,,,,failed:" << r.error << "\n";
            continue;
        }
        out << r.metrics.dice_mean << "," << r.metrics.dice_std << "," << r.metrics.hd95_mean
            << "," << r.metrics.pooled_auroc << "," << r.metrics.pooled_aupr << ",";
        if (!std::isnan(r.p_vs_baseline)) out << r.p_vs_baseline;
        out << "\n";
    }
}

inline void write_report_mean_csv(const ReportTable& table, const ExperimentConfig& cfg,
                                  const fs::path& path) {
    std::ofstream out(path);
    check(out.good(), ErrorKind::Io, "cannot write report: ", path.string());
    out << "mode,pct,n_seeds,dice_mean,hd95_mean,auroc,aupr\n";
    out.precision(8);
    for (const auto mode : cfg.modes)
        for (const double pct : cfg.pcts) {
            int64_t n = 0;
            double dice = 0, hd = 0, roc = 0, pr = 0;
            for (const auto& r : table.rows)
                if (r.mode == mode && r.pct == pct && !r.failed) {
                    ++n;
                    dice += r.metrics.dice_mean;
                    hd += r.metrics.hd95_mean;
                    roc += r.metrics.pooled_auroc;
                    pr += r.metrics.pooled_aupr;
                }
            if (n == 0) continue;
            const double nd = static_cast<double>(n);
            out << nn::to_string(mode) << "," << pct << "," << n << "," << dice / nd << ","
                << hd / nd << "," << roc / nd << "," << pr / nd << "\n";
        }
}

inline void write_curves_csv(const CurveData& curves, const fs::path& path) {
    std::ofstream out(path);
    check(out.good(), ErrorKind::Io, "cannot write curves: ", path.string());
    out << "mode,n_masks,aupr\n";
    out.precision(8);
    for (const auto& p : curves.points)
        out << nn::to_string(p.mode) << "," << p.n_masks << "," << p.aupr << "\n";
}

// ---------------------------------------------------------------------------
// Experiment entry points
// ---------------------------------------------------------------------------

namespace exp_detail {

inline ReportTable run_grid(const ExperimentConfig& cfg, bool superres) {
    CellRunner runner(cfg);
    runner.superres = superres;
    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    {
        std::ofstream echo(cfg.out_dir / "experiment_config.json");
        check(echo.good(), ErrorKind::Io, "cannot write config echo in ", cfg.out_dir.string());
        echo << cfg.to_json().dump(2) << "\n";
    }
    ReportTable table;
    for (const double pct : cfg.pcts)
        for (const uint64_t seed : cfg.seeds)
            for (const auto mode : cfg.modes) table.rows.push_back(runner.run_cell(mode, pct, seed));
    attach_p_values(table);
    write_report_csv(table, cfg.out_dir / "report.csv");
    write_report_mean_csv(table, cfg, cfg.out_dir / "report_mean.csv");
    return table;
}

}  // namespace exp_detail

// Fusion ablation: identical split, subsample and seed per cell across modes,
// Wilcoxon per-sample-Dice p-values against the volume_only baseline.
inline ReportTable run_ablation(const ExperimentConfig& cfg) {
    return exp_detail::run_grid(cfg, false);
}

// Data-efficiency sweep over nested training subsets. With pcts {1.0} this
// reduces to run_ablation. Also writes the per-mode Dice-vs-pct trend,
// reported (not asserted).
inline ReportTable run_data_efficiency(const ExperimentConfig& cfg) {
    ReportTable table = exp_detail::run_grid(cfg, false);
    std::ofstream trend(cfg.out_dir / "trends.txt");
    for (const auto mode : cfg.modes) {
        trend << nn::to_string(mode) << ":";
        for (const double pct : cfg.pcts) {
            const auto m = table.seed_mean(mode, pct, &MetricsReport::dice_mean);
            trend << " pct=" << pct << " dice=" << (m ? *m : -1.0);
        }
        trend << "\n";
    }
    return table;
}

// Super-resolution setting: training volumes and masks are subsampled to
// every other B-scan, evaluation runs on full-resolution volumes and masks.
inline ReportTable run_superres(const ExperimentConfig& cfg) {
    check(cfg.scene.task == SceneTask::Vessel || fs::exists(cfg.dataset_dir / "manifest.json"),
          ErrorKind::Config, "super-resolution experiments use the vessel task");
    ReportTable table = exp_detail::run_grid(cfg, true);
    std::ofstream out(cfg.out_dir / "superres_recall.csv");
    out << "mode,pct,seed,exclusive_recall\n";
    out.precision(8);
    for (const auto& r : table.rows)
        if (!r.failed)
            out << nn::to_string(r.mode) << "," << r.pct << "," << r.seed << ","
                << r.exclusive_recall << "\n";
    return table;
}

// Cutout-noise robustness: corruption applied to test volumes only (the 2D
// modality stays clean), pooled AUPR per (mode, level) averaged over seeds.
inline CurveData run_noise_sweep(const ExperimentConfig& cfg, const ReportTable& trained) {
    exp_detail::CellRunner runner(cfg);
    CurveData curves;
    const double pct = cfg.pcts.back();
    for (const auto mode : cfg.modes) {
        for (const int64_t level : cfg.noise_levels) {
            CurvePoint point{mode, level, 0.0, {}};
            for (const uint64_t seed : cfg.seeds) {
                const ReportRow* row = trained.find(mode, pct, seed);
                check(row != nullptr, ErrorKind::Config, "missing checkpoints for cell (mode=",
                      nn::to_string(mode), ", pct=", pct, ", seed=", seed, ")");
                nn::ArchitectureConfig arch = cfg.arch;
                arch.fusion_mode = mode;
                CutoutSpec noise;
                noise.n_masks = level;
                const auto samples = exp_detail::load_eval_samples(
                    runner.manifest, runner.base_split.test, cfg.prep,
                    level > 0 ? &noise : nullptr, mix_seed({cfg.split_seed, seed, 0xcafeULL}));
                const auto report = evaluate_on_samples(row->top_ckpts, arch, samples);
                point.per_seed.push_back(report.pooled_aupr);
            }
            for (double v : point.per_seed) point.aupr += v;
            point.aupr /= static_cast<double>(point.per_seed.size());
            curves.points.push_back(std::move(point));
        }
    }
    write_curves_csv(curves, cfg.out_dir / "curves.csv");
    return curves;
}

}  // namespace hetfuse
