#pragma once

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "hetfuse/configfile.hpp"
#include "hetfuse/experiments.hpp"
#include "hetfuse/plotting.hpp"

namespace hetfuse::cli {

struct CliInvocation {
    std::string subcommand;
    std::optional<fs::path> config_path;
    std::vector<std::string> overrides;  // key=value
    fs::path out_dir = ".";
    std::optional<uint64_t> seed;        // reaches every stochastic component
    bool help = false;
};

inline const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> kSubs{"generate", "preprocess", "train",
                                                "eval",     "sweep",      "plot"};
    return kSubs;
}

// ---------------------------------------------------------------------------
// Key schemas
// ---------------------------------------------------------------------------

namespace cli_detail {

inline void declare_scene(ConfigMap& m) {
    m.declare("scene.h", "32", "scene en-face height (voxels)");
    m.declare("scene.w", "128", "scene en-face width (voxels)");
    m.declare("scene.d", "64", "scene depth (voxels)");
    m.declare("scene.task", "vessel", "structure type: lesion|vessel");
    m.declare("scene.n_structures", "3", "structures per scene");
    m.declare("scene.structure_scale", "2.0", "structure radius scale (voxels)");
    m.declare("scene.exclusive_frac", "0.0", "fraction of each structure visible only in 2D");
    m.declare("scene.confounders", "0", "3D-only structure mimics per scene");
    m.declare("scene.noise_sigma", "0.05", "additive Gaussian noise sigma");
    m.declare("scene.surface_tilt", "0.15", "max surface slope (depth voxels per voxel)");
    m.declare("scene.seed_space", "0", "seed namespace of the generator");
}

inline void declare_prep(ConfigMap& m) {
    m.declare("prep.crop_depth", "128", "depth window size (clamped to volume depth)");
    m.declare("prep.above_frac", "0.75", "fraction of the window above the surface anchor");
    m.declare("prep.flatten", "true", "flatten along the surface when present");
}

inline void declare_arch(ConfigMap& m) {
    m.declare("arch.levels", "5", "encoder/decoder levels");
    m.declare("arch.base_channels", "16", "channels at level 0 (doubled per level, cap 256)");
    m.declare("arch.channels", "", "explicit per-level widths (comma list, overrides base)");
    m.declare("arch.enc_convs", "8", "convolutions per encoder block (even)");
    m.declare("arch.dec_convs", "4", "convolutions per decoder block (even)");
    m.declare("arch.fpb_convs", "2", "convolutions per feature projection block");
    m.declare("arch.fpb_kernel", "3", "FPB kernel size (1 or 3)");
    m.declare("arch.fpb_depth_stride", "2", "depth stride of the first FPB conv (1 or 2)");
    m.declare("arch.mode", "multiscale", "volume_only|image_only|late|multiscale");
    m.declare("arch.image_modality", "slo", "which 2D image feeds the image branch");
}

inline void declare_train(ConfigMap& m) {
    m.declare("train.epochs", "800", "training epochs");
    m.declare("train.lr", "0.1", "SGD learning rate (constant)");
    m.declare("train.momentum", "0.9", "SGD momentum");
    m.declare("train.batch_size", "8", "mini-batch size");
    m.declare("train.seed", "1", "run seed (init, shuffling, augmentation)");
    m.declare("train.checkpoint_every", "10", "checkpoint cadence in epochs");
    m.declare("train.top_k", "5", "checkpoints averaged at inference");
    m.declare("train.augment", "true", "enable training-time augmentation");
    m.declare("augment.flip_prob", "0.5", "flip probability per en-face axis");
    m.declare("augment.mult_lo", "0.9", "multiplicative noise lower bound");
    m.declare("augment.mult_hi", "1.1", "multiplicative noise upper bound");
    m.declare("augment.add_sigma", "0.05", "additive Gaussian noise sigma (z-score units)");
    m.declare("augment.contrast_lo", "0.9", "contrast gain lower bound");
    m.declare("augment.contrast_hi", "1.1", "contrast gain upper bound");
    m.declare("augment.shift_lo", "-0.1", "intensity shift lower bound");
    m.declare("augment.shift_hi", "0.1", "intensity shift upper bound");
}

inline void declare_split(ConfigMap& m) {
    m.declare("split.train", "0.6", "training fraction (patient-wise)");
    m.declare("split.val", "0.1", "validation fraction");
    m.declare("split.test", "0.3", "test fraction");
    m.declare("split.seed", "17", "split/subsample seed");
    m.declare("split.train_pct", "1.0", "nested training-subset fraction");
}

inline SceneSpec scene_from(const ConfigMap& m) {
    SceneSpec s;
    s.dim_h = m.get_int("scene.h");
    s.dim_w = m.get_int("scene.w");
    s.dim_d = m.get_int("scene.d");
    s.task = scene_task_from(m.get_str("scene.task"));
    s.n_structures = m.get_int("scene.n_structures");
    s.structure_scale = m.get_double("scene.structure_scale");
    s.modality2d_exclusive_frac = m.get_double("scene.exclusive_frac");
    s.confounder_count = m.get_int("scene.confounders");
    s.noise_sigma = m.get_double("scene.noise_sigma");
    s.surface_tilt = m.get_double("scene.surface_tilt");
    s.seed_space = static_cast<uint64_t>(m.get_int("scene.seed_space"));
    return s;
}

inline PrepConfig prep_from(const ConfigMap& m) {
    PrepConfig p;
    p.crop_depth = m.get_int("prep.crop_depth");
    p.above_frac = m.get_double("prep.above_frac");
    p.flatten = m.get_bool("prep.flatten");
    return p;
}

inline nn::ArchitectureConfig arch_from(const ConfigMap& m) {
    nn::ArchitectureConfig a;
    a.levels = m.get_int("arch.levels");
    a.base_channels = m.get_int("arch.base_channels");
    if (!m.get_str("arch.channels").empty()) a.channel_schedule = m.get_int_list("arch.channels");
    a.enc_convs_per_block = m.get_int("arch.enc_convs");
    a.dec_convs_per_block = m.get_int("arch.dec_convs");
    a.fpb_convs = m.get_int("arch.fpb_convs");
    a.fpb_kernel = m.get_int("arch.fpb_kernel");
    a.fpb_depth_stride = m.get_int("arch.fpb_depth_stride");
    a.fusion_mode = nn::fusion_mode_from(m.get_str("arch.mode"));
    a.image_modality = m.get_str("arch.image_modality");
    a.validate();
    return a;
}

inline TrainConfig train_from(const ConfigMap& m) {
    TrainConfig t;
    t.epochs = m.get_int("train.epochs");
    t.lr = m.get_double("train.lr");
    t.momentum = m.get_double("train.momentum");
    t.batch_size = m.get_int("train.batch_size");
    t.seed = static_cast<uint64_t>(m.get_int("train.seed"));
    t.checkpoint_every = m.get_int("train.checkpoint_every");
    t.top_k = m.get_int("train.top_k");
    t.augment_enabled = m.get_bool("train.augment");
    t.augment.flip_prob = m.get_double("augment.flip_prob");
    t.augment.mult_noise_lo = m.get_double("augment.mult_lo");
    t.augment.mult_noise_hi = m.get_double("augment.mult_hi");
    t.augment.add_noise_sigma = m.get_double("augment.add_sigma");
    t.augment.contrast_lo = m.get_double("augment.contrast_lo");
    t.augment.contrast_hi = m.get_double("augment.contrast_hi");
    t.augment.shift_lo = m.get_double("augment.shift_lo");
    t.augment.shift_hi = m.get_double("augment.shift_hi");
    t.validate();
    return t;
}

inline std::array<double, 3> fractions_from(const ConfigMap& m) {
    return {m.get_double("split.train"), m.get_double("split.val"), m.get_double("split.test")};
}

// Dataset root resolution: explicit data.dir wins; otherwise a generated
// dataset cached under $HETFUSE_CACHE (or <out>/dataset).
inline fs::path resolve_dataset_dir(const ConfigMap& m, const fs::path& out_dir) {
    const std::string dir = m.get_str("data.dir");
    if (!dir.empty()) return dir;
    const char* cache = std::getenv("HETFUSE_CACHE");
    const SceneSpec scene = scene_from(m);
    const uint64_t tag =
        mix_seed({static_cast<uint64_t>(scene.dim_h), static_cast<uint64_t>(scene.dim_w),
                  static_cast<uint64_t>(scene.dim_d), static_cast<uint64_t>(scene.n_structures),
                  static_cast<uint64_t>(scene.confounder_count), scene.seed_space,
                  static_cast<uint64_t>(scene.task == SceneTask::Vessel),
                  static_cast<uint64_t>(scene.modality2d_exclusive_frac * 1e6),
                  static_cast<uint64_t>(scene.structure_scale * 1e6),
                  static_cast<uint64_t>(scene.noise_sigma * 1e6),
                  static_cast<uint64_t>(m.get_int("data.n_patients")),
                  static_cast<uint64_t>(m.get_int("data.samples_per_patient")),
                  static_cast<uint64_t>(m.get_int("data.seed"))});
    const fs::path root = cache ? fs::path(cache) : out_dir / "dataset";
    return cache ? root / cat("synth_", std::hex, tag) : root;
}

inline DatasetManifest ensure_dataset_cli(const ConfigMap& m, const fs::path& out_dir) {
    const fs::path dir = resolve_dataset_dir(m, out_dir);
    if (fs::exists(dir / "manifest.json")) return load_manifest(dir);
    check(m.get_str("data.dir").empty(), ErrorKind::Io,
          "dataset dir has no manifest.json: ", dir.string());
    return generate_dataset(scene_from(m), m.get_int("data.n_patients"),
                            m.get_int("data.samples_per_patient"),
                            static_cast<uint64_t>(m.get_int("data.seed")), dir);
}

}  // namespace cli_detail

inline ConfigMap schema_for(const std::string& subcommand) {
    using namespace cli_detail;
    ConfigMap m;
    if (subcommand == "generate") {
        declare_scene(m);
        m.declare("data.n_patients", "30", "patients to generate");
        m.declare("data.samples_per_patient", "1", "samples per patient");
        m.declare("data.seed", "7", "dataset seed");
    } else if (subcommand == "preprocess") {
        declare_prep(m);
        m.declare("data.dir", "", "input dataset dir (manifest.json)");
    } else if (subcommand == "train") {
        declare_scene(m);
        declare_prep(m);
        declare_arch(m);
        declare_train(m);
        declare_split(m);
        m.declare("data.dir", "", "dataset dir; empty generates a cached synthetic dataset");
        m.declare("data.n_patients", "30", "patients when generating");
        m.declare("data.samples_per_patient", "1", "samples per patient when generating");
        m.declare("data.seed", "7", "dataset seed when generating");
    } else if (subcommand == "eval") {
        declare_prep(m);
        m.declare("run.dir", "", "training run dir holding checkpoints");
        m.declare("data.dir", "", "dataset dir (manifest.json)");
        m.declare("split.seed", "17", "split seed used at training time");
        m.declare("split.train", "0.6", "training fraction");
        m.declare("split.val", "0.1", "validation fraction");
        m.declare("split.test", "0.3", "test fraction");
        m.declare("eval.part", "test", "partition to evaluate: val|test");
        m.declare("eval.noise_masks", "0", "cutout boxes applied to test volumes");
        m.declare("eval.top_k", "5", "checkpoints averaged");
        m.declare("eval.pct_label", "1.0", "training pct recorded in report.csv");
        m.declare("eval.seed_label", "0", "seed recorded in report.csv");
    } else if (subcommand == "sweep") {
        declare_scene(m);
        declare_prep(m);
        declare_arch(m);
        declare_train(m);
        declare_split(m);
        m.declare("data.dir", "", "dataset dir; empty generates a cached synthetic dataset");
        m.declare("data.n_patients", "30", "patients when generating");
        m.declare("data.samples_per_patient", "1", "samples per patient when generating");
        m.declare("data.seed", "7", "dataset seed when generating");
        m.declare("sweep.kind", "ablation", "ablation|data_efficiency|noise|superres");
        m.declare("sweep.modes", "multiscale,volume_only", "fusion modes to compare");
        m.declare("sweep.pcts", "1.0", "training-data fractions");
        m.declare("sweep.seeds", "1,2,3", "run seeds");
        m.declare("sweep.noise_levels", "0,4,8,16,32", "cutout mask counts");
    } else if (subcommand == "plot") {
        m.declare("plot.curves_csv", "", "curves.csv to plot (AUPR vs noise level)");
        m.declare("plot.report_csv", "", "report_mean.csv to plot (Dice vs training pct)");
        m.declare("plot.log_csv", "", "training log.csv to plot (loss / val dice vs epoch)");
    } else {
        fail(ErrorKind::Usage, "unknown subcommand '", subcommand, "'");
    }
    return m;
}

// ---------------------------------------------------------------------------
// Subcommand implementations
// ---------------------------------------------------------------------------

namespace cli_detail {

inline void cmd_generate(const ConfigMap& m, const fs::path& out) {
    (void)generate_dataset(scene_from(m), m.get_int("data.n_patients"),
                           m.get_int("data.samples_per_patient"),
                           static_cast<uint64_t>(m.get_int("data.seed")), out);
    std::cout << "generated " << m.get_int("data.n_patients") << " patients under " << out
              << "\n";
}

inline void cmd_preprocess(const ConfigMap& m, const fs::path& out) {
    const std::string in_dir = m.get_str("data.dir");
    check(!in_dir.empty(), ErrorKind::Usage, "preprocess requires data.dir");
    const auto manifest = load_manifest(in_dir);
    const auto prep = prep_from(m);
    DatasetManifest out_manifest;
    out_manifest.root = out;
    std::error_code ec;
    fs::create_directories(out, ec);
    for (const auto& e : manifest.samples) {
        StudySample s = load_sample(manifest.root / e.sample_dir);
        s = normalize_sample(preprocess_geometry(s, prep));
        save_sample(s, out / e.sample_dir);
        out_manifest.samples.push_back(e);
    }
    save_manifest(out_manifest);
    std::cout << "preprocessed " << manifest.samples.size() << " samples into " << out << "\n";
}

inline void cmd_train(const ConfigMap& m, const fs::path& out) {
    const auto manifest = ensure_dataset_cli(m, out);
    const auto split_full = split_patientwise(manifest, fractions_from(m),
                                              static_cast<uint64_t>(m.get_int("split.seed")));
    const auto split = subsample_training(split_full, m.get_double("split.train_pct"),
                                          static_cast<uint64_t>(m.get_int("split.seed")));
    const auto artifacts = train(train_from(m), arch_from(m), manifest, split, prep_from(m), out);
    std::cout << "trained " << artifacts.log.size() << " epochs; checkpoints: "
              << artifacts.checkpoints.size() << "; last val dice "
              << (artifacts.log.empty() ? 0.0 : artifacts.log.back().val_dice) << "\n";
}

inline CheckpointSet checkpoints_in(const fs::path& run_dir) {
    CheckpointSet all;
    check(fs::is_directory(run_dir), ErrorKind::Io, "run dir not found: ", run_dir.string());
    for (const auto& entry : fs::directory_iterator(run_dir)) {
        const auto name = entry.path().filename().string();
        if (name.rfind("ckpt_", 0) != 0 || entry.path().extension() != ".hfck") continue;
        nlohmann::json extra;
        (void)nn::Model<float>::load_checkpoint(entry.path(), &extra);
        all.push_back({entry.path(), extra.value("epoch", int64_t{0}),
                       extra.value("val_dice", 0.0)});
    }
    check(!all.empty(), ErrorKind::Io, "no checkpoints in ", run_dir.string());
    return all;
}

inline void cmd_eval(const ConfigMap& m, const fs::path& out) {
    const std::string run_dir = m.get_str("run.dir");
    const std::string data_dir = m.get_str("data.dir");
    check(!run_dir.empty(), ErrorKind::Usage, "eval requires run.dir");
    check(!data_dir.empty(), ErrorKind::Usage, "eval requires data.dir");

    CheckpointSet all = checkpoints_in(run_dir);
    RunArtifacts fake;
    fake.checkpoints = all;
    const auto top = select_top_checkpoints(fake, m.get_int("eval.top_k"));
    const auto arch = nn::Model<float>::load_checkpoint(top[0].path).config();

    const auto manifest = load_manifest(data_dir);
    const auto split = split_patientwise(manifest, fractions_from(m),
                                         static_cast<uint64_t>(m.get_int("split.seed")));
    CutoutSpec noise;
    noise.n_masks = m.get_int("eval.noise_masks");
    const auto report = evaluate_model(top, arch, manifest, split, m.get_str("eval.part"),
                                       prep_from(m), noise.n_masks > 0 ? &noise : nullptr,
                                       static_cast<uint64_t>(m.get_int("split.seed")));
    std::error_code ec;
    fs::create_directories(out, ec);
    report.write_kv(out / "metrics.txt");

    ReportTable table;
    ReportRow row;
    row.mode = arch.fusion_mode;
    row.pct = m.get_double("eval.pct_label");
    row.seed = static_cast<uint64_t>(m.get_int("eval.seed_label"));
    row.metrics = report;
    table.rows.push_back(row);
    write_report_csv(table, out / "report.csv");
    std::cout << "dice " << report.dice_mean << " +- " << report.dice_std << ", hd95 "
              << report.hd95_mean << ", auroc " << report.pooled_auroc << ", aupr "
              << report.pooled_aupr << " over " << report.n_samples << " samples\n";
}

inline ExperimentConfig experiment_from(const ConfigMap& m, const fs::path& out) {
    ExperimentConfig cfg;
    cfg.dataset_dir = resolve_dataset_dir(m, out);
    cfg.scene = scene_from(m);
    cfg.n_patients = m.get_int("data.n_patients");
    cfg.samples_per_patient = m.get_int("data.samples_per_patient");
    cfg.arch = arch_from(m);
    cfg.modes.clear();
    for (const auto& s : m.get_list("sweep.modes")) cfg.modes.push_back(nn::fusion_mode_from(s));
    cfg.pcts = m.get_double_list("sweep.pcts");
    cfg.noise_levels = m.get_int_list("sweep.noise_levels");
    cfg.seeds.clear();
    for (int64_t s : m.get_int_list("sweep.seeds")) cfg.seeds.push_back(static_cast<uint64_t>(s));
    cfg.train = train_from(m);
    cfg.prep = prep_from(m);
    cfg.split_fractions = fractions_from(m);
    cfg.split_seed = static_cast<uint64_t>(m.get_int("split.seed"));
    cfg.out_dir = out;
    return cfg;
}

inline void cmd_sweep(const ConfigMap& m, const fs::path& out) {
    const ExperimentConfig cfg = experiment_from(m, out);
    const std::string kind = m.get_str("sweep.kind");
    if (kind == "ablation") {
        (void)run_ablation(cfg);
    } else if (kind == "data_efficiency") {
        (void)run_data_efficiency(cfg);
    } else if (kind == "noise") {
        const auto table = run_ablation(cfg);
        (void)run_noise_sweep(cfg, table);
    } else if (kind == "superres") {
        (void)run_superres(cfg);
    } else {
        fail(ErrorKind::Usage, "unknown sweep.kind '", kind, "'");
    }
    std::cout << "sweep '" << kind << "' written to " << out << "\n";
}

inline std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
    std::ifstream in(path);
    check(in.good(), ErrorKind::Io, "cannot read csv: ", path.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

inline void cmd_plot(const ConfigMap& m, const fs::path& out) {
    std::error_code ec;
    fs::create_directories(out, ec);
    bool did = false;
    if (!m.get_str("plot.curves_csv").empty()) {
        const auto rows = read_csv(m.get_str("plot.curves_csv"));
        std::map<std::string, PlotSeries> by_mode;
        for (size_t i = 1; i < rows.size(); ++i) {
            const auto& r = rows[i];
            if (r.size() < 3) continue;
            by_mode[r[0]].label = r[0];
            by_mode[r[0]].points.emplace_back(std::stod(r[1]), std::stod(r[2]));
        }
        std::vector<PlotSeries> series;
        for (auto& [k, v] : by_mode) series.push_back(v);
        write_svg_lineplot(out / "noise_curves.svg", "AUPR under cutout noise", "cutout masks",
                           "pooled AUPR", series);
        did = true;
    }
    if (!m.get_str("plot.report_csv").empty()) {
        const auto rows = read_csv(m.get_str("plot.report_csv"));
        check(!rows.empty(), ErrorKind::Format, "empty report csv");
        // accepts report.csv (seeded rows) or report_mean.csv
        const bool is_mean = rows[0].size() >= 2 && rows[0][2] == "n_seeds";
        std::map<std::string, std::map<double, std::pair<double, int>>> agg;
        for (size_t i = 1; i < rows.size(); ++i) {
            const auto& r = rows[i];
            if (r.size() < 4 || r[3].empty()) continue;
            const double pct = std::stod(r[1]);
            const double dice = std::stod(r[3]);
            auto& cell = agg[r[0]][pct];
            cell.first += dice;
            cell.second += 1;
        }
        (void)is_mean;
        std::vector<PlotSeries> series;
        for (auto& [mode, pts] : agg) {
            PlotSeries s;
            s.label = mode;
            for (auto& [pct, acc] : pts) s.points.emplace_back(pct, acc.first / acc.second);
            series.push_back(s);
        }
        write_svg_lineplot(out / "data_efficiency.svg", "Dice vs training data fraction",
                           "training pct", "mean Dice", series);
        did = true;
    }
    if (!m.get_str("plot.log_csv").empty()) {
        const auto rows = read_csv(m.get_str("plot.log_csv"));
        PlotSeries loss{"train_loss", {}}, dice{"val_dice", {}};
        for (size_t i = 1; i < rows.size(); ++i) {
            if (rows[i].size() < 3) continue;
            loss.points.emplace_back(std::stod(rows[i][0]), std::stod(rows[i][1]));
            dice.points.emplace_back(std::stod(rows[i][0]), std::stod(rows[i][2]));
        }
        write_svg_lineplot(out / "training_log.svg", "Training curve", "epoch", "value",
                           {loss, dice});
        did = true;
    }
    check(did, ErrorKind::Usage,
          "plot needs at least one of plot.curves_csv, plot.report_csv, plot.log_csv");
    std::cout << "plots written to " << out << "\n";
}

}  // namespace cli_detail

// ---------------------------------------------------------------------------
// Argument parsing and dispatch
// ---------------------------------------------------------------------------

inline void print_usage(std::ostream& os) {
    os << "usage: hetfuse <subcommand> [--config FILE] [--set key=value ...] [--out DIR]"
          " [--seed N]\n"
          "subcommands: generate | preprocess | train | eval | sweep | plot\n"
          "  hetfuse <subcommand> --help lists every accepted config key\n"
          "environment: HETFUSE_CACHE caches generated datasets\n";
}

inline CliInvocation parse_args(const std::vector<std::string>& args) {
    CliInvocation inv;
    if (args.empty()) {
        inv.help = true;
        return inv;
    }
    size_t i = 0;
    if (args[0] == "--help" || args[0] == "-h") {
        inv.help = true;
        return inv;
    }
    inv.subcommand = args[i++];
    for (; i < args.size(); ++i) {
        const std::string& a = args[i];
        auto next = [&]() -> const std::string& {
            check(i + 1 < args.size(), ErrorKind::Usage, "missing value after ", a);
            return args[++i];
        };
        if (a == "--config") {
            inv.config_path = next();
        } else if (a == "--set") {
            inv.overrides.push_back(next());
        } else if (a == "--out") {
            inv.out_dir = next();
        } else if (a == "--seed") {
            inv.seed = static_cast<uint64_t>(std::stoll(next()));
        } else if (a == "--help" || a == "-h") {
            inv.help = true;
        } else {
            fail(ErrorKind::Usage, "unknown argument '", a, "'");
        }
    }
    return inv;
}

// Runs one invocation. Exit codes: 0 success, 2 usage/config errors,
// 1 runtime failures. Errors print one line: `error: <category>: <message>`.
inline int dispatch(const CliInvocation& inv) {
    try {
        if (inv.help && inv.subcommand.empty()) {
            print_usage(std::cout);
            return 0;
        }
        ConfigMap m = schema_for(inv.subcommand);
        if (inv.help) {
            std::cout << "hetfuse " << inv.subcommand << " accepted config keys:\n" << m.help();
            return 0;
        }
        if (inv.config_path) m.load_file(*inv.config_path);
        for (const auto& kv : inv.overrides) m.apply_override(kv);
        if (inv.seed) {
            // one seed override reaches every stochastic component the
            // subcommand owns
            for (const char* key : {"data.seed", "train.seed", "split.seed", "scene.seed_space"})
                if (m.known(key)) m.set(key, std::to_string(*inv.seed));
        }
        std::error_code ec;
        fs::create_directories(inv.out_dir, ec);
        check(fs::is_directory(inv.out_dir), ErrorKind::Io,
              "cannot create output dir: ", inv.out_dir.string());
        m.write_resolved(inv.out_dir / "config_resolved.txt");

        using namespace cli_detail;
        if (inv.subcommand == "generate") cmd_generate(m, inv.out_dir);
        else if (inv.subcommand == "preprocess") cmd_preprocess(m, inv.out_dir);
        else if (inv.subcommand == "train") cmd_train(m, inv.out_dir);
        else if (inv.subcommand == "eval") cmd_eval(m, inv.out_dir);
        else if (inv.subcommand == "sweep") cmd_sweep(m, inv.out_dir);
        else if (inv.subcommand == "plot") cmd_plot(m, inv.out_dir);
        return 0;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return (e.kind() == ErrorKind::Usage || e.kind() == ErrorKind::Config) ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: runtime: " << e.what() << "\n";
        return 1;
    }
}

inline int run_cli(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    try {
        return dispatch(parse_args(args));
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        print_usage(std::cerr);
        return 2;
    }
}

}  // namespace hetfuse::cli
