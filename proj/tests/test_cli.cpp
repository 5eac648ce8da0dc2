#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "hetfuse/datamodel.hpp"

// End-to-end drive of the installed binary (path via HETFUSE_BIN).

namespace fs = std::filesystem;

namespace {

std::string bin() {
    const char* b = std::getenv("HETFUSE_BIN");
    REQUIRE(b != nullptr);
    return b;
}

int run(const std::string& cmd) { return std::system(cmd.c_str()); }

int exit_code(int system_status) {
    return WIFEXITED(system_status) ? WEXITSTATUS(system_status) : -1;
}

fs::path temp_dir(const std::string& tag) {
    auto p = fs::temp_directory_path() / ("hetfuse_cli_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

const std::string kTinyArch =
    " --set arch.levels=2 --set arch.base_channels=2 --set arch.enc_convs=2"
    " --set arch.dec_convs=2 --set arch.fpb_convs=1 --set prep.crop_depth=16";

}  // namespace

TEST_CASE("cli: generate -> train -> eval pipeline") {
    const auto root = temp_dir("pipeline");
    const auto ds = (root / "ds").string();
    const auto rund = (root / "run").string();
    const auto evald = (root / "eval").string();

    CHECK(exit_code(run(bin() + " generate --out " + ds +
                        " --set scene.h=8 --set scene.w=32 --set scene.d=16"
                        " --set scene.structure_scale=1.2 --set data.n_patients=6"
                        " > /dev/null")) == 0);
    const auto manifest = hetfuse::load_manifest(ds);
    CHECK(manifest.samples.size() == 6);

    CHECK(exit_code(run(bin() + " train --out " + rund + " --set data.dir=" + ds + kTinyArch +
                        " --set train.epochs=2 --set train.batch_size=2"
                        " --set train.checkpoint_every=1 > /dev/null")) == 0);
    CHECK(fs::exists(fs::path(rund) / "log.csv"));
    CHECK(fs::exists(fs::path(rund) / "config_resolved.txt"));

    CHECK(exit_code(run(bin() + " eval --out " + evald + " --set run.dir=" + rund +
                        " --set data.dir=" + ds + " --set prep.crop_depth=16 > /dev/null")) == 0);
    CHECK(fs::exists(fs::path(evald) / "report.csv"));
    CHECK(fs::exists(fs::path(evald) / "metrics.txt"));
}

TEST_CASE("cli: preprocess materializes a normalized dataset") {
    const auto root = temp_dir("prep");
    const auto ds = (root / "ds").string();
    const auto pp = (root / "prep").string();
    REQUIRE(exit_code(run(bin() + " generate --out " + ds +
                          " --set scene.h=8 --set scene.w=16 --set scene.d=32"
                          " --set scene.structure_scale=1.2 --set data.n_patients=2"
                          " > /dev/null")) == 0);
    CHECK(exit_code(run(bin() + " preprocess --out " + pp + " --set data.dir=" + ds +
                        " --set prep.crop_depth=16 > /dev/null")) == 0);
    const auto manifest = hetfuse::load_manifest(pp);
    CHECK(manifest.samples.size() == 2);
    const auto s = hetfuse::load_sample(fs::path(pp) / manifest.samples[0].sample_dir);
    CHECK(s.volume.shape() == std::vector<int64_t>({8, 16, 16}));  // depth cropped
    CHECK_FALSE(s.surface.has_value());                            // consumed by flattening
    CHECK(std::abs(hetfuse::mean_of(s.volume)) < 1e-4);            // z-scored
}

TEST_CASE("cli: unknown key exits 2 and names the key") {
    const auto root = temp_dir("badkey");
    const auto err_file = (root / "err.txt").string();
    const int status = run(bin() + " train --out " + (root / "o").string() +
                           " --set foo.bar=1 2> " + err_file);
    CHECK(exit_code(status) == 2);
    std::ifstream in(err_file);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(text.find("error: usage:") != std::string::npos);
    CHECK(text.find("foo.bar") != std::string::npos);
}

TEST_CASE("cli: --help enumerates keys; bad subcommand exits 2") {
    const auto root = temp_dir("help");
    const auto out_file = (root / "help.txt").string();
    CHECK(exit_code(run(bin() + " sweep --help > " + out_file)) == 0);
    std::ifstream in(out_file);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    for (const char* key : {"sweep.modes", "sweep.pcts", "sweep.seeds", "train.lr",
                            "scene.exclusive_frac", "split.seed"})
        CHECK(text.find(key) != std::string::npos);

    CHECK(exit_code(run(bin() + " frobnicate 2> /dev/null")) == 2);
}

TEST_CASE("cli: identical seeds and configs give identical reports") {
    const auto root = temp_dir("repro");
    const auto ds = (root / "ds").string();
    REQUIRE(exit_code(run(bin() + " generate --out " + ds +
                          " --set scene.h=8 --set scene.w=32 --set scene.d=16"
                          " --set scene.structure_scale=1.2 --set data.n_patients=6"
                          " > /dev/null")) == 0);
    const std::string sweep_flags =
        " --set data.dir=" + ds + kTinyArch +
        " --set train.epochs=1 --set train.batch_size=2 --set train.checkpoint_every=1"
        " --set sweep.seeds=1 --set sweep.modes=volume_only --seed 5 > /dev/null";
    const auto a = (root / "a").string(), b = (root / "b").string();
    REQUIRE(exit_code(run(bin() + " sweep --out " + a + sweep_flags)) == 0);
    REQUIRE(exit_code(run(bin() + " sweep --out " + b + sweep_flags)) == 0);
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p);
        return std::string((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
    };
    const auto ra = slurp(fs::path(a) / "report.csv");
    CHECK_FALSE(ra.empty());
    CHECK(ra == slurp(fs::path(b) / "report.csv"));
}

TEST_CASE("cli: plot renders svg from csv artifacts") {
    const auto root = temp_dir("plot");
    const auto curves = root / "curves.csv";
    std::ofstream(curves) << "mode,n_masks,aupr\nmultiscale,0,0.9\nmultiscale,8,0.8\n"
                             "volume_only,0,0.85\nvolume_only,8,0.4\n";
    CHECK(exit_code(run(bin() + " plot --out " + (root / "plots").string() +
                        " --set plot.curves_csv=" + curves.string() + " > /dev/null")) == 0);
    CHECK(fs::exists(root / "plots" / "noise_curves.svg"));

    // no inputs at all -> usage error
    CHECK(exit_code(run(bin() + " plot --out " + (root / "plots2").string() +
                        " 2> /dev/null")) == 2);
}
