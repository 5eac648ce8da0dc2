#include <catch2/catch_amalgamated.hpp>

#include "gradcheck.hpp"

using namespace hetfuse;
using namespace hetfuse::nn;

// Central-finite-difference checks of the analytic gradients for a 2-level
// miniature of every fusion mode, at both precisions.

TEST_CASE("network gradients match finite differences (double, rel err < 1e-4)") {
    for (FusionMode mode : {FusionMode::VolumeOnly, FusionMode::ImageOnly, FusionMode::Late,
                            FusionMode::Multiscale}) {
        double worst = 0.0;
        for (uint64_t seed = 1; seed <= 5; ++seed) {
            const auto res = gradcheck::run_network_gradcheck<double>(
                gradcheck::miniature_config(mode), seed, 1e-5, 2);
            worst = std::max(worst, res.max_rel_err);
            INFO("mode " << to_string(mode) << " seed " << seed << " worst param "
                         << res.worst_param);
            CHECK(res.max_rel_err < 1e-4);
            CHECK(res.n_checked > 50);
        }
    }
}

TEST_CASE("network gradients match finite differences (float, rel err < 1e-2)") {
    for (FusionMode mode : {FusionMode::VolumeOnly, FusionMode::Multiscale}) {
        for (uint64_t seed = 1; seed <= 3; ++seed) {
            const auto res = gradcheck::run_network_gradcheck<float, double>(
                gradcheck::miniature_config(mode), seed, 1e-5, 1);
            INFO("mode " << to_string(mode) << " seed " << seed << " worst param "
                         << res.worst_param);
            CHECK(res.max_rel_err < 1e-2);
        }
    }
}
