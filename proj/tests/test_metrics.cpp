#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "hetfuse/metrics.hpp"
#include "hetfuse/rng.hpp"
#include "oracles.hpp"

using namespace hetfuse;
using Catch::Approx;

namespace {

MaskGrid random_mask(int64_t H, int64_t W, Rng& rng, double density = 0.4) {
    MaskGrid m({H, W});
    for (int64_t i = 0; i < m.numel(); ++i) m[i] = rng.bernoulli(density) ? 1 : 0;
    return m;
}

}  // namespace

TEST_CASE("dice: closed-form cases") {
    MaskGrid a({2, 2}), b({2, 2});
    a(0, 0) = a(0, 1) = 1;
    b(0, 0) = b(0, 1) = 1;
    CHECK(dice_score(a, b) == 1.0);

    MaskGrid c({2, 2});
    c(1, 0) = c(1, 1) = 1;
    CHECK(dice_score(a, c) == 0.0);

    MaskGrid d({2, 2});
    d(0, 1) = d(1, 1) = 1;  // |P|=|G|=2, overlap 1
    CHECK(dice_score(a, d) == 0.5);

    MaskGrid e({2, 2}), f({2, 2});
    CHECK(dice_score(e, f) == 1.0);  // both empty
}

TEST_CASE("hd95: trivial and derived cases") {
    MaskGrid a({10, 10});
    a(4, 2) = 1;
    CHECK(hd95(a, a, 1.0, 1.0) == 0.0);

    MaskGrid b({10, 10});
    b(4, 5) = 1;  // 3 columns apart
    CHECK(hd95(a, b, 1.0, 1.0) == Approx(3.0).margin(1e-12));

    MaskGrid empty({10, 10});
    CHECK(hd95(empty, empty, 1.0, 1.0) == 0.0);
    CHECK(hd95(empty, a, 1.0, 1.0) == Approx(std::sqrt(81.0 + 81.0)).margin(1e-12));
}

TEST_CASE("hd95: anisotropic spacing is honored") {
    MaskGrid a({6, 6}), b({6, 6});
    a(1, 1) = 1;
    b(3, 1) = 1;  // 2 rows apart
    CHECK(hd95(a, b, 0.5, 2.0) == Approx(1.0).margin(1e-12));
    CHECK(hd95(a, b, 2.0, 0.5) == Approx(4.0).margin(1e-12));
}

TEST_CASE("dice and hd95 are symmetric") {
    Rng rng(17);
    for (int rep = 0; rep < 25; ++rep) {
        const auto a = random_mask(7, 8, rng);
        const auto b = random_mask(7, 8, rng);
        CHECK(dice_score(a, b) == dice_score(b, a));
        CHECK(hd95(a, b, 0.7, 1.3) == Approx(hd95(b, a, 0.7, 1.3)).margin(1e-12));
    }
}

TEST_CASE("metric-oracle agreement on 100 random instances each") {
    Rng rng(20250811);

    SECTION("dice vs direct formula") {
        for (int rep = 0; rep < 100; ++rep) {
            const int64_t H = rng.uniform_int(1, 8), W = rng.uniform_int(1, 8);
            const auto a = random_mask(H, W, rng);
            const auto b = random_mask(H, W, rng);
            CHECK(dice_score(a, b) == Approx(oracle::dice_oracle(a, b)).margin(1e-9));
        }
    }

    SECTION("hd95 vs all-pairs brute force") {
        for (int rep = 0; rep < 100; ++rep) {
            const int64_t H = rng.uniform_int(2, 8), W = rng.uniform_int(2, 8);
            const auto a = random_mask(H, W, rng, 0.3);
            const auto b = random_mask(H, W, rng, 0.3);
            const double mm_h = rng.uniform(0.2, 2.0), mm_w = rng.uniform(0.2, 2.0);
            CHECK(hd95(a, b, mm_h, mm_w) ==
                  Approx(oracle::hd95_oracle(a, b, mm_h, mm_w)).margin(1e-9));
        }
    }

    SECTION("auroc vs exhaustive pair counting") {
        for (int rep = 0; rep < 100; ++rep) {
            const int64_t n = rng.uniform_int(4, 64);
            std::vector<double> scores;
            std::vector<uint8_t> labels;
            int64_t pos = 0;
            for (int64_t i = 0; i < n; ++i) {
                scores.push_back(rng.uniform_int(0, 9) / 4.0);  // plenty of ties
                const uint8_t l = rng.bernoulli(0.4) ? 1 : 0;
                labels.push_back(l);
                pos += l;
            }
            if (pos == 0) labels[0] = 1;
            if (pos == n) labels[0] = 0;
            CHECK(auroc(scores, labels) ==
                  Approx(oracle::auroc_oracle(scores, labels)).margin(1e-9));
        }
    }

    SECTION("aupr vs threshold enumeration") {
        for (int rep = 0; rep < 100; ++rep) {
            const int64_t n = rng.uniform_int(4, 64);
            std::vector<double> scores;
            std::vector<uint8_t> labels;
            int64_t pos = 0;
            for (int64_t i = 0; i < n; ++i) {
                scores.push_back(rng.uniform_int(0, 9) / 4.0);
                const uint8_t l = rng.bernoulli(0.35) ? 1 : 0;
                labels.push_back(l);
                pos += l;
            }
            if (pos == 0) labels[static_cast<size_t>(rng.uniform_int(0, n - 1))] = 1;
            CHECK(aupr(scores, labels) ==
                  Approx(oracle::aupr_oracle(scores, labels)).margin(1e-9));
        }
    }

    SECTION("wilcoxon vs exact sign-vector enumeration") {
        for (int rep = 0; rep < 100; ++rep) {
            const int64_t n = rng.uniform_int(1, 12);
            PairedScores p;
            for (int64_t i = 0; i < n; ++i) {
                const double base = rng.uniform(0.0, 1.0);
                p.method_a.push_back(base);
                // quantized deltas produce zero diffs and ties
                p.method_b.push_back(base + rng.uniform_int(-2, 2) * 0.05);
            }
            CHECK(wilcoxon_signed_rank(p) ==
                  Approx(oracle::wilcoxon_oracle(p.method_a, p.method_b)).margin(1e-9));
        }
    }
}

TEST_CASE("auroc: stated examples") {
    CHECK(auroc({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}) == 1.0);
    // pos {0.9, 0.4}, neg {0.6, 0.1}: 3 of 4 pairs concordant
    CHECK(auroc({0.9, 0.4, 0.6, 0.1}, {1, 1, 0, 0}) == Approx(0.75).margin(1e-12));
    CHECK(auroc({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0}) == Approx(0.5).margin(1e-12));
    CHECK_THROWS_AS(auroc({0.1, 0.2}, {1, 1}), Error);
}

TEST_CASE("aupr: stated examples") {
    CHECK(aupr({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}) == 1.0);
    // descending scores labeled (P, N, P) -> 1/2 + (1/2)(2/3) = 5/6
    CHECK(aupr({0.9, 0.6, 0.3}, {1, 0, 1}) == Approx(5.0 / 6.0).margin(1e-12));
    // all ties -> prevalence
    CHECK(aupr({0.4, 0.4, 0.4, 0.4}, {1, 0, 0, 0}) == Approx(0.25).margin(1e-12));
    CHECK_THROWS_AS(aupr({0.1, 0.2}, {0, 0}), Error);
}

TEST_CASE("auroc/aupr invariant under strictly increasing transforms") {
    Rng rng(99);
    for (int rep = 0; rep < 20; ++rep) {
        const int64_t n = rng.uniform_int(6, 40);
        std::vector<double> scores;
        std::vector<uint8_t> labels;
        for (int64_t i = 0; i < n; ++i) {
            scores.push_back(rng.uniform(-2.0, 2.0));
            labels.push_back(rng.bernoulli(0.5) ? 1 : 0);
        }
        labels[0] = 1;
        labels[1] = 0;
        std::vector<double> warped;
        for (double s : scores) warped.push_back(std::exp(2.0 * s) + 3.0);
        CHECK(auroc(scores, labels) == Approx(auroc(warped, labels)).margin(1e-12));
        CHECK(aupr(scores, labels) == Approx(aupr(warped, labels)).margin(1e-12));
    }
}

TEST_CASE("wilcoxon: stated examples") {
    PairedScores same;
    same.method_a = {0.5, 0.7, 0.9};
    same.method_b = {0.5, 0.7, 0.9};
    CHECK(wilcoxon_signed_rank(same) == 1.0);

    PairedScores pos;  // n=5, all differences positive, no ties
    pos.method_a = {1.0, 2.0, 3.0, 4.0, 5.0};
    pos.method_b = {0.9, 1.7, 2.5, 3.2, 4.0};
    CHECK(wilcoxon_signed_rank(pos) == Approx(2.0 / 32.0).margin(1e-12));

    PairedScores swapped;
    swapped.method_a = pos.method_b;
    swapped.method_b = pos.method_a;
    CHECK(wilcoxon_signed_rank(swapped) == Approx(wilcoxon_signed_rank(pos)).margin(1e-12));
}

TEST_CASE("wilcoxon: normal approximation branch is sane for n > 20") {
    Rng rng(7);
    PairedScores p;
    for (int i = 0; i < 40; ++i) {
        const double base = rng.uniform(0.0, 1.0);
        p.method_a.push_back(base + 0.08 + rng.normal(0.0, 0.02));
        p.method_b.push_back(base);
    }
    const double pv = wilcoxon_signed_rank(p);
    CHECK(pv > 0.0);
    CHECK(pv < 0.001);  // strong systematic shift

    PairedScores null_pairs;
    for (int i = 0; i < 40; ++i) {
        null_pairs.method_a.push_back(rng.uniform(0.0, 1.0));
        null_pairs.method_b.push_back(rng.uniform(0.0, 1.0));
    }
    CHECK(wilcoxon_signed_rank(null_pairs) > 0.01);
}

TEST_CASE("metrics report: perfect prediction attains the ideal values") {
    Rng rng(3);
    MetricsReport rep;
    std::vector<double> scores;
    std::vector<uint8_t> labels;
    for (int s = 0; s < 4; ++s) {
        const auto m = random_mask(6, 6, rng);
        rep.per_sample_dice.push_back(dice_score(m, m));
        rep.per_sample_hd95.push_back(hd95(m, m, 1.0, 1.0));
        for (int64_t i = 0; i < m.numel(); ++i) {
            scores.push_back(m[i] ? 0.9 : 0.1);
            labels.push_back(m[i]);
        }
    }
    rep.pooled_auroc = auroc(scores, labels);
    rep.pooled_aupr = aupr(scores, labels);
    rep.finalize();
    CHECK(rep.dice_mean == 1.0);
    CHECK(rep.hd95_mean == 0.0);
    CHECK(rep.pooled_auroc == 1.0);
    CHECK(rep.pooled_aupr == 1.0);
    CHECK(rep.n_samples == 4);
}

TEST_CASE("metrics report key-value serialization") {
    MetricsReport rep;
    rep.per_sample_dice = {0.5, 0.75};
    rep.per_sample_hd95 = {1.0, 2.0};
    rep.sample_ids = {"a", "b"};
    rep.pooled_auroc = 0.9;
    rep.pooled_aupr = 0.8;
    rep.finalize();
    const auto path = std::filesystem::temp_directory_path() / "hetfuse_test_metrics.txt";
    rep.write_kv(path);
    std::ifstream in(path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(text.find("dice_mean 0.625") != std::string::npos);
    CHECK(text.find("sample.a.dice 0.5") != std::string::npos);
    CHECK(text.find("aupr 0.8") != std::string::npos);
}
