#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "hetfuse/datamodel.hpp"

namespace hetfuse {

// ---------------------------------------------------------------------------
// Dice
// ---------------------------------------------------------------------------

// 2|P∩G| / (|P|+|G|); both masks empty -> 1 by convention.
inline double dice_score(const MaskGrid& pred, const MaskGrid& target) {
    check(pred.same_shape(target), ErrorKind::Shape, "dice_score: shape mismatch");
    int64_t inter = 0, p = 0, g = 0;
    for (int64_t i = 0; i < pred.numel(); ++i) {
        p += pred[i];
        g += target[i];
        inter += pred[i] & target[i];
    }
    if (p + g == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(p + g);
}

inline MaskGrid binarize(const Tensor<float>& prob, float threshold = 0.5f) {
    MaskGrid out(prob.shape());
    for (int64_t i = 0; i < prob.numel(); ++i) out[i] = prob[i] > threshold ? 1 : 0;
    return out;
}

// ---------------------------------------------------------------------------
// HD95 (95th percentile of symmetric boundary distances, in mm)
// ---------------------------------------------------------------------------

namespace metric_detail {

// Boundary pixels: foreground with at least one background 4-neighbor, or
// touching the image edge.
inline std::vector<std::pair<int64_t, int64_t>> boundary_pixels(const MaskGrid& m) {
    const int64_t H = m.size(0), W = m.size(1);
    std::vector<std::pair<int64_t, int64_t>> out;
    for (int64_t h = 0; h < H; ++h)
        for (int64_t w = 0; w < W; ++w) {
            if (!m(h, w)) continue;
            const bool edge = h == 0 || h == H - 1 || w == 0 || w == W - 1;
            if (edge || !m(h - 1, w) || !m(h + 1, w) || !m(h, w - 1) || !m(h, w + 1))
                out.emplace_back(h, w);
        }
    return out;
}

// Exact 1D squared-distance transform (lower envelope of parabolas).
inline void edt_1d(const std::vector<double>& f, double step, std::vector<double>& out) {
    const int64_t n = static_cast<int64_t>(f.size());
    std::vector<int64_t> v(static_cast<size_t>(n));
    std::vector<double> z(static_cast<size_t>(n) + 1);
    int64_t k = 0;
    v[0] = 0;
    z[0] = -std::numeric_limits<double>::infinity();
    z[1] = std::numeric_limits<double>::infinity();
    auto sq = [](double x) { return x * x; };
    for (int64_t q = 1; q < n; ++q) {
        double s;
        while (true) {
            const int64_t p = v[static_cast<size_t>(k)];
            s = (f[static_cast<size_t>(q)] + sq(step * static_cast<double>(q)) -
                 f[static_cast<size_t>(p)] - sq(step * static_cast<double>(p))) /
                (2.0 * step * static_cast<double>(q - p));
            if (s <= z[static_cast<size_t>(k)]) {
                --k;
            } else {
                break;
            }
        }
        ++k;
        v[static_cast<size_t>(k)] = q;
        z[static_cast<size_t>(k)] = s;
        z[static_cast<size_t>(k) + 1] = std::numeric_limits<double>::infinity();
    }
    k = 0;
    for (int64_t q = 0; q < n; ++q) {
        const double x = step * static_cast<double>(q);
        while (z[static_cast<size_t>(k) + 1] < x) ++k;
        const int64_t p = v[static_cast<size_t>(k)];
        out[static_cast<size_t>(q)] = sq(x - step * static_cast<double>(p)) + f[static_cast<size_t>(p)];
    }
}

// Squared Euclidean distance (anisotropic, in mm) from every pixel to the
// nearest seed pixel.
inline std::vector<double> edt_2d(const std::vector<std::pair<int64_t, int64_t>>& seeds,
                                  int64_t H, int64_t W, double mm_h, double mm_w) {
    constexpr double kInf = 1e30;
    std::vector<double> d(static_cast<size_t>(H * W), kInf);
    for (const auto& [h, w] : seeds) d[static_cast<size_t>(h * W + w)] = 0.0;
    std::vector<double> buf(static_cast<size_t>(std::max(H, W)));
    std::vector<double> res(static_cast<size_t>(std::max(H, W)));
    // Columns (along H), then rows (along W).
    for (int64_t w = 0; w < W; ++w) {
        for (int64_t h = 0; h < H; ++h) buf[static_cast<size_t>(h)] = d[static_cast<size_t>(h * W + w)];
        buf.resize(static_cast<size_t>(H));
        res.resize(static_cast<size_t>(H));
        edt_1d(buf, mm_h, res);
        for (int64_t h = 0; h < H; ++h) d[static_cast<size_t>(h * W + w)] = res[static_cast<size_t>(h)];
    }
    for (int64_t h = 0; h < H; ++h) {
        buf.resize(static_cast<size_t>(W));
        res.resize(static_cast<size_t>(W));
        for (int64_t w = 0; w < W; ++w) buf[static_cast<size_t>(w)] = d[static_cast<size_t>(h * W + w)];
        edt_1d(buf, mm_w, res);
        for (int64_t w = 0; w < W; ++w) d[static_cast<size_t>(h * W + w)] = res[static_cast<size_t>(w)];
    }
    return d;
}

// Percentile with linear interpolation between order statistics.
inline double percentile(std::vector<double> values, double q) {
    check(!values.empty(), ErrorKind::Invariant, "percentile of empty set");
    std::sort(values.begin(), values.end());
    const double r = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<size_t>(std::floor(r));
    if (lo + 1 >= values.size()) return values.back();
    const double f = r - static_cast<double>(lo);
    return values[lo] + f * (values[lo + 1] - values[lo]);
}

}  // namespace metric_detail

// 95th percentile of the pooled symmetric set of boundary-to-boundary nearest
// distances, in physical mm. Both empty -> 0; exactly one empty -> the image
// physical diagonal (sentinel).
inline double hd95(const MaskGrid& pred, const MaskGrid& target, double mm_h, double mm_w) {
    using namespace metric_detail;
    check(pred.same_shape(target), ErrorKind::Shape, "hd95: shape mismatch");
    const int64_t H = pred.size(0), W = pred.size(1);
    const auto bp = boundary_pixels(pred);
    const auto bg = boundary_pixels(target);
    if (bp.empty() && bg.empty()) return 0.0;
    if (bp.empty() || bg.empty()) {
        const double dh = mm_h * static_cast<double>(H - 1);
        const double dw = mm_w * static_cast<double>(W - 1);
        return std::sqrt(dh * dh + dw * dw);
    }
    const auto dist_to_g = edt_2d(bg, H, W, mm_h, mm_w);
    const auto dist_to_p = edt_2d(bp, H, W, mm_h, mm_w);
    std::vector<double> pooled;
    pooled.reserve(bp.size() + bg.size());
    for (const auto& [h, w] : bp) pooled.push_back(std::sqrt(dist_to_g[static_cast<size_t>(h * W + w)]));
    for (const auto& [h, w] : bg) pooled.push_back(std::sqrt(dist_to_p[static_cast<size_t>(h * W + w)]));
    return metric_detail::percentile(std::move(pooled), 0.95);
}

// ---------------------------------------------------------------------------
// AUROC / AUPR on pooled scores
// ---------------------------------------------------------------------------

// Rank statistic: P(score_pos > score_neg) + 0.5 * P(tie). Requires both
// classes present.
inline double auroc(const std::vector<double>& scores, const std::vector<uint8_t>& labels) {
    check(scores.size() == labels.size(), ErrorKind::Shape, "auroc: length mismatch");
    const size_t n = scores.size();
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });
    double rank_sum_pos = 0.0;
    int64_t n_pos = 0, n_neg = 0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based average rank
        for (size_t t = i; t < j; ++t) {
            if (labels[order[t]]) {
                rank_sum_pos += avg_rank;
                ++n_pos;
            } else {
                ++n_neg;
            }
        }
        i = j;
    }
    check(n_pos > 0 && n_neg > 0, ErrorKind::Invariant,
          "auroc undefined: needs both classes present");
    const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

// Average precision: sum over descending-score groups (ties grouped) of
// precision at the group end times the recall increment within the group.
inline double aupr(const std::vector<double>& scores, const std::vector<uint8_t>& labels) {
    check(scores.size() == labels.size(), ErrorKind::Shape, "aupr: length mismatch");
    const size_t n = scores.size();
    int64_t total_pos = 0;
    for (uint8_t l : labels) total_pos += l;
    check(total_pos > 0, ErrorKind::Invariant, "aupr undefined: no positives");
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] > scores[b]; });
    double ap = 0.0;
    int64_t tp = 0, seen = 0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        int64_t group_tp = 0;
        while (j < n && scores[order[j]] == scores[order[i]]) {
            group_tp += labels[order[j]];
            ++j;
        }
        tp += group_tp;
        seen += static_cast<int64_t>(j - i);
        const double precision = static_cast<double>(tp) / static_cast<double>(seen);
        ap += precision * static_cast<double>(group_tp) / static_cast<double>(total_pos);
        i = j;
    }
    return ap;
}

// ---------------------------------------------------------------------------
// Wilcoxon signed-rank test (two-sided)
// ---------------------------------------------------------------------------

struct PairedScores {
    std::vector<std::string> ids;
    std::vector<double> method_a;
    std::vector<double> method_b;

    void validate() const {
        check(method_a.size() == method_b.size() &&
                  (ids.empty() || ids.size() == method_a.size()),
              ErrorKind::Shape, "paired scores must have equal lengths");
        check(!method_a.empty(), ErrorKind::Invariant, "paired scores are empty");
    }
};

// Zero differences are dropped (Wilcoxon convention); exact null enumeration
// for effective n <= 20, normal approximation with tie correction above.
// All-zero differences -> p = 1.
inline double wilcoxon_signed_rank(const PairedScores& pairs) {
    pairs.validate();
    std::vector<double> diffs;
    for (size_t i = 0; i < pairs.method_a.size(); ++i) {
        const double d = pairs.method_a[i] - pairs.method_b[i];
        if (d != 0.0) diffs.push_back(d);
    }
    const auto n = static_cast<int64_t>(diffs.size());
    if (n == 0) return 1.0;

    // Average ranks of |d|, doubled so tied ranks stay integral.
    std::vector<size_t> order(diffs.size());
    for (size_t i = 0; i < diffs.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return std::abs(diffs[a]) < std::abs(diffs[b]); });
    std::vector<int64_t> rank2(diffs.size());
    std::vector<int64_t> tie_sizes;
    size_t i = 0;
    while (i < order.size()) {
        size_t j = i;
        while (j < order.size() && std::abs(diffs[order[j]]) == std::abs(diffs[order[i]])) ++j;
        const int64_t r2 = static_cast<int64_t>(i + 1 + j);  // 2 * average 1-based rank
        for (size_t t = i; t < j; ++t) rank2[order[t]] = r2;
        tie_sizes.push_back(static_cast<int64_t>(j - i));
        i = j;
    }

    int64_t w2_pos = 0;  // 2 * W+
    int64_t total2 = 0;
    for (size_t t = 0; t < diffs.size(); ++t) {
        total2 += rank2[t];
        if (diffs[t] > 0) w2_pos += rank2[t];
    }

    if (n <= 20) {
        // Exact: distribution of 2*W+ over all 2^n sign assignments.
        std::vector<double> dist(static_cast<size_t>(total2) + 1, 0.0);
        dist[0] = 1.0;
        int64_t reach = 0;
        for (size_t t = 0; t < diffs.size(); ++t) {
            const int64_t r = rank2[t];
            for (int64_t s = reach; s >= 0; --s)
                if (dist[static_cast<size_t>(s)] > 0.0)
                    dist[static_cast<size_t>(s + r)] += dist[static_cast<size_t>(s)];
            reach += r;
        }
        const double denom = std::pow(2.0, static_cast<double>(n));
        double p_le = 0.0, p_ge = 0.0;
        for (int64_t s = 0; s <= total2; ++s) {
            if (s <= w2_pos) p_le += dist[static_cast<size_t>(s)];
            if (s >= w2_pos) p_ge += dist[static_cast<size_t>(s)];
        }
        return std::min(1.0, 2.0 * std::min(p_le, p_ge) / denom);
    }

    // Normal approximation with tie correction.
    const double nd = static_cast<double>(n);
    const double mean = nd * (nd + 1.0) / 4.0;
    double tie_term = 0.0;
    for (int64_t t : tie_sizes) {
        const double td = static_cast<double>(t);
        tie_term += td * td * td - td;
    }
    const double var = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0 - tie_term / 48.0;
    const double w_pos = 0.5 * static_cast<double>(w2_pos);
    const double z = (w_pos - mean) / std::sqrt(var);
    const double p = std::erfc(std::abs(z) / std::sqrt(2.0));  // two-sided
    return std::min(1.0, p);
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

struct MetricsReport {
    std::vector<std::string> sample_ids;
    std::vector<double> per_sample_dice;
    std::vector<double> per_sample_hd95;
    double dice_mean = 0.0, dice_std = 0.0;
    double hd95_mean = 0.0, hd95_std = 0.0;
    double pooled_auroc = 0.0;
    double pooled_aupr = 0.0;
    int64_t n_samples = 0;

    void finalize() {
        n_samples = static_cast<int64_t>(per_sample_dice.size());
        auto mean_std = [](const std::vector<double>& v, double* m, double* s) {
            if (v.empty()) {
                *m = *s = 0.0;
                return;
            }
            double mu = 0.0;
            for (double x : v) mu += x;
            mu /= static_cast<double>(v.size());
            double var = 0.0;
            for (double x : v) var += (x - mu) * (x - mu);
            *m = mu;
            *s = std::sqrt(var / static_cast<double>(v.size()));
        };
        mean_std(per_sample_dice, &dice_mean, &dice_std);
        mean_std(per_sample_hd95, &hd95_mean, &hd95_std);
    }

    // Flat key-value text record. Keys: n_samples, dice_mean, dice_std,
    // hd95_mean, hd95_std, auroc, aupr, sample.<id>.dice, sample.<id>.hd95.
    void write_kv(const fs::path& path) const {
        std::ofstream out(path);
        check(out.good(), ErrorKind::Io, "cannot write metrics: ", path.string());
        out.precision(10);
        out << "n_samples " << n_samples << "\n";
        out << "dice_mean " << dice_mean << "\n";
        out << "dice_std " << dice_std << "\n";
        out << "hd95_mean " << hd95_mean << "\n";
        out << "hd95_std " << hd95_std << "\n";
        out << "auroc " << pooled_auroc << "\n";
        out << "aupr " << pooled_aupr << "\n";
        for (size_t i = 0; i < per_sample_dice.size(); ++i) {
            const std::string id = i < sample_ids.size() ? sample_ids[i] : cat("s", i);
            out << "sample." << id << ".dice " << per_sample_dice[i] << "\n";
            out << "sample." << id << ".hd95 " << per_sample_hd95[i] << "\n";
        }
    }
};

}  // namespace hetfuse
