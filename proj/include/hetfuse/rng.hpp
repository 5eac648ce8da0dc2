#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

#include "hetfuse/common.hpp"

namespace hetfuse {

// SplitMix64; used both as a seed mixer and as the core generator.
// All samplers below are hand-rolled on top of the raw 64-bit stream so
// that streams are bit-reproducible regardless of the standard library.
struct SplitMix64 {
    uint64_t state = 0;

    explicit SplitMix64(uint64_t seed = 0) : state(seed) {}

    uint64_t next() {
        uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
};

// Combines a base seed with stream identifiers (patient index, epoch, ...)
// into an independent stream seed.
inline uint64_t mix_seed(std::initializer_list<uint64_t> parts) {
    uint64_t h = 0x85ebca6b2b2ae35ULL;
    for (uint64_t p : parts) {
        SplitMix64 m(h ^ (p + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
        h = m.next();
    }
    return h;
}

class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t bits() { return gen_.next(); }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(bits() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [lo, hi] inclusive.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        check(hi >= lo, ErrorKind::Invariant, "uniform_int: empty range");
        const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        return lo + static_cast<int64_t>(bits() % span);
    }

    bool bernoulli(double p) { return uniform() < p; }

    double normal(double mean = 0.0, double stddev = 1.0) {
        if (has_spare_) {
            has_spare_ = false;
            return mean + stddev * spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return mean + stddev * u * f;
    }

    // Fisher-Yates shuffle.
    template <typename Vec>
    void shuffle(Vec& v) {
        for (int64_t i = static_cast<int64_t>(v.size()) - 1; i > 0; --i) {
            const int64_t j = uniform_int(0, i);
            std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(j)]);
        }
    }

private:
    SplitMix64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace hetfuse
