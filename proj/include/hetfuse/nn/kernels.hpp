#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "hetfuse/common.hpp"
#include "hetfuse/nn/blas.hpp"
#include "hetfuse/tensor.hpp"

// Raw forward/backward compute kernels. Convolutions run as im2col + GEMM;
// the column matrix is rebuilt in the backward pass instead of being cached.
// All kernels are deterministic: OpenMP loops only ever write disjoint
// regions and reductions run in a fixed serial order.

namespace hetfuse::nn {

namespace kernel_detail {

// Scratch buffer without value-initialization (the contents are always
// written before being read).
template <typename T>
struct Scratch {
    std::unique_ptr<T[]> data;
    int64_t size = 0;
    void require(int64_t n) {
        if (n > size) {
            data = std::unique_ptr<T[]>(new T[static_cast<size_t>(n)]);
            size = n;
        }
    }
    T* get() { return data.get(); }
};

// Valid output range along one axis for a fixed kernel tap:
// o in [lo, hi) <=> 0 <= o*stride - pad + tap < n_in.
inline std::pair<int64_t, int64_t> tap_range(int64_t n_in, int64_t n_out, int64_t stride,
                                             int64_t pad, int64_t tap) {
    const int64_t shift = tap - pad;  // i = o*stride + shift
    int64_t lo = shift < 0 ? (-shift + stride - 1) / stride : 0;
    int64_t hi = (n_in - 1 - shift) / stride + 1;
    lo = std::max<int64_t>(lo, 0);
    hi = std::min(hi, n_out);
    return {lo, std::max(lo, hi)};
}

// For the gather-based col2im: the (output index, kernel tap) pairs that
// touch each input index along one axis.
inline std::vector<std::vector<std::pair<int32_t, int32_t>>> input_taps(int64_t n_in,
                                                                        int64_t n_out,
                                                                        int64_t k, int64_t stride,
                                                                        int64_t pad) {
    std::vector<std::vector<std::pair<int32_t, int32_t>>> taps(static_cast<size_t>(n_in));
    for (int64_t kk = 0; kk < k; ++kk) {
        const auto [lo, hi] = tap_range(n_in, n_out, stride, pad, kk);
        for (int64_t o = lo; o < hi; ++o)
            taps[static_cast<size_t>(o * stride - pad + kk)].emplace_back(
                static_cast<int32_t>(o), static_cast<int32_t>(kk));
    }
    return taps;
}

}  // namespace kernel_detail

// ---------------------------------------------------------------------------
// conv3d, kernel k x k x k, per-axis strides, zero padding k/2
// ---------------------------------------------------------------------------

struct Conv3dGeom {
    int64_t B, Cin, H, W, D;
    int64_t Cout, k;
    int64_t sh, sw, sd;
    int64_t pad, Ho, Wo, Do;

    static Conv3dGeom of(const std::vector<int64_t>& xshape, const std::vector<int64_t>& wshape,
                         int64_t sh, int64_t sw, int64_t sd) {
        Conv3dGeom g;
        g.B = xshape[0]; g.Cin = xshape[1]; g.H = xshape[2]; g.W = xshape[3]; g.D = xshape[4];
        g.Cout = wshape[0]; g.k = wshape[2];
        check(wshape[1] == g.Cin, ErrorKind::Shape, "conv3d: channel mismatch");
        check(wshape[2] == wshape[3] && wshape[3] == wshape[4], ErrorKind::Shape,
              "conv3d: kernel must be cubic");
        g.sh = sh; g.sw = sw; g.sd = sd;
        g.pad = g.k / 2;
        g.Ho = (g.H + 2 * g.pad - g.k) / g.sh + 1;
        g.Wo = (g.W + 2 * g.pad - g.k) / g.sw + 1;
        g.Do = (g.D + 2 * g.pad - g.k) / g.sd + 1;
        return g;
    }
};

template <typename T>
void im2col3d(const T* x, const Conv3dGeom& g, T* col) {
    using namespace kernel_detail;
    const int64_t n_out = g.Ho * g.Wo * g.Do;
    const int64_t rows = g.Cin * g.k * g.k * g.k;
#pragma omp parallel for schedule(static)
    for (int64_t r = 0; r < rows; ++r) {
        const int64_t kd = r % g.k;
        const int64_t kw = (r / g.k) % g.k;
        const int64_t kh = (r / (g.k * g.k)) % g.k;
        const int64_t ci = r / (g.k * g.k * g.k);
        T* dst = col + r * n_out;
        const T* src = x + ci * g.H * g.W * g.D;
        const auto [oh_lo, oh_hi] = tap_range(g.H, g.Ho, g.sh, g.pad, kh);
        const auto [ow_lo, ow_hi] = tap_range(g.W, g.Wo, g.sw, g.pad, kw);
        const auto [od_lo, od_hi] = tap_range(g.D, g.Do, g.sd, g.pad, kd);
        std::fill(dst, dst + oh_lo * g.Wo * g.Do, T(0));
        std::fill(dst + oh_hi * g.Wo * g.Do, dst + n_out, T(0));
        for (int64_t oh = oh_lo; oh < oh_hi; ++oh) {
            const int64_t ih = oh * g.sh - g.pad + kh;
            T* drow = dst + oh * g.Wo * g.Do;
            std::fill(drow, drow + ow_lo * g.Do, T(0));
            std::fill(drow + ow_hi * g.Do, drow + g.Wo * g.Do, T(0));
            for (int64_t ow = ow_lo; ow < ow_hi; ++ow) {
                const int64_t iw = ow * g.sw - g.pad + kw;
                const T* plane = src + (ih * g.W + iw) * g.D;
                T* dcell = drow + ow * g.Do;
                std::fill(dcell, dcell + od_lo, T(0));
                std::fill(dcell + od_hi, dcell + g.Do, T(0));
                if (g.sd == 1) {
                    const int64_t shift = kd - g.pad;
                    std::copy(plane + od_lo + shift, plane + od_hi + shift, dcell + od_lo);
                } else {
                    for (int64_t od = od_lo; od < od_hi; ++od)
                        dcell[od] = plane[od * g.sd - g.pad + kd];
                }
            }
        }
    }
}

// Gather-based col2im: each input voxel sums its contributions, so threads
// write disjoint locations. Per-axis (output, tap) pair lists avoid any
// division in the inner loops.
template <typename T>
void col2im3d(const T* col, const Conv3dGeom& g, T* dx_accum) {
    using namespace kernel_detail;
    const int64_t n_out = g.Ho * g.Wo * g.Do;
    const auto taps_h = input_taps(g.H, g.Ho, g.k, g.sh, g.pad);
    const auto taps_w = input_taps(g.W, g.Wo, g.k, g.sw, g.pad);
    const auto taps_d = input_taps(g.D, g.Do, g.k, g.sd, g.pad);
#pragma omp parallel for schedule(static)
    for (int64_t ci = 0; ci < g.Cin; ++ci) {
        T* dst = dx_accum + ci * g.H * g.W * g.D;
        for (int64_t ih = 0; ih < g.H; ++ih)
            for (const auto& [oh, kh] : taps_h[static_cast<size_t>(ih)])
                for (int64_t iw = 0; iw < g.W; ++iw)
                    for (const auto& [ow, kw] : taps_w[static_cast<size_t>(iw)]) {
                        const int64_t row_base = ((ci * g.k + kh) * g.k + kw) * g.k;
                        const T* cbase = col + row_base * n_out + (oh * g.Wo + ow) * g.Do;
                        T* drow = dst + (ih * g.W + iw) * g.D;
                        for (int64_t id = 0; id < g.D; ++id) {
                            T acc = T(0);
                            for (const auto& [od, kd] : taps_d[static_cast<size_t>(id)])
                                acc += cbase[kd * n_out + od];
                            drow[id] += acc;
                        }
                    }
    }
}

template <typename T>
Tensor<T> conv3d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                         int64_t sh, int64_t sw, int64_t sd) {
    const Conv3dGeom g = Conv3dGeom::of(x.shape(), w.shape(), sh, sw, sd);
    Tensor<T> y({g.B, g.Cout, g.Ho, g.Wo, g.Do});
    const int64_t K = g.Cin * g.k * g.k * g.k;
    const int64_t N = g.Ho * g.Wo * g.Do;
    static thread_local kernel_detail::Scratch<T> col;
    col.require(K * N);
    for (int64_t b = 0; b < g.B; ++b) {
        im2col3d(x.data() + b * g.Cin * g.H * g.W * g.D, g, col.get());
        gemm(false, false, g.Cout, N, K, T(1), w.data(), K, col.get(), N, T(0),
             y.data() + b * g.Cout * N, N);
    }
    if (bias.numel() > 0) {
#pragma omp parallel for schedule(static)
        for (int64_t bc = 0; bc < g.B * g.Cout; ++bc) {
            T* dst = y.data() + bc * N;
            const T v = bias[bc % g.Cout];
            for (int64_t i = 0; i < N; ++i) dst[i] += v;
        }
    }
    return y;
}

template <typename T>
void conv3d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy, int64_t sh,
                     int64_t sw, int64_t sd, Tensor<T>* dx, Tensor<T>* dw, Tensor<T>* db) {
    const Conv3dGeom g = Conv3dGeom::of(x.shape(), w.shape(), sh, sw, sd);
    const int64_t K = g.Cin * g.k * g.k * g.k;
    const int64_t N = g.Ho * g.Wo * g.Do;
    static thread_local kernel_detail::Scratch<T> col, colgrad;
    if (dw) col.require(K * N);
    if (dx) colgrad.require(K * N);
    for (int64_t b = 0; b < g.B; ++b) {
        const T* dyb = dy.data() + b * g.Cout * N;
        if (dw) {
            im2col3d(x.data() + b * g.Cin * g.H * g.W * g.D, g, col.get());
            gemm_abt_longk(g.Cout, K, N, dyb, col.get(), dw->data());
        }
        if (dx) {
            gemm(true, false, K, N, g.Cout, T(1), w.data(), K, dyb, N, T(0), colgrad.get(), N);
            col2im3d(colgrad.get(), g, dx->data() + b * g.Cin * g.H * g.W * g.D);
        }
    }
    if (db) {
        for (int64_t b = 0; b < g.B; ++b)
            for (int64_t c = 0; c < g.Cout; ++c) {
                const T* src = dy.data() + (b * g.Cout + c) * N;
                T acc = T(0);
                for (int64_t i = 0; i < N; ++i) acc += src[i];
                (*db)[c] += acc;
            }
    }
}

// ---------------------------------------------------------------------------
// conv2d, kernel k x k, per-axis strides, zero padding k/2
// ---------------------------------------------------------------------------

struct Conv2dGeom {
    int64_t B, Cin, H, W;
    int64_t Cout, k;
    int64_t sh, sw;
    int64_t pad, Ho, Wo;

    static Conv2dGeom of(const std::vector<int64_t>& xshape, const std::vector<int64_t>& wshape,
                         int64_t sh, int64_t sw) {
        Conv2dGeom g;
        g.B = xshape[0]; g.Cin = xshape[1]; g.H = xshape[2]; g.W = xshape[3];
        g.Cout = wshape[0]; g.k = wshape[2];
        check(wshape[1] == g.Cin, ErrorKind::Shape, "conv2d: channel mismatch");
        check(wshape[2] == wshape[3], ErrorKind::Shape, "conv2d: kernel must be square");
        g.sh = sh; g.sw = sw;
        g.pad = g.k / 2;
        g.Ho = (g.H + 2 * g.pad - g.k) / g.sh + 1;
        g.Wo = (g.W + 2 * g.pad - g.k) / g.sw + 1;
        return g;
    }
};

template <typename T>
void im2col2d(const T* x, const Conv2dGeom& g, T* col) {
    using namespace kernel_detail;
    const int64_t n_out = g.Ho * g.Wo;
    const int64_t rows = g.Cin * g.k * g.k;
#pragma omp parallel for schedule(static)
    for (int64_t r = 0; r < rows; ++r) {
        const int64_t kw = r % g.k;
        const int64_t kh = (r / g.k) % g.k;
        const int64_t ci = r / (g.k * g.k);
        T* dst = col + r * n_out;
        const T* src = x + ci * g.H * g.W;
        const auto [oh_lo, oh_hi] = tap_range(g.H, g.Ho, g.sh, g.pad, kh);
        const auto [ow_lo, ow_hi] = tap_range(g.W, g.Wo, g.sw, g.pad, kw);
        std::fill(dst, dst + oh_lo * g.Wo, T(0));
        std::fill(dst + oh_hi * g.Wo, dst + n_out, T(0));
        for (int64_t oh = oh_lo; oh < oh_hi; ++oh) {
            const int64_t ih = oh * g.sh - g.pad + kh;
            T* drow = dst + oh * g.Wo;
            std::fill(drow, drow + ow_lo, T(0));
            std::fill(drow + ow_hi, drow + g.Wo, T(0));
            const T* srow = src + ih * g.W;
            if (g.sw == 1) {
                const int64_t shift = kw - g.pad;
                std::copy(srow + ow_lo + shift, srow + ow_hi + shift, drow + ow_lo);
            } else {
                for (int64_t ow = ow_lo; ow < ow_hi; ++ow)
                    drow[ow] = srow[ow * g.sw - g.pad + kw];
            }
        }
    }
}

template <typename T>
void col2im2d(const T* col, const Conv2dGeom& g, T* dx_accum) {
    using namespace kernel_detail;
    const int64_t n_out = g.Ho * g.Wo;
    const auto taps_h = input_taps(g.H, g.Ho, g.k, g.sh, g.pad);
    const auto taps_w = input_taps(g.W, g.Wo, g.k, g.sw, g.pad);
#pragma omp parallel for schedule(static)
    for (int64_t ci = 0; ci < g.Cin; ++ci) {
        T* dst = dx_accum + ci * g.H * g.W;
        for (int64_t ih = 0; ih < g.H; ++ih)
            for (const auto& [oh, kh] : taps_h[static_cast<size_t>(ih)]) {
                const T* cbase = col + (ci * g.k + kh) * g.k * n_out + oh * g.Wo;
                T* drow = dst + ih * g.W;
                for (int64_t iw = 0; iw < g.W; ++iw) {
                    T acc = T(0);
                    for (const auto& [ow, kw] : taps_w[static_cast<size_t>(iw)])
                        acc += cbase[kw * n_out + ow];
                    drow[iw] += acc;
                }
            }
    }
}

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                         int64_t sh, int64_t sw) {
    const Conv2dGeom g = Conv2dGeom::of(x.shape(), w.shape(), sh, sw);
    Tensor<T> y({g.B, g.Cout, g.Ho, g.Wo});
    const int64_t K = g.Cin * g.k * g.k;
    const int64_t N = g.Ho * g.Wo;
    static thread_local kernel_detail::Scratch<T> col;
    col.require(K * N);
    for (int64_t b = 0; b < g.B; ++b) {
        im2col2d(x.data() + b * g.Cin * g.H * g.W, g, col.get());
        gemm(false, false, g.Cout, N, K, T(1), w.data(), K, col.get(), N, T(0),
             y.data() + b * g.Cout * N, N);
    }
    if (bias.numel() > 0) {
#pragma omp parallel for schedule(static)
        for (int64_t bc = 0; bc < g.B * g.Cout; ++bc) {
            T* dst = y.data() + bc * N;
            const T v = bias[bc % g.Cout];
            for (int64_t i = 0; i < N; ++i) dst[i] += v;
        }
    }
    return y;
}

template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy, int64_t sh,
                     int64_t sw, Tensor<T>* dx, Tensor<T>* dw, Tensor<T>* db) {
    const Conv2dGeom g = Conv2dGeom::of(x.shape(), w.shape(), sh, sw);
    const int64_t K = g.Cin * g.k * g.k;
    const int64_t N = g.Ho * g.Wo;
    static thread_local kernel_detail::Scratch<T> col, colgrad;
    if (dw) col.require(K * N);
    if (dx) colgrad.require(K * N);
    for (int64_t b = 0; b < g.B; ++b) {
        const T* dyb = dy.data() + b * g.Cout * N;
        if (dw) {
            im2col2d(x.data() + b * g.Cin * g.H * g.W, g, col.get());
            gemm_abt_longk(g.Cout, K, N, dyb, col.get(), dw->data());
        }
        if (dx) {
            gemm(true, false, K, N, g.Cout, T(1), w.data(), K, dyb, N, T(0), colgrad.get(), N);
            col2im2d(colgrad.get(), g, dx->data() + b * g.Cin * g.H * g.W);
        }
    }
    if (db) {
        for (int64_t b = 0; b < g.B; ++b)
            for (int64_t c = 0; c < g.Cout; ++c) {
                const T* src = dy.data() + (b * g.Cout + c) * N;
                T acc = T(0);
                for (int64_t i = 0; i < N; ++i) acc += src[i];
                (*db)[c] += acc;
            }
    }
}

// ---------------------------------------------------------------------------
// Instance normalization: per (sample, channel) over all spatial positions
// ---------------------------------------------------------------------------

template <typename T>
struct InstanceNormCache {
    Tensor<T> mean;    // (B*C)
    Tensor<T> invstd;  // (B*C)
};

template <typename T>
Tensor<T> instance_norm_forward(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                                T eps, InstanceNormCache<T>* cache) {
    const int64_t B = x.size(0), C = x.size(1);
    const int64_t S = x.numel() / (B * C);
    Tensor<T> y(x.shape());
    Tensor<T> mean({B * C}), invstd({B * C});
#pragma omp parallel for schedule(static)
    for (int64_t bc = 0; bc < B * C; ++bc) {
        const T* src = x.data() + bc * S;
        // Statistics accumulate in double; the loop is memory-bound anyway.
        double acc = 0.0;
        for (int64_t i = 0; i < S; ++i) acc += static_cast<double>(src[i]);
        const T mu = static_cast<T>(acc / static_cast<double>(S));
        double var = 0.0;
        for (int64_t i = 0; i < S; ++i) {
            const double d = static_cast<double>(src[i]) - static_cast<double>(mu);
            var += d * d;
        }
        var /= static_cast<double>(S);
        const T is = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
        mean[bc] = mu;
        invstd[bc] = is;
        const T g = gamma[bc % C], bta = beta[bc % C];
        T* dst = y.data() + bc * S;
        for (int64_t i = 0; i < S; ++i) dst[i] = (src[i] - mu) * is * g + bta;
    }
    if (cache) {
        cache->mean = std::move(mean);
        cache->invstd = std::move(invstd);
    }
    return y;
}

template <typename T>
void instance_norm_backward(const Tensor<T>& x, const Tensor<T>& gamma,
                            const InstanceNormCache<T>& cache, const Tensor<T>& dy, Tensor<T>* dx,
                            Tensor<T>* dgamma, Tensor<T>* dbeta) {
    const int64_t B = x.size(0), C = x.size(1);
    const int64_t S = x.numel() / (B * C);
    // Channel-parameter grads reduced serially in fixed order for determinism.
    if (dgamma || dbeta) {
        for (int64_t bc = 0; bc < B * C; ++bc) {
            const T* xs = x.data() + bc * S;
            const T* dys = dy.data() + bc * S;
            const T mu = cache.mean[bc], is = cache.invstd[bc];
            double sg = 0.0, sb = 0.0;
            for (int64_t i = 0; i < S; ++i) {
                sg += static_cast<double>(dys[i]) * static_cast<double>((xs[i] - mu) * is);
                sb += static_cast<double>(dys[i]);
            }
            if (dgamma) (*dgamma)[bc % C] += static_cast<T>(sg);
            if (dbeta) (*dbeta)[bc % C] += static_cast<T>(sb);
        }
    }
    if (dx) {
#pragma omp parallel for schedule(static)
        for (int64_t bc = 0; bc < B * C; ++bc) {
            const T* xs = x.data() + bc * S;
            const T* dys = dy.data() + bc * S;
            T* dxs = dx->data() + bc * S;
            const T mu = cache.mean[bc], is = cache.invstd[bc];
            const T g = gamma[bc % C];
            double sum_dy = 0.0, sum_dy_xhat = 0.0;
            for (int64_t i = 0; i < S; ++i) {
                sum_dy += static_cast<double>(dys[i]);
                sum_dy_xhat += static_cast<double>(dys[i]) * static_cast<double>((xs[i] - mu) * is);
            }
            const T mean_dy = static_cast<T>(sum_dy / static_cast<double>(S));
            const T mean_dy_xhat = static_cast<T>(sum_dy_xhat / static_cast<double>(S));
            for (int64_t i = 0; i < S; ++i) {
                const T xhat = (xs[i] - mu) * is;
                dxs[i] += g * is * (dys[i] - mean_dy - xhat * mean_dy_xhat);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Pooling / resizing
// ---------------------------------------------------------------------------

// Depth-wise adaptive average pooling of size 1: (B,C,H,W,D) -> (B,C,H,W).
template <typename T>
Tensor<T> depth_mean_forward(const Tensor<T>& x) {
    const int64_t B = x.size(0), C = x.size(1), H = x.size(2), W = x.size(3), D = x.size(4);
    Tensor<T> y({B, C, H, W});
    const int64_t n = B * C * H * W;
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) {
        const T* src = x.data() + i * D;
        T acc = T(0);
        for (int64_t d = 0; d < D; ++d) acc += src[d];
        y[i] = acc / static_cast<T>(D);
    }
    return y;
}

template <typename T>
void depth_mean_backward(const Tensor<T>& dy, int64_t D, Tensor<T>* dx) {
    const int64_t n = dy.numel();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) {
        const T v = dy[i] / static_cast<T>(D);
        T* dst = dx->data() + i * D;
        for (int64_t d = 0; d < D; ++d) dst[d] += v;
    }
}

// Adaptive max pooling bins: bin i of m over n spans
// [floor(i*n/m), ceil((i+1)*n/m)).
inline std::pair<int64_t, int64_t> adaptive_bin(int64_t i, int64_t n, int64_t m) {
    const int64_t lo = (i * n) / m;
    const int64_t hi = ((i + 1) * n + m - 1) / m;
    return {lo, hi};
}

template <typename T>
Tensor<T> adaptive_max_pool2d_forward(const Tensor<T>& x, int64_t Ho, int64_t Wo,
                                      Tensor<int64_t>* argmax) {
    const int64_t B = x.size(0), C = x.size(1), H = x.size(2), W = x.size(3);
    check(Ho >= 1 && Wo >= 1 && Ho <= H && Wo <= W, ErrorKind::Shape,
          "adaptive max pool target must be in [1, input dims]");
    Tensor<T> y({B, C, Ho, Wo});
    if (argmax) *argmax = Tensor<int64_t>({B, C, Ho, Wo});
#pragma omp parallel for schedule(static)
    for (int64_t bc = 0; bc < B * C; ++bc) {
        const T* src = x.data() + bc * H * W;
        T* dst = y.data() + bc * Ho * Wo;
        int64_t* am = argmax ? argmax->data() + bc * Ho * Wo : nullptr;
        for (int64_t oh = 0; oh < Ho; ++oh) {
            const auto [h0, h1] = adaptive_bin(oh, H, Ho);
            for (int64_t ow = 0; ow < Wo; ++ow) {
                const auto [w0, w1] = adaptive_bin(ow, W, Wo);
                T best = src[h0 * W + w0];
                int64_t best_i = h0 * W + w0;
                for (int64_t h = h0; h < h1; ++h)
                    for (int64_t w = w0; w < w1; ++w) {
                        const T v = src[h * W + w];
                        if (v > best) {
                            best = v;
                            best_i = h * W + w;
                        }
                    }
                dst[oh * Wo + ow] = best;
                if (am) am[oh * Wo + ow] = best_i;
            }
        }
    }
    return y;
}

template <typename T>
void adaptive_max_pool2d_backward(const Tensor<T>& dy, const Tensor<int64_t>& argmax, int64_t H,
                                  int64_t W, Tensor<T>* dx) {
    const int64_t B = dy.size(0), C = dy.size(1), Ho = dy.size(2), Wo = dy.size(3);
#pragma omp parallel for schedule(static)
    for (int64_t bc = 0; bc < B * C; ++bc) {
        const T* dys = dy.data() + bc * Ho * Wo;
        const int64_t* am = argmax.data() + bc * Ho * Wo;
        T* dst = dx->data() + bc * H * W;
        for (int64_t i = 0; i < Ho * Wo; ++i) dst[am[i]] += dys[i];
    }
}

// Nearest-neighbor 2x upsampling on (B,C,H,W).
template <typename T>
Tensor<T> upsample2x_forward(const Tensor<T>& x) {
    const int64_t B = x.size(0), C = x.size(1), H = x.size(2), W = x.size(3);
    Tensor<T> y({B, C, 2 * H, 2 * W});
#pragma omp parallel for schedule(static)
    for (int64_t bc = 0; bc < B * C; ++bc) {
        const T* src = x.data() + bc * H * W;
        T* dst = y.data() + bc * 4 * H * W;
        for (int64_t h = 0; h < 2 * H; ++h)
            for (int64_t w = 0; w < 2 * W; ++w) dst[h * 2 * W + w] = src[(h / 2) * W + (w / 2)];
    }
    return y;
}

template <typename T>
void upsample2x_backward(const Tensor<T>& dy, Tensor<T>* dx) {
    const int64_t B = dx->size(0), C = dx->size(1), H = dx->size(2), W = dx->size(3);
#pragma omp parallel for schedule(static)
    for (int64_t bc = 0; bc < B * C; ++bc) {
        const T* src = dy.data() + bc * 4 * H * W;
        T* dst = dx->data() + bc * H * W;
        for (int64_t h = 0; h < H; ++h)
            for (int64_t w = 0; w < W; ++w)
                dst[h * W + w] += src[(2 * h) * 2 * W + 2 * w] + src[(2 * h) * 2 * W + 2 * w + 1] +
                                  src[(2 * h + 1) * 2 * W + 2 * w] +
                                  src[(2 * h + 1) * 2 * W + 2 * w + 1];
    }
}

}  // namespace hetfuse::nn
