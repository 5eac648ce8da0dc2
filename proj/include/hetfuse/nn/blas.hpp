#pragma once

#include <cblas.h>

#include <algorithm>
#include <cstdint>

namespace hetfuse::nn {

// Row-major C = alpha * op(A) * op(B) + beta * C.
// op(A) is M x K, op(B) is K x N, C is M x N.
inline void gemm(bool trans_a, bool trans_b, int64_t M, int64_t N, int64_t K, float alpha,
                 const float* A, int64_t lda, const float* B, int64_t ldb, float beta, float* C,
                 int64_t ldc) {
    cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans, static_cast<int>(M), static_cast<int>(N),
                static_cast<int>(K), alpha, A, static_cast<int>(lda), B, static_cast<int>(ldb),
                beta, C, static_cast<int>(ldc));
}

inline void gemm(bool trans_a, bool trans_b, int64_t M, int64_t N, int64_t K, double alpha,
                 const double* A, int64_t lda, const double* B, int64_t ldb, double beta,
                 double* C, int64_t ldc) {
    cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans, static_cast<int>(M), static_cast<int>(N),
                static_cast<int>(K), alpha, A, static_cast<int>(lda), B, static_cast<int>(ldb),
                beta, C, static_cast<int>(ldc));
}

// C (MxN) += A (MxK) * B(NxK)^T for a small C and a long reduction axis (the
// dW shape of im2col backward). BLAS packing overhead dominates this shape,
// so it is computed directly, blocked over K so A stays cache-resident.
template <typename T>
void gemm_abt_longk(int64_t M, int64_t N, int64_t K, const T* A, const T* B, T* C) {
    constexpr int64_t kChunk = 8192;
    for (int64_t k0 = 0; k0 < K; k0 += kChunk) {
        const int64_t k1 = std::min(K, k0 + kChunk);
        for (int64_t j = 0; j < N; ++j) {
            const T* bj = B + j * K;
            for (int64_t i = 0; i < M; ++i) {
                const T* ai = A + i * K;
                T acc = T(0);
#pragma omp simd reduction(+ : acc)
                for (int64_t k = k0; k < k1; ++k) acc += ai[k] * bj[k];
                C[i * N + j] += acc;
            }
        }
    }
}

}  // namespace hetfuse::nn
