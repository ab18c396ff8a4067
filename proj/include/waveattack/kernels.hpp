#pragma once

#include <cstdint>
#include <vector>

namespace waveattack::kernels {

// Small dense GEMM routines. Accumulation order over k is fixed per output
// element, so results do not depend on thread count; callers parallelize over
// disjoint output regions.

// C[M,N] += A[M,K] * B[K,N]   (C must be pre-initialized)
template <typename T>
void gemm_nn(const T* a, const T* b, T* c, std::int64_t m, std::int64_t k, std::int64_t n) {
    for (std::int64_t i = 0; i < m; ++i) {
        T* crow = c + i * n;
        const T* arow = a + i * k;
        for (std::int64_t p = 0; p < k; ++p) {
            const T av = arow[p];
            if (av == T(0)) continue;
            const T* brow = b + p * n;
            for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[M,N] += A^T * B where A is stored [K,M]
template <typename T>
void gemm_tn(const T* a, const T* b, T* c, std::int64_t m, std::int64_t k, std::int64_t n) {
    for (std::int64_t p = 0; p < k; ++p) {
        const T* arow = a + p * m;
        const T* brow = b + p * n;
        for (std::int64_t i = 0; i < m; ++i) {
            const T av = arow[i];
            if (av == T(0)) continue;
            T* crow = c + i * n;
            for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[M,N] += A[M,K] * B^T where B is stored [N,K]
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, std::int64_t m, std::int64_t k, std::int64_t n) {
    for (std::int64_t i = 0; i < m; ++i) {
        const T* arow = a + i * k;
        T* crow = c + i * n;
        for (std::int64_t j = 0; j < n; ++j) {
            const T* brow = b + j * k;
            T acc = T(0);
            for (std::int64_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] += acc;
        }
    }
}

// Lowers one [C,H,W] image to a [C*kh*kw, oh*ow] patch matrix (zero padding).
template <typename T>
void im2col(const T* img, std::int64_t c, std::int64_t h, std::int64_t w, std::int64_t kh,
            std::int64_t kw, std::int64_t stride, std::int64_t pad, std::int64_t oh,
            std::int64_t ow, T* cols) {
    std::int64_t row = 0;
    for (std::int64_t ch = 0; ch < c; ++ch) {
        const T* plane = img + ch * h * w;
        for (std::int64_t u = 0; u < kh; ++u) {
            for (std::int64_t v = 0; v < kw; ++v, ++row) {
                T* dst = cols + row * oh * ow;
                for (std::int64_t y = 0; y < oh; ++y) {
                    const std::int64_t iy = y * stride - pad + u;
                    if (iy < 0 || iy >= h) {
                        for (std::int64_t x = 0; x < ow; ++x) dst[y * ow + x] = T(0);
                        continue;
                    }
                    const T* src = plane + iy * w;
                    for (std::int64_t x = 0; x < ow; ++x) {
                        const std::int64_t ix = x * stride - pad + v;
                        dst[y * ow + x] = (ix >= 0 && ix < w) ? src[ix] : T(0);
                    }
                }
            }
        }
    }
}

// Adjoint of im2col: scatter-adds a patch matrix back onto a [C,H,W] image.
template <typename T>
void col2im_add(const T* cols, std::int64_t c, std::int64_t h, std::int64_t w, std::int64_t kh,
                std::int64_t kw, std::int64_t stride, std::int64_t pad, std::int64_t oh,
                std::int64_t ow, T* img) {
    std::int64_t row = 0;
    for (std::int64_t ch = 0; ch < c; ++ch) {
        T* plane = img + ch * h * w;
        for (std::int64_t u = 0; u < kh; ++u) {
            for (std::int64_t v = 0; v < kw; ++v, ++row) {
                const T* src = cols + row * oh * ow;
                for (std::int64_t y = 0; y < oh; ++y) {
                    const std::int64_t iy = y * stride - pad + u;
                    if (iy < 0 || iy >= h) continue;
                    T* dstrow = plane + iy * w;
                    for (std::int64_t x = 0; x < ow; ++x) {
                        const std::int64_t ix = x * stride - pad + v;
                        if (ix >= 0 && ix < w) dstrow[ix] += src[y * ow + x];
                    }
                }
            }
        }
    }
}

}  // namespace waveattack::kernels
