#pragma once

#include <cstdint>
#include <vector>

#include "waveattack/kernels.hpp"
#include "waveattack/tensor.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace waveattack {

// 2-d convolution, x: NxCxHxW, w: OxCxKhxKw, bias: O. Lowered to a per-sample
// im2col + GEMM; samples run in parallel, weight-gradient partials are reduced
// in sample order so results are independent of thread count.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, std::int64_t stride,
                 std::int64_t pad) {
    if (x.rank() != 4 || w.rank() != 4)
        throw_shape("conv2d expects NxCxHxW input and OxCxKhxKw weight, got " + shape_str(x.shape()) +
                    " and " + shape_str(w.shape()));
    const std::int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), wdt = x.dim(3);
    const std::int64_t o = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    if (w.dim(1) != c)
        throw_shape("conv2d channel mismatch: input has " + std::to_string(c) + " channels, weight expects " +
                    std::to_string(w.dim(1)));
    if (b.numel() != o) throw_shape("conv2d bias size " + std::to_string(b.numel()) + " != " + std::to_string(o));
    if (stride < 1) throw_validation("conv2d stride must be >= 1");
    if (pad < 0) throw_validation("conv2d padding must be >= 0");
    if (h + 2 * pad < kh || wdt + 2 * pad < kw)
        throw_shape("conv2d kernel " + std::to_string(kh) + "x" + std::to_string(kw) + " larger than padded input " +
                    shape_str(x.shape()));
    const std::int64_t oh = (h + 2 * pad - kh) / stride + 1;
    const std::int64_t ow = (wdt + 2 * pad - kw) / stride + 1;
    const std::int64_t ckk = c * kh * kw, p = oh * ow;

    std::vector<T> data(static_cast<std::size_t>(n * o * p));
    {
        auto xd = x.data();
        auto wd = w.data();
        auto bd = b.data();
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (std::int64_t i = 0; i < n; ++i) {
            std::vector<T> cols(static_cast<std::size_t>(ckk * p));
            kernels::im2col(xd.data() + i * c * h * wdt, c, h, wdt, kh, kw, stride, pad, oh, ow, cols.data());
            T* out = data.data() + i * o * p;
            for (std::int64_t j = 0; j < o; ++j)
                for (std::int64_t q = 0; q < p; ++q) out[j * p + q] = bd[j];
            kernels::gemm_nn(wd.data(), cols.data(), out, o, ckk, p);
        }
    }

    auto xi = x.impl();
    auto wi = w.impl();
    auto bi = b.impl();
    return make_op_result<T>(
        {n, o, oh, ow}, std::move(data), {x, w, b}, [=](GradStore<T>& gs, const std::vector<T>& og) {
            const bool need_x = xi->requires_grad, need_w = wi->requires_grad, need_b = bi->requires_grad;
            std::vector<T>* gx = need_x ? &gs.of(xi.get()) : nullptr;
            std::vector<T> wpart;
            if (need_w) wpart.assign(static_cast<std::size_t>(n * o * ckk), T(0));
            if (need_x || need_w) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
                for (std::int64_t i = 0; i < n; ++i) {
                    std::vector<T> cols(static_cast<std::size_t>(ckk * p));
                    const T* og_n = og.data() + i * o * p;
                    if (need_x) {
                        cols.assign(cols.size(), T(0));
                        kernels::gemm_tn(wi->data.data(), og_n, cols.data(), ckk, o, p);
                        kernels::col2im_add(cols.data(), c, h, wdt, kh, kw, stride, pad, oh, ow,
                                            gx->data() + i * c * h * wdt);
                    }
                    if (need_w) {
                        kernels::im2col(xi->data.data() + i * c * h * wdt, c, h, wdt, kh, kw, stride, pad, oh, ow,
                                        cols.data());
                        kernels::gemm_nt(og_n, cols.data(), wpart.data() + i * o * ckk, o, p, ckk);
                    }
                }
            }
            if (need_w) {
                auto& gw = gs.of(wi.get());
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
                for (std::int64_t j = 0; j < o * ckk; ++j)
                    for (std::int64_t i = 0; i < n; ++i) gw[j] += wpart[i * o * ckk + j];
            }
            if (need_b) {
                auto& gb = gs.of(bi.get());
                for (std::int64_t i = 0; i < n; ++i)
                    for (std::int64_t j = 0; j < o; ++j) {
                        const T* row = og.data() + (i * o + j) * p;
                        T acc = T(0);
                        for (std::int64_t q = 0; q < p; ++q) acc += row[q];
                        gb[j] += acc;
                    }
            }
        });
}

// Transposed convolution (adjoint of conv2d under the same weight), x: NxOxHxW,
// w: OxCxKhxKw, bias: C. Output spatial size (H-1)*stride - 2*pad + Kh.
template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                           std::int64_t stride, std::int64_t pad) {
    if (x.rank() != 4 || w.rank() != 4)
        throw_shape("conv_transpose2d expects rank-4 input and weight, got " + shape_str(x.shape()) + " and " +
                    shape_str(w.shape()));
    const std::int64_t n = x.dim(0), o = x.dim(1), hi = x.dim(2), wi_ = x.dim(3);
    const std::int64_t c = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    if (w.dim(0) != o)
        throw_shape("conv_transpose2d channel mismatch: input has " + std::to_string(o) +
                    " channels, weight expects " + std::to_string(w.dim(0)));
    if (b.numel() != c)
        throw_shape("conv_transpose2d bias size " + std::to_string(b.numel()) + " != " + std::to_string(c));
    if (stride < 1) throw_validation("conv_transpose2d stride must be >= 1");
    if (pad < 0) throw_validation("conv_transpose2d padding must be >= 0");
    const std::int64_t ho = (hi - 1) * stride - 2 * pad + kh;
    const std::int64_t wo = (wi_ - 1) * stride - 2 * pad + kw;
    if (ho < 1 || wo < 1) throw_shape("conv_transpose2d output would be empty for input " + shape_str(x.shape()));
    const std::int64_t ckk = c * kh * kw, pi = hi * wi_;

    std::vector<T> data(static_cast<std::size_t>(n * c * ho * wo));
    {
        auto xd = x.data();
        auto wd = w.data();
        auto bd = b.data();
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (std::int64_t i = 0; i < n; ++i) {
            std::vector<T> cols(static_cast<std::size_t>(ckk * pi), T(0));
            kernels::gemm_tn(wd.data(), xd.data() + i * o * pi, cols.data(), ckk, o, pi);
            T* out = data.data() + i * c * ho * wo;
            for (std::int64_t ch = 0; ch < c; ++ch)
                for (std::int64_t q = 0; q < ho * wo; ++q) out[ch * ho * wo + q] = bd[ch];
            kernels::col2im_add(cols.data(), c, ho, wo, kh, kw, stride, pad, hi, wi_, out);
        }
    }

    auto xi = x.impl();
    auto wimpl = w.impl();
    auto bi = b.impl();
    return make_op_result<T>(
        {n, c, ho, wo}, std::move(data), {x, w, b}, [=](GradStore<T>& gs, const std::vector<T>& og) {
            const bool need_x = xi->requires_grad, need_w = wimpl->requires_grad, need_b = bi->requires_grad;
            std::vector<T>* gx = need_x ? &gs.of(xi.get()) : nullptr;
            std::vector<T> wpart;
            if (need_w) wpart.assign(static_cast<std::size_t>(n * o * ckk), T(0));
            if (need_x || need_w) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
                for (std::int64_t i = 0; i < n; ++i) {
                    std::vector<T> cols(static_cast<std::size_t>(ckk * pi));
                    kernels::im2col(og.data() + i * c * ho * wo, c, ho, wo, kh, kw, stride, pad, hi, wi_,
                                    cols.data());
                    if (need_x)
                        kernels::gemm_nn(wimpl->data.data(), cols.data(), gx->data() + i * o * pi, o, ckk, pi);
                    if (need_w)
                        kernels::gemm_nt(xi->data.data() + i * o * pi, cols.data(), wpart.data() + i * o * ckk, o,
                                         pi, ckk);
                }
            }
            if (need_w) {
                auto& gw = gs.of(wimpl.get());
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
                for (std::int64_t j = 0; j < o * ckk; ++j)
                    for (std::int64_t i = 0; i < n; ++i) gw[j] += wpart[i * o * ckk + j];
            }
            if (need_b) {
                auto& gb = gs.of(bi.get());
                for (std::int64_t i = 0; i < n; ++i)
                    for (std::int64_t ch = 0; ch < c; ++ch) {
                        const T* row = og.data() + (i * c + ch) * ho * wo;
                        T acc = T(0);
                        for (std::int64_t q = 0; q < ho * wo; ++q) acc += row[q];
                        gb[ch] += acc;
                    }
            }
        });
}

}  // namespace waveattack
