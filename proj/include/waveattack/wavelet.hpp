#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "waveattack/ops.hpp"
#include "waveattack/rng.hpp"
#include "waveattack/tensor.hpp"

namespace waveattack {

// Orthonormal Haar analysis pair.
struct HaarKernel {
    static constexpr double inv_sqrt2 = 0.70710678118654752440;
    // low = (1/sqrt2, 1/sqrt2), high = (-1/sqrt2, 1/sqrt2)
    static constexpr std::array<double, 2> low{inv_sqrt2, inv_sqrt2};
    static constexpr std::array<double, 2> high{-inv_sqrt2, inv_sqrt2};
};

enum class Band { LL, LH, HL, HH };

inline const char* band_name(Band b) {
    switch (b) {
        case Band::LL: return "LL";
        case Band::LH: return "LH";
        case Band::HL: return "HL";
        default: return "HH";
    }
}

namespace detail {

// Per-band signs of the 2x2 block (a b / c d) under the separable orthonormal
// Haar transform, first letter = filter along rows (vertical axis):
//   LL = (a+b+c+d)/2   LH = (-a+b-c+d)/2   HL = (-a-b+c+d)/2   HH = (a-b-c+d)/2
inline std::array<int, 4> band_signs(Band band) {
    switch (band) {
        case Band::LL: return {+1, +1, +1, +1};
        case Band::LH: return {-1, +1, -1, +1};
        case Band::HL: return {-1, -1, +1, +1};
        default: return {+1, -1, -1, +1};
    }
}

// coeff[i,j] = sum of signed block entries / 2 over each 2x2 block
template <typename T>
void analyze_band(const T* img, std::int64_t planes, std::int64_t h, std::int64_t w, Band band, T* out) {
    const auto s = band_signs(band);
    const std::int64_t oh = h / 2, ow = w / 2;
    for (std::int64_t pl = 0; pl < planes; ++pl) {
        const T* src = img + pl * h * w;
        T* dst = out + pl * oh * ow;
        for (std::int64_t y = 0; y < oh; ++y)
            for (std::int64_t x = 0; x < ow; ++x) {
                const T a = src[(2 * y) * w + 2 * x];
                const T b = src[(2 * y) * w + 2 * x + 1];
                const T c = src[(2 * y + 1) * w + 2 * x];
                const T d = src[(2 * y + 1) * w + 2 * x + 1];
                dst[y * ow + x] = (T(s[0]) * a + T(s[1]) * b + T(s[2]) * c + T(s[3]) * d) / T(2);
            }
    }
}

// image += synthesis of one band (adjoint of analyze_band; the transform is
// orthonormal so synthesis and adjoint coincide)
template <typename T>
void synthesize_band_add(const T* coeff, std::int64_t planes, std::int64_t h, std::int64_t w, Band band, T* img) {
    const auto s = band_signs(band);
    const std::int64_t oh = h / 2, ow = w / 2;
    for (std::int64_t pl = 0; pl < planes; ++pl) {
        const T* src = coeff + pl * oh * ow;
        T* dst = img + pl * h * w;
        for (std::int64_t y = 0; y < oh; ++y)
            for (std::int64_t x = 0; x < ow; ++x) {
                const T v = src[y * ow + x] / T(2);
                dst[(2 * y) * w + 2 * x] += T(s[0]) * v;
                dst[(2 * y) * w + 2 * x + 1] += T(s[1]) * v;
                dst[(2 * y + 1) * w + 2 * x] += T(s[2]) * v;
                dst[(2 * y + 1) * w + 2 * x + 1] += T(s[3]) * v;
            }
    }
}

template <typename T>
void require_even_image(const Tensor<T>& x, const char* who) {
    if (x.rank() != 4) throw_shape(std::string(who) + " expects NxCxHxW, got " + shape_str(x.shape()));
    if (x.dim(2) % 2 != 0 || x.dim(3) % 2 != 0)
        throw_validation(std::string(who) + " requires even H and W, got " + shape_str(x.shape()));
}

}  // namespace detail

template <typename T>
struct SubbandSet {
    Tensor<T> ll, lh, hl, hh;

    Tensor<T>& band(Band b) {
        switch (b) {
            case Band::LL: return ll;
            case Band::LH: return lh;
            case Band::HL: return hl;
            default: return hh;
        }
    }
};

// One subband of the single-level 2-d Haar DWT. Differentiable: the backward
// pass scatters the coefficient gradient back through the synthesis kernel.
template <typename T>
Tensor<T> dwt2_band(const Tensor<T>& x, Band band) {
    detail::require_even_image(x, "dwt2");
    const std::int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    std::vector<T> data(static_cast<std::size_t>(n * c * (h / 2) * (w / 2)));
    detail::analyze_band(x.data().data(), n * c, h, w, band, data.data());
    auto xi = x.impl();
    return make_op_result<T>({n, c, h / 2, w / 2}, std::move(data), {x},
                             [xi, band, n, c, h, w](GradStore<T>& gs, const std::vector<T>& og) {
                                 if (!xi->requires_grad) return;
                                 detail::synthesize_band_add(og.data(), n * c, h, w, band, gs.of(xi.get()).data());
                             });
}

template <typename T>
SubbandSet<T> dwt2(const Tensor<T>& x) {
    return {dwt2_band(x, Band::LL), dwt2_band(x, Band::LH), dwt2_band(x, Band::HL), dwt2_band(x, Band::HH)};
}

// Synthesis of a single band with the other three taken as zero.
template <typename T>
Tensor<T> idwt2_band(const Tensor<T>& coeff, Band band) {
    if (coeff.rank() != 4) throw_shape("idwt2 expects NxCx(H/2)x(W/2) subbands, got " + shape_str(coeff.shape()));
    const std::int64_t n = coeff.dim(0), c = coeff.dim(1), h = coeff.dim(2) * 2, w = coeff.dim(3) * 2;
    std::vector<T> data(static_cast<std::size_t>(n * c * h * w), T(0));
    detail::synthesize_band_add(coeff.data().data(), n * c, h, w, band, data.data());
    auto ci = coeff.impl();
    return make_op_result<T>({n, c, h, w}, std::move(data), {coeff},
                             [ci, band, n, c, h, w](GradStore<T>& gs, const std::vector<T>& og) {
                                 if (!ci->requires_grad) return;
                                 std::vector<T> tmp(static_cast<std::size_t>(n * c * (h / 2) * (w / 2)));
                                 detail::analyze_band(og.data(), n * c, h, w, band, tmp.data());
                                 auto& g = gs.of(ci.get());
                                 for (std::size_t i = 0; i < tmp.size(); ++i) g[i] += tmp[i];
                             });
}

// Exact inverse of dwt2.
template <typename T>
Tensor<T> idwt2(const Tensor<T>& ll, const Tensor<T>& lh, const Tensor<T>& hl, const Tensor<T>& hh) {
    const Tensor<T>* bands[4] = {&ll, &lh, &hl, &hh};
    for (const auto* b : bands) {
        if (b->rank() != 4) throw_shape("idwt2 expects rank-4 subbands, got " + shape_str(b->shape()));
        if (b->shape() != ll.shape())
            throw_validation("idwt2 subband shape mismatch: " + shape_str(b->shape()) + " vs " + shape_str(ll.shape()));
    }
    const std::int64_t n = ll.dim(0), c = ll.dim(1), h = ll.dim(2) * 2, w = ll.dim(3) * 2;
    std::vector<T> data(static_cast<std::size_t>(n * c * h * w), T(0));
    constexpr Band kBands[4] = {Band::LL, Band::LH, Band::HL, Band::HH};
    for (int i = 0; i < 4; ++i)
        detail::synthesize_band_add(bands[i]->data().data(), n * c, h, w, kBands[i], data.data());
    auto i0 = ll.impl();
    auto i1 = lh.impl();
    auto i2 = hl.impl();
    auto i3 = hh.impl();
    return make_op_result<T>({n, c, h, w}, std::move(data), {ll, lh, hl, hh},
                             [=](GradStore<T>& gs, const std::vector<T>& og) {
                                 const std::shared_ptr<TensorImpl<T>> impls[4] = {i0, i1, i2, i3};
                                 std::vector<T> tmp(static_cast<std::size_t>(n * c * (h / 2) * (w / 2)));
                                 for (int i = 0; i < 4; ++i) {
                                     if (!impls[i]->requires_grad) continue;
                                     detail::analyze_band(og.data(), n * c, h, w, kBands[i], tmp.data());
                                     auto& g = gs.of(impls[i].get());
                                     for (std::size_t j = 0; j < tmp.size(); ++j) g[j] += tmp[j];
                                 }
                             });
}

template <typename T>
Tensor<T> idwt2(const SubbandSet<T>& s) {
    return idwt2(s.ll, s.lh, s.hl, s.hh);
}

template <typename T>
struct SubbandProbeResult {
    Tensor<T> perturbed;
    double psnr_db;
};

// Fig.-1-style probe: add uniform noise to one subband and reconstruct. The
// perturbation is synthesized directly and added onto the image, so amplitude
// 0 reproduces the input bit-exactly and the reported PSNR reflects only the
// injected noise, not round-trip float error.
template <typename T>
SubbandProbeResult<T> subband_noise_probe(const Tensor<T>& image, Band band, double noise_amplitude, Rng& rng) {
    detail::require_even_image(image, "subband_noise_probe");
    const std::int64_t n = image.dim(0), c = image.dim(1), h = image.dim(2), w = image.dim(3);
    Tensor<T> noise = Tensor<T>::zeros({n, c, h / 2, w / 2});
    {
        auto nd = noise.mutable_data();
        for (auto& v : nd) v = static_cast<T>(rng.uniform(-noise_amplitude, noise_amplitude));
    }
    Tensor<T> delta = idwt2_band(noise, band);
    Tensor<T> perturbed = add(image, delta);
    double mse = 0.0;
    auto dd = delta.data();
    for (T v : dd) mse += static_cast<double>(v) * static_cast<double>(v);
    mse /= static_cast<double>(dd.size());
    const double psnr = mse == 0.0 ? std::numeric_limits<double>::infinity() : 10.0 * std::log10(1.0 / mse);
    return {perturbed, psnr};
}

}  // namespace waveattack
