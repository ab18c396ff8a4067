#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "waveattack/tensor.hpp"

namespace waveattack::testing {

// Direct 6-nested-loop convolution, independent of the im2col path.
template <typename T>
std::vector<T> conv2d_ref(const std::vector<T>& x, std::int64_t n, std::int64_t c, std::int64_t h,
                          std::int64_t w, const std::vector<T>& wt, std::int64_t o, std::int64_t kh,
                          std::int64_t kw, const std::vector<T>& bias, std::int64_t stride,
                          std::int64_t pad) {
    const std::int64_t oh = (h + 2 * pad - kh) / stride + 1;
    const std::int64_t ow = (w + 2 * pad - kw) / stride + 1;
    std::vector<T> out(static_cast<std::size_t>(n * o * oh * ow), T(0));
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t oc = 0; oc < o; ++oc)
            for (std::int64_t y = 0; y < oh; ++y)
                for (std::int64_t xx = 0; xx < ow; ++xx) {
                    T acc = bias[static_cast<std::size_t>(oc)];
                    for (std::int64_t ic = 0; ic < c; ++ic)
                        for (std::int64_t u = 0; u < kh; ++u)
                            for (std::int64_t v = 0; v < kw; ++v) {
                                const std::int64_t iy = y * stride - pad + u;
                                const std::int64_t ix = xx * stride - pad + v;
                                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                                acc += x[((i * c + ic) * h + iy) * w + ix] *
                                       wt[((oc * c + ic) * kh + u) * kw + v];
                            }
                    out[((i * o + oc) * oh + y) * ow + xx] = acc;
                }
    return out;
}

// Mean of -log softmax picked at the labels, computed the direct way.
template <typename T>
double cross_entropy_ref(const std::vector<T>& logits, std::int64_t n, std::int64_t k,
                         const std::vector<int>& labels) {
    double total = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        double z = 0.0;
        for (std::int64_t j = 0; j < k; ++j) z += std::exp(static_cast<double>(logits[i * k + j]));
        const double p = std::exp(static_cast<double>(logits[i * k + labels[static_cast<std::size_t>(i)]])) / z;
        total += -std::log(p);
    }
    return total / static_cast<double>(n);
}

// Separable 1-d Haar applied along columns then rows of a single plane.
// Returns the four quarter planes in the order LL, LH, HL, HH with the
// row-filter-letter-first convention.
template <typename T>
void haar2_ref(const std::vector<T>& plane, std::int64_t h, std::int64_t w, std::vector<T>& ll,
               std::vector<T>& lh, std::vector<T>& hl, std::vector<T>& hh) {
    const double is2 = 1.0 / std::sqrt(2.0);
    // filter along columns (horizontal pairs)
    std::vector<double> lo(h * w / 2), hi(h * w / 2);
    for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w / 2; ++x) {
            const double a = plane[y * w + 2 * x], b = plane[y * w + 2 * x + 1];
            lo[y * (w / 2) + x] = is2 * (a + b);
            hi[y * (w / 2) + x] = is2 * (b - a);
        }
    // filter along rows (vertical pairs); first letter is the row filter
    ll.resize((h / 2) * (w / 2));
    lh.resize((h / 2) * (w / 2));
    hl.resize((h / 2) * (w / 2));
    hh.resize((h / 2) * (w / 2));
    for (std::int64_t y = 0; y < h / 2; ++y)
        for (std::int64_t x = 0; x < w / 2; ++x) {
            const double lo_t = lo[(2 * y) * (w / 2) + x], lo_b = lo[(2 * y + 1) * (w / 2) + x];
            const double hi_t = hi[(2 * y) * (w / 2) + x], hi_b = hi[(2 * y + 1) * (w / 2) + x];
            ll[y * (w / 2) + x] = static_cast<T>(is2 * (lo_t + lo_b));
            lh[y * (w / 2) + x] = static_cast<T>(is2 * (hi_t + hi_b));
            hl[y * (w / 2) + x] = static_cast<T>(is2 * (lo_b - lo_t));
            hh[y * (w / 2) + x] = static_cast<T>(is2 * (hi_b - hi_t));
        }
}

}  // namespace waveattack::testing
