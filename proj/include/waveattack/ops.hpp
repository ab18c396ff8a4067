#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "waveattack/kernels.hpp"
#include "waveattack/tensor.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace waveattack {

namespace detail {

// Shapes broadcast NumPy-style over equal ranks: each axis must match or be 1.
inline Shape broadcast_shape(const Shape& a, const Shape& b) {
    if (a.size() != b.size())
        throw_shape("broadcast rank mismatch: " + shape_str(a) + " vs " + shape_str(b));
    Shape out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] == b[i] || a[i] == 1 || b[i] == 1)
            out[i] = std::max(a[i], b[i]);
        else
            throw_shape("cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    }
    return out;
}

inline std::int64_t stride_of(const Shape& s, std::size_t axis) {
    std::int64_t st = 1;
    for (std::size_t i = s.size(); i-- > axis + 1;) st *= s[i];
    return st;
}

// Odometer walk over `out`; calls fn(out_flat, a_flat, b_flat).
template <typename F>
void for_each_broadcast(const Shape& out, const Shape& a, const Shape& b, F&& fn) {
    const std::size_t r = out.size();
    if (r == 0) {
        fn(0, 0, 0);
        return;
    }
    std::vector<std::int64_t> sa(r), sb(r), idx(r, 0);
    std::int64_t stride = 1;
    for (std::size_t i = r; i-- > 0;) {
        sa[i] = (a[i] == 1) ? 0 : stride_of(a, i);
        sb[i] = (b[i] == 1) ? 0 : stride_of(b, i);
        stride *= out[i];
    }
    const std::int64_t total = shape_numel(out);
    std::int64_t ai = 0, bi = 0;
    for (std::int64_t o = 0; o < total; ++o) {
        fn(o, ai, bi);
        for (std::size_t i = r; i-- > 0;) {
            ++idx[i];
            ai += sa[i];
            bi += sb[i];
            if (idx[i] < out[i]) break;
            ai -= sa[i] * out[i];
            bi -= sb[i] * out[i];
            idx[i] = 0;
        }
    }
}

template <typename T, typename FwdFn, typename BwdA, typename BwdB>
Tensor<T> broadcast_binary(const Tensor<T>& a, const Tensor<T>& b, FwdFn fwd, BwdA bwd_a, BwdB bwd_b) {
    const Shape out_shape = broadcast_shape(a.shape(), b.shape());
    std::vector<T> data(static_cast<std::size_t>(shape_numel(out_shape)));
    const bool same = a.shape() == b.shape();
    auto ad = a.data();
    auto bd = b.data();
    if (same) {
        for (std::size_t i = 0; i < data.size(); ++i) data[i] = fwd(ad[i], bd[i]);
    } else {
        for_each_broadcast(out_shape, a.shape(), b.shape(),
                           [&](std::int64_t o, std::int64_t ia, std::int64_t ib) { data[o] = fwd(ad[ia], bd[ib]); });
    }
    auto ai = a.impl();
    auto bi = b.impl();
    Shape ashape = a.shape(), bshape = b.shape(), oshape = out_shape;
    return make_op_result<T>(
        out_shape, std::move(data), {a, b},
        [=](GradStore<T>& gs, const std::vector<T>& og) {
            std::vector<T>* ga = ai->requires_grad ? &gs.of(ai.get()) : nullptr;
            std::vector<T>* gb = bi->requires_grad ? &gs.of(bi.get()) : nullptr;
            if (!ga && !gb) return;
            if (ashape == bshape) {
                for (std::size_t i = 0; i < og.size(); ++i) {
                    if (ga) (*ga)[i] += bwd_a(og[i], ai->data[i], bi->data[i]);
                    if (gb) (*gb)[i] += bwd_b(og[i], ai->data[i], bi->data[i]);
                }
            } else {
                for_each_broadcast(oshape, ashape, bshape, [&](std::int64_t o, std::int64_t iaf, std::int64_t ibf) {
                    if (ga) (*ga)[iaf] += bwd_a(og[o], ai->data[iaf], bi->data[ibf]);
                    if (gb) (*gb)[ibf] += bwd_b(og[o], ai->data[iaf], bi->data[ibf]);
                });
            }
        });
}

}  // namespace detail

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::broadcast_binary(
        a, b, [](T x, T y) { return x + y; }, [](T g, T, T) { return g; }, [](T g, T, T) { return g; });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::broadcast_binary(
        a, b, [](T x, T y) { return x - y; }, [](T g, T, T) { return g; }, [](T g, T, T) { return -g; });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::broadcast_binary(
        a, b, [](T x, T y) { return x * y; }, [](T g, T, T y) { return g * y; }, [](T g, T x, T) { return g * x; });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& t, T s) {
    std::vector<T> data(t.data().begin(), t.data().end());
    for (auto& v : data) v *= s;
    auto ti = t.impl();
    return make_op_result<T>(t.shape(), std::move(data), {t}, [ti, s](GradStore<T>& gs, const std::vector<T>& og) {
        if (!ti->requires_grad) return;
        auto& g = gs.of(ti.get());
        for (std::size_t i = 0; i < og.size(); ++i) g[i] += s * og[i];
    });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& t, T s) {
    std::vector<T> data(t.data().begin(), t.data().end());
    for (auto& v : data) v += s;
    auto ti = t.impl();
    return make_op_result<T>(t.shape(), std::move(data), {t}, [ti](GradStore<T>& gs, const std::vector<T>& og) {
        if (!ti->requires_grad) return;
        auto& g = gs.of(ti.get());
        for (std::size_t i = 0; i < og.size(); ++i) g[i] += og[i];
    });
}

template <typename T>
Tensor<T> neg(const Tensor<T>& t) {
    return scale(t, T(-1));
}

template <typename T>
Tensor<T> relu(const Tensor<T>& t) {
    std::vector<T> data(t.data().begin(), t.data().end());
    for (auto& v : data) v = v > T(0) ? v : T(0);
    auto ti = t.impl();
    return make_op_result<T>(t.shape(), std::move(data), {t}, [ti](GradStore<T>& gs, const std::vector<T>& og) {
        if (!ti->requires_grad) return;
        auto& g = gs.of(ti.get());
        for (std::size_t i = 0; i < og.size(); ++i)
            if (ti->data[i] > T(0)) g[i] += og[i];
    });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& t) {
    std::vector<T> data(t.data().begin(), t.data().end());
    for (auto& v : data) v = T(1) / (T(1) + std::exp(-v));
    auto ti = t.impl();
    std::vector<T> saved = data;
    return make_op_result<T>(t.shape(), std::move(data), {t},
                             [ti, saved = std::move(saved)](GradStore<T>& gs, const std::vector<T>& og) {
                                 if (!ti->requires_grad) return;
                                 auto& g = gs.of(ti.get());
                                 for (std::size_t i = 0; i < og.size(); ++i) g[i] += og[i] * saved[i] * (T(1) - saved[i]);
                             });
}

// Clamp to [0,1]; subgradient passes through inside the range (inclusive) and
// is zero outside.
template <typename T>
Tensor<T> clamp01(const Tensor<T>& t) {
    std::vector<T> data(t.data().begin(), t.data().end());
    for (auto& v : data) v = std::min(T(1), std::max(T(0), v));
    auto ti = t.impl();
    return make_op_result<T>(t.shape(), std::move(data), {t}, [ti](GradStore<T>& gs, const std::vector<T>& og) {
        if (!ti->requires_grad) return;
        auto& g = gs.of(ti.get());
        for (std::size_t i = 0; i < og.size(); ++i) {
            const T v = ti->data[i];
            if (v >= T(0) && v <= T(1)) g[i] += og[i];
        }
    });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& t) {
    T acc = T(0);
    for (T v : t.data()) acc += v;
    auto ti = t.impl();
    return make_op_result<T>({}, {acc}, {t}, [ti](GradStore<T>& gs, const std::vector<T>& og) {
        if (!ti->requires_grad) return;
        auto& g = gs.of(ti.get());
        for (auto& v : g) v += og[0];
    });
}

template <typename T>
Tensor<T> abs_sum(const Tensor<T>& t) {
    T acc = T(0);
    for (T v : t.data()) acc += std::abs(v);
    auto ti = t.impl();
    return make_op_result<T>({}, {acc}, {t}, [ti](GradStore<T>& gs, const std::vector<T>& og) {
        if (!ti->requires_grad) return;
        auto& g = gs.of(ti.get());
        for (std::size_t i = 0; i < g.size(); ++i) {
            const T v = ti->data[i];
            if (v > T(0)) g[i] += og[0];
            else if (v < T(0)) g[i] -= og[0];
        }
    });
}

template <typename T>
Tensor<T> pick(const Tensor<T>& t, std::int64_t flat_index) {
    if (flat_index < 0 || flat_index >= t.numel())
        throw_validation("pick index " + std::to_string(flat_index) + " out of range for " + shape_str(t.shape()));
    auto ti = t.impl();
    return make_op_result<T>({}, {t.data()[static_cast<std::size_t>(flat_index)]}, {t},
                             [ti, flat_index](GradStore<T>& gs, const std::vector<T>& og) {
                                 if (!ti->requires_grad) return;
                                 gs.of(ti.get())[static_cast<std::size_t>(flat_index)] += og[0];
                             });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& t, Shape shape) {
    if (shape_numel(shape) != t.numel())
        throw_shape("reshape " + shape_str(t.shape()) + " -> " + shape_str(shape) + " changes element count");
    std::vector<T> data(t.data().begin(), t.data().end());
    auto ti = t.impl();
    return make_op_result<T>(std::move(shape), std::move(data), {t}, [ti](GradStore<T>& gs, const std::vector<T>& og) {
        if (!ti->requires_grad) return;
        auto& g = gs.of(ti.get());
        for (std::size_t i = 0; i < og.size(); ++i) g[i] += og[i];
    });
}

// Contiguous slice [start, start+count) along the leading (batch) axis.
template <typename T>
Tensor<T> slice_batch(const Tensor<T>& t, std::int64_t start, std::int64_t count) {
    if (t.rank() < 1) throw_shape("slice_batch needs a batch axis, got scalar");
    const std::int64_t n = t.dim(0);
    if (start < 0 || count < 0 || start + count > n)
        throw_validation("slice_batch [" + std::to_string(start) + "," + std::to_string(start + count) +
                         ") out of range for batch of " + std::to_string(n));
    const std::int64_t per = t.numel() / std::max<std::int64_t>(n, 1);
    Shape out_shape = t.shape();
    out_shape[0] = count;
    std::vector<T> data(t.data().begin() + start * per, t.data().begin() + (start + count) * per);
    auto ti = t.impl();
    return make_op_result<T>(std::move(out_shape), std::move(data), {t},
                             [ti, start, per](GradStore<T>& gs, const std::vector<T>& og) {
                                 if (!ti->requires_grad) return;
                                 auto& g = gs.of(ti.get());
                                 for (std::size_t i = 0; i < og.size(); ++i)
                                     g[static_cast<std::size_t>(start * per) + i] += og[i];
                             });
}

// Stacks two NxCxHxW tensors along the channel axis.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 4 || b.rank() != 4)
        throw_shape("concat_channels expects rank-4 tensors, got " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
    if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3))
        throw_shape("concat_channels mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    const std::int64_t n = a.dim(0), ca = a.dim(1), cb = b.dim(1), hw = a.dim(2) * a.dim(3);
    std::vector<T> data(static_cast<std::size_t>(n * (ca + cb) * hw));
    auto ad = a.data();
    auto bd = b.data();
    for (std::int64_t i = 0; i < n; ++i) {
        std::copy_n(ad.data() + i * ca * hw, ca * hw, data.data() + i * (ca + cb) * hw);
        std::copy_n(bd.data() + i * cb * hw, cb * hw, data.data() + i * (ca + cb) * hw + ca * hw);
    }
    auto ai = a.impl();
    auto bi = b.impl();
    return make_op_result<T>({n, ca + cb, a.dim(2), a.dim(3)}, std::move(data), {a, b},
                             [=](GradStore<T>& gs, const std::vector<T>& og) {
                                 for (std::int64_t i = 0; i < n; ++i) {
                                     const T* src = og.data() + i * (ca + cb) * hw;
                                     if (ai->requires_grad) {
                                         auto& ga = gs.of(ai.get());
                                         for (std::int64_t j = 0; j < ca * hw; ++j) ga[i * ca * hw + j] += src[j];
                                     }
                                     if (bi->requires_grad) {
                                         auto& gb = gs.of(bi.get());
                                         for (std::int64_t j = 0; j < cb * hw; ++j) gb[i * cb * hw + j] += src[ca * hw + j];
                                     }
                                 }
                             });
}

// out = x * w^T + bias, x: NxD, w: MxD, bias: M
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    if (x.rank() != 2 || w.rank() != 2) throw_shape("linear expects 2-d input and weight");
    const std::int64_t n = x.dim(0), d = x.dim(1), m = w.dim(0);
    if (w.dim(1) != d)
        throw_shape("linear weight " + shape_str(w.shape()) + " incompatible with input " + shape_str(x.shape()));
    if (b.numel() != m) throw_shape("linear bias size " + std::to_string(b.numel()) + " != " + std::to_string(m));
    std::vector<T> data(static_cast<std::size_t>(n * m));
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < m; ++j) data[i * m + j] = b.data()[j];
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::int64_t i = 0; i < n; ++i)
        kernels::gemm_nt(x.data().data() + i * d, w.data().data(), data.data() + i * m, 1, d, m);
    auto xi = x.impl();
    auto wi = w.impl();
    auto bi = b.impl();
    return make_op_result<T>(
        {n, m}, std::move(data), {x, w, b}, [=](GradStore<T>& gs, const std::vector<T>& og) {
            if (xi->requires_grad) {
                auto& gx = gs.of(xi.get());
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
                for (std::int64_t i = 0; i < n; ++i)
                    kernels::gemm_nn(og.data() + i * m, wi->data.data(), gx.data() + i * d, 1, m, d);
            }
            if (wi->requires_grad) {
                auto& gw = gs.of(wi.get());
                // dW[j,:] += sum_n og[n,j] * x[n,:], n ascending per element
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
                for (std::int64_t j = 0; j < m; ++j)
                    for (std::int64_t i = 0; i < n; ++i) {
                        const T o = og[i * m + j];
                        if (o == T(0)) continue;
                        const T* xrow = xi->data.data() + i * d;
                        T* grow = gw.data() + j * d;
                        for (std::int64_t k = 0; k < d; ++k) grow[k] += o * xrow[k];
                    }
            }
            if (bi->requires_grad) {
                auto& gb = gs.of(bi.get());
                for (std::int64_t i = 0; i < n; ++i)
                    for (std::int64_t j = 0; j < m; ++j) gb[j] += og[i * m + j];
            }
        });
}

// Non-overlapping k x k mean pooling.
template <typename T>
Tensor<T> avg_pool2d(const Tensor<T>& x, std::int64_t k) {
    if (x.rank() != 4) throw_shape("avg_pool2d expects NxCxHxW, got " + shape_str(x.shape()));
    if (k < 1) throw_validation("avg_pool2d window must be >= 1");
    const std::int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (h % k != 0 || w % k != 0)
        throw_shape("avg_pool2d window " + std::to_string(k) + " does not divide " + shape_str(x.shape()));
    const std::int64_t oh = h / k, ow = w / k;
    std::vector<T> data(static_cast<std::size_t>(n * c * oh * ow));
    auto xd = x.data();
    const T inv = T(1) / static_cast<T>(k * k);
    for (std::int64_t img = 0; img < n * c; ++img) {
        const T* plane = xd.data() + img * h * w;
        T* out = data.data() + img * oh * ow;
        for (std::int64_t y = 0; y < oh; ++y)
            for (std::int64_t xcol = 0; xcol < ow; ++xcol) {
                T acc = T(0);
                for (std::int64_t u = 0; u < k; ++u)
                    for (std::int64_t v = 0; v < k; ++v) acc += plane[(y * k + u) * w + xcol * k + v];
                out[y * ow + xcol] = acc * inv;
            }
    }
    auto xi = x.impl();
    return make_op_result<T>({n, c, oh, ow}, std::move(data), {x},
                             [=](GradStore<T>& gs, const std::vector<T>& og) {
                                 if (!xi->requires_grad) return;
                                 auto& gx = gs.of(xi.get());
                                 for (std::int64_t img = 0; img < n * c; ++img) {
                                     const T* o = og.data() + img * oh * ow;
                                     T* g = gx.data() + img * h * w;
                                     for (std::int64_t y = 0; y < oh; ++y)
                                         for (std::int64_t xcol = 0; xcol < ow; ++xcol) {
                                             const T v = o[y * ow + xcol] * inv;
                                             for (std::int64_t u = 0; u < k; ++u)
                                                 for (std::int64_t vv = 0; vv < k; ++vv)
                                                     g[(y * k + u) * w + xcol * k + vv] += v;
                                         }
                                 }
                             });
}

// Mean over the batch of -log softmax(logits)[label], max-subtraction stabilized.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels) {
    if (logits.rank() != 2) throw_shape("cross_entropy expects NxK logits, got " + shape_str(logits.shape()));
    const std::int64_t n = logits.dim(0), k = logits.dim(1);
    if (static_cast<std::int64_t>(labels.size()) != n)
        throw_validation("cross_entropy: " + std::to_string(labels.size()) + " labels for " + std::to_string(n) + " rows");
    if (n == 0) throw_validation("cross_entropy on empty batch");
    for (int y : labels)
        if (y < 0 || y >= k) throw_validation("cross_entropy label " + std::to_string(y) + " outside [0," + std::to_string(k) + ")");
    auto ld = logits.data();
    std::vector<T> probs(static_cast<std::size_t>(n * k));
    T loss = T(0);
    for (std::int64_t i = 0; i < n; ++i) {
        const T* row = ld.data() + i * k;
        T mx = row[0];
        for (std::int64_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
        T z = T(0);
        for (std::int64_t j = 0; j < k; ++j) z += std::exp(row[j] - mx);
        const T logz = std::log(z) + mx;
        for (std::int64_t j = 0; j < k; ++j) probs[i * k + j] = std::exp(row[j] - logz);
        loss += logz - row[labels[static_cast<std::size_t>(i)]];
    }
    loss /= static_cast<T>(n);
    auto li = logits.impl();
    return make_op_result<T>({}, {loss}, {logits},
                             [li, labels, probs = std::move(probs), n, k](GradStore<T>& gs, const std::vector<T>& og) {
                                 if (!li->requires_grad) return;
                                 auto& g = gs.of(li.get());
                                 const T scale = og[0] / static_cast<T>(n);
                                 for (std::int64_t i = 0; i < n; ++i)
                                     for (std::int64_t j = 0; j < k; ++j) {
                                         T p = probs[i * k + j];
                                         if (j == labels[static_cast<std::size_t>(i)]) p -= T(1);
                                         g[i * k + j] += scale * p;
                                     }
                             });
}

// Per-sample max of |values| averaged over the batch. Rank >= 2 treats dim 0
// as the batch; a rank-0/1 tensor is a single sample. Subgradient routes
// sign(v) to each sample's argmax element, ties broken by lowest flat index.
template <typename T>
Tensor<T> linf_norm(const Tensor<T>& t) {
    if (t.numel() == 0) throw_validation("linf_norm of empty tensor");
    const std::int64_t batch = t.rank() >= 2 ? t.dim(0) : 1;
    const std::int64_t per = t.numel() / batch;
    auto td = t.data();
    std::vector<std::int64_t> argmax(static_cast<std::size_t>(batch));
    T acc = T(0);
    for (std::int64_t i = 0; i < batch; ++i) {
        const T* row = td.data() + i * per;
        std::int64_t best = 0;
        T bestv = std::abs(row[0]);
        for (std::int64_t j = 1; j < per; ++j) {
            const T v = std::abs(row[j]);
            if (v > bestv) {
                bestv = v;
                best = j;
            }
        }
        argmax[static_cast<std::size_t>(i)] = best;
        acc += bestv;
    }
    acc /= static_cast<T>(batch);
    auto ti = t.impl();
    return make_op_result<T>({}, {acc}, {t},
                             [ti, argmax = std::move(argmax), batch, per](GradStore<T>& gs, const std::vector<T>& og) {
                                 if (!ti->requires_grad) return;
                                 auto& g = gs.of(ti.get());
                                 const T scale = og[0] / static_cast<T>(batch);
                                 for (std::int64_t i = 0; i < batch; ++i) {
                                     const std::int64_t j = i * per + argmax[static_cast<std::size_t>(i)];
                                     const T v = ti->data[static_cast<std::size_t>(j)];
                                     if (v > T(0)) g[j] += scale;
                                     else if (v < T(0)) g[j] -= scale;
                                 }
                             });
}

}  // namespace waveattack
