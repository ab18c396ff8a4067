#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "waveattack/tensor.hpp"

namespace waveattack::testing {

struct GradCheckResult {
    bool ok = true;
    double max_rel_err = 0.0;
    std::string detail;
};

// Central finite-difference check in float64. `forward` must rebuild the graph
// from the current leaf values and return a scalar loss; `leaves` are the
// tensors whose autodiff gradients are verified. Relative error uses
// |ad - fd| / max(1, |ad|, |fd|).
inline GradCheckResult gradcheck(const std::function<Tensor<double>()>& forward,
                                 std::vector<Tensor<double>> leaves, double h = 1e-3,
                                 double tol = 1e-5) {
    GradCheckResult res;
    for (auto& l : leaves) l.zero_grad();
    Tensor<double> loss = forward();
    loss.backward();
    std::vector<std::vector<double>> analytic;
    for (auto& l : leaves) {
        if (!l.has_grad()) {
            analytic.emplace_back(static_cast<std::size_t>(l.numel()), 0.0);
            continue;
        }
        analytic.emplace_back(l.grad().begin(), l.grad().end());
    }
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        auto data = leaves[li].mutable_data();
        for (std::size_t j = 0; j < data.size(); ++j) {
            const double orig = data[j];
            data[j] = orig + h;
            const double up = forward().item();
            data[j] = orig - h;
            const double dn = forward().item();
            data[j] = orig;
            const double fd = (up - dn) / (2.0 * h);
            const double ad = analytic[li][j];
            const double rel = std::abs(ad - fd) / std::max({1.0, std::abs(ad), std::abs(fd)});
            if (rel > res.max_rel_err) {
                res.max_rel_err = rel;
                res.detail = "leaf " + std::to_string(li) + " elem " + std::to_string(j) + ": ad=" +
                             std::to_string(ad) + " fd=" + std::to_string(fd);
            }
        }
    }
    res.ok = res.max_rel_err <= tol;
    return res;
}

// Scalarizes a tensor-valued op with fixed random weights so the full Jacobian
// is exercised: loss = sum(w . f(x)).
inline Tensor<double> weighted_sum(const Tensor<double>& t, const std::vector<double>& weights) {
    Tensor<double> w = Tensor<double>::from_data(t.shape(), weights);
    return sum(mul(t, w));
}

inline std::vector<double> random_weights(std::int64_t n, Rng& rng) {
    std::vector<double> w(static_cast<std::size_t>(n));
    for (auto& v : w) v = rng.uniform(-1.0, 1.0);
    return w;
}

}  // namespace waveattack::testing
