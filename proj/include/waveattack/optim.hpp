#pragma once

#include <cmath>
#include <vector>

#include "waveattack/tensor.hpp"

namespace waveattack {

// SGD-with-momentum and Adam over a fixed parameter set. step() consumes the
// accumulated gradients and zeroes them; a parameter without a populated
// gradient is a usage error.
template <typename T>
class Optimizer {
public:
    enum class Kind { SgdMomentum, Adam };

    static Optimizer sgd(std::vector<Tensor<T>> params, T lr, T momentum) {
        Optimizer o(Kind::SgdMomentum, std::move(params), lr);
        o.momentum_ = momentum;
        o.state_a_.resize(o.params_.size());
        for (std::size_t i = 0; i < o.params_.size(); ++i)
            o.state_a_[i].assign(static_cast<std::size_t>(o.params_[i].numel()), T(0));
        return o;
    }

    static Optimizer adam(std::vector<Tensor<T>> params, T lr, T beta1 = T(0.9), T beta2 = T(0.999),
                          T eps = T(1e-8)) {
        Optimizer o(Kind::Adam, std::move(params), lr);
        o.beta1_ = beta1;
        o.beta2_ = beta2;
        o.eps_ = eps;
        o.state_a_.resize(o.params_.size());
        o.state_b_.resize(o.params_.size());
        for (std::size_t i = 0; i < o.params_.size(); ++i) {
            o.state_a_[i].assign(static_cast<std::size_t>(o.params_[i].numel()), T(0));
            o.state_b_[i].assign(static_cast<std::size_t>(o.params_[i].numel()), T(0));
        }
        return o;
    }

    Kind kind() const { return kind_; }
    T lr() const { return lr_; }
    void set_lr(T lr) { lr_ = lr; }
    const std::vector<Tensor<T>>& params() const { return params_; }

    void step() {
        for (auto& p : params_)
            if (!p.has_grad())
                throw_usage("optimizer step with missing gradient on a parameter of shape " + shape_str(p.shape()));
        ++t_;
        for (std::size_t i = 0; i < params_.size(); ++i) {
            auto data = params_[i].mutable_data();
            auto grad = params_[i].grad();
            if (kind_ == Kind::SgdMomentum) {
                auto& vel = state_a_[i];
                for (std::size_t j = 0; j < data.size(); ++j) {
                    vel[j] = momentum_ * vel[j] + grad[j];
                    data[j] -= lr_ * vel[j];
                }
            } else {
                auto& m = state_a_[i];
                auto& v = state_b_[i];
                const T bc1 = T(1) - std::pow(beta1_, static_cast<T>(t_));
                const T bc2 = T(1) - std::pow(beta2_, static_cast<T>(t_));
                for (std::size_t j = 0; j < data.size(); ++j) {
                    m[j] = beta1_ * m[j] + (T(1) - beta1_) * grad[j];
                    v[j] = beta2_ * v[j] + (T(1) - beta2_) * grad[j] * grad[j];
                    const T mhat = m[j] / bc1;
                    const T vhat = v[j] / bc2;
                    data[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
                }
            }
        }
        for (auto& p : params_) p.zero_grad();
    }

private:
    Optimizer(Kind kind, std::vector<Tensor<T>> params, T lr) : kind_(kind), params_(std::move(params)), lr_(lr) {}

    Kind kind_;
    std::vector<Tensor<T>> params_;
    T lr_;
    T momentum_ = T(0);
    T beta1_ = T(0.9), beta2_ = T(0.999), eps_ = T(1e-8);
    std::int64_t t_ = 0;
    std::vector<std::vector<T>> state_a_;  // velocity (SGD) or first moment (Adam)
    std::vector<std::vector<T>> state_b_;  // second moment (Adam)
};

}  // namespace waveattack
