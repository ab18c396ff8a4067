#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "waveattack/conv.hpp"
#include "waveattack/ops.hpp"
#include "waveattack/rng.hpp"
#include "waveattack/tensor.hpp"

namespace waveattack {

namespace detail {

// Kaiming-uniform fan-in init, zero bias.
template <typename T>
Tensor<T> kaiming_uniform(Shape shape, std::int64_t fan_in, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    return Tensor<T>::uniform(std::move(shape), static_cast<T>(-bound), static_cast<T>(bound), rng).set_requires_grad();
}

template <typename T>
Tensor<T> zero_param(Shape shape) {
    return Tensor<T>::zeros(std::move(shape)).set_requires_grad();
}

}  // namespace detail

// U-Net-lite residual generator over the HH subband:
//   conv(C->16,3x3,s1)+ReLU -> conv(16->32,3x3,s2)+ReLU ->
//   convT(32->16,2x2,s2)+ReLU -> concat skip -> conv(32->C,3x3,s1), linear out.
// Output shape equals input shape; all-zero parameters give a zero residual.
template <typename T = float>
struct GeneratorNet {
    std::int64_t channels = 3;
    Tensor<T> w_enc1, b_enc1;
    Tensor<T> w_enc2, b_enc2;
    Tensor<T> w_up, b_up;
    Tensor<T> w_out, b_out;

    static GeneratorNet init(std::int64_t channels, Rng& rng) {
        GeneratorNet g = zeros(channels);
        g.w_enc1 = detail::kaiming_uniform<T>({16, channels, 3, 3}, channels * 9, rng);
        g.w_enc2 = detail::kaiming_uniform<T>({32, 16, 3, 3}, 16 * 9, rng);
        g.w_up = detail::kaiming_uniform<T>({32, 16, 2, 2}, 32 * 4, rng);
        g.w_out = detail::kaiming_uniform<T>({channels, 32, 3, 3}, 32 * 9, rng);
        return g;
    }

    static GeneratorNet zeros(std::int64_t channels) {
        GeneratorNet g;
        g.channels = channels;
        g.w_enc1 = detail::zero_param<T>({16, channels, 3, 3});
        g.b_enc1 = detail::zero_param<T>({16});
        g.w_enc2 = detail::zero_param<T>({32, 16, 3, 3});
        g.b_enc2 = detail::zero_param<T>({32});
        g.w_up = detail::zero_param<T>({32, 16, 2, 2});
        g.b_up = detail::zero_param<T>({16});
        g.w_out = detail::zero_param<T>({channels, 32, 3, 3});
        g.b_out = detail::zero_param<T>({channels});
        return g;
    }

    Tensor<T> forward(const Tensor<T>& hh) const {
        if (hh.rank() != 4 || hh.dim(1) != channels)
            throw_shape("generator configured for " + std::to_string(channels) + " channels, got input " +
                        shape_str(hh.shape()));
        if (hh.dim(2) % 2 != 0 || hh.dim(3) % 2 != 0)
            throw_shape("generator input needs even spatial dims, got " + shape_str(hh.shape()));
        Tensor<T> a1 = relu(conv2d(hh, w_enc1, b_enc1, 1, 1));
        Tensor<T> a2 = relu(conv2d(a1, w_enc2, b_enc2, 2, 1));
        Tensor<T> up = relu(conv_transpose2d(a2, w_up, b_up, 2, 0));
        return conv2d(concat_channels(up, a1), w_out, b_out, 1, 1);
    }

    std::vector<Tensor<T>> parameters() const {
        return {w_enc1, b_enc1, w_enc2, b_enc2, w_up, b_up, w_out, b_out};
    }

    std::vector<std::pair<std::string, Tensor<T>>> named_parameters() const {
        return {{"gen.enc1.weight", w_enc1}, {"gen.enc1.bias", b_enc1}, {"gen.enc2.weight", w_enc2},
                {"gen.enc2.bias", b_enc2},   {"gen.up.weight", w_up},   {"gen.up.bias", b_up},
                {"gen.out.weight", w_out},   {"gen.out.bias", b_out}};
    }
};

template <typename T = float>
struct ClassifierOutputs {
    Tensor<T> logits;     // NxK
    Tensor<T> features;   // Nx256, penultimate post-ReLU
    Tensor<T> last_conv;  // Nx64x8x8, post-ReLU
};

// Toy CNN classifier for 3x32x32 inputs:
//   conv(3->32,s1)+ReLU -> conv(32->32,s2)+ReLU -> conv(32->64,s1)+ReLU ->
//   conv(64->64,s2)+ReLU -> flatten -> linear(256)+ReLU -> linear(K).
template <typename T = float>
struct ClassifierNet {
    int num_classes = 10;
    Tensor<T> w1, b1, w2, b2, w3, b3, w4, b4;
    Tensor<T> wf1, bf1, wf2, bf2;

    static ClassifierNet init(int num_classes, Rng& rng) {
        ClassifierNet c;
        c.num_classes = num_classes;
        c.w1 = detail::kaiming_uniform<T>({32, 3, 3, 3}, 3 * 9, rng);
        c.b1 = detail::zero_param<T>({32});
        c.w2 = detail::kaiming_uniform<T>({32, 32, 3, 3}, 32 * 9, rng);
        c.b2 = detail::zero_param<T>({32});
        c.w3 = detail::kaiming_uniform<T>({64, 32, 3, 3}, 32 * 9, rng);
        c.b3 = detail::zero_param<T>({64});
        c.w4 = detail::kaiming_uniform<T>({64, 64, 3, 3}, 64 * 9, rng);
        c.b4 = detail::zero_param<T>({64});
        c.wf1 = detail::kaiming_uniform<T>({256, 64 * 8 * 8}, 64 * 8 * 8, rng);
        c.bf1 = detail::zero_param<T>({256});
        c.wf2 = detail::kaiming_uniform<T>({num_classes, 256}, 256, rng);
        c.bf2 = detail::zero_param<T>({num_classes});
        return c;
    }

    // conv4_channel_mask, when given, zeroes the selected channels of the last
    // conv activation (fine-pruning hook). Size must be 64.
    ClassifierOutputs<T> forward_full(const Tensor<T>& x, const std::vector<T>* conv4_channel_mask = nullptr) const {
        if (x.rank() != 4 || x.dim(1) != 3 || x.dim(2) != 32 || x.dim(3) != 32)
            throw_shape("classifier expects Nx3x32x32 input, got " + shape_str(x.shape()));
        Tensor<T> a = relu(conv2d(x, w1, b1, 1, 1));
        a = relu(conv2d(a, w2, b2, 2, 1));
        a = relu(conv2d(a, w3, b3, 1, 1));
        Tensor<T> a4 = relu(conv2d(a, w4, b4, 2, 1));
        if (conv4_channel_mask) {
            if (conv4_channel_mask->size() != 64) throw_validation("conv4 channel mask must have 64 entries");
            Tensor<T> mask = Tensor<T>::from_data({1, 64, 1, 1}, *conv4_channel_mask);
            a4 = mul(a4, mask);
        }
        Tensor<T> flat = reshape(a4, {x.dim(0), 64 * 8 * 8});
        Tensor<T> feat = relu(linear(flat, wf1, bf1));
        Tensor<T> logits = linear(feat, wf2, bf2);
        return {logits, feat, a4};
    }

    Tensor<T> forward(const Tensor<T>& x) const { return forward_full(x).logits; }

    std::vector<Tensor<T>> parameters() const {
        return {w1, b1, w2, b2, w3, b3, w4, b4, wf1, bf1, wf2, bf2};
    }

    std::vector<std::pair<std::string, Tensor<T>>> named_parameters() const {
        return {{"clf.conv1.weight", w1}, {"clf.conv1.bias", b1}, {"clf.conv2.weight", w2},
                {"clf.conv2.bias", b2},   {"clf.conv3.weight", w3}, {"clf.conv3.bias", b3},
                {"clf.conv4.weight", w4}, {"clf.conv4.bias", b4},   {"clf.fc1.weight", wf1},
                {"clf.fc1.bias", bf1},    {"clf.fc2.weight", wf2},  {"clf.fc2.bias", bf2}};
    }
};

}  // namespace waveattack
