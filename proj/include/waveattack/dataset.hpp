#pragma once

#include <cstdint>
#include <vector>

#include "waveattack/error.hpp"
#include "waveattack/rng.hpp"
#include "waveattack/tensor.hpp"

namespace waveattack {

// Labeled image set in [0,1] float, NxCxHxW row-major.
struct LabeledDataset {
    std::vector<float> images;
    std::vector<int> labels;
    std::int64_t count = 0;
    std::int64_t channels = 3;
    std::int64_t height = 32;
    std::int64_t width = 32;
    int num_classes = 10;

    std::int64_t image_size() const { return channels * height * width; }

    void validate() const {
        if (static_cast<std::int64_t>(labels.size()) != count ||
            static_cast<std::int64_t>(images.size()) != count * image_size())
            throw_validation("dataset buffers inconsistent with count " + std::to_string(count));
        for (float v : images)
            if (!(v >= 0.0f && v <= 1.0f)) throw_validation("dataset pixel outside [0,1]");
        for (int y : labels)
            if (y < 0 || y >= num_classes)
                throw_validation("dataset label " + std::to_string(y) + " outside [0," + std::to_string(num_classes) + ")");
    }

    Tensor<float> image(std::int64_t i) const {
        const auto sz = image_size();
        return Tensor<float>::from_data({1, channels, height, width},
                                        {images.begin() + i * sz, images.begin() + (i + 1) * sz});
    }

    Tensor<float> gather(const std::vector<std::int64_t>& idx) const {
        const auto sz = image_size();
        std::vector<float> out(idx.size() * static_cast<std::size_t>(sz));
        for (std::size_t k = 0; k < idx.size(); ++k)
            std::copy_n(images.data() + idx[k] * sz, sz, out.data() + k * sz);
        return Tensor<float>::from_data({static_cast<std::int64_t>(idx.size()), channels, height, width},
                                        std::move(out));
    }

    std::vector<int> gather_labels(const std::vector<std::int64_t>& idx) const {
        std::vector<int> out(idx.size());
        for (std::size_t k = 0; k < idx.size(); ++k) out[k] = labels[static_cast<std::size_t>(idx[k])];
        return out;
    }

    LabeledDataset subset(std::int64_t start, std::int64_t n) const {
        if (start < 0 || n < 0 || start + n > count) throw_validation("dataset subset out of range");
        LabeledDataset d = *this;
        const auto sz = image_size();
        d.count = n;
        d.images.assign(images.begin() + start * sz, images.begin() + (start + n) * sz);
        d.labels.assign(labels.begin() + start, labels.begin() + start + n);
        return d;
    }
};

// Pad-4 random crop plus horizontal flip, drawn sequentially per sample so the
// stream is independent of any internal parallelism.
inline Tensor<float> augment_batch(const Tensor<float>& batch, bool crop, bool flip, Rng& rng) {
    if (!crop && !flip) return batch;
    const std::int64_t n = batch.dim(0), c = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
    constexpr std::int64_t kPad = 4;
    std::vector<float> out(batch.data().begin(), batch.data().end());
    for (std::int64_t i = 0; i < n; ++i) {
        std::int64_t oy = 0, ox = 0;
        bool do_flip = false;
        if (crop) {
            oy = static_cast<std::int64_t>(rng.uniform_int(2 * kPad + 1)) - kPad;
            ox = static_cast<std::int64_t>(rng.uniform_int(2 * kPad + 1)) - kPad;
        }
        if (flip) do_flip = rng.uniform01() < 0.5;
        if (oy == 0 && ox == 0 && !do_flip) continue;
        const float* src = batch.data().data() + i * c * h * w;
        float* dst = out.data() + i * c * h * w;
        for (std::int64_t ch = 0; ch < c; ++ch)
            for (std::int64_t y = 0; y < h; ++y)
                for (std::int64_t x = 0; x < w; ++x) {
                    const std::int64_t sx = do_flip ? w - 1 - x : x;
                    const std::int64_t iy = y + oy, ix = sx + ox;
                    dst[(ch * h + y) * w + x] =
                        (iy >= 0 && iy < h && ix >= 0 && ix < w) ? src[(ch * h + iy) * w + ix] : 0.0f;
                }
    }
    return Tensor<float>::from_data(batch.shape(), std::move(out));
}

}  // namespace waveattack
