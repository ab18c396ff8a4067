#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "waveattack/attack.hpp"
#include "waveattack/dataset.hpp"
#include "waveattack/nets.hpp"

namespace waveattack {

struct AttackReport {
    double ba = 0.0;
    double asr = 0.0;
    double psnr_db = 0.0;
    double ssim = 0.0;
    double alpha_used = 0.0;
    std::int64_t n_eval = 0;
};

// 10*log10(1/MSE) over [0,1] images; infinity when the images are identical.
template <typename T>
double psnr(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape())
        throw_shape("psnr shape mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    auto ad = a.data();
    auto bd = b.data();
    double mse = 0.0;
    for (std::size_t i = 0; i < ad.size(); ++i) {
        const double d = static_cast<double>(ad[i]) - static_cast<double>(bd[i]);
        mse += d * d;
    }
    mse /= static_cast<double>(ad.size());
    return mse == 0.0 ? std::numeric_limits<double>::infinity() : 10.0 * std::log10(1.0 / mse);
}

namespace detail {

inline const std::vector<double>& ssim_window() {
    static const std::vector<double> win = [] {
        constexpr int k = 11;
        constexpr double sigma = 1.5;
        std::vector<double> w(k * k);
        double total = 0.0;
        for (int y = 0; y < k; ++y)
            for (int x = 0; x < k; ++x) {
                const double dy = y - (k - 1) / 2.0, dx = x - (k - 1) / 2.0;
                w[y * k + x] = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
                total += w[y * k + x];
            }
        for (auto& v : w) v /= total;
        return w;
    }();
    return win;
}

}  // namespace detail

// Mean local SSIM, 11x11 Gaussian window (sigma 1.5), C1=(0.01)^2, C2=(0.03)^2
// on [0,1] range, averaged over valid window positions, channels and samples.
template <typename T>
double ssim(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape())
        throw_shape("ssim shape mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    if (a.rank() != 4 && a.rank() != 3) throw_shape("ssim expects (N)xCxHxW images, got " + shape_str(a.shape()));
    const std::int64_t h = a.dim(a.rank() - 2), w = a.dim(a.rank() - 1);
    constexpr int k = 11;
    if (h < k || w < k)
        throw_validation("ssim needs images of at least " + std::to_string(k) + "x" + std::to_string(k) + ", got " +
                         shape_str(a.shape()));
    constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    const auto& win = detail::ssim_window();
    const std::int64_t planes = a.numel() / (h * w);
    auto ad = a.data();
    auto bd = b.data();
    double acc = 0.0;
    std::int64_t count = 0;
    for (std::int64_t pl = 0; pl < planes; ++pl) {
        const T* pa = ad.data() + pl * h * w;
        const T* pb = bd.data() + pl * h * w;
        for (std::int64_t y = 0; y + k <= h; ++y)
            for (std::int64_t x = 0; x + k <= w; ++x) {
                double mu1 = 0, mu2 = 0, s11 = 0, s22 = 0, s12 = 0;
                for (int u = 0; u < k; ++u)
                    for (int v = 0; v < k; ++v) {
                        const double wgt = win[u * k + v];
                        const double va = pa[(y + u) * w + x + v];
                        const double vb = pb[(y + u) * w + x + v];
                        mu1 += wgt * va;
                        mu2 += wgt * vb;
                        s11 += wgt * va * va;
                        s22 += wgt * vb * vb;
                        s12 += wgt * va * vb;
                    }
                const double var1 = s11 - mu1 * mu1;
                const double var2 = s22 - mu2 * mu2;
                const double cov = s12 - mu1 * mu2;
                acc += ((2 * mu1 * mu2 + c1) * (2 * cov + c2)) /
                       ((mu1 * mu1 + mu2 * mu2 + c1) * (var1 + var2 + c2));
                ++count;
            }
    }
    return acc / static_cast<double>(count);
}

namespace detail {

template <typename T>
std::vector<int> predict_labels(const ClassifierNet<T>& clf, const Tensor<T>& images,
                                std::int64_t eval_batch = 200) {
    NoGradGuard ng;
    const std::int64_t n = images.dim(0);
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(n));
    for (std::int64_t off = 0; off < n; off += eval_batch) {
        const std::int64_t b = std::min(eval_batch, n - off);
        Tensor<T> logits = clf.forward(slice_batch(images, off, b));
        auto d = logits.data();
        const std::int64_t k = logits.dim(1);
        for (std::int64_t i = 0; i < b; ++i) {
            const T* row = d.data() + i * k;
            int best = 0;
            for (int j = 1; j < k; ++j)
                if (row[j] > row[best]) best = j;
            out.push_back(best);
        }
    }
    return out;
}

}  // namespace detail

// Fraction of argmax-correct predictions on the clean set.
template <typename T>
double benign_accuracy(const ClassifierNet<T>& clf, const LabeledDataset& test) {
    if (test.count == 0) throw_validation("benign_accuracy on empty test set");
    std::vector<std::int64_t> idx(static_cast<std::size_t>(test.count));
    std::iota(idx.begin(), idx.end(), 0);
    const std::vector<int> pred = detail::predict_labels(clf, test.gather(idx));
    std::int64_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        if (pred[i] == test.labels[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(test.count);
}

// Poison every non-target test sample at alpha_infer; ASR is the fraction
// predicted as the target label.
template <typename T>
double attack_success_rate(const ClassifierNet<T>& clf, const GeneratorNet<T>& gen, const PoisonPlan& plan,
                           const LabeledDataset& test) {
    std::vector<std::int64_t> eligible;
    for (std::int64_t i = 0; i < test.count; ++i)
        if (test.labels[static_cast<std::size_t>(i)] != plan.target_label) eligible.push_back(i);
    if (eligible.empty()) throw_validation("attack_success_rate: no samples outside the target class");
    NoGradGuard ng;
    std::int64_t hits = 0;
    constexpr std::int64_t kBatch = 200;
    for (std::size_t off = 0; off < eligible.size(); off += kBatch) {
        const std::size_t b = std::min<std::size_t>(kBatch, eligible.size() - off);
        std::vector<std::int64_t> idx(eligible.begin() + off, eligible.begin() + off + b);
        Tensor<T> poisoned = poison_for_inference(test.gather(idx), gen, plan);
        const std::vector<int> pred = detail::predict_labels(clf, poisoned);
        for (int p : pred)
            if (p == plan.target_label) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(eligible.size());
}

// Same measurement for an arbitrary poisoning function (BadNets baseline).
template <typename T, typename PoisonFn>
double attack_success_rate_with(const ClassifierNet<T>& clf, PoisonFn&& poison, int target_label,
                                const LabeledDataset& test) {
    std::vector<std::int64_t> eligible;
    for (std::int64_t i = 0; i < test.count; ++i)
        if (test.labels[static_cast<std::size_t>(i)] != target_label) eligible.push_back(i);
    if (eligible.empty()) throw_validation("attack_success_rate: no samples outside the target class");
    NoGradGuard ng;
    std::int64_t hits = 0;
    constexpr std::int64_t kBatch = 200;
    for (std::size_t off = 0; off < eligible.size(); off += kBatch) {
        const std::size_t b = std::min<std::size_t>(kBatch, eligible.size() - off);
        std::vector<std::int64_t> idx(eligible.begin() + off, eligible.begin() + off + b);
        const std::vector<int> pred = detail::predict_labels(clf, poison(test.gather(idx)));
        for (int p : pred)
            if (p == target_label) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(eligible.size());
}

}  // namespace waveattack
