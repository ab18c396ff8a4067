#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "waveattack/dataset.hpp"
#include "waveattack/nets.hpp"
#include "waveattack/optim.hpp"
#include "waveattack/wavelet.hpp"

namespace waveattack {

// All attack hyperparameters. alpha_train stays small for stealth; inference
// uses the larger alpha_infer to drive the backdoor (asymmetric obfuscation).
struct PoisonPlan {
    double payload_rate = 0.05;         // p_a
    double regularization_rate = 0.05;  // p_r
    int target_label = 0;               // y_t
    double alpha_train = 1.0;
    double alpha_infer = 100.0;
    std::uint64_t seed = 1;

    void validate(int num_classes) const {
        if (payload_rate < 0 || payload_rate > 1 || regularization_rate < 0 || regularization_rate > 1)
            throw_config("poison rates must lie in [0,1]");
        if (payload_rate + regularization_rate > 1.0)
            throw_config("p_a + p_r must not exceed 1, got " + std::to_string(payload_rate + regularization_rate));
        if (target_label < 0 || target_label >= num_classes)
            throw_config("target label " + std::to_string(target_label) + " outside [0," + std::to_string(num_classes) + ")");
        if (alpha_train > alpha_infer)
            throw_config("alpha_train must not exceed alpha_infer (asymmetric obfuscation direction)");
    }
};

struct TrainConfig {
    int epochs = 30;
    std::int64_t batch_size = 64;
    double clf_lr = 0.01;
    double clf_momentum = 0.9;
    double gen_lr = 0.001;
    int lr_decay_every = 100;      // epochs
    double lr_decay_factor = 0.1;  // multiply
    bool augment_crop = true;
    bool augment_flip = true;

    void validate(const PoisonPlan& plan) const {
        if (epochs < 1) throw_config("epochs must be >= 1");
        if (batch_size < 2) throw_config("batch size must be >= 2");
        const double rate = plan.payload_rate + plan.regularization_rate;
        if (rate > 0 && static_cast<double>(batch_size) * rate < 1.0)
            throw_config("batch size " + std::to_string(batch_size) + " too small to hold poisoned samples at rate " +
                         std::to_string(rate));
    }
};

inline std::int64_t round_half_up(double x) { return static_cast<std::int64_t>(std::floor(x + 0.5)); }

struct PartitionCounts {
    std::int64_t payload = 0;        // first n_a samples, labels replaced by y_t
    std::int64_t regularization = 0; // next n_r samples, true labels kept
    std::int64_t benign = 0;         // remainder
    std::int64_t poisoned() const { return payload + regularization; }
};

// n_a = round(p_a*b), n_r = round(p_r*b), round-half-up. The batch is assumed
// pre-shuffled by the data loader, so taking leading slices is unbiased.
inline PartitionCounts partition_batch(std::int64_t batch_size, const PoisonPlan& plan) {
    if (batch_size < 1) throw_validation("partition of empty batch");
    PartitionCounts pc;
    pc.payload = round_half_up(plan.payload_rate * static_cast<double>(batch_size));
    pc.regularization = round_half_up(plan.regularization_rate * static_cast<double>(batch_size));
    if (pc.payload + pc.regularization > batch_size)
        throw_config("poisoned count " + std::to_string(pc.payload + pc.regularization) + " exceeds batch of " +
                     std::to_string(batch_size));
    pc.benign = batch_size - pc.payload - pc.regularization;
    return pc;
}

// HH' = HH + alpha * g(HH); poisoned = clamp01(x + synth(HH' - HH)). The
// residual is synthesized and added onto x directly, which keeps alpha = 0 (or
// a zero generator) bit-exact and touches only the HH band by construction.
template <typename T>
Tensor<T> apply_trigger(const Tensor<T>& images, const GeneratorNet<T>& gen, double alpha) {
    Tensor<T> hh = dwt2_band(images, Band::HH);
    Tensor<T> residual = scale(gen.forward(hh), static_cast<T>(alpha));
    return clamp01(add(images, idwt2_band(residual, Band::HH)));
}

template <typename T>
Tensor<T> poison_for_inference(const Tensor<T>& images, const GeneratorNet<T>& gen, const PoisonPlan& plan) {
    return apply_trigger(images, gen, plan.alpha_infer);
}

// BadNets-style contrast baseline: overwrites a bottom-right checkerboard
// patch (patch_value on even cells, 0 on odd cells), identically per channel.
template <typename T>
Tensor<T> badnets_poison(const Tensor<T>& images, std::int64_t patch_size, T patch_value) {
    if (images.rank() != 4) throw_shape("badnets_poison expects NxCxHxW, got " + shape_str(images.shape()));
    const std::int64_t n = images.dim(0), c = images.dim(1), h = images.dim(2), w = images.dim(3);
    if (patch_size < 1 || patch_size >= std::min(h, w))
        throw_config("badnets patch size " + std::to_string(patch_size) + " invalid for " + shape_str(images.shape()));
    std::vector<T> data(images.data().begin(), images.data().end());
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t ch = 0; ch < c; ++ch) {
            T* plane = data.data() + (i * c + ch) * h * w;
            for (std::int64_t u = 0; u < patch_size; ++u)
                for (std::int64_t v = 0; v < patch_size; ++v)
                    plane[(h - patch_size + u) * w + (w - patch_size + v)] = ((u + v) % 2 == 0) ? patch_value : T(0);
        }
    return Tensor<T>::from_data(images.shape(), std::move(data));
}

struct EpochRecord {
    int epoch = 0;
    double loss_payload = 0.0;         // L1
    double loss_regularization = 0.0;  // L2
    double loss_benign = 0.0;          // L3
    double loss_residual = 0.0;        // L_r
    double train_ba = 0.0;             // benign-slice accuracy
};

using TrainLog = std::vector<EpochRecord>;

enum class AttackKind { WaveAttack, BadNets, Clean };

namespace detail {

inline std::int64_t count_argmax_matches(const Tensor<float>& logits, const std::vector<int>& labels) {
    const std::int64_t n = logits.dim(0), k = logits.dim(1);
    auto d = logits.data();
    std::int64_t hits = 0;
    for (std::int64_t i = 0; i < n; ++i) {
        const float* row = d.data() + i * k;
        int best = 0;
        for (int j = 1; j < k; ++j)
            if (row[j] > row[best]) best = j;
        if (best == labels[static_cast<std::size_t>(i)]) ++hits;
    }
    return hits;
}

inline void check_finite(double v, int epoch) {
    if (!std::isfinite(v))
        throw_runtime("training diverged: non-finite loss at epoch " + std::to_string(epoch));
}

}  // namespace detail

// Joint trigger/classifier training. Per batch: poison the leading slice at
// alpha_train, compute the payload / regularization / benign cross-entropies
// plus the residual L-inf penalty, backprop the sum and step both optimizers.
// With kind == BadNets the payload slice gets the patch instead and no
// generator is involved; with kind == Clean (or a zero-rate plan) this reduces
// to ordinary training. RNG streams are derived from plan.seed identically in
// all modes, so a zero-rate run reproduces clean training bit for bit.
template <typename T = float>
TrainLog run_training(const LabeledDataset& data, GeneratorNet<T>* gen, ClassifierNet<T>& clf,
                      const PoisonPlan& plan, const TrainConfig& cfg, AttackKind kind,
                      std::int64_t badnets_patch = 3, T badnets_value = T(1)) {
    plan.validate(data.num_classes);
    cfg.validate(plan);
    if (kind == AttackKind::WaveAttack && plan.payload_rate + plan.regularization_rate > 0 && gen == nullptr)
        throw_usage("WaveAttack training requires a generator");

    Optimizer<T> clf_opt = Optimizer<T>::sgd(clf.parameters(), static_cast<T>(cfg.clf_lr),
                                             static_cast<T>(cfg.clf_momentum));
    Optimizer<T> gen_opt = gen ? Optimizer<T>::adam(gen->parameters(), static_cast<T>(cfg.gen_lr))
                               : Optimizer<T>::adam({}, static_cast<T>(cfg.gen_lr));

    Rng shuffle_rng = Rng::derive(plan.seed, "train.shuffle");
    Rng aug_rng = Rng::derive(plan.seed, "train.augment");

    std::vector<std::int64_t> order(static_cast<std::size_t>(data.count));
    std::iota(order.begin(), order.end(), 0);

    TrainLog log;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (epoch > 0 && cfg.lr_decay_every > 0 && epoch % cfg.lr_decay_every == 0) {
            clf_opt.set_lr(clf_opt.lr() * static_cast<T>(cfg.lr_decay_factor));
            gen_opt.set_lr(gen_opt.lr() * static_cast<T>(cfg.lr_decay_factor));
        }
        shuffle_rng.shuffle(order);
        EpochRecord rec;
        rec.epoch = epoch;
        std::int64_t batches = 0, benign_seen = 0, benign_hits = 0;
        for (std::int64_t off = 0; off < data.count; off += cfg.batch_size) {
            const std::int64_t b = std::min<std::int64_t>(cfg.batch_size, data.count - off);
            std::vector<std::int64_t> idx(order.begin() + off, order.begin() + off + b);
            Tensor<T> x = augment_batch(data.gather(idx), cfg.augment_crop, cfg.augment_flip, aug_rng);
            std::vector<int> y = data.gather_labels(idx);

            PartitionCounts pc =
                kind == AttackKind::Clean ? PartitionCounts{0, 0, b} : partition_batch(b, plan);
            if (kind == AttackKind::BadNets) pc = PartitionCounts{pc.payload, 0, b - pc.payload};

            Tensor<T> loss;
            Tensor<T> benign_logits;
            if (pc.poisoned() == 0) {
                benign_logits = clf.forward(x);
                loss = cross_entropy(benign_logits, y);
                rec.loss_benign += loss.item();
            } else {
                Tensor<T> xm = slice_batch(x, 0, pc.poisoned());
                Tensor<T> poisoned;
                Tensor<T> residual;
                if (kind == AttackKind::WaveAttack) {
                    Tensor<T> hh = dwt2_band(xm, Band::HH);
                    residual = scale(gen->forward(hh), static_cast<T>(plan.alpha_train));
                    poisoned = clamp01(add(xm, idwt2_band(residual, Band::HH)));
                } else {
                    poisoned = badnets_poison(xm, badnets_patch, badnets_value);
                }
                Tensor<T> poisoned_logits = clf.forward(poisoned);
                bool have_loss = false;
                auto accumulate = [&](Tensor<T> term) {
                    loss = have_loss ? add(loss, term) : term;
                    have_loss = true;
                };
                if (pc.payload > 0) {
                    std::vector<int> yt(static_cast<std::size_t>(pc.payload), plan.target_label);
                    Tensor<T> l1 = cross_entropy(slice_batch(poisoned_logits, 0, pc.payload), yt);
                    rec.loss_payload += l1.item();
                    accumulate(l1);
                }
                if (pc.regularization > 0) {
                    std::vector<int> yr(y.begin() + pc.payload, y.begin() + pc.poisoned());
                    Tensor<T> l2 = cross_entropy(slice_batch(poisoned_logits, pc.payload, pc.regularization), yr);
                    rec.loss_regularization += l2.item();
                    accumulate(l2);
                }
                if (pc.benign > 0) {
                    std::vector<int> yb(y.begin() + pc.poisoned(), y.end());
                    benign_logits = clf.forward(slice_batch(x, pc.poisoned(), pc.benign));
                    Tensor<T> l3 = cross_entropy(benign_logits, yb);
                    rec.loss_benign += l3.item();
                    accumulate(l3);
                }
                if (kind == AttackKind::WaveAttack) {
                    Tensor<T> lr_loss = linf_norm(residual);
                    rec.loss_residual += lr_loss.item();
                    accumulate(lr_loss);
                }
            }
            detail::check_finite(static_cast<double>(loss.item()), epoch);
            loss.backward();
            clf_opt.step();
            if (kind == AttackKind::WaveAttack && pc.poisoned() > 0) gen_opt.step();

            if (benign_logits.defined()) {
                const std::vector<int> yb(y.end() - (benign_logits.dim(0)), y.end());
                benign_hits += detail::count_argmax_matches(benign_logits, yb);
                benign_seen += benign_logits.dim(0);
            }
            ++batches;
        }
        const double nb = static_cast<double>(std::max<std::int64_t>(batches, 1));
        rec.loss_payload /= nb;
        rec.loss_regularization /= nb;
        rec.loss_benign /= nb;
        rec.loss_residual /= nb;
        rec.train_ba = benign_seen ? static_cast<double>(benign_hits) / static_cast<double>(benign_seen) : 0.0;
        log.push_back(rec);
    }
    return log;
}

// Algorithm entry points: joint WaveAttack training, the BadNets contrast
// baseline, and plain clean training (shared batch/augmentation streams).
template <typename T = float>
TrainLog waveattack_train(const LabeledDataset& data, GeneratorNet<T>& gen, ClassifierNet<T>& clf,
                          const PoisonPlan& plan, const TrainConfig& cfg) {
    return run_training(data, &gen, clf, plan, cfg, AttackKind::WaveAttack);
}

template <typename T = float>
TrainLog badnets_train(const LabeledDataset& data, ClassifierNet<T>& clf, const PoisonPlan& plan,
                       const TrainConfig& cfg, std::int64_t patch_size = 3, T patch_value = T(1)) {
    return run_training<T>(data, nullptr, clf, plan, cfg, AttackKind::BadNets, patch_size, patch_value);
}

template <typename T = float>
TrainLog train_clean(const LabeledDataset& data, ClassifierNet<T>& clf, const PoisonPlan& plan,
                     const TrainConfig& cfg) {
    return run_training<T>(data, nullptr, clf, plan, cfg, AttackKind::Clean);
}

}  // namespace waveattack
