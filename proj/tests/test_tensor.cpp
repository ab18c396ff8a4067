#include <gtest/gtest.h>

#include <cmath>

#include "support/oracles.hpp"
#include "waveattack/conv.hpp"
#include "waveattack/ops.hpp"
#include "waveattack/optim.hpp"
#include "waveattack/rng.hpp"

using namespace waveattack;

TEST(Conv2d, AllOnesSumsToNine) {
    auto x = Tensor<float>::filled({1, 1, 3, 3}, 1.0f);
    auto w = Tensor<float>::filled({1, 1, 3, 3}, 1.0f);
    auto b = Tensor<float>::zeros({1});
    auto out = conv2d(x, w, b, 1, 0);
    EXPECT_EQ(out.shape(), (Shape{1, 1, 1, 1}));
    EXPECT_FLOAT_EQ(out.item(), 9.0f);
}

TEST(Conv2d, IdentityKernelPreservesInput) {
    Rng rng(3);
    auto x = Tensor<float>::uniform({2, 3, 6, 6}, -1.0f, 1.0f, rng);
    auto w = Tensor<float>::zeros({3, 3, 3, 3});
    for (int c = 0; c < 3; ++c) w.mutable_data()[(c * 3 + c) * 9 + 4] = 1.0f;  // center tap
    auto out = conv2d(x, w, Tensor<float>::zeros({3}), 1, 1);
    ASSERT_EQ(out.shape(), x.shape());
    for (std::int64_t i = 0; i < x.numel(); ++i) EXPECT_FLOAT_EQ(out.data()[i], x.data()[i]);
}

TEST(Conv2d, MatchesNaiveLoopReference) {
    Rng rng(11);
    auto x = Tensor<float>::uniform({2, 3, 8, 8}, -1.0f, 1.0f, rng);
    auto w = Tensor<float>::uniform({4, 3, 3, 3}, -0.5f, 0.5f, rng);
    auto b = Tensor<float>::uniform({4}, -0.1f, 0.1f, rng);
    for (auto [stride, pad] : {std::pair{1, 0}, {1, 1}, {2, 1}}) {
        auto out = conv2d(x, w, b, stride, pad);
        auto ref = testing::conv2d_ref(std::vector<float>(x.data().begin(), x.data().end()), 2, 3, 8, 8,
                                       std::vector<float>(w.data().begin(), w.data().end()), 4, 3, 3,
                                       std::vector<float>(b.data().begin(), b.data().end()), stride, pad);
        ASSERT_EQ(static_cast<std::size_t>(out.numel()), ref.size());
        for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(out.data()[i], ref[i], 1e-6f);
    }
}

TEST(Conv2d, ChannelMismatchIsShapeError) {
    auto x = Tensor<float>::zeros({1, 2, 4, 4});
    auto w = Tensor<float>::zeros({1, 3, 3, 3});
    EXPECT_THROW(
        {
            try {
                conv2d(x, w, Tensor<float>::zeros({1}), 1, 1);
            } catch (const Error& e) {
                EXPECT_EQ(e.kind(), ErrorKind::Shape);
                throw;
            }
        },
        Error);
}

TEST(ConvTranspose2d, ScalarKernelUpsamples) {
    auto x = Tensor<float>::from_data({1, 1, 2, 2}, {1, 2, 3, 4});
    auto w = Tensor<float>::from_data({1, 1, 1, 1}, {2});
    auto out = conv_transpose2d(x, w, Tensor<float>::zeros({1}), 2, 0);
    // (H-1)*stride + Kh = 3: values land on the stride-2 grid, zeros elsewhere
    ASSERT_EQ(out.shape(), (Shape{1, 1, 3, 3}));
    const std::vector<float> expect{2, 0, 4, 0, 0, 0, 6, 0, 8};
    for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_FLOAT_EQ(out.data()[i], expect[i]);
}

TEST(ConvTranspose2d, AdjointOfConv2d) {
    Rng rng(5);
    for (auto [stride, pad] : {std::pair{1, 0}, {1, 1}, {2, 1}}) {
        auto x = Tensor<double>::uniform({2, 3, 8, 8}, -1.0, 1.0, rng);
        auto w = Tensor<double>::uniform({4, 3, 3, 3}, -0.5, 0.5, rng);
        auto zero_o = Tensor<double>::zeros({4});
        auto zero_c = Tensor<double>::zeros({3});
        auto cx = conv2d(x, w, zero_o, stride, pad);
        auto y = Tensor<double>::uniform(cx.shape(), -1.0, 1.0, rng);
        auto ty = conv_transpose2d(y, w, zero_c, stride, pad);
        ASSERT_EQ(ty.shape(), x.shape());
        double lhs = 0, rhs = 0;
        for (std::int64_t i = 0; i < cx.numel(); ++i) lhs += cx.data()[i] * y.data()[i];
        for (std::int64_t i = 0; i < x.numel(); ++i) rhs += x.data()[i] * ty.data()[i];
        EXPECT_NEAR(lhs, rhs, 1e-5 * std::max(1.0, std::abs(lhs)));
    }
}

TEST(ConvTranspose2d, ZeroInputGivesBiasBroadcast) {
    auto x = Tensor<float>::zeros({1, 2, 3, 3});
    auto w = Tensor<float>::zeros({2, 3, 2, 2});
    auto b = Tensor<float>::from_data({3}, {0.5f, -1.0f, 2.0f});
    auto out = conv_transpose2d(x, w, b, 2, 0);
    ASSERT_EQ(out.shape(), (Shape{1, 3, 6, 6}));
    for (std::int64_t c = 0; c < 3; ++c)
        for (std::int64_t i = 0; i < 36; ++i) EXPECT_FLOAT_EQ(out.data()[c * 36 + i], b.data()[c]);
}

TEST(Elementwise, ReluAndLinearIdentityAndConcat) {
    auto r = relu(Tensor<float>::from_data({3}, {-1, 0, 2}));
    EXPECT_FLOAT_EQ(r.data()[0], 0);
    EXPECT_FLOAT_EQ(r.data()[1], 0);
    EXPECT_FLOAT_EQ(r.data()[2], 2);

    Rng rng(7);
    auto x = Tensor<float>::uniform({4, 5}, -2.0f, 2.0f, rng);
    auto eye = Tensor<float>::zeros({5, 5});
    for (int i = 0; i < 5; ++i) eye.mutable_data()[i * 5 + i] = 1.0f;
    auto out = linear(x, eye, Tensor<float>::zeros({5}));
    for (std::int64_t i = 0; i < x.numel(); ++i) EXPECT_FLOAT_EQ(out.data()[i], x.data()[i]);

    auto a = Tensor<float>::zeros({2, 3, 4, 4});
    auto b = Tensor<float>::zeros({2, 5, 4, 4});
    EXPECT_EQ(concat_channels(a, b).shape(), (Shape{2, 8, 4, 4}));
}

TEST(AvgPool, BlockMeans) {
    auto x = Tensor<float>::from_data({1, 1, 2, 4}, {1, 2, 3, 4, 5, 6, 7, 8});
    auto out = avg_pool2d(x, 2);
    ASSERT_EQ(out.shape(), (Shape{1, 1, 1, 2}));
    EXPECT_FLOAT_EQ(out.data()[0], 3.5f);
    EXPECT_FLOAT_EQ(out.data()[1], 5.5f);
    EXPECT_THROW(avg_pool2d(x, 3), Error);
}

TEST(CrossEntropy, UniformLogitsGiveLogK) {
    auto logits = Tensor<float>::zeros({4, 10});
    std::vector<int> labels{0, 3, 7, 9};
    EXPECT_NEAR(cross_entropy(logits, labels).item(), std::log(10.0), 1e-6);
}

TEST(CrossEntropy, SaturatedLogitsGiveZero) {
    auto logits = Tensor<float>::zeros({2, 5});
    logits.mutable_data()[2] = 1000.0f;       // row 0, class 2
    logits.mutable_data()[5 + 4] = 1000.0f;   // row 1, class 4
    EXPECT_NEAR(cross_entropy(logits, {2, 4}).item(), 0.0, 1e-6);
}

TEST(CrossEntropy, MatchesDirectOracle) {
    Rng rng(13);
    auto logits = Tensor<double>::uniform({4, 5}, -2.0, 2.0, rng);
    std::vector<int> labels{1, 0, 4, 2};
    const double ref = testing::cross_entropy_ref(
        std::vector<double>(logits.data().begin(), logits.data().end()), 4, 5, labels);
    EXPECT_NEAR(cross_entropy(logits, labels).item(), ref, 1e-6);
}

TEST(CrossEntropy, LabelOutOfRangeRejected) {
    auto logits = Tensor<float>::zeros({1, 3});
    EXPECT_THROW(cross_entropy(logits, {3}), Error);
    EXPECT_THROW(cross_entropy(logits, {-1}), Error);
}

TEST(LinfNorm, SingleSampleUniqueMax) {
    auto x = Tensor<float>::from_data({1, 3}, {-3, 2, 1}).set_requires_grad();
    auto out = linf_norm(x);
    EXPECT_FLOAT_EQ(out.item(), 3.0f);
    out.backward();
    EXPECT_FLOAT_EQ(x.grad()[0], -1.0f);
    EXPECT_FLOAT_EQ(x.grad()[1], 0.0f);
    EXPECT_FLOAT_EQ(x.grad()[2], 0.0f);
}

TEST(LinfNorm, BatchMeanOfPerSampleMaxima) {
    auto x = Tensor<float>::from_data({2, 2}, {2, 1, -4, 0});
    EXPECT_FLOAT_EQ(linf_norm(x).item(), 3.0f);
}

TEST(LinfNorm, MatchesScanOracle) {
    Rng rng(17);
    auto x = Tensor<float>::uniform({8, 3, 4, 4}, -2.0f, 2.0f, rng);
    double ref = 0;
    for (int i = 0; i < 8; ++i) {
        double best = 0;
        for (int j = 0; j < 48; ++j) best = std::max(best, std::abs(static_cast<double>(x.data()[i * 48 + j])));
        ref += best;
    }
    ref /= 8;
    EXPECT_NEAR(linf_norm(x).item(), ref, 1e-7);
    EXPECT_THROW(linf_norm(Tensor<float>::zeros({0, 3})), Error);
}

TEST(Backward, SumGivesOnes) {
    auto x = Tensor<float>::filled({2, 3}, 4.0f).set_requires_grad();
    sum(x).backward();
    for (float g : x.grad()) EXPECT_FLOAT_EQ(g, 1.0f);
}

TEST(Backward, SumOfSquares) {
    auto x = Tensor<float>::from_data({2}, {1, 2}).set_requires_grad();
    sum(mul(x, x)).backward();
    EXPECT_FLOAT_EQ(x.grad()[0], 2.0f);
    EXPECT_FLOAT_EQ(x.grad()[1], 4.0f);
}

TEST(Backward, AccumulationIsAdditive) {
    auto x = Tensor<float>::from_data({2}, {1, 2}).set_requires_grad();
    auto loss = sum(mul(x, x));
    loss.backward();
    loss.backward();
    EXPECT_FLOAT_EQ(x.grad()[0], 4.0f);
    EXPECT_FLOAT_EQ(x.grad()[1], 8.0f);
}

TEST(Backward, NonScalarLossRejected) {
    auto x = Tensor<float>::zeros({2}).set_requires_grad();
    EXPECT_THROW(relu(x).backward(), Error);
}

TEST(Backward, SharedSubexpressionGetsBothContributions) {
    // loss = sum(x*x) + sum(x) -> grad 2x + 1
    auto x = Tensor<float>::from_data({2}, {3, -1}).set_requires_grad();
    add(sum(mul(x, x)), sum(x)).backward();
    EXPECT_FLOAT_EQ(x.grad()[0], 7.0f);
    EXPECT_FLOAT_EQ(x.grad()[1], -1.0f);
}

TEST(Optimizer, SgdSingleStep) {
    auto p = Tensor<float>::from_data({1}, {1.0f}).set_requires_grad();
    auto opt = Optimizer<float>::sgd({p}, 0.1f, 0.0f);
    sum(mul(p, Tensor<float>::from_data({1}, {2.0f}))).backward();  // grad = 2
    opt.step();
    EXPECT_FLOAT_EQ(p.data()[0], 0.8f);
    EXPECT_FALSE(p.has_grad());  // step zeroes grads
}

TEST(Optimizer, SgdMomentumAccumulatesVelocity) {
    auto p = Tensor<float>::from_data({1}, {0.0f}).set_requires_grad();
    auto opt = Optimizer<float>::sgd({p}, 1.0f, 0.5f);
    auto step_with_grad_one = [&] {
        sum(p).backward();
        opt.step();
    };
    step_with_grad_one();  // v=1, p=-1
    EXPECT_FLOAT_EQ(p.data()[0], -1.0f);
    step_with_grad_one();  // v=1.5, p=-2.5
    EXPECT_FLOAT_EQ(p.data()[0], -2.5f);
}

TEST(Optimizer, AdamFirstStepMatchesHandComputation) {
    const float g = 0.5f, lr = 0.001f, b1 = 0.9f, b2 = 0.999f, eps = 1e-8f;
    auto p = Tensor<float>::from_data({1}, {1.0f}).set_requires_grad();
    auto opt = Optimizer<float>::adam({p}, lr, b1, b2, eps);
    sum(mul(p, Tensor<float>::from_data({1}, {g}))).backward();
    opt.step();
    const float m = (1 - b1) * g, v = (1 - b2) * g * g;
    const float mhat = m / (1 - b1), vhat = v / (1 - b2);
    const float expect = 1.0f - lr * mhat / (std::sqrt(vhat) + eps);
    EXPECT_FLOAT_EQ(p.data()[0], expect);
}

TEST(Optimizer, ZeroLearningRateLeavesParamsBitIdentical) {
    Rng rng(23);
    auto p = Tensor<float>::uniform({5}, -1.0f, 1.0f, rng).set_requires_grad();
    const std::vector<float> before(p.data().begin(), p.data().end());
    for (auto make : {+[](Tensor<float> t) { return Optimizer<float>::sgd({t}, 0.0f, 0.9f); },
                      +[](Tensor<float> t) { return Optimizer<float>::adam({t}, 0.0f); }}) {
        auto opt = make(p);
        sum(mul(p, p)).backward();
        opt.step();
        for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(p.data()[i], before[i]);
    }
}

TEST(Optimizer, MissingGradIsUsageError) {
    auto p = Tensor<float>::zeros({2}).set_requires_grad();
    auto opt = Optimizer<float>::sgd({p}, 0.1f, 0.0f);
    EXPECT_THROW(opt.step(), Error);
}

TEST(Broadcast, ChannelBiasPattern) {
    auto x = Tensor<float>::from_data({1, 2, 1, 2}, {1, 2, 3, 4}).set_requires_grad();
    auto m = Tensor<float>::from_data({1, 2, 1, 1}, {10, 100}).set_requires_grad();
    auto out = mul(x, m);
    EXPECT_FLOAT_EQ(out.data()[0], 10);
    EXPECT_FLOAT_EQ(out.data()[1], 20);
    EXPECT_FLOAT_EQ(out.data()[2], 300);
    EXPECT_FLOAT_EQ(out.data()[3], 400);
    sum(out).backward();
    EXPECT_FLOAT_EQ(m.grad()[0], 3.0f);   // 1+2
    EXPECT_FLOAT_EQ(m.grad()[1], 7.0f);   // 3+4
    EXPECT_FLOAT_EQ(x.grad()[2], 100.0f);
}

TEST(SliceBatch, ForwardAndScatterBack) {
    auto x = Tensor<float>::from_data({3, 2}, {1, 2, 3, 4, 5, 6}).set_requires_grad();
    auto s = slice_batch(x, 1, 2);
    ASSERT_EQ(s.shape(), (Shape{2, 2}));
    EXPECT_FLOAT_EQ(s.data()[0], 3);
    sum(s).backward();
    EXPECT_FLOAT_EQ(x.grad()[0], 0);
    EXPECT_FLOAT_EQ(x.grad()[2], 1);
    EXPECT_FLOAT_EQ(x.grad()[5], 1);
}

TEST(NoGrad, SuppressesGraphConstruction) {
    auto x = Tensor<float>::from_data({2}, {1, 2}).set_requires_grad();
    NoGradGuard ng;
    auto y = sum(mul(x, x));
    EXPECT_FALSE(y.requires_grad());
}
