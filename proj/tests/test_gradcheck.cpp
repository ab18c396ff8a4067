#include <gtest/gtest.h>

#include "support/gradsuite.hpp"

// Fast finite-difference pass over every differentiable op. The acceptance
// suite runs the same battery at >= 20 random shapes per op.
TEST(GradCheck, AllOpsAgreeWithCentralDifferences) {
    auto results = waveattack::testing::run_gradient_suite(3);
    for (const auto& entry : results) {
        EXPECT_LE(entry.worst.max_rel_err, 1e-5) << entry.name << ": " << entry.worst.detail;
    }
}
