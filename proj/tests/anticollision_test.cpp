#include "rfidauth/anticollision.hpp"
#include "rfidauth/rng.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

using namespace rfidauth;
using namespace rfidauth::anticollision;

namespace {

// Independent oracle: exact probability that a given slot holds exactly one
// of n uniformly placed tags, evaluated as a plain product loop.
double oracle_single(std::uint64_t n, std::uint64_t frame) {
    if (n == 0) {
        return 0.0;
    }
    double p = 1.0;
    for (std::uint64_t i = 1; i < n; ++i) {
        p *= static_cast<double>(frame - 1) / static_cast<double>(frame);
    }
    return static_cast<double>(n) * p / static_cast<double>(frame);
}

struct McResult {
    std::uint64_t slots = 0;
    std::uint64_t singles = 0;
};

McResult monte_carlo(std::uint64_t n, std::uint32_t frame, std::uint64_t frames, SeededRng& rng) {
    McResult r;
    std::vector<std::uint32_t> counts(frame);
    for (std::uint64_t f = 0; f < frames; ++f) {
        std::fill(counts.begin(), counts.end(), 0U);
        for (std::uint64_t t = 0; t < n; ++t) {
            ++counts[rng.below(frame)];
        }
        for (std::uint32_t c : counts) {
            r.singles += classify_slot(c).kind == SlotKind::Success ? 1 : 0;
        }
        r.slots += frame;
    }
    return r;
}

// Drives one frame against a population; tags in `active` pick a slot each.
// Returns the indices that were sole responders.
std::vector<std::size_t> run_frame(FrameArbiter& arb, const std::vector<std::size_t>& active, SeededRng& rng) {
    const std::uint32_t size = arb.begin_frame();
    std::vector<std::vector<std::size_t>> slots(size);
    for (std::size_t id : active) {
        slots[rng.below(size)].push_back(id);
    }
    std::vector<std::size_t> identified;
    std::uint32_t s = 0;
    while (!arb.frame_over()) {
        const auto& who = slots[s++];
        if (arb.record_slot(static_cast<std::uint32_t>(who.size())).kind == SlotKind::Success) {
            identified.push_back(who.front());
        }
    }
    return identified;
}

}  // namespace

TEST(ClassifySlot, ExamplesFromTheThreeCases) {
    EXPECT_EQ(classify_slot(0).kind, SlotKind::Idle);
    EXPECT_EQ(classify_slot(1).kind, SlotKind::Success);
    EXPECT_EQ(classify_slot(7).kind, SlotKind::Collision);
    EXPECT_EQ(classify_slot(7).responders, 7U);
}

TEST(ClassifySlot, KindMatchesResponderCount) {
    for (std::uint32_t n = 0; n < 1000; ++n) {
        const auto k = classify_slot(n).kind;
        EXPECT_EQ(k == SlotKind::Idle, n == 0);
        EXPECT_EQ(k == SlotKind::Success, n == 1);
        EXPECT_EQ(k == SlotKind::Collision, n >= 2);
    }
}

TEST(AdjustQ, Examples) {
    EXPECT_DOUBLE_EQ(adjust_q(4.0, SlotKind::Collision, 0.3), 4.3);
    EXPECT_DOUBLE_EQ(adjust_q(0.1, SlotKind::Idle, 0.3), 0.0);
    EXPECT_DOUBLE_EQ(adjust_q(4.0, SlotKind::Success, 0.3), 4.0);
}

TEST(AdjustQ, ClampsToRange) {
    EXPECT_DOUBLE_EQ(adjust_q(14.9, SlotKind::Collision, 0.5), 15.0);
    EXPECT_DOUBLE_EQ(adjust_q(0.0, SlotKind::Idle, 0.1), 0.0);
    SeededRng rng(3);
    double q = 4.0;
    for (int i = 0; i < 10000; ++i) {
        const auto kind = static_cast<SlotKind>(rng.below(3));
        q = adjust_q(q, kind, rng.uniform(0.1, 0.5));
        ASSERT_GE(q, 0.0);
        ASSERT_LE(q, 15.0);
    }
}

TEST(AdjustQ, RejectsStepOutsideRange) {
    EXPECT_THROW((void)adjust_q(4.0, SlotKind::Idle, 0.05), std::invalid_argument);
    EXPECT_THROW((void)adjust_q(4.0, SlotKind::Idle, 0.51), std::invalid_argument);
    EXPECT_THROW(FrameArbiter(4.0, 0.0), std::invalid_argument);
}

TEST(QFromFp, RoundsAndClamps) {
    EXPECT_EQ(q_from_fp(4.49), 4);
    EXPECT_EQ(q_from_fp(4.5), 5);
    EXPECT_EQ(q_from_fp(-1.0), 0);
    EXPECT_EQ(q_from_fp(20.0), 15);
}

TEST(ExpectedSuccess, Examples) {
    EXPECT_DOUBLE_EQ(expected_success_fraction(1, 1), 1.0);
    EXPECT_DOUBLE_EQ(expected_success_fraction(0, 8), 0.0);
    // Frozen from oracle_single(16, 16).
    EXPECT_NEAR(expected_success_fraction(16, 16), 0.379812, 1e-6);
    EXPECT_NEAR(oracle_single(16, 16), 0.379812, 1e-6);
}

TEST(ExpectedSuccess, AgreesWithProductOracle) {
    for (std::uint64_t n = 0; n <= 64; ++n) {
        for (std::uint64_t l = 1; l <= 64; ++l) {
            EXPECT_NEAR(expected_success_fraction(n, l), oracle_single(n, l), 1e-12) << n << "," << l;
        }
    }
}

TEST(ExpectedSuccess, MonteCarloMillionFrames) {
    SeededRng rng(2024);
    const auto r = monte_carlo(16, 16, 1'000'000, rng);
    const double p = oracle_single(16, 16);
    const double freq = static_cast<double>(r.singles) / static_cast<double>(r.slots);
    const double sigma = std::sqrt(p * (1 - p) / static_cast<double>(r.slots));
    EXPECT_NEAR(freq, p, 3 * sigma);
}

TEST(ExpectedSuccess, MonteCarloGridWithinThreeSigma) {
    const std::uint32_t sizes[] = {1, 2, 4, 8, 16, 32};
    for (std::uint32_t n : sizes) {
        for (std::uint32_t l : sizes) {
            SeededRng rng = SeededRng::derive(7, "grid");
            const std::uint64_t frames = 40000 / l;
            const auto r = monte_carlo(n, l, frames, rng);
            const double p = oracle_single(n, l);
            const double freq = static_cast<double>(r.singles) / static_cast<double>(r.slots);
            const double sigma = std::sqrt(p * (1 - p) / static_cast<double>(r.slots));
            EXPECT_NEAR(freq, p, std::max(3 * sigma, 1e-12)) << "n=" << n << " L=" << l;
        }
    }
}

TEST(FrameArbiter, FrameSizeIsPowerOfQ) {
    FrameArbiter arb(4.0, 0.3);
    EXPECT_EQ(arb.begin_frame(), 16U);
    EXPECT_EQ(arb.frame().q, 4);
    FrameArbiter zero(0.0, 0.3);
    EXPECT_EQ(zero.begin_frame(), 1U);
}

TEST(FrameArbiter, AllIdleFrameRunsToEndWhenQUnchanged) {
    FrameArbiter arb(0.0, 0.3);
    arb.begin_frame();
    arb.record_slot(0);
    EXPECT_TRUE(arb.frame_over());
    EXPECT_FALSE(arb.frame_had_reply());
    EXPECT_EQ(arb.totals().idle, 1U);
}

TEST(FrameArbiter, QChangeEndsFrameEarly) {
    FrameArbiter arb(4.0, 0.3);
    arb.begin_frame();
    arb.record_slot(3);  // 4.3
    arb.record_slot(2);  // 4.6
    arb.record_slot(2);  // 4.9
    EXPECT_FALSE(arb.frame_over());
    arb.record_slot(2);  // 5.2
    EXPECT_TRUE(arb.q_changed());
    EXPECT_TRUE(arb.frame_over());
    EXPECT_TRUE(arb.frame_had_reply());
    EXPECT_EQ(arb.begin_frame(), 32U);
}

TEST(FrameArbiter, ConvergesNearPopulation) {
    const std::size_t n = 64;
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) {
        all[i] = i;
    }
    SeededRng rng(99);
    FrameArbiter arb(4.0, 0.3);
    std::vector<std::uint32_t> sizes;
    for (int f = 0; f < 100; ++f) {
        (void)run_frame(arb, all, rng);
        sizes.push_back(arb.frame().frame_size());
    }
    std::vector<std::uint32_t> tail(sizes.end() - 10, sizes.end());
    std::nth_element(tail.begin(), tail.begin() + 5, tail.end());
    const auto median = tail[5];
    EXPECT_GE(median, n / 2);
    EXPECT_LE(median, n * 2);
}

TEST(FrameArbiter, NoStarvationAcrossSeeds) {
    const std::size_t n = 64;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        SeededRng rng = SeededRng::derive(seed, "starvation");
        FrameArbiter arb(4.0, 0.3);
        std::vector<std::size_t> active(n);
        for (std::size_t i = 0; i < n; ++i) {
            active[i] = i;
        }
        // Identified tags leave the inventory, as an acknowledged tag does.
        int frames = 0;
        while (!active.empty() && frames < 50) {
            const auto ids = run_frame(arb, active, rng);
            std::erase_if(active, [&](std::size_t id) { return std::find(ids.begin(), ids.end(), id) != ids.end(); });
            ++frames;
        }
        EXPECT_TRUE(active.empty()) << "seed " << seed << " left " << active.size();
    }
}
