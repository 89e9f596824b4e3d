#pragma once

// Dynamic framed slotted ALOHA with the Gen2-style fractional Q accumulator.

#include <cstdint>
#include <vector>

namespace rfidauth::anticollision {

inline constexpr int kMaxQ = 15;

/// Accumulator drift from the frame's Q that makes the reader abandon the
/// frame and re-issue Query.
inline constexpr double kRestartDrift = 1.0;

enum class SlotKind { Idle, Success, Collision };

struct SlotOutcome {
    SlotKind kind = SlotKind::Idle;
    std::uint32_t responders = 0;
};

[[nodiscard]] SlotOutcome classify_slot(std::uint32_t responders);

/// One Q-algorithm step: +c on collision, -c on idle, unchanged on success,
/// clamped to [0, 15]. Throws std::invalid_argument if c is outside [0.1, 0.5].
[[nodiscard]] double adjust_q(double q_fp, SlotKind outcome, double c);

/// Per-slot success probability n * (1/L) * (1 - 1/L)^(n-1).
[[nodiscard]] double expected_success_fraction(std::uint64_t n_tags, std::uint64_t frame_size);

/// round(q_fp) clamped to [0, 15].
[[nodiscard]] int q_from_fp(double q_fp);

struct FrameState {
    int q = 4;
    double q_fp = 4.0;
    std::uint32_t slot_index = 0;
    std::vector<SlotOutcome> outcomes;

    [[nodiscard]] std::uint32_t frame_size() const { return std::uint32_t{1} << q; }
};

struct SlotTotals {
    std::uint64_t idle = 0;
    std::uint64_t success = 0;
    std::uint64_t collision = 0;
};

/// Reader-side arbitration state. A frame ends after 2^Q slots, or early once
/// q_fp has drifted kRestartDrift away from the frame's Q (the reader then
/// re-issues Query at round(q_fp)).
class FrameArbiter {
public:
    explicit FrameArbiter(double initial_q = 4.0, double step = 0.3);

    /// Starts a new frame at Q = round(q_fp); returns the frame size.
    std::uint32_t begin_frame();

    /// Classifies the current slot, updates the accumulator and advances.
    SlotOutcome record_slot(std::uint32_t responders);

    /// True once every slot was used or Q changed.
    [[nodiscard]] bool frame_over() const;
    /// True if the accumulator has drifted far enough to cut the frame short.
    [[nodiscard]] bool q_changed() const;
    /// True if any slot of the current frame carried at least one reply.
    [[nodiscard]] bool frame_had_reply() const;

    [[nodiscard]] const FrameState& frame() const { return frame_; }
    [[nodiscard]] double q_fp() const { return q_fp_; }
    [[nodiscard]] double step() const { return step_; }
    [[nodiscard]] const SlotTotals& totals() const { return totals_; }
    [[nodiscard]] std::uint64_t frames_started() const { return frames_; }

private:
    double q_fp_;
    double step_;
    FrameState frame_;
    SlotTotals totals_;
    std::uint64_t frames_ = 0;
};

}  // namespace rfidauth::anticollision
