#include "rfidauth/anticollision.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rfidauth::anticollision {

SlotOutcome classify_slot(std::uint32_t responders) {
    if (responders == 0) {
        return {SlotKind::Idle, 0};
    }
    if (responders == 1) {
        return {SlotKind::Success, 1};
    }
    return {SlotKind::Collision, responders};
}

double adjust_q(double q_fp, SlotKind outcome, double c) {
    if (!(c >= 0.1 && c <= 0.5)) {
        throw std::invalid_argument("Q step must lie in [0.1, 0.5]");
    }
    switch (outcome) {
        case SlotKind::Collision:
            q_fp += c;
            break;
        case SlotKind::Idle:
            q_fp -= c;
            break;
        case SlotKind::Success:
            break;
    }
    return std::clamp(q_fp, 0.0, static_cast<double>(kMaxQ));
}

double expected_success_fraction(std::uint64_t n_tags, std::uint64_t frame_size) {
    if (n_tags == 0) {
        return 0.0;
    }
    const double inv = 1.0 / static_cast<double>(frame_size);
    return static_cast<double>(n_tags) * inv * std::pow(1.0 - inv, static_cast<double>(n_tags - 1));
}

int q_from_fp(double q_fp) { return std::clamp(static_cast<int>(std::lround(q_fp)), 0, kMaxQ); }

FrameArbiter::FrameArbiter(double initial_q, double step) : q_fp_(initial_q), step_(step) {
    if (!(step >= 0.1 && step <= 0.5)) {
        throw std::invalid_argument("Q step must lie in [0.1, 0.5]");
    }
    if (!(initial_q >= 0.0 && initial_q <= kMaxQ)) {
        throw std::invalid_argument("initial Q must lie in [0, 15]");
    }
    frame_.q = q_from_fp(q_fp_);
    frame_.q_fp = q_fp_;
}

std::uint32_t FrameArbiter::begin_frame() {
    frame_ = FrameState{};
    frame_.q = q_from_fp(q_fp_);
    frame_.q_fp = q_fp_;
    ++frames_;
    return frame_.frame_size();
}

SlotOutcome FrameArbiter::record_slot(std::uint32_t responders) {
    const SlotOutcome out = classify_slot(responders);
    switch (out.kind) {
        case SlotKind::Idle:
            ++totals_.idle;
            break;
        case SlotKind::Success:
            ++totals_.success;
            break;
        case SlotKind::Collision:
            ++totals_.collision;
            break;
    }
    q_fp_ = adjust_q(q_fp_, out.kind, step_);
    frame_.q_fp = q_fp_;
    frame_.outcomes.push_back(out);
    ++frame_.slot_index;
    return out;
}

bool FrameArbiter::frame_over() const { return frame_.slot_index >= frame_.frame_size() || q_changed(); }

bool FrameArbiter::q_changed() const {
    return std::abs(q_fp_ - static_cast<double>(frame_.q)) >= kRestartDrift - 1e-9;
}

bool FrameArbiter::frame_had_reply() const {
    return std::any_of(frame_.outcomes.begin(), frame_.outcomes.end(),
                       [](const SlotOutcome& o) { return o.kind != SlotKind::Idle; });
}

}  // namespace rfidauth::anticollision
