#pragma once

#include <chrono>
#include <cstdint>

#include "fsd/errors.hpp"

namespace fsd {

enum class ClockMode { Simulated, WallClock };

/// Monotonic millisecond clock. Simulated time starts at zero and only moves
/// through advance(); wall-clock time is measured from construction, so the
/// scenario epoch is always zero in both modes.
class Clock {
 public:
  explicit Clock(ClockMode mode = ClockMode::Simulated)
      : mode_(mode), start_(std::chrono::steady_clock::now()) {}

  ClockMode mode() const noexcept { return mode_; }

  std::int64_t now_ms() const {
    if (mode_ == ClockMode::Simulated) return sim_now_ms_;
    auto elapsed = std::chrono::steady_clock::now() - start_;
    return std::chrono::duration_cast<std::chrono::milliseconds>(elapsed)
        .count();
  }

  /// Simulated mode only. Returns the new now_ms.
  std::int64_t advance(std::int64_t delta_ms) {
    if (mode_ != ClockMode::Simulated)
      raise(Errc::WallClockAdvance,
            "advance() is only valid on a simulated clock");
    if (delta_ms < 0)
      raise(Errc::InvalidArgument, "clock cannot move backwards");
    sim_now_ms_ += delta_ms;
    return sim_now_ms_;
  }

  /// Simulated mode only. Moves time forward to an absolute target.
  std::int64_t advance_to(std::int64_t target_ms) {
    if (target_ms < now_ms())
      raise(Errc::InvalidArgument, "clock cannot move backwards");
    return advance(target_ms - now_ms());
  }

 private:
  ClockMode mode_;
  std::int64_t sim_now_ms_ = 0;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace fsd
