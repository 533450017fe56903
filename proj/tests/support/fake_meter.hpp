#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <string>

#include "peem/power_meter.hpp"

namespace peem::testing {

// Counter on a simulated clock. Time only moves when advance() is called,
// typically from a fake workload or idle wait.
class FakeMeter final : public EnergyMeter {
 public:
  explicit FakeMeter(std::uint64_t max_range_uj = 262143328850ull, std::uint64_t start_uj = 0)
      : max_range_(max_range_uj), energy_uj_(start_uj) {}

  CounterReading read() override {
    std::lock_guard lock(mutex_);
    ++reads_;
    return {now_ns_, energy_uj_ % max_range_, "fake"};
  }
  std::uint64_t max_range_uj() const override { return max_range_; }
  std::string domain() const override { return "fake"; }

  void advance(double seconds, double watts) {
    std::lock_guard lock(mutex_);
    now_ns_ += static_cast<std::int64_t>(std::llround(seconds * 1e9));
    energy_uj_ += static_cast<std::uint64_t>(std::llround(watts * seconds * 1e6));
  }

  WaitFunction idle_wait(double watts) {
    return [this, watts](std::chrono::nanoseconds d) { advance(static_cast<double>(d.count()) * 1e-9, watts); };
  }

  std::size_t reads() const {
    std::lock_guard lock(mutex_);
    return reads_;
  }

 private:
  mutable std::mutex mutex_;
  std::uint64_t max_range_;
  std::uint64_t energy_uj_;
  std::int64_t now_ns_ = 1'000'000'000;
  std::size_t reads_ = 0;
};

}  // namespace peem::testing
