#pragma once

// Workload energy from cumulative on-chip energy counters (Linux powercap).
//
//   E_total = energy counted while the workload runs for duration T
//   E_idle  = P_idle * T, with P_idle from a one-off idle calibration
//   E_enc   = E_total - E_idle
//
// Counters wrap at max_energy_range_uj. A background sampler reads the
// counter at a fixed cadence so that at most one wrap happens between two
// consecutive readings.

#include <sys/file.h>
#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "peem/errors.hpp"
#include "peem/statistics.hpp"

namespace peem {

struct CounterReading {
  std::int64_t timestamp_ns = 0;  // monotonic
  std::uint64_t raw_energy_uj = 0;
  std::string domain;
};

class EnergyMeter {
 public:
  virtual ~EnergyMeter() = default;
  virtual CounterReading read() = 0;
  virtual std::uint64_t max_range_uj() const = 0;
  virtual std::string domain() const = 0;
};

inline std::int64_t monotonic_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

inline constexpr const char* kPowercapRootEnv = "PEEM_POWERCAP_ROOT";

inline std::filesystem::path powercap_root() {
  if (const char* env = std::getenv(kPowercapRootEnv); env && *env) return env;
  return "/sys/class/powercap";
}

namespace detail {

inline std::optional<std::string> read_first_line(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) return std::nullopt;
  std::string line;
  std::getline(in, line);
  while (!line.empty() && (line.back() == '\n' || line.back() == '\r' || line.back() == ' ')) line.pop_back();
  return line;
}

inline std::optional<std::uint64_t> read_u64_file(const std::filesystem::path& p) {
  auto line = read_first_line(p);
  if (!line || line->empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    auto v = std::stoull(*line, &used);
    if (used != line->size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

inline std::optional<std::filesystem::path> find_zone_by_name(const std::filesystem::path& dir, const std::string& name) {
  std::error_code ec;
  std::vector<std::filesystem::path> zones;
  for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
    if (entry.is_directory(ec) && std::filesystem::exists(entry.path() / "energy_uj")) zones.push_back(entry.path());
  }
  std::sort(zones.begin(), zones.end());
  for (const auto& z : zones)
    if (read_first_line(z / "name") == name) return z;
  return std::nullopt;
}

}  // namespace detail

// Resolves a domain identifier to a powercap zone directory. Accepts a zone
// directory name ("intel-rapl:0"), a zone name ("package-0"), or
// "<package>/<subzone>" ("package-0/core").
inline std::filesystem::path resolve_powercap_zone(const std::string& domain,
                                                   const std::filesystem::path& root = powercap_root()) {
#ifndef __linux__
  (void)root;
  throw DomainUnavailable("powercap energy counters are only available on Linux");
#else
  std::error_code ec;
  if (!std::filesystem::is_directory(root, ec)) throw DomainUnavailable("no powercap tree at " + root.string());
  if (domain.empty()) throw DomainUnavailable("empty meter domain");
  if (domain.find("..") == std::string::npos && std::filesystem::exists(root / domain / "energy_uj", ec))
    return root / domain;
  auto slash = domain.find('/');
  auto zone = detail::find_zone_by_name(root, domain.substr(0, slash));
  if (zone && slash != std::string::npos) zone = detail::find_zone_by_name(*zone, domain.substr(slash + 1));
  if (!zone) throw DomainUnavailable("meter domain '" + domain + "' not found under " + root.string());
  return *zone;
#endif
}

class PowercapMeter final : public EnergyMeter {
 public:
  explicit PowercapMeter(std::string domain, const std::filesystem::path& root = powercap_root())
      : domain_(std::move(domain)), zone_(resolve_powercap_zone(domain_, root)) {
    auto range = detail::read_u64_file(zone_ / "max_energy_range_uj");
    if (!range || *range == 0) throw DomainUnavailable("cannot read max_energy_range_uj for '" + domain_ + "'");
    max_range_ = *range;
    read();  // fail early on permission problems
  }

  CounterReading read() override {
    CounterReading r;
    auto value = detail::read_u64_file(zone_ / "energy_uj");
    r.timestamp_ns = monotonic_ns();
    if (!value) throw DomainUnavailable("cannot read energy_uj for '" + domain_ + "' (permissions?)");
    r.raw_energy_uj = *value;
    r.domain = domain_;
    return r;
  }

  std::uint64_t max_range_uj() const override { return max_range_; }
  std::string domain() const override { return domain_; }
  const std::filesystem::path& zone() const { return zone_; }

 private:
  std::string domain_;
  std::filesystem::path zone_;
  std::uint64_t max_range_ = 0;
};

inline CounterReading read_counter(const std::string& domain) { return PowercapMeter(domain).read(); }

// Energy between two readings of one counter, allowing for a single wrap.
inline double delta_energy(const CounterReading& before, const CounterReading& after, std::uint64_t max_range_uj) {
  const std::uint64_t a = before.raw_energy_uj % max_range_uj;
  const std::uint64_t b = after.raw_energy_uj % max_range_uj;
  const std::uint64_t delta_uj = b >= a ? b - a : max_range_uj - a + b;
  return static_cast<double>(delta_uj) * 1e-6;
}

struct SampledEnergy {
  double joules = 0.0;
  double duration_s = 0.0;
  std::size_t samples = 0;
};

// Polls a meter on a background thread while a workload runs. Single writer:
// only the sampler thread touches the running sum until stop() joins it.
class EnergySampler {
 public:
  EnergySampler(EnergyMeter& meter, std::chrono::milliseconds period) : meter_(meter), period_(period) {}
  EnergySampler(const EnergySampler&) = delete;
  EnergySampler& operator=(const EnergySampler&) = delete;
  ~EnergySampler() {
    if (thread_.joinable()) stop();
  }

  void start() {
    first_ = last_ = meter_.read();
    joules_ = 0.0;
    samples_ = 1;
    stopping_ = false;
    thread_ = std::thread([this] { loop(); });
  }

  SampledEnergy stop() {
    {
      std::lock_guard lock(mutex_);
      stopping_ = true;
    }
    cv_.notify_all();
    thread_.join();
    take(meter_.read());
    SampledEnergy out;
    out.joules = joules_;
    out.duration_s = static_cast<double>(last_.timestamp_ns - first_.timestamp_ns) * 1e-9;
    out.samples = samples_;
    return out;
  }

 private:
  void loop() {
    std::unique_lock lock(mutex_);
    while (!cv_.wait_for(lock, period_, [this] { return stopping_; })) {
      lock.unlock();
      take(meter_.read());
      lock.lock();
    }
  }

  void take(const CounterReading& r) {
    joules_ += delta_energy(last_, r, meter_.max_range_uj());
    last_ = r;
    ++samples_;
  }

  EnergyMeter& meter_;
  std::chrono::milliseconds period_;
  std::thread thread_;
  std::mutex mutex_;
  std::condition_variable cv_;
  bool stopping_ = false;
  CounterReading first_;
  CounterReading last_;
  double joules_ = 0.0;
  std::size_t samples_ = 0;
};

inline constexpr std::chrono::milliseconds kDefaultSamplePeriod{250};

using WaitFunction = std::function<void(std::chrono::nanoseconds)>;

inline void sleep_wait(std::chrono::nanoseconds d) { std::this_thread::sleep_for(d); }

struct IdleCalibrationOptions {
  double min_window_s = 1.0;
  std::chrono::milliseconds sample_period = kDefaultSamplePeriod;
};

// Average idle power over `window_s` seconds; the caller quiesces the machine.
inline double calibrate_idle(EnergyMeter& meter, double window_s, const WaitFunction& wait = sleep_wait,
                             const IdleCalibrationOptions& options = {}) {
  if (!(window_s > 0.0) || window_s < options.min_window_s)
    throw PreconditionError("idle window must be at least " + std::to_string(options.min_window_s) + " s");
  EnergySampler sampler(meter, options.sample_period);
  sampler.start();
  wait(std::chrono::nanoseconds(static_cast<std::int64_t>(window_s * 1e9)));
  const auto sampled = sampler.stop();
  if (!(sampled.duration_s > 0.0)) throw DomainUnavailable("meter clock did not advance during idle calibration");
  return sampled.joules / sampled.duration_s;
}

struct MeasureOptions {
  std::size_t repeats = 2;      // runs always performed
  std::size_t max_repeats = 0;  // keep repeating while insignificant, up to this; 0 = repeats
  double confidence = 0.95;
  double threshold = 0.02;  // CI half-width as a fraction of the mean
  std::chrono::milliseconds sample_period = kDefaultSamplePeriod;
};

struct RunEnergy {
  double e_total_j = 0.0;
  double e_idle_j = 0.0;
  double duration_s = 0.0;
  double e_enc_j = 0.0;
};

struct EnergyMeasurement {
  double e_total = 0.0;     // J, mean over runs
  double e_idle = 0.0;      // J, mean over runs
  double duration_t = 0.0;  // s, mean over runs
  double e_enc = 0.0;       // J, e_total - e_idle
  std::size_t repeats = 0;
  bool significant = false;
  double ci_halfwidth_rel = 0.0;
  std::vector<RunEnergy> runs;
  std::vector<std::string> warnings;
};

// Workload returns its exit status; non-zero aborts the measurement.
using Workload = std::function<int()>;

inline EnergyMeasurement measure_workload(EnergyMeter& meter, const Workload& workload, double p_idle_w,
                                          const MeasureOptions& options = {}) {
  if (options.repeats < 2) throw PreconditionError("measurement needs at least 2 repeats");
  if (!(p_idle_w >= 0.0)) throw PreconditionError("idle power must be non-negative");
  const std::size_t cap = std::max(options.repeats, options.max_repeats);
  const double z = z_score(options.confidence);

  EnergyMeasurement m;
  std::vector<double> enc;
  bool warned_negative = false;
  while (true) {
    EnergySampler sampler(meter, options.sample_period);
    sampler.start();
    const int status = workload();
    const auto sampled = sampler.stop();
    if (status != 0) throw CommandFailed(status);

    RunEnergy run;
    run.e_total_j = sampled.joules;
    run.duration_s = sampled.duration_s;
    run.e_idle_j = p_idle_w * run.duration_s;
    run.e_enc_j = run.e_total_j - run.e_idle_j;
    if (run.e_enc_j < 0.0 && !warned_negative) {
      m.warnings.push_back("negative encoding energy: idle calibration drift?");
      warned_negative = true;
    }
    m.runs.push_back(run);
    enc.push_back(run.e_enc_j);

    if (enc.size() >= options.repeats) {
      const double mean = mean_of(enc);
      const double half = z * sample_stddev(enc) / std::sqrt(static_cast<double>(enc.size()));
      m.ci_halfwidth_rel = mean > 0.0 ? half / mean : std::numeric_limits<double>::infinity();
      m.significant = mean > 0.0 && m.ci_halfwidth_rel <= options.threshold;
      if (m.significant || enc.size() >= cap) break;
    }
  }

  m.repeats = m.runs.size();
  double total = 0.0, idle = 0.0, duration = 0.0;
  for (const auto& r : m.runs) {
    total += r.e_total_j;
    idle += r.e_idle_j;
    duration += r.duration_s;
  }
  const double n = static_cast<double>(m.repeats);
  m.e_total = total / n;
  m.e_idle = idle / n;
  m.duration_t = duration / n;
  m.e_enc = m.e_total - m.e_idle;
  if (!m.significant)
    m.warnings.push_back("not significant after " + std::to_string(m.repeats) + " run(s)");
  return m;
}

inline constexpr const char* kLockFileEnv = "PEEM_LOCK_FILE";

inline std::filesystem::path default_lock_path() {
  if (const char* env = std::getenv(kLockFileEnv); env && *env) return env;
  return std::filesystem::temp_directory_path() / "peem-measure.lock";
}

// Machine-wide advisory lock that serialises energy measurements.
class MeasurementLock {
 public:
  explicit MeasurementLock(const std::filesystem::path& path = default_lock_path(), bool wait = true) {
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0666);
    if (fd_ < 0) throw ToolError("cannot open lock file " + path.string());
    if (::flock(fd_, LOCK_EX | (wait ? 0 : LOCK_NB)) != 0) {
      ::close(fd_);
      fd_ = -1;
      throw ToolError("another energy measurement holds " + path.string());
    }
  }
  MeasurementLock(const MeasurementLock&) = delete;
  MeasurementLock& operator=(const MeasurementLock&) = delete;
  ~MeasurementLock() {
    if (fd_ >= 0) {
      ::flock(fd_, LOCK_UN);
      ::close(fd_);
    }
  }

 private:
  int fd_ = -1;
};

}  // namespace peem
