#pragma once

#include <array>
#include <bitset>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "peem/errors.hpp"

namespace peem {

// Simulated processor events reported by cachegrind/callgrind with cache and
// branch simulation enabled. Declaration order is the canonical column order
// used throughout (datasets, model files, reports).
enum class EventId : std::uint8_t {
  Ir,    // instruction cache reads
  Dr,    // data cache reads
  Dw,    // data cache writes
  I1mr,  // I1 read misses
  D1mr,  // D1 read misses
  D1mw,  // D1 write misses
  ILmr,  // LL instruction read misses
  DLmr,  // LL data read misses
  DLmw,  // LL data write misses
  Bc,    // conditional branches executed
  Bcm,   // conditional branches mispredicted
  Bi,    // indirect branches executed
  Bim,   // indirect branches mispredicted
};

inline constexpr std::size_t kEventCount = 13;

inline constexpr std::array<EventId, kEventCount> kAllEvents = {
    EventId::Ir,   EventId::Dr,   EventId::Dw, EventId::I1mr, EventId::D1mr,
    EventId::D1mw, EventId::ILmr, EventId::DLmr, EventId::DLmw, EventId::Bc,
    EventId::Bcm,  EventId::Bi,   EventId::Bim};

inline constexpr std::array<std::string_view, kEventCount> kEventNames = {
    "Ir", "Dr", "Dw", "I1mr", "D1mr", "D1mw", "ILmr", "DLmr", "DLmw", "Bc", "Bcm", "Bi", "Bim"};

constexpr std::size_t index_of(EventId e) noexcept { return static_cast<std::size_t>(e); }

constexpr std::string_view event_name(EventId e) noexcept { return kEventNames[index_of(e)]; }

inline std::optional<EventId> event_from_name(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kEventCount; ++i) {
    if (kEventNames[i] == name) return kAllEvents[i];
  }
  return std::nullopt;
}

// (child, parent) pairs: a miss count can never exceed the access count it
// was drawn from.
inline constexpr std::array<std::pair<EventId, EventId>, 8> kMissHierarchy = {{
    {EventId::I1mr, EventId::Ir},
    {EventId::D1mr, EventId::Dr},
    {EventId::D1mw, EventId::Dw},
    {EventId::ILmr, EventId::I1mr},
    {EventId::DLmr, EventId::D1mr},
    {EventId::DLmw, EventId::D1mw},
    {EventId::Bcm, EventId::Bc},
    {EventId::Bim, EventId::Bi},
}};

class EventMask {
 public:
  EventMask() = default;
  EventMask(std::initializer_list<EventId> events) {
    for (auto e : events) insert(e);
  }

  static EventMask all() {
    EventMask m;
    m.bits_.set();
    return m;
  }

  bool contains(EventId e) const noexcept { return bits_.test(index_of(e)); }
  void insert(EventId e) noexcept { bits_.set(index_of(e)); }
  void erase(EventId e) noexcept { bits_.reset(index_of(e)); }
  std::size_t size() const noexcept { return bits_.count(); }
  bool empty() const noexcept { return bits_.none(); }

  // Members in canonical order.
  std::vector<EventId> events() const {
    std::vector<EventId> out;
    for (auto e : kAllEvents)
      if (contains(e)) out.push_back(e);
    return out;
  }

  bool is_subset_of(const EventMask& other) const noexcept { return (bits_ & ~other.bits_).none(); }

  friend bool operator==(const EventMask&, const EventMask&) = default;

 private:
  std::bitset<kEventCount> bits_;
};

inline std::string join_event_names(const std::vector<EventId>& events, std::string_view sep = ",") {
  std::string out;
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (i) out += sep;
    out += event_name(events[i]);
  }
  return out;
}

class MissingEvents : public DataError {
 public:
  explicit MissingEvents(std::vector<EventId> events)
      : DataError("missing events: " + join_event_names(events)), events_(std::move(events)) {}

  const std::vector<EventId>& events() const noexcept { return events_; }

 private:
  std::vector<EventId> events_;
};

// Parses "Ir,Dr,Dw" or "all". Unknown names are a ParseError.
inline EventMask parse_event_mask(std::string_view text) {
  if (text == "all") return EventMask::all();
  EventMask mask;
  while (!text.empty()) {
    auto comma = text.find(',');
    auto name = text.substr(0, comma);
    while (!name.empty() && name.front() == ' ') name.remove_prefix(1);
    while (!name.empty() && name.back() == ' ') name.remove_suffix(1);
    if (!name.empty()) {
      auto e = event_from_name(name);
      if (!e) throw ParseError(0, "unknown event '" + std::string(name) + "'");
      mask.insert(*e);
    }
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return mask;
}

// Event occurrence counts. An event may be absent (not recorded by the
// profiler), which is distinct from a zero count.
class EventVector {
 public:
  EventVector() = default;

  static EventVector zeros(const EventMask& mask) {
    EventVector v;
    v.present_ = mask;
    return v;
  }

  bool has(EventId e) const noexcept { return present_.contains(e); }

  std::uint64_t at(EventId e) const {
    if (!has(e)) throw MissingEvents({e});
    return counts_[index_of(e)];
  }

  std::uint64_t value_or(EventId e, std::uint64_t fallback) const noexcept {
    return has(e) ? counts_[index_of(e)] : fallback;
  }

  void set(EventId e, std::uint64_t count) noexcept {
    counts_[index_of(e)] = count;
    present_.insert(e);
  }

  void erase(EventId e) noexcept {
    counts_[index_of(e)] = 0;
    present_.erase(e);
  }

  const EventMask& present() const noexcept { return present_; }

  std::vector<EventId> missing_from(const EventMask& required) const {
    std::vector<EventId> out;
    for (auto e : required.events())
      if (!has(e)) out.push_back(e);
    return out;
  }

  // Projection onto `required`; never substitutes zeros for absent events.
  EventVector restrict_to(const EventMask& required) const {
    if (auto missing = missing_from(required); !missing.empty()) throw MissingEvents(std::move(missing));
    EventVector out;
    for (auto e : required.events()) out.set(e, counts_[index_of(e)]);
    return out;
  }

  // Element-wise sum over the union of present events.
  EventVector& operator+=(const EventVector& other) noexcept {
    for (auto e : other.present_.events()) {
      counts_[index_of(e)] += other.counts_[index_of(e)];
      present_.insert(e);
    }
    return *this;
  }

  friend EventVector operator+(EventVector a, const EventVector& b) noexcept { return a += b; }

  // Every present count multiplied by k.
  EventVector scaled(std::uint64_t k) const noexcept {
    EventVector out = *this;
    for (auto& c : out.counts_) c *= k;
    return out;
  }

  // Human-readable descriptions of miss-hierarchy violations, empty if valid.
  std::vector<std::string> hierarchy_violations() const {
    std::vector<std::string> out;
    for (auto [child, parent] : kMissHierarchy) {
      if (has(child) && has(parent) && at(child) > at(parent)) {
        out.push_back(std::string(event_name(child)) + " > " + std::string(event_name(parent)));
      }
    }
    return out;
  }

  friend bool operator==(const EventVector&, const EventVector&) = default;

 private:
  std::array<std::uint64_t, kEventCount> counts_{};
  EventMask present_;
};

}  // namespace peem
