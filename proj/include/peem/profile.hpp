#pragma once

// Reader for cachegrind and callgrind cost files.
//
// Only self costs are aggregated: call-cost lines (the line following a
// `calls=` record) and jump records are skipped. Position columns are
// decoded, including callgrind's subposition compression (`+n`, `-n`, `*`),
// so malformed positions are caught, but positions are not kept.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "peem/errors.hpp"
#include "peem/events.hpp"

namespace peem {

struct FunctionProfile {
  std::string function_name;
  std::string source_file;
  EventVector counts;
};

enum class ProfileDialect { cachegrind, callgrind };

struct Profile {
  std::vector<EventId> event_order;
  EventVector totals;
  std::vector<FunctionProfile> functions;
  std::string command_line;
  std::string source_path;
  ProfileDialect dialect = ProfileDialect::cachegrind;
  // Header lines not interpreted by the parser (desc:, creator:, ...), kept verbatim.
  std::vector<std::pair<std::string, std::string>> metadata;
  // Event columns declared in the header that are not one of the 13 known events.
  std::vector<std::string> ignored_events;

  EventMask event_mask() const {
    EventMask m;
    for (auto e : event_order) m.insert(e);
    return m;
  }

  const FunctionProfile* find_function(std::string_view name, std::string_view file) const {
    for (const auto& f : functions)
      if (f.function_name == name && f.source_file == file) return &f;
    return nullptr;
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::optional<std::uint64_t> parse_u64(std::string_view tok, int base = 10) {
  if (tok.empty()) return std::nullopt;
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v, base);
  if (ec != std::errc{} || ptr != tok.data() + tok.size()) return std::nullopt;
  return v;
}

// Header key for lines of the form `key: value`; empty when not a header line.
inline std::string_view header_key(std::string_view line) {
  std::size_t i = 0;
  while (i < line.size() && ((line[i] >= 'a' && line[i] <= 'z') || (line[i] >= 'A' && line[i] <= 'Z') ||
                             (line[i] >= '0' && line[i] <= '9' && i > 0) || line[i] == '_'))
    ++i;
  if (i == 0 || i >= line.size() || line[i] != ':') return {};
  return line.substr(0, i);
}

// Record key for name/call records of the form `fn=...`; empty otherwise.
inline std::string_view spec_key(std::string_view line) {
  std::size_t i = 0;
  while (i < line.size() && line[i] >= 'a' && line[i] <= 'z') ++i;
  if (i == 0 || i >= line.size() || line[i] != '=') return {};
  return line.substr(0, i);
}

// Callgrind name compression: "(id) name" defines, "(id)" references.
class NameTable {
 public:
  std::string resolve(std::string_view value, std::size_t line_no) {
    value = trim(value);
    if (value.empty() || value.front() != '(') return std::string(value);
    auto close = value.find(')');
    if (close == std::string_view::npos) return std::string(value);
    auto id = parse_u64(value.substr(1, close - 1));
    // "(below main)" and similar are literal names, not compressed ids.
    if (!id) return std::string(value);
    auto rest = trim(value.substr(close + 1));
    if (!rest.empty()) {
      names_[*id] = std::string(rest);
      return std::string(rest);
    }
    auto it = names_.find(*id);
    if (it == names_.end()) throw ParseError(line_no, "reference to undefined name id " + std::to_string(*id));
    return it->second;
  }

 private:
  std::map<std::uint64_t, std::string> names_;
};

class ProfileParser {
 public:
  explicit ProfileParser(std::string source_path) { profile_.source_path = std::move(source_path); }

  Profile run(std::istream& in) {
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
      ++line_no;
      handle_line(raw, line_no);
    }
    last_line_ = line_no;
    return finish();
  }

 private:
  void handle_line(std::string_view line, std::size_t line_no) {
    line = trim(line);
    if (line.empty() || line.front() == '#') return;

    if (auto key = spec_key(line); !key.empty()) {
      handle_spec(key, line.substr(key.size() + 1), line_no);
      return;
    }
    if (auto key = header_key(line); !key.empty()) {
      handle_header(key, trim(line.substr(key.size() + 1)), line_no);
      return;
    }
    handle_cost(line, line_no);
  }

  void handle_header(std::string_view key, std::string_view value, std::size_t line_no) {
    if (key == "events") {
      if (events_declared_) throw ParseError(line_no, "duplicate events: header");
      if (cost_seen_) throw ParseError(line_no, "events: header after cost lines");
      events_declared_ = true;
      auto names = split_ws(value);
      if (names.empty()) throw ParseError(line_no, "empty events: header");
      EventMask seen;
      std::vector<std::string_view> unknown_seen;
      for (auto name : names) {
        auto e = event_from_name(name);
        if (e) {
          if (seen.contains(*e)) throw ParseError(line_no, "duplicate event '" + std::string(name) + "'");
          seen.insert(*e);
          profile_.event_order.push_back(*e);
        } else {
          for (auto u : unknown_seen)
            if (u == name) throw ParseError(line_no, "duplicate event '" + std::string(name) + "'");
          unknown_seen.push_back(name);
          profile_.ignored_events.emplace_back(name);
        }
        columns_.push_back(e);
      }
      if (profile_.event_order.empty()) throw ParseError(line_no, "events: header names no known event");
      return;
    }
    if (key == "summary" || key == "totals") {
      if (!events_declared_) throw ParseError(line_no, std::string(key) + ": line before events: header");
      auto& slot = key == "summary" ? summary_ : totals_;
      if (slot) throw ParseError(line_no, "duplicate " + std::string(key) + ": line");
      slot = parse_costs(split_ws(value), line_no);
      return;
    }
    if (key == "positions") {
      auto kinds = split_ws(value);
      if (kinds.empty() || kinds.size() > 2) throw ParseError(line_no, "bad positions: header");
      for (auto k : kinds)
        if (k != "line" && k != "instr") throw ParseError(line_no, "unknown position kind '" + std::string(k) + "'");
      if (cost_seen_) throw ParseError(line_no, "positions: header after cost lines");
      positions_ = kinds.size();
      last_pos_.assign(positions_, 0);
      return;
    }
    if (key == "cmd") {
      profile_.command_line = std::string(value);
      return;
    }
    if (key == "version" || key == "creator") profile_.dialect = ProfileDialect::callgrind;
    profile_.metadata.emplace_back(std::string(key), std::string(value));
  }

  void handle_spec(std::string_view key, std::string_view value, std::size_t line_no) {
    if (key == "fl") {
      current_file_ = files_.resolve(value, line_no);
      // fl= starts a new function context in callgrind; cachegrind always follows with fn=.
      return;
    }
    if (key == "fi" || key == "fe") {
      files_.resolve(value, line_no);  // inlined source; cost stays with the current function
      return;
    }
    if (key == "fn") {
      if (!events_declared_) throw ParseError(line_no, "fn= before events: header");
      auto name = fns_.resolve(value, line_no);
      if (name.empty()) throw ParseError(line_no, "empty function name");
      current_fn_ = function_slot(name, current_file_);
      return;
    }
    if (key == "cfn") {
      profile_.dialect = ProfileDialect::callgrind;
      fns_.resolve(value, line_no);
      return;
    }
    if (key == "cfi" || key == "cfl") {
      profile_.dialect = ProfileDialect::callgrind;
      files_.resolve(value, line_no);
      return;
    }
    if (key == "ob" || key == "cob") {
      profile_.dialect = ProfileDialect::callgrind;
      objects_.resolve(value, line_no);
      return;
    }
    if (key == "calls") {
      profile_.dialect = ProfileDialect::callgrind;
      auto toks = split_ws(value);
      if (toks.size() < 2) throw ParseError(line_no, "malformed calls= line");
      if (!parse_u64(toks[0])) throw ParseError(line_no, "call count not a non-negative integer");
      skip_next_cost_ = true;
      return;
    }
    if (key == "jump" || key == "jcnd") {
      profile_.dialect = ProfileDialect::callgrind;
      return;
    }
    throw ParseError(line_no, "unknown record '" + std::string(key) + "='");
  }

  void handle_cost(std::string_view line, std::size_t line_no) {
    if (!events_declared_) throw ParseError(line_no, "cost line before events: header");
    cost_seen_ = true;
    auto toks = split_ws(line);
    if (toks.size() < positions_) throw ParseError(line_no, "cost line lacks position");
    for (std::size_t p = 0; p < positions_; ++p) decode_position(toks[p], p, line_no);
    std::vector<std::string_view> cost_toks(toks.begin() + static_cast<std::ptrdiff_t>(positions_), toks.end());
    auto costs = parse_costs(cost_toks, line_no);
    if (skip_next_cost_) {
      skip_next_cost_ = false;
      return;
    }
    if (!current_fn_) throw ParseError(line_no, "cost line outside a function (no fn= record)");
    profile_.functions[*current_fn_].counts += costs;
  }

  void decode_position(std::string_view tok, std::size_t column, std::size_t line_no) {
    auto& last = last_pos_[column];
    if (tok == "*") return;
    if (tok.front() == '+' || tok.front() == '-') {
      auto delta = parse_number(tok.substr(1));
      if (!delta) throw ParseError(line_no, "bad relative position '" + std::string(tok) + "'");
      if (tok.front() == '+') {
        last += static_cast<std::int64_t>(*delta);
      } else {
        last -= static_cast<std::int64_t>(*delta);
        if (last < 0) throw ParseError(line_no, "relative position below zero");
      }
      return;
    }
    auto abs = parse_number(tok);
    if (!abs) throw ParseError(line_no, "bad position '" + std::string(tok) + "'");
    last = static_cast<std::int64_t>(*abs);
  }

  static std::optional<std::uint64_t> parse_number(std::string_view tok) {
    if (tok.size() > 2 && tok[0] == '0' && (tok[1] == 'x' || tok[1] == 'X')) return parse_u64(tok.substr(2), 16);
    return parse_u64(tok);
  }

  EventVector parse_costs(const std::vector<std::string_view>& toks, std::size_t line_no) {
    if (toks.size() > columns_.size())
      throw ParseError(line_no, "more cost fields (" + std::to_string(toks.size()) + ") than events (" +
                                    std::to_string(columns_.size()) + ")");
    EventVector v = EventVector::zeros(profile_.event_mask());
    for (std::size_t i = 0; i < toks.size(); ++i) {
      auto n = parse_u64(toks[i]);
      if (!n) throw ParseError(line_no, "count '" + std::string(toks[i]) + "' is not a non-negative integer");
      if (columns_[i]) v.set(*columns_[i], *n);
    }
    return v;
  }

  std::size_t function_slot(const std::string& name, const std::string& file) {
    auto key = std::make_pair(name, file);
    if (auto it = index_.find(key); it != index_.end()) return it->second;
    profile_.functions.push_back({name, file, EventVector::zeros(profile_.event_mask())});
    index_.emplace(std::move(key), profile_.functions.size() - 1);
    return profile_.functions.size() - 1;
  }

  Profile finish() {
    if (!events_declared_) throw ParseError(last_line_, "missing events: header");
    if (skip_next_cost_) throw ParseError(last_line_, "calls= record without a following cost line");
    if (!summary_ && !totals_) throw ParseError(last_line_, "missing summary: line");
    // callgrind's header summary covers the whole run, totals: only the dumped
    // contexts; the function costs add up to the latter.
    if (summary_ && totals_ && !(*summary_ == *totals_)) {
      std::string text;
      for (auto e : profile_.event_order) text += (text.empty() ? "" : " ") + std::to_string(summary_->at(e));
      profile_.metadata.emplace_back("summary", text);
    }
    profile_.totals = totals_ ? *totals_ : *summary_;

    if (!profile_.functions.empty()) {
      EventVector sum = EventVector::zeros(profile_.event_mask());
      for (const auto& f : profile_.functions) sum += f.counts;
      for (auto e : profile_.event_order) {
        if (sum.at(e) != profile_.totals.at(e)) {
          throw IntegrityError("function costs for " + std::string(event_name(e)) + " sum to " +
                               std::to_string(sum.at(e)) + " but summary reports " +
                               std::to_string(profile_.totals.at(e)));
        }
      }
    }
    return std::move(profile_);
  }

  Profile profile_;
  std::vector<std::optional<EventId>> columns_;
  bool events_declared_ = false;
  bool cost_seen_ = false;
  bool skip_next_cost_ = false;
  std::size_t positions_ = 1;
  std::vector<std::int64_t> last_pos_ = std::vector<std::int64_t>(1, 0);
  std::optional<EventVector> summary_;
  std::optional<EventVector> totals_;
  std::string current_file_ = "???";
  std::optional<std::size_t> current_fn_;
  std::map<std::pair<std::string, std::string>, std::size_t> index_;
  NameTable files_;
  NameTable fns_;
  NameTable objects_;
  std::size_t last_line_ = 0;
};

}  // namespace detail

inline Profile parse_profile(std::istream& in, std::string source_path = {}) {
  return detail::ProfileParser(std::move(source_path)).run(in);
}

inline Profile parse_profile_text(std::string_view text, std::string source_path = {}) {
  std::istringstream in{std::string(text)};
  return parse_profile(in, std::move(source_path));
}

inline Profile parse_profile_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open profile '" + path + "'");
  return parse_profile(in, path);
}

// Totals restricted to `required`. Throws MissingEvents (in canonical order)
// when the profiler did not record a required event.
inline EventVector event_vector(const Profile& profile, const EventMask& required) {
  return profile.totals.restrict_to(required);
}

// Element-wise sum of profiles that declare the same event order. Functions
// are matched by (function_name, source_file) and keep first-seen order.
inline Profile merge_profiles(const std::vector<Profile>& parts) {
  if (parts.empty()) throw MergeError("no profiles to merge");
  Profile out;
  out.event_order = parts.front().event_order;
  out.command_line = parts.front().command_line;
  out.source_path = parts.front().source_path;
  out.dialect = parts.front().dialect;
  out.metadata = parts.front().metadata;
  out.ignored_events = parts.front().ignored_events;
  out.totals = EventVector::zeros(out.event_mask());

  std::map<std::pair<std::string, std::string>, std::size_t> index;
  for (const auto& part : parts) {
    if (part.event_order != out.event_order) {
      throw MergeError("event order mismatch: '" + join_event_names(part.event_order, " ") + "' vs '" +
                       join_event_names(out.event_order, " ") + "'");
    }
    out.totals += part.totals;
    for (const auto& f : part.functions) {
      auto key = std::make_pair(f.function_name, f.source_file);
      auto [it, inserted] = index.emplace(key, out.functions.size());
      if (inserted) {
        out.functions.push_back(f);
      } else {
        out.functions[it->second].counts += f.counts;
      }
    }
  }
  return out;
}

// Debug dump in the cachegrind dialect. Parsing the output reproduces the
// totals and per-function counts.
inline void write_profile(std::ostream& os, const Profile& profile) {
  for (const auto& [key, value] : profile.metadata)
    if (key == "desc") os << "desc: " << value << '\n';
  os << "cmd: " << profile.command_line << '\n';
  os << "events: " << join_event_names(profile.event_order, " ") << '\n';
  std::optional<std::string> file;
  for (const auto& f : profile.functions) {
    if (!file || *file != f.source_file) {
      os << "fl=" << f.source_file << '\n';
      file = f.source_file;
    }
    os << "fn=" << f.function_name << '\n';
    os << '0';
    for (auto e : profile.event_order) os << ' ' << f.counts.at(e);
    os << '\n';
  }
  os << "summary:";
  for (auto e : profile.event_order) os << ' ' << profile.totals.at(e);
  os << '\n';
}

inline std::string dump_profile(const Profile& profile) {
  std::ostringstream os;
  write_profile(os, profile);
  return os.str();
}

}  // namespace peem
