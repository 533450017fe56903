#pragma once

// Datasets are a CSV file plus a JSON sidecar (`<path>.meta.json`) holding
// provenance and the schema version.
//
// CSV columns, in order:
//   sequence_id, preset, crf, pixels, time_s, energy_j, significant, flags,
//   Ir .. Bim            (events of the record's own run)
//   uf_Ir .. uf_Bim      (events of the ultrafast run of the same content)
// An unrecorded event or energy is an empty field, never zero. Reals are
// written in shortest round-trip form.

#include <json.hpp>

#include <charconv>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "peem/errors.hpp"
#include "peem/events.hpp"
#include "peem/model.hpp"
#include "peem/profile.hpp"

namespace peem {

inline constexpr int kDatasetSchemaVersion = 1;

struct Provenance {
  std::string host;
  std::string cpu_model;
  std::string encoder_version;
  std::string profiler_version;
  std::string created_at;
};

struct Dataset {
  std::vector<EncodeRecord> records;
  Provenance provenance;
  int schema_version = kDatasetSchemaVersion;
  // Cells that could not be collected, one note each.
  std::vector<std::string> gaps;
};

inline std::string meta_path_for(const std::string& csv_path) { return csv_path + ".meta.json"; }

inline void validate_dataset(const Dataset& ds) {
  std::set<std::tuple<std::string, Preset, int>> seen;
  for (const auto& r : ds.records) {
    if (!seen.emplace(r.sequence_id, r.preset, r.crf).second) {
      throw IntegrityError("duplicate record " + r.sequence_id + "/" + std::string(preset_name(r.preset)) + "/crf" +
                           std::to_string(r.crf));
    }
  }
}

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline double parse_double_field(std::string_view s, std::size_t line_no, const char* what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw ParseError(line_no, std::string(what) + " '" + std::string(s) + "' is not a number");
  return v;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::string csv_header() {
  std::string h = "sequence_id,preset,crf,pixels,time_s,energy_j,significant,flags";
  for (auto name : kEventNames) h += "," + std::string(name);
  for (auto name : kEventNames) h += ",uf_" + std::string(name);
  return h;
}

inline void check_text_field(const std::string& s, const char* what) {
  if (s.find_first_of(",\n\r\"") != std::string::npos)
    throw DataError(std::string(what) + " '" + s + "' contains a comma, quote or newline");
}

}  // namespace detail

inline void write_dataset_csv(std::ostream& os, const Dataset& ds) {
  os << detail::csv_header() << '\n';
  for (const auto& r : ds.records) {
    detail::check_text_field(r.sequence_id, "sequence_id");
    detail::check_text_field(r.flags, "flags");
    os << r.sequence_id << ',' << preset_name(r.preset) << ',' << r.crf << ',' << r.pixels << ','
       << detail::format_double(r.time_s) << ',' << (r.energy_j ? detail::format_double(*r.energy_j) : "") << ','
       << (r.significant ? 1 : 0) << ',' << r.flags;
    for (auto e : kAllEvents) {
      os << ',';
      if (r.events.has(e)) os << r.events.at(e);
    }
    for (auto e : kAllEvents) {
      os << ',';
      if (r.events_uf && r.events_uf->has(e)) os << r.events_uf->at(e);
    }
    os << '\n';
  }
}

inline Dataset read_dataset_csv(std::istream& in) {
  Dataset ds;
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw ParseError(1, "empty dataset file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != detail::csv_header()) throw ParseError(1, "unexpected dataset header");
  const std::size_t columns = 8 + 2 * kEventCount;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = detail::split_csv(line);
    if (f.size() != columns)
      throw ParseError(line_no, "expected " + std::to_string(columns) + " fields, got " + std::to_string(f.size()));
    EncodeRecord r;
    r.sequence_id = std::string(f[0]);
    if (r.sequence_id.empty()) throw ParseError(line_no, "empty sequence_id");
    auto preset = preset_from_name(f[1]);
    if (!preset) throw ParseError(line_no, "unknown preset '" + std::string(f[1]) + "'");
    r.preset = *preset;
    {
      auto [ptr, ec] = std::from_chars(f[2].data(), f[2].data() + f[2].size(), r.crf);
      if (ec != std::errc{} || ptr != f[2].data() + f[2].size()) throw ParseError(line_no, "bad crf");
    }
    auto pixels = detail::parse_u64(f[3]);
    if (!pixels) throw ParseError(line_no, "bad pixels");
    r.pixels = *pixels;
    r.time_s = detail::parse_double_field(f[4], line_no, "time_s");
    if (!f[5].empty()) r.energy_j = detail::parse_double_field(f[5], line_no, "energy_j");
    if (f[6] != "0" && f[6] != "1") throw ParseError(line_no, "significant must be 0 or 1");
    r.significant = f[6] == "1";
    r.flags = std::string(f[7]);
    bool any_uf = false;
    EventVector uf;
    for (std::size_t i = 0; i < kEventCount; ++i) {
      if (!f[8 + i].empty()) {
        auto v = detail::parse_u64(f[8 + i]);
        if (!v) throw ParseError(line_no, "bad count for " + std::string(kEventNames[i]));
        r.events.set(kAllEvents[i], *v);
      }
      if (!f[8 + kEventCount + i].empty()) {
        auto v = detail::parse_u64(f[8 + kEventCount + i]);
        if (!v) throw ParseError(line_no, "bad count for uf_" + std::string(kEventNames[i]));
        uf.set(kAllEvents[i], *v);
        any_uf = true;
      }
    }
    if (any_uf) r.events_uf = uf;
    ds.records.push_back(std::move(r));
  }
  validate_dataset(ds);
  return ds;
}

inline nlohmann::json dataset_meta_json(const Dataset& ds) {
  return {{"schema_version", ds.schema_version},
          {"provenance",
           {{"host", ds.provenance.host},
            {"cpu_model", ds.provenance.cpu_model},
            {"encoder_version", ds.provenance.encoder_version},
            {"profiler_version", ds.provenance.profiler_version},
            {"created_at", ds.provenance.created_at}}},
          {"gaps", ds.gaps},
          {"record_count", ds.records.size()}};
}

inline void save_dataset(const std::string& path, const Dataset& ds, bool overwrite = false) {
  validate_dataset(ds);
  if (!overwrite && std::filesystem::exists(path))
    throw OverwriteRefused("dataset '" + path + "' exists (use --force to overwrite)");
  {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write dataset '" + path + "'");
    write_dataset_csv(out, ds);
  }
  std::ofstream meta(meta_path_for(path));
  if (!meta) throw DataError("cannot write dataset metadata for '" + path + "'");
  meta << dataset_meta_json(ds).dump(2) << '\n';
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset '" + path + "'");
  Dataset ds = read_dataset_csv(in);
  std::ifstream meta(meta_path_for(path));
  if (!meta) return ds;  // bare CSV is accepted; provenance stays empty
  try {
    auto j = nlohmann::json::parse(meta);
    ds.schema_version = j.value("schema_version", kDatasetSchemaVersion);
    if (ds.schema_version != kDatasetSchemaVersion)
      throw ParseError(0, "unsupported dataset schema_version " + std::to_string(ds.schema_version));
    if (j.contains("provenance")) {
      const auto& p = j["provenance"];
      ds.provenance.host = p.value("host", "");
      ds.provenance.cpu_model = p.value("cpu_model", "");
      ds.provenance.encoder_version = p.value("encoder_version", "");
      ds.provenance.profiler_version = p.value("profiler_version", "");
      ds.provenance.created_at = p.value("created_at", "");
    }
    ds.gaps = j.value("gaps", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(0, std::string("dataset metadata: ") + ex.what());
  }
  return ds;
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Copies each ultrafast record's events into events_uf of every record with
// the same sequence and CRF.
inline void propagate_ultrafast_events(std::vector<EncodeRecord>& records) {
  std::map<std::pair<std::string, int>, EventVector> uf;
  for (const auto& r : records)
    if (r.preset == Preset::ultrafast && !r.events.present().empty()) uf[{r.sequence_id, r.crf}] = r.events;
  for (auto& r : records) {
    auto it = uf.find({r.sequence_id, r.crf});
    if (it != uf.end()) r.events_uf = it->second;
  }
}

}  // namespace peem
