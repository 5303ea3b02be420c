#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "survgen/error.hpp"
#include "survgen/random.hpp"
#include "survgen/schema.hpp"
#include "survgen/strings.hpp"

namespace survgen {

/// One subject in raw units. Covariates follow the schema's column order,
/// split into the continuous and discrete blocks.
struct SurvivalRecord {
  std::vector<double> x_cont;
  std::vector<std::size_t> x_disc;  // category indices
  int event = 0;                    // 1 observed, 0 censored
  double time = 0.0;

  bool operator==(const SurvivalRecord&) const = default;
};

struct LoadedData {
  std::vector<SurvivalRecord> records;
  std::optional<double> censoring_rate;  // absent for an empty file
};

/// Fraction of records with E = 0, i.e. 1 - mean(E). Absent when empty.
inline std::optional<double> censoring_rate(const std::vector<SurvivalRecord>& rs) {
  if (rs.empty()) return std::nullopt;
  std::size_t events = 0;
  for (const auto& r : rs) events += static_cast<std::size_t>(r.event);
  return 1.0 - static_cast<double>(events) / static_cast<double>(rs.size());
}

namespace detail {

// Splits one CSV line; supports double-quoted fields with "" escapes.
inline std::vector<std::string> split_csv_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delim) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline bool is_skippable(const std::string& line) {
  const std::string t = trim(line);
  return t.empty() || t[0] == '#';
}

inline bool is_missing(const std::string& v) {
  return v.empty() || v == "NA" || v == "NaN" || v == "nan" || v == "?";
}

}  // namespace detail

/// Parses a CSV stream against a schema. Lines starting with '#' are comments.
/// The header must contain every schema column; extra columns are ignored.
inline LoadedData read_csv(std::istream& in, const FeatureSchema& schema) {
  schema.validate();
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!detail::is_skippable(line)) {
      have_header = true;
      break;
    }
  }
  if (!have_header) throw SchemaError("CSV has no header row");

  const auto header = detail::split_csv_line(line, schema.delimiter);
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < header.size(); ++i) pos.emplace(header[i], i);
  auto locate = [&](const std::string& name) {
    auto it = pos.find(name);
    if (it == pos.end()) throw SchemaError("CSV header is missing column '" + name + "'");
    return it->second;
  };

  struct Slot {
    std::size_t field;
    const Column* column;
  };
  std::vector<Slot> cont_slots, disc_slots;
  std::vector<std::map<std::string, std::size_t>> label_index;
  for (const auto& c : schema.columns) {
    if (c.kind == ColumnKind::continuous) {
      cont_slots.push_back({locate(c.name), &c});
    } else {
      disc_slots.push_back({locate(c.name), &c});
      std::map<std::string, std::size_t> m;
      for (std::size_t k = 0; k < c.labels.size(); ++k) m.emplace(c.labels[k], k);
      label_index.push_back(std::move(m));
    }
  }
  const std::size_t time_field = locate(schema.time_column);
  const std::size_t event_field = locate(schema.event_column);

  LoadedData out;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::is_skippable(line)) continue;
    const auto f = detail::split_csv_line(line, schema.delimiter);
    if (f.size() != header.size())
      throw RowError(lineno, "expected " + std::to_string(header.size()) + " fields, got " +
                                 std::to_string(f.size()));
    SurvivalRecord r;
    for (const auto& s : cont_slots) {
      const auto& v = f[s.field];
      if (detail::is_missing(v))
        throw RowError(lineno, "missing value in column '" + s.column->name + "'");
      auto d = parse_double(v);
      if (!d || !std::isfinite(*d))
        throw RowError(lineno, "cannot parse '" + v + "' in column '" + s.column->name + "'");
      r.x_cont.push_back(*d);
    }
    for (std::size_t j = 0; j < disc_slots.size(); ++j) {
      const auto& v = f[disc_slots[j].field];
      if (detail::is_missing(v))
        throw RowError(lineno, "missing value in column '" + disc_slots[j].column->name + "'");
      auto it = label_index[j].find(v);
      if (it == label_index[j].end())
        throw RowError(lineno, "unknown category '" + v + "' in column '" +
                                   disc_slots[j].column->name + "'");
      r.x_disc.push_back(it->second);
    }
    const auto& tv = f[time_field];
    auto t = parse_double(tv);
    if (!t || !std::isfinite(*t)) throw RowError(lineno, "cannot parse time '" + tv + "'");
    if (*t <= 0.0) throw RowError(lineno, "time must be positive, got '" + tv + "'");
    r.time = *t;
    const auto& ev = f[event_field];
    auto e = parse_double(ev);
    if (!e || (*e != 0.0 && *e != 1.0))
      throw RowError(lineno, "event indicator must be 0 or 1, got '" + ev + "'");
    r.event = static_cast<int>(*e);
    out.records.push_back(std::move(r));
  }
  out.censoring_rate = censoring_rate(out.records);
  return out;
}

inline LoadedData load_csv(const std::string& path, const FeatureSchema& schema) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open data file '" + path + "'");
  return read_csv(in, schema);
}

/// Writes records with the schema's column order (covariates, time, event).
/// Each comment line is emitted as "# <text>" before the header.
inline void write_csv(std::ostream& os, const FeatureSchema& schema,
                      const std::vector<SurvivalRecord>& records,
                      const std::vector<std::string>& comments = {}) {
  const char d = schema.delimiter;
  for (const auto& c : comments) os << "# " << c << "\n";
  for (const auto& c : schema.columns) os << c.name << d;
  os << schema.time_column << d << schema.event_column << "\n";
  for (const auto& r : records) {
    std::size_t ic = 0, id = 0;
    for (const auto& c : schema.columns) {
      if (c.kind == ColumnKind::continuous) {
        os << format_double(r.x_cont.at(ic++));
      } else {
        os << c.labels.at(r.x_disc.at(id++));
      }
      os << d;
    }
    os << format_double(r.time) << d << r.event << "\n";
  }
}

struct Split {
  std::vector<SurvivalRecord> train;
  std::vector<SurvivalRecord> test;
  bool stratified = true;  // false when the input had no events or no censoring
};

/// Deterministic train/test split stratified on the event indicator.
/// `fraction` is the share of records that go to the training half.
inline Split split(const std::vector<SurvivalRecord>& records, double fraction,
                   std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw ConfigError("split fraction must lie in (0, 1)");
  const std::size_t n = records.size();
  if (n < 2) throw ConfigError("split needs at least 2 records");
  const auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  if (n_train == 0 || n_train == n)
    throw ConfigError("split fraction leaves one side empty for n = " + std::to_string(n));

  std::vector<std::size_t> events, censored;
  for (std::size_t i = 0; i < n; ++i) (records[i].event ? events : censored).push_back(i);

  CounterRng rng{seed, 0x5eed5917ULL};
  auto shuffle = [&](std::vector<std::size_t>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng() % i);
      std::swap(v[i - 1], v[j]);
    }
  };
  shuffle(events);
  shuffle(censored);

  std::size_t ev_train = static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(events.size())));
  if (events.size() >= 2) ev_train = std::clamp<std::size_t>(ev_train, 1, events.size() - 1);
  ev_train = std::min(ev_train, n_train);
  std::size_t cen_train = n_train - ev_train;
  if (cen_train > censored.size()) {
    cen_train = censored.size();
    ev_train = n_train - cen_train;
  }

  std::vector<char> in_train(n, 0);
  for (std::size_t i = 0; i < ev_train; ++i) in_train[events[i]] = 1;
  for (std::size_t i = 0; i < cen_train; ++i) in_train[censored[i]] = 1;

  Split s;
  s.stratified = !events.empty() && !censored.empty();
  if (events.empty())
    std::clog << "warning: split input has no events; stratification on E is degenerate\n";
  for (std::size_t i = 0; i < n; ++i) (in_train[i] ? s.train : s.test).push_back(records[i]);
  return s;
}

}  // namespace survgen
