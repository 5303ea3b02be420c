#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "survgen/error.hpp"
#include "survgen/hash.hpp"
#include "survgen/strings.hpp"

namespace survgen {

enum class ColumnKind { continuous, discrete };

struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::continuous;
  std::vector<std::string> labels;  // discrete only; order defines category index

  std::size_t cardinality() const { return labels.size(); }
};

/// Ordered description of a survival table: covariate columns plus the
/// time and event roles. Category label orderings are part of the model.
struct FeatureSchema {
  std::vector<Column> columns;  // covariates only, in output order
  std::string time_column = "time";
  std::string event_column = "event";
  char delimiter = ',';

  std::size_t d_cont() const {
    return static_cast<std::size_t>(std::count_if(
        columns.begin(), columns.end(),
        [](const Column& c) { return c.kind == ColumnKind::continuous; }));
  }
  std::size_t d_disc() const { return columns.size() - d_cont(); }

  std::vector<const Column*> continuous_columns() const {
    std::vector<const Column*> out;
    for (const auto& c : columns)
      if (c.kind == ColumnKind::continuous) out.push_back(&c);
    return out;
  }
  std::vector<const Column*> discrete_columns() const {
    std::vector<const Column*> out;
    for (const auto& c : columns)
      if (c.kind == ColumnKind::discrete) out.push_back(&c);
    return out;
  }

  void validate() const {
    if (columns.empty()) throw SchemaError("schema declares no covariate columns");
    if (time_column.empty() || event_column.empty())
      throw SchemaError("schema must name both a time and an event column");
    if (time_column == event_column)
      throw SchemaError("time and event column must differ");
    std::set<std::string> seen;
    for (const auto& c : columns) {
      if (c.name.empty()) throw SchemaError("empty column name");
      if (c.name == time_column || c.name == event_column)
        throw SchemaError("column '" + c.name + "' is both a covariate and a role column");
      if (!seen.insert(c.name).second)
        throw SchemaError("duplicate column '" + c.name + "'");
      if (c.kind == ColumnKind::discrete) {
        if (c.labels.size() < 2)
          throw SchemaError("discrete column '" + c.name + "' needs at least 2 categories");
        std::set<std::string> ls(c.labels.begin(), c.labels.end());
        if (ls.size() != c.labels.size())
          throw SchemaError("discrete column '" + c.name + "' has duplicate labels");
      } else if (!c.labels.empty()) {
        throw SchemaError("continuous column '" + c.name + "' must not list labels");
      }
    }
  }

  /// Canonical text form; its hash identifies the schema inside checkpoints.
  std::string canonical() const {
    std::ostringstream os;
    os << "time=" << time_column << ";event=" << event_column << ";";
    for (const auto& c : columns) {
      os << c.name << ":" << (c.kind == ColumnKind::continuous ? "c" : "d");
      for (const auto& l : c.labels) os << "|" << l;
      os << ";";
    }
    return os.str();
  }

  std::string hash() const { return hex64(fnv1a64(canonical())); }

  bool operator==(const FeatureSchema& o) const { return canonical() == o.canonical(); }
};

inline char parse_delimiter(const std::string& v) {
  const std::string s = to_lower(trim(v));
  if (s.empty() || s == "comma" || s == ",") return ',';
  if (s == "tab" || s == "\\t") return '\t';
  if (s == "semicolon" || s == ";") return ';';
  if (s == "space") return ' ';
  if (s.size() == 1) return s[0];
  throw SchemaError("unsupported delimiter '" + v + "'");
}

inline std::string delimiter_name(char d) {
  switch (d) {
    case ',': return "comma";
    case '\t': return "tab";
    case ';': return "semicolon";
    case ' ': return "space";
    default: return std::string(1, d);
  }
}

/// Reads the INI schema format:
///
///   [roles]
///   time = time
///   event = cens
///   [csv]
///   delimiter = comma
///   [columns]
///   age = continuous
///   grade = discrete: I, II, III
inline FeatureSchema parse_schema(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw SchemaError(std::string("malformed schema: ") + e.what());
  }
  FeatureSchema s;
  s.time_column = trim(tree.get<std::string>("roles.time", ""));
  s.event_column = trim(tree.get<std::string>("roles.event", ""));
  s.delimiter = parse_delimiter(tree.get<std::string>("csv.delimiter", "comma"));
  auto cols = tree.get_child_optional("columns");
  if (!cols) throw SchemaError("schema has no [columns] section");
  for (const auto& [name, node] : *cols) {
    Column c;
    c.name = trim(name);
    const std::string decl = trim(node.get_value<std::string>());
    const auto colon = decl.find(':');
    const std::string kind = to_lower(trim(decl.substr(0, colon)));
    if (kind == "continuous") {
      c.kind = ColumnKind::continuous;
      if (colon != std::string::npos && !trim(decl.substr(colon + 1)).empty())
        throw SchemaError("continuous column '" + c.name + "' must not list labels");
    } else if (kind == "discrete") {
      c.kind = ColumnKind::discrete;
      if (colon == std::string::npos)
        throw SchemaError("discrete column '" + c.name + "' lists no categories");
      for (auto& l : split_trimmed(decl.substr(colon + 1), ','))
        c.labels.push_back(std::move(l));
    } else {
      throw SchemaError("column '" + c.name + "' has unknown kind '" + kind + "'");
    }
    s.columns.push_back(std::move(c));
  }
  s.validate();
  return s;
}

inline FeatureSchema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open schema file '" + path + "'");
  try {
    return parse_schema(in);
  } catch (const SchemaError& e) {
    throw SchemaError(path + ": " + e.what());
  }
}

inline void write_schema(std::ostream& os, const FeatureSchema& s) {
  os << "[roles]\ntime = " << s.time_column << "\nevent = " << s.event_column
     << "\n\n[csv]\ndelimiter = " << delimiter_name(s.delimiter) << "\n\n[columns]\n";
  for (const auto& c : s.columns) {
    os << c.name << " = ";
    if (c.kind == ColumnKind::continuous) {
      os << "continuous\n";
    } else {
      os << "discrete: " << join(c.labels, ", ") << "\n";
    }
  }
}

}  // namespace survgen
