#pragma once

#include <filesystem>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "survgen/dataset.hpp"
#include "survgen/schema.hpp"

namespace testutil {

// age (continuous), grade (I/II/III), score (continuous), sex (f/m)
inline survgen::FeatureSchema small_schema() {
  using survgen::ColumnKind;
  survgen::FeatureSchema s;
  s.columns = {{"age", ColumnKind::continuous, {}},
               {"grade", ColumnKind::discrete, {"I", "II", "III"}},
               {"score", ColumnKind::continuous, {}},
               {"sex", ColumnKind::discrete, {"f", "m"}}};
  s.time_column = "time";
  s.event_column = "status";
  return s;
}

inline std::vector<survgen::SurvivalRecord> random_records(std::size_t n, unsigned seed) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> age(60.0, 10.0), score(0.0, 3.0);
  std::uniform_int_distribution<std::size_t> grade(0, 2), sex(0, 1);
  std::exponential_distribution<double> t(0.01);
  std::bernoulli_distribution e(0.6);
  std::vector<survgen::SurvivalRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    survgen::SurvivalRecord r;
    r.x_cont = {age(g), score(g)};
    r.x_disc = {grade(g), sex(g)};
    r.time = t(g) + 0.5;
    r.event = e(g) ? 1 : 0;
    out.push_back(r);
  }
  return out;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("survgen_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testutil
