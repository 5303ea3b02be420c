#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "survgen/dataset.hpp"
#include "survgen/error.hpp"
#include "survgen/schema.hpp"

namespace survgen {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Standardization constants fitted on a training cohort.
struct CodecStats {
  std::vector<double> cont_mean;
  std::vector<double> cont_std;
  double time_mean = 0.0;  // of log1p(T)
  double time_std = 1.0;
  std::vector<std::vector<std::string>> labels;  // per discrete covariate
  double t_floor = 1e-6;

  std::size_t d_cont() const { return cont_mean.size(); }
  std::size_t d_disc() const { return labels.size(); }
};

/// Matrix view of a cohort. `cont` holds the standardized continuous
/// covariates with standardized log1p(T) as the last column. `disc` holds one
/// one-hot block per discrete channel: covariates first, the event indicator
/// last; every block has a trailing mask slot.
struct EncodedBatch {
  Matrix cont;
  std::vector<Matrix> disc;

  Eigen::Index rows() const { return cont.rows(); }
};

/// State index of a one-hot row (the mask slot is index C).
inline std::size_t one_hot_index(const Matrix& block, Eigen::Index row) {
  Eigen::Index idx = -1;
  int ones = 0;
  for (Eigen::Index k = 0; k < block.cols(); ++k) {
    const double v = block(row, k);
    if (v == 1.0) {
      idx = k;
      ++ones;
    } else if (v != 0.0) {
      throw NumericError("row " + std::to_string(row) + " is not one-hot");
    }
  }
  if (ones != 1) throw NumericError("row " + std::to_string(row) + " is not one-hot");
  return static_cast<std::size_t>(idx);
}

namespace detail {
inline void mean_std(const std::vector<double>& v, double& mean, double& sd) {
  double s = 0.0;
  for (double x : v) s += x;
  mean = s / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  sd = std::sqrt(ss / static_cast<double>(v.size()));
}
}  // namespace detail

/// Fits population (denominator n) z-score constants. Rejects constant columns.
inline CodecStats fit_codec(const std::vector<SurvivalRecord>& records,
                            const FeatureSchema& schema) {
  if (records.size() < 2) throw SchemaError("fit_codec needs at least 2 records");
  const auto cont = schema.continuous_columns();
  CodecStats s;
  std::vector<double> col(records.size());
  for (std::size_t j = 0; j < cont.size(); ++j) {
    for (std::size_t i = 0; i < records.size(); ++i) col[i] = records[i].x_cont.at(j);
    double m, sd;
    detail::mean_std(col, m, sd);
    if (!(sd > 0.0)) throw SchemaError("continuous column '" + cont[j]->name + "' is constant");
    s.cont_mean.push_back(m);
    s.cont_std.push_back(sd);
  }
  for (std::size_t i = 0; i < records.size(); ++i) col[i] = std::log1p(records[i].time);
  detail::mean_std(col, s.time_mean, s.time_std);
  if (!(s.time_std > 0.0))
    throw SchemaError("time column '" + schema.time_column + "' is constant after log1p");
  for (const Column* c : schema.discrete_columns()) s.labels.push_back(c->labels);
  return s;
}

inline EncodedBatch encode(const std::vector<SurvivalRecord>& records, const CodecStats& codec) {
  const auto n = static_cast<Eigen::Index>(records.size());
  const auto dc = static_cast<Eigen::Index>(codec.d_cont());
  EncodedBatch b;
  b.cont.resize(n, dc + 1);
  for (std::size_t j = 0; j < codec.d_disc(); ++j)
    b.disc.push_back(Matrix::Zero(n, static_cast<Eigen::Index>(codec.labels[j].size() + 1)));
  b.disc.push_back(Matrix::Zero(n, 3));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = records[static_cast<std::size_t>(i)];
    if (r.x_cont.size() != codec.d_cont() || r.x_disc.size() != codec.d_disc())
      throw SchemaError("record " + std::to_string(i) + " does not match the codec shape");
    for (Eigen::Index j = 0; j < dc; ++j) {
      const auto jj = static_cast<std::size_t>(j);
      b.cont(i, j) = (r.x_cont[jj] - codec.cont_mean[jj]) / codec.cont_std[jj];
    }
    b.cont(i, dc) = (std::log1p(r.time) - codec.time_mean) / codec.time_std;
    for (std::size_t j = 0; j < codec.d_disc(); ++j) {
      if (r.x_disc[j] >= codec.labels[j].size())
        throw SchemaError("record " + std::to_string(i) + ": category index " +
                          std::to_string(r.x_disc[j]) + " not in label table");
      b.disc[j](i, static_cast<Eigen::Index>(r.x_disc[j])) = 1.0;
    }
    if (r.event != 0 && r.event != 1)
      throw SchemaError("record " + std::to_string(i) + ": event must be 0 or 1");
    b.disc.back()(i, r.event) = 1.0;
  }
  return b;
}

struct DecodeResult {
  std::vector<SurvivalRecord> records;
  std::size_t clamped = 0;  // times raised to t_floor
};

inline DecodeResult decode(const EncodedBatch& batch, const CodecStats& codec) {
  const auto dc = static_cast<Eigen::Index>(codec.d_cont());
  if (batch.cont.cols() != dc + 1 || batch.disc.size() != codec.d_disc() + 1)
    throw SchemaError("encoded batch does not match the codec shape");
  DecodeResult out;
  out.records.resize(static_cast<std::size_t>(batch.rows()));
  for (Eigen::Index i = 0; i < batch.rows(); ++i) {
    auto& r = out.records[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < dc; ++j) {
      const auto jj = static_cast<std::size_t>(j);
      r.x_cont.push_back(batch.cont(i, j) * codec.cont_std[jj] + codec.cont_mean[jj]);
    }
    double t = std::expm1(batch.cont(i, dc) * codec.time_std + codec.time_mean);
    if (!(t >= codec.t_floor)) {  // also catches NaN
      t = codec.t_floor;
      ++out.clamped;
    }
    r.time = t;
    for (std::size_t j = 0; j <= codec.d_disc(); ++j) {
      const auto& block = batch.disc[j];
      const std::size_t k = one_hot_index(block, i);
      if (k + 1 == static_cast<std::size_t>(block.cols()))
        throw NumericError("row " + std::to_string(i) + " channel " + std::to_string(j) +
                           " is still in the mask state");
      if (j < codec.d_disc())
        r.x_disc.push_back(k);
      else
        r.event = static_cast<int>(k);
    }
  }
  return out;
}

}  // namespace survgen
