#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "aniso/kernels.hpp"

namespace aniso {

// One applied transform, with enough parameters to reapply it bit-for-bit.
struct PreprocessRecord {
  std::string op;
  std::map<std::string, double> params;
};

// The dataset under test: locations, observed values, and the audit log of
// transforms that produced them.
struct SpatialSample {
  CoordinateSet coords;
  Vector values;
  std::vector<PreprocessRecord> preprocessing_log;

  Eigen::Index size() const { return values.size(); }

  void validate() const {
    if (coords.points.rows() != values.size())
      throw Error("SpatialSample: coordinate rows must match value count");
    if (!values.allFinite()) throw Error("SpatialSample: non-finite values");
    if (!coords.points.allFinite())
      throw Error("SpatialSample: non-finite coordinates");
  }
};

inline double estimate_mean(const Vector& z) {
  if (z.size() == 0) throw Error("estimate_mean: empty vector");
  return z.mean();
}

inline double sample_variance(const Vector& z) {
  if (z.size() < 2) return 0.0;
  const double m = z.mean();
  return (z.array() - m).square().sum() / static_cast<double>(z.size() - 1);
}

struct ColumnMap {
  std::string x = "x";
  std::string y = "y";
  std::string value = "value";
};

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line, char delim) {
  std::vector<std::string> fields;
  if (delim == ' ') {
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) fields.push_back(tok);
  } else {
    std::string tok;
    std::istringstream ss(line);
    while (std::getline(ss, tok, delim)) {
      // trim surrounding whitespace
      const auto b = tok.find_first_not_of(" \t\r");
      const auto e = tok.find_last_not_of(" \t\r");
      fields.push_back(b == std::string::npos ? std::string{} : tok.substr(b, e - b + 1));
    }
  }
  return fields;
}

inline std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) return std::nullopt;
  if (!std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace detail

// Reads a delimited text file (comma or whitespace, header row required) with
// designated x, y and value columns. Any row with a missing or non-numeric
// entry is an error naming that row.
inline SpatialSample load_dataset(const std::string& path, const ColumnMap& columns = {}) {
  std::ifstream in(path);
  if (!in) throw Error("load_dataset: cannot open '" + path + "'");
  std::string header;
  if (!std::getline(in, header)) throw Error("load_dataset: empty file '" + path + "'");
  if (!header.empty() && header.back() == '\r') header.pop_back();
  const char delim = header.find(',') != std::string::npos ? ',' : ' ';
  const auto names = detail::split_fields(header, delim);

  auto find_col = [&](const std::string& name) {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return static_cast<int>(i);
    throw Error("load_dataset: missing column '" + name + "' in '" + path + "'");
  };
  const int cx = find_col(columns.x);
  const int cy = find_col(columns.y);
  const int cv = find_col(columns.value);

  std::vector<double> xs, ys, vs;
  std::string line;
  std::size_t row = 1;  // header was row 1
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto fields = detail::split_fields(line, delim);
    const int needed = std::max({cx, cy, cv});
    if (static_cast<int>(fields.size()) <= needed)
      throw Error("load_dataset: row " + std::to_string(row) + " has too few fields");
    const auto px = detail::parse_double(fields[static_cast<std::size_t>(cx)]);
    const auto py = detail::parse_double(fields[static_cast<std::size_t>(cy)]);
    const auto pv = detail::parse_double(fields[static_cast<std::size_t>(cv)]);
    if (!px || !py || !pv)
      throw Error("load_dataset: row " + std::to_string(row) +
                  " has a missing or non-numeric entry");
    xs.push_back(*px);
    ys.push_back(*py);
    vs.push_back(*pv);
  }
  if (xs.size() < 2) throw Error("load_dataset: fewer than 2 valid rows in '" + path + "'");

  SpatialSample sample;
  sample.coords.points.resize(static_cast<Eigen::Index>(xs.size()), 2);
  sample.values.resize(static_cast<Eigen::Index>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sample.coords.points(static_cast<Eigen::Index>(i), 0) = xs[i];
    sample.coords.points(static_cast<Eigen::Index>(i), 1) = ys[i];
    sample.values[static_cast<Eigen::Index>(i)] = vs[i];
  }
  return sample;
}

enum class CoordScaleMode { UnitSquare, ZScore };

struct PreprocessStep {
  enum class Kind { StandardizeValues, StandardizeCoords, LogValues, DropOutliers };
  Kind kind;
  double threshold = 0.0;  // DropOutliers: |value z-score| above which a point is dropped
  CoordScaleMode coord_mode = CoordScaleMode::UnitSquare;

  static PreprocessStep standardize_values() { return {Kind::StandardizeValues, 0, {}}; }
  static PreprocessStep standardize_coords(CoordScaleMode m = CoordScaleMode::UnitSquare) {
    return {Kind::StandardizeCoords, 0, m};
  }
  static PreprocessStep log_values() { return {Kind::LogValues, 0, {}}; }
  static PreprocessStep drop_outliers(double threshold) {
    return {Kind::DropOutliers, threshold, {}};
  }
};

inline SpatialSample preprocess(SpatialSample sample,
                                const std::vector<PreprocessStep>& steps) {
  sample.validate();
  for (const auto& step : steps) {
    switch (step.kind) {
      case PreprocessStep::Kind::StandardizeValues: {
        const double m = sample.values.mean();
        const double sd = std::sqrt(sample_variance(sample.values));
        if (!(sd > 0)) throw Error("preprocess: cannot standardize constant values");
        sample.values = (sample.values.array() - m) / sd;
        sample.preprocessing_log.push_back(
            {"standardize_values", {{"mean", m}, {"sd", sd}}});
        break;
      }
      case PreprocessStep::Kind::StandardizeCoords: {
        PreprocessRecord rec{step.coord_mode == CoordScaleMode::UnitSquare
                                 ? "standardize_coords_unit"
                                 : "standardize_coords_zscore",
                             {}};
        for (Eigen::Index a = 0; a < sample.coords.dim(); ++a) {
          auto col = sample.coords.points.col(a);
          const std::string axis = "axis" + std::to_string(a);
          if (step.coord_mode == CoordScaleMode::UnitSquare) {
            const double lo = col.minCoeff(), hi = col.maxCoeff();
            const double range = hi - lo;
            if (!(range > 0)) throw Error("preprocess: degenerate coordinate axis");
            col = (col.array() - lo) / range;
            rec.params[axis + "_min"] = lo;
            rec.params[axis + "_range"] = range;
          } else {
            const double m = col.mean();
            const double sd = std::sqrt(sample_variance(col));
            if (!(sd > 0)) throw Error("preprocess: degenerate coordinate axis");
            col = (col.array() - m) / sd;
            rec.params[axis + "_mean"] = m;
            rec.params[axis + "_sd"] = sd;
          }
        }
        sample.preprocessing_log.push_back(std::move(rec));
        break;
      }
      case PreprocessStep::Kind::LogValues: {
        if ((sample.values.array() <= 0.0).any())
          throw Error("preprocess: log of nonpositive value");
        sample.values = sample.values.array().log();
        sample.preprocessing_log.push_back({"log_values", {}});
        break;
      }
      case PreprocessStep::Kind::DropOutliers: {
        const double m = sample.values.mean();
        const double sd = std::sqrt(sample_variance(sample.values));
        if (!(sd > 0)) throw Error("preprocess: cannot z-score constant values");
        std::vector<Eigen::Index> keep;
        for (Eigen::Index i = 0; i < sample.size(); ++i)
          if (std::abs((sample.values[i] - m) / sd) <= step.threshold) keep.push_back(i);
        if (keep.size() < 2)
          throw Error("preprocess: outlier removal left fewer than 2 points");
        Matrix pts(static_cast<Eigen::Index>(keep.size()), sample.coords.dim());
        Vector vals(static_cast<Eigen::Index>(keep.size()));
        for (std::size_t i = 0; i < keep.size(); ++i) {
          pts.row(static_cast<Eigen::Index>(i)) = sample.coords.points.row(keep[i]);
          vals[static_cast<Eigen::Index>(i)] = sample.values[keep[i]];
        }
        const double removed = static_cast<double>(sample.size() - vals.size());
        sample.coords.points = std::move(pts);
        sample.values = std::move(vals);
        sample.preprocessing_log.push_back(
            {"drop_outliers",
             {{"threshold", step.threshold}, {"removed", removed}, {"mean", m}, {"sd", sd}}});
        break;
      }
    }
  }
  return sample;
}

}  // namespace aniso
