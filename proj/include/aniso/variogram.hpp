#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "aniso/dataset.hpp"
#include "aniso/kernels.hpp"

namespace aniso {

// One lag bin: either a vector target with per-component tolerances, or a
// polar (distance, direction) cell. Directions are axial (mod pi).
struct LagBinSpec {
  enum class Mode { Vector, Polar };
  Mode mode = Mode::Vector;
  Vector target;  // Vector mode
  Vector tol;
  double distance = 0.0;  // Polar mode
  double direction = 0.0;
  double distance_halfwidth = 0.0;
  double angle_halfwidth = 0.0;

  static LagBinSpec vector(Vector target, Vector tol) {
    LagBinSpec b;
    b.mode = Mode::Vector;
    b.target = std::move(target);
    b.tol = std::move(tol);
    return b;
  }
  static LagBinSpec polar(double distance, double direction, double distance_halfwidth,
                          double angle_halfwidth) {
    LagBinSpec b;
    b.mode = Mode::Polar;
    b.distance = distance;
    b.direction = direction;
    b.distance_halfwidth = distance_halfwidth;
    b.angle_halfwidth = angle_halfwidth;
    return b;
  }

  void validate() const {
    if (mode == Mode::Vector) {
      if (target.size() != tol.size() || target.size() == 0)
        throw Error("LagBinSpec: target and tolerance sizes must match");
      if ((tol.array() < 0).any()) throw Error("LagBinSpec: tolerances must be nonnegative");
    } else {
      if (!(distance_halfwidth >= 0) || !(angle_halfwidth >= 0))
        throw Error("LagBinSpec: tolerances must be nonnegative");
      if (!(angle_halfwidth < std::numbers::pi / 2))
        throw Error("LagBinSpec: direction tolerance must be < pi/2");
    }
  }
};

struct VariogramEstimate {
  std::optional<double> value;  // unset for an empty bin
  std::size_t pair_count = 0;
};

namespace detail {

// Axial angular distance between two directions (angles mod pi).
inline double axial_angle_distance(double a, double b) {
  const double pi = std::numbers::pi;
  double d = std::fmod(std::abs(a - b), pi);
  return std::min(d, pi - d);
}

inline bool lag_in_bin(const LagBinSpec& bin, double hx, double hy, double norm) {
  if (bin.mode == LagBinSpec::Mode::Vector) {
    const bool direct = std::abs(hx - bin.target[0]) <= bin.tol[0] &&
                        std::abs(hy - bin.target[1]) <= bin.tol[1];
    const bool mirrored = std::abs(-hx - bin.target[0]) <= bin.tol[0] &&
                          std::abs(-hy - bin.target[1]) <= bin.tol[1];
    return direct || mirrored;
  }
  if (std::abs(norm - bin.distance) > bin.distance_halfwidth) return false;
  if (norm == 0.0) return false;  // zero lag has no direction
  const double angle = std::atan2(hy, hx);
  return axial_angle_distance(angle, bin.direction) <= bin.angle_halfwidth;
}

}  // namespace detail

// Moment estimator: half the average squared increment over pairs whose lag
// falls in the bin (pairs counted once; lags treated axially).
inline VariogramEstimate empirical_variogram(const SpatialSample& sample,
                                             const LagBinSpec& bin) {
  sample.validate();
  bin.validate();
  if (bin.mode == LagBinSpec::Mode::Vector && bin.target.size() != sample.coords.dim())
    throw Error("empirical_variogram: bin dimension must match coordinates");
  double sum = 0.0;
  std::size_t count = 0;
  const Eigen::Index n = sample.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double hx = sample.coords.points(i, 0) - sample.coords.points(j, 0);
      const double hy = sample.coords.dim() > 1
                            ? sample.coords.points(i, 1) - sample.coords.points(j, 1)
                            : 0.0;
      const double norm = std::sqrt(hx * hx + hy * hy);
      if (!detail::lag_in_bin(bin, hx, hy, norm)) continue;
      const double diff = sample.values[i] - sample.values[j];
      sum += diff * diff;
      ++count;
    }
  }
  VariogramEstimate est;
  est.pair_count = count;
  if (count > 0) est.value = sum / (2.0 * static_cast<double>(count));
  return est;
}

struct VariogramCell {
  double direction = 0.0;
  double distance = 0.0;  // bin center
  double distance_lo = 0.0;
  double distance_hi = 0.0;
  std::optional<double> value;
  std::size_t pair_count = 0;
};

// Plot-ready table of empirical variograms per (direction, distance) cell.
// With no explicit bins: 10 equal-width bins up to half the maximum pairwise
// distance.
inline std::vector<VariogramCell> directional_variogram_profile(
    const SpatialSample& sample, const std::vector<double>& directions,
    int distance_bins, double angular_tolerance, double max_distance = 0.0) {
  sample.validate();
  if (directions.empty())
    throw Error("directional_variogram_profile: no directions given");
  if (distance_bins < 1)
    throw Error("directional_variogram_profile: need at least one distance bin");
  double limit = max_distance;
  if (!(limit > 0)) {
    double dmax = 0.0;
    const Eigen::Index n = sample.size();
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double d =
            (sample.coords.points.row(i) - sample.coords.points.row(j)).norm();
        dmax = std::max(dmax, d);
      }
    limit = dmax / 2.0;
  }
  if (!(limit > 0)) throw Error("directional_variogram_profile: degenerate distances");

  // one pass per direction with half-open distance bins [lo, hi) so adjacent
  // cells partition the pairs
  std::vector<VariogramCell> cells;
  const double width = limit / distance_bins;
  const Eigen::Index n = sample.size();
  for (double dir : directions) {
    std::vector<double> sums(static_cast<std::size_t>(distance_bins), 0.0);
    std::vector<std::size_t> counts(static_cast<std::size_t>(distance_bins), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double hx = sample.coords.points(i, 0) - sample.coords.points(j, 0);
        const double hy = sample.coords.points(i, 1) - sample.coords.points(j, 1);
        const double r = std::sqrt(hx * hx + hy * hy);
        if (r == 0.0) continue;
        const int bin = static_cast<int>(r / width);
        if (bin < 0 || bin >= distance_bins) continue;
        const double angle = std::atan2(hy, hx);
        if (detail::axial_angle_distance(angle, dir) > angular_tolerance) continue;
        const double diff = sample.values[i] - sample.values[j];
        sums[static_cast<std::size_t>(bin)] += diff * diff;
        ++counts[static_cast<std::size_t>(bin)];
      }
    }
    for (int k = 0; k < distance_bins; ++k) {
      VariogramCell cell;
      cell.direction = dir;
      cell.distance_lo = k * width;
      cell.distance_hi = (k + 1) * width;
      cell.distance = 0.5 * (cell.distance_lo + cell.distance_hi);
      cell.pair_count = counts[static_cast<std::size_t>(k)];
      if (cell.pair_count > 0)
        cell.value = sums[static_cast<std::size_t>(k)] /
                     (2.0 * static_cast<double>(cell.pair_count));
      cells.push_back(cell);
    }
  }
  return cells;
}

}  // namespace aniso
