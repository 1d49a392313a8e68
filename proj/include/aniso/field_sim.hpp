#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <array>
#include <utility>

#include "aniso/kernels.hpp"
#include "aniso/rng.hpp"

namespace aniso {

// Cholesky-type factor of a symmetric matrix, with the escalating diagonal
// jitter fallback for numerically non-PD inputs. `jitter` records what was
// actually added (0 when the plain factorization succeeded).
struct SpdFactor {
  Matrix lower;
  double jitter = 0.0;
  int attempts = 1;
};

inline SpdFactor factor_spd(const Matrix& cov) {
  if (cov.rows() != cov.cols()) throw Error("factor_spd: matrix must be square");
  if (!cov.allFinite()) throw Error("factor_spd: non-finite covariance entries");
  const Eigen::Index n = cov.rows();
  double base = cov.trace() / static_cast<double>(n);
  if (!(base > 0)) base = 1.0;  // degenerate trace: absolute fallback scale

  Eigen::LLT<Matrix> llt(cov);
  SpdFactor out;
  if (llt.info() == Eigen::Success) {
    out.lower = llt.matrixL();
    if (out.lower.allFinite()) return out;
  }
  constexpr std::array<double, 5> kJitterScale = {1e-10, 1e-9, 1e-8, 1e-7, 1e-6};
  Matrix jittered = cov;
  double applied = 0.0;
  for (double scale : kJitterScale) {
    const double jitter = scale * base;
    jittered.diagonal().array() += jitter - applied;
    applied = jitter;
    ++out.attempts;
    llt.compute(jittered);
    if (llt.info() == Eigen::Success) {
      out.lower = llt.matrixL();
      if (out.lower.allFinite()) {
        out.jitter = jitter;
        return out;
      }
    }
  }
  throw Error("factor_spd: matrix numerically non-PD after jitter escalation");
}

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

// Simulation design: n locations uniform on a rectangle, a kernel, and a mean.
struct SimulationConfig {
  Eigen::Index n = 0;
  Eigen::Index dim = 2;
  std::vector<Interval> domain = {{0.0, 1.0}, {0.0, 1.0}};
  KernelParams kernel = KernelParams::isotropic(1.0, 1.0, 1.0);
  double mean = 0.0;
};

inline CoordinateSet sample_coords(const SimulationConfig& config, RngStream rng) {
  if (config.n < 1) throw Error("sample_coords: n must be >= 1");
  if (static_cast<Eigen::Index>(config.domain.size()) != config.dim)
    throw Error("sample_coords: domain must specify every axis");
  for (const auto& iv : config.domain)
    if (!(iv.hi >= iv.lo)) throw Error("sample_coords: empty domain interval");
  Matrix points(config.n, config.dim);
  for (Eigen::Index i = 0; i < config.n; ++i)
    for (Eigen::Index a = 0; a < config.dim; ++a)
      points(i, a) = rng.uniform(config.domain[static_cast<std::size_t>(a)].lo,
                                 config.domain[static_cast<std::size_t>(a)].hi);
  return CoordinateSet{std::move(points)};
}

// Draw from N(mean*1, cov) through a (jittered if necessary) Cholesky factor.
struct FieldDraw {
  Vector values;
  double jitter = 0.0;
};

inline FieldDraw sample_gaussian_field(double mean, const Matrix& cov, RngStream rng) {
  const SpdFactor factor = factor_spd(cov);
  Vector xi(cov.rows());
  for (Eigen::Index i = 0; i < xi.size(); ++i) xi[i] = rng.normal();
  FieldDraw draw;
  draw.values = factor.lower * xi;
  draw.values.array() += mean;
  draw.jitter = factor.jitter;
  return draw;
}

// Draw reusing an already computed factor (the bootstrap loop factors the
// fitted null covariance once and samples B times).
inline Vector sample_gaussian_field(double mean, const SpdFactor& factor, RngStream rng) {
  Vector xi(factor.lower.rows());
  for (Eigen::Index i = 0; i < xi.size(); ++i) xi[i] = rng.normal();
  Vector z = factor.lower * xi;
  z.array() += mean;
  return z;
}

}  // namespace aniso
