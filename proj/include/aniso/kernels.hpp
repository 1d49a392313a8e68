#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace aniso {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Angle reduced to [0, pi); the elliptic kernel is pi-periodic in its axis.
inline double reduce_angle(double eta) {
  const double pi = std::numbers::pi;
  double r = std::fmod(eta, pi);
  if (r < 0) r += pi;
  if (r >= pi) r -= pi;
  return r;
}

// diag(1/l1, 1/l2) * Rotation(eta); lags mapped through it have isotropic
// decay in the transformed space.
template <typename Scalar = double>
Eigen::Matrix<Scalar, 2, 2> anisotropy_matrix(Scalar length1, Scalar length2,
                                              Scalar eta) {
  if (!(length1 > 0) || !(length2 > 0))
    throw Error("anisotropy_matrix: length scales must be positive");
  const Scalar c = std::cos(eta), s = std::sin(eta);
  Eigen::Matrix<Scalar, 2, 2> a;
  a << c / length1, -s / length1, s / length2, c / length2;
  return a;
}

// Stacked projection matrix: row r is (1/scale_r) * (cos axis_r, sin axis_r).
// `scales` holds one value per axis (group mapping resolved by the caller).
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, 2> multi_axis_matrix(
    const std::vector<Scalar>& axes, const std::vector<Scalar>& scales) {
  if (axes.empty()) throw Error("multi_axis_matrix: empty axis list");
  if (axes.size() != scales.size())
    throw Error("multi_axis_matrix: axes and scales must have equal length");
  Eigen::Matrix<Scalar, Eigen::Dynamic, 2> a(axes.size(), 2);
  for (std::size_t r = 0; r < axes.size(); ++r) {
    if (!(scales[r] > 0))
      throw Error("multi_axis_matrix: length scales must be positive");
    a(static_cast<Eigen::Index>(r), 0) = std::cos(axes[r]) / scales[r];
    a(static_cast<Eigen::Index>(r), 1) = std::sin(axes[r]) / scales[r];
  }
  return a;
}

struct IsotropicShape {
  double length_scale = 1.0;
};

struct EllipticShape {
  double length1 = 1.0;
  double length2 = 1.0;
  double angle = 0.0;  // stored reduced mod pi
};

struct MultiAxisShape {
  std::vector<double> axes;        // R unit directions (radians)
  std::vector<int> axis_group;     // axis index -> group index
  std::vector<double> group_scales;

  double scale_of_axis(std::size_t r) const {
    return group_scales[static_cast<std::size_t>(axis_group[r])];
  }
};

// Parameter vector for one of the three exponential kernel variants. The
// noise variance contributes only at exactly zero lag.
struct KernelParams {
  double signal_variance = 1.0;
  double noise_variance = 0.0;
  std::variant<IsotropicShape, EllipticShape, MultiAxisShape> shape;

  static KernelParams isotropic(double signal_variance, double length_scale,
                                double noise_variance) {
    check_variances(signal_variance, noise_variance);
    if (!(length_scale > 0)) throw Error("KernelParams: length scale must be positive");
    return {signal_variance, noise_variance, IsotropicShape{length_scale}};
  }

  static KernelParams elliptic(double signal_variance, double length1,
                               double length2, double angle,
                               double noise_variance) {
    check_variances(signal_variance, noise_variance);
    if (!(length1 > 0) || !(length2 > 0))
      throw Error("KernelParams: length scales must be positive");
    return {signal_variance, noise_variance,
            EllipticShape{length1, length2, reduce_angle(angle)}};
  }

  static KernelParams multi_axis(double signal_variance,
                                 std::vector<double> axes,
                                 std::vector<int> axis_group,
                                 std::vector<double> group_scales,
                                 double noise_variance) {
    check_variances(signal_variance, noise_variance);
    if (axes.size() < 2) throw Error("KernelParams: multi-axis needs R >= 2 axes");
    if (axes.size() != axis_group.size())
      throw Error("KernelParams: axis_group must map every axis");
    for (int g : axis_group)
      if (g < 0 || static_cast<std::size_t>(g) >= group_scales.size())
        throw Error("KernelParams: axis group index out of range");
    for (double s : group_scales)
      if (!(s > 0)) throw Error("KernelParams: length scales must be positive");
    for (double& a : axes) a = reduce_angle(a);
    return {signal_variance, noise_variance,
            MultiAxisShape{std::move(axes), std::move(axis_group),
                           std::move(group_scales)}};
  }

  bool is_isotropic() const { return std::holds_alternative<IsotropicShape>(shape); }
  bool is_elliptic() const { return std::holds_alternative<EllipticShape>(shape); }
  bool is_multi_axis() const { return std::holds_alternative<MultiAxisShape>(shape); }

 private:
  static void check_variances(double signal, double noise) {
    if (!(signal > 0)) throw Error("KernelParams: signal variance must be positive");
    if (!(noise >= 0)) throw Error("KernelParams: noise variance must be nonnegative");
  }
};

// Locations s_1..s_n as rows of an n x q matrix.
struct CoordinateSet {
  Matrix points;

  Eigen::Index size() const { return points.rows(); }
  Eigen::Index dim() const { return points.cols(); }
};

namespace detail {

// Transformed distance d such that the kernel's signal part is exp(-d).
// Elliptic with equal scales takes the isotropic path so that the reduction
// identity holds bitwise (warm-started nested fits rely on it).
inline double kernel_distance(const KernelParams& params,
                              const Eigen::Ref<const Vector>& lag) {
  if (!lag.allFinite()) throw Error("eval_kernel: non-finite lag components");
  if (const auto* iso = std::get_if<IsotropicShape>(&params.shape)) {
    return lag.norm() / iso->length_scale;
  }
  if (lag.size() != 2)
    throw Error("eval_kernel: elliptic/multi-axis kernels require 2-D lags");
  if (const auto* ell = std::get_if<EllipticShape>(&params.shape)) {
    if (ell->length1 == ell->length2) return lag.norm() / ell->length1;
    const Eigen::Matrix2d a =
        anisotropy_matrix(ell->length1, ell->length2, ell->angle);
    return (a * lag.head<2>()).norm();
  }
  const auto& ma = std::get<MultiAxisShape>(params.shape);
  double d2 = 0.0;
  for (std::size_t r = 0; r < ma.axes.size(); ++r) {
    const double p = (std::cos(ma.axes[r]) * lag[0] + std::sin(ma.axes[r]) * lag[1]) /
                     ma.scale_of_axis(r);
    d2 += p * p;
  }
  return std::sqrt(d2);
}

}  // namespace detail

// Covariance of two observations at lag h: signal * exp(-d(h)) plus the
// nugget when the lag is exactly zero.
inline double eval_kernel(const KernelParams& params,
                          const Eigen::Ref<const Vector>& lag) {
  const double d = detail::kernel_distance(params, lag);
  double value = params.signal_variance * std::exp(-d);
  if ((lag.array() == 0.0).all()) value += params.noise_variance;
  return value;
}

// Pairwise lag components of a fixed coordinate set, precomputed once so
// covariance rebuilds inside an optimizer cost only O(n^2) array work.
struct PairwiseGeometry {
  Matrix dist;       // ||s_i - s_j||
  Matrix dx, dy;     // s_i - s_j components (2-D sets only)

  explicit PairwiseGeometry(const CoordinateSet& coords) {
    const Eigen::Index n = coords.size();
    dist.resize(n, n);
    const bool planar = coords.dim() == 2;
    if (planar) {
      dx.resize(n, n);
      dy.resize(n, n);
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto diff = coords.points.row(i) - coords.points.row(j);
        dist(i, j) = diff.norm();
        if (planar) {
          dx(i, j) = diff[0];
          dy(i, j) = diff[1];
        }
      }
    }
  }

  Eigen::Index size() const { return dist.rows(); }
};

namespace detail {

// Fills the lower triangle (including diagonal) of `cov`.
inline void fill_covariance_lower(Matrix& cov, const PairwiseGeometry& geo,
                                  const KernelParams& params) {
  const Eigen::Index n = geo.size();
  cov.resize(n, n);
  const double sig = params.signal_variance;
  if (const auto* iso = std::get_if<IsotropicShape>(&params.shape)) {
    const double inv_l = 1.0 / iso->length_scale;
    for (Eigen::Index j = 0; j < n; ++j)
      cov.col(j).tail(n - j) =
          sig * (-inv_l * geo.dist.col(j).tail(n - j)).array().exp();
  } else if (const auto* ell = std::get_if<EllipticShape>(&params.shape)) {
    if (ell->length1 == ell->length2) {
      const double inv_l = 1.0 / ell->length1;
      for (Eigen::Index j = 0; j < n; ++j)
        cov.col(j).tail(n - j) =
            sig * (-inv_l * geo.dist.col(j).tail(n - j)).array().exp();
    } else {
      if (geo.dx.size() == 0)
        throw Error("covariance: elliptic kernel requires 2-D coordinates");
      const double c = std::cos(ell->angle), s = std::sin(ell->angle);
      const double inv1 = 1.0 / ell->length1, inv2 = 1.0 / ell->length2;
      for (Eigen::Index j = 0; j < n; ++j) {
        auto hx = geo.dx.col(j).tail(n - j).array();
        auto hy = geo.dy.col(j).tail(n - j).array();
        const auto u = (c * hx - s * hy) * inv1;
        const auto v = (s * hx + c * hy) * inv2;
        cov.col(j).tail(n - j) = sig * (-(u * u + v * v).sqrt()).exp();
      }
    }
  } else {
    const auto& ma = std::get<MultiAxisShape>(params.shape);
    if (geo.dx.size() == 0)
      throw Error("covariance: multi-axis kernel requires 2-D coordinates");
    Eigen::ArrayXd d2(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      auto hx = geo.dx.col(j).tail(n - j).array();
      auto hy = geo.dy.col(j).tail(n - j).array();
      d2.resize(n - j);
      d2.setZero();
      for (std::size_t r = 0; r < ma.axes.size(); ++r) {
        const double cr = std::cos(ma.axes[r]) / ma.scale_of_axis(r);
        const double sr = std::sin(ma.axes[r]) / ma.scale_of_axis(r);
        d2 += (cr * hx + sr * hy).square();
      }
      cov.col(j).tail(n - j) = sig * (-d2.sqrt()).exp();
    }
  }
  cov.diagonal().array() = params.signal_variance + params.noise_variance;
}

}  // namespace detail

// Full covariance matrix of the sample locations. Off-diagonal entries carry
// only the signal part (duplicate points share signal covariance but each
// keeps its own nugget on the diagonal); diagonal is signal + noise.
inline Matrix covariance_matrix(const CoordinateSet& coords,
                                const KernelParams& params) {
  if (coords.size() < 1) throw Error("covariance_matrix: empty coordinate set");
  if (!coords.points.allFinite())
    throw Error("covariance_matrix: non-finite coordinates");
  PairwiseGeometry geo(coords);
  Matrix cov;
  detail::fill_covariance_lower(cov, geo, params);
  cov.triangularView<Eigen::StrictlyUpper>() =
      cov.triangularView<Eigen::StrictlyLower>().transpose();
  return cov;
}

}  // namespace aniso
