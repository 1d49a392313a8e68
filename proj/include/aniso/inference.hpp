#pragma once

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "aniso/dataset.hpp"
#include "aniso/field_sim.hpp"
#include "aniso/kernels.hpp"
#include "aniso/nelder_mead.hpp"
#include "aniso/rng.hpp"

namespace aniso {

// Gaussian log-likelihood of z under N(mean*1, cov), via triangular
// factorization (jitter policy applies when cov is numerically non-PD).
inline double log_likelihood(const Vector& z, double mean, const Matrix& cov) {
  if (cov.rows() != z.size())
    throw Error("log_likelihood: dimension mismatch between z and cov");
  const SpdFactor factor = factor_spd(cov);
  const Vector resid = z.array() - mean;
  const Vector y = factor.lower.triangularView<Eigen::Lower>().solve(resid);
  const double n = static_cast<double>(z.size());
  const double log_det_half = factor.lower.diagonal().array().log().sum();
  return -0.5 * n * std::log(2.0 * std::numbers::pi) - log_det_half -
         0.5 * y.squaredNorm();
}

enum class FamilyKind { Isotropic, Elliptic, MultiAxis };

// How the anisotropy axes of a family behave during fitting: held at given
// values, optimized over [0, pi), or optimized within center +/- halfwidth.
struct AxisMode {
  enum class Kind { Fixed, Free, Range };
  Kind kind = Kind::Fixed;
  double angle = 0.0;      // Fixed: the axis; Range: interval center
  double halfwidth = 0.0;  // Range only

  static AxisMode fixed(double angle) { return {Kind::Fixed, angle, 0.0}; }
  static AxisMode free() { return {Kind::Free, 0.0, 0.0}; }
  static AxisMode range(double center, double halfwidth) {
    return {Kind::Range, center, halfwidth};
  }
};

// A kernel family with its axis constraints. For the elliptic family the
// axis mode drives the first axis (the second is perpendicular); for the
// multi-axis family it drives a rigid rotation of the whole configuration.
struct FamilySpec {
  FamilyKind kind = FamilyKind::Isotropic;
  AxisMode axis_mode = AxisMode::fixed(0.0);
  bool tie_scales = false;        // elliptic only: force length1 == length2
  std::vector<double> axes;       // multi-axis base configuration
  std::vector<int> axis_group;    // axis index -> scale group
  int group_count = 0;

  static FamilySpec isotropic() { return {}; }

  static FamilySpec elliptic(AxisMode mode, bool tie = false) {
    FamilySpec f;
    f.kind = FamilyKind::Elliptic;
    f.axis_mode = mode;
    f.tie_scales = tie;
    return f;
  }

  static FamilySpec multi_axis(std::vector<double> axes, std::vector<int> groups,
                               AxisMode rotation = AxisMode::fixed(0.0)) {
    FamilySpec f;
    f.kind = FamilyKind::MultiAxis;
    f.axis_mode = rotation;
    f.axes = std::move(axes);
    f.axis_group = std::move(groups);
    f.group_count = f.axis_group.empty()
                        ? 0
                        : 1 + *std::max_element(f.axis_group.begin(), f.axis_group.end());
    return f;
  }

  int scale_count() const {
    switch (kind) {
      case FamilyKind::Isotropic: return 1;
      case FamilyKind::Elliptic: return tie_scales ? 1 : 2;
      case FamilyKind::MultiAxis: return group_count;
    }
    return 0;
  }

  bool angle_is_free() const {
    if (kind == FamilyKind::Isotropic) return false;
    if (kind == FamilyKind::Elliptic && tie_scales) return false;
    return axis_mode.kind != AxisMode::Kind::Fixed;
  }

  // True when the family spans exactly the isotropic model space (so a pair
  // of fits over it must produce an identical optimum).
  bool is_effectively_isotropic() const {
    return kind == FamilyKind::Isotropic ||
           (kind == FamilyKind::Elliptic && tie_scales);
  }

  void validate() const {
    if (kind == FamilyKind::MultiAxis) {
      if (axes.size() < 2) throw Error("FamilySpec: multi-axis needs R >= 2 axes");
      if (axes.size() != axis_group.size())
        throw Error("FamilySpec: axis_group must map every axis");
      if (group_count < 1) throw Error("FamilySpec: no scale groups");
      if (axis_mode.kind == AxisMode::Kind::Free)
        throw Error("FamilySpec: free rotation of a multi-axis configuration is not supported");
    }
    if (axis_mode.kind == AxisMode::Kind::Range && !(axis_mode.halfwidth > 0))
      throw Error("FamilySpec: range mode needs a positive halfwidth");
  }
};

// Null/alternative family pair. The null must be nested in the alternative;
// for multi-axis alternatives this requires the axes to form a tight frame
// (sum of e_r e_r^T proportional to the identity), which holds for the
// perpendicular-pair configurations used throughout.
struct HypothesisPair {
  FamilySpec null_family = FamilySpec::isotropic();
  FamilySpec alt_family;

  static HypothesisPair elliptic_fixed(double eta) {
    return {FamilySpec::isotropic(), FamilySpec::elliptic(AxisMode::fixed(eta))};
  }
  static HypothesisPair elliptic_free() {
    return {FamilySpec::isotropic(), FamilySpec::elliptic(AxisMode::free())};
  }
  static HypothesisPair elliptic_range(double center, double halfwidth) {
    return {FamilySpec::isotropic(),
            FamilySpec::elliptic(AxisMode::range(center, halfwidth))};
  }
  static HypothesisPair multi_axis(std::vector<double> axes, std::vector<int> groups) {
    return {FamilySpec::isotropic(),
            FamilySpec::multi_axis(std::move(axes), std::move(groups))};
  }
  // Alternative restricted to the null subspace (length scales tied); used to
  // exercise the degenerate-pair contract.
  static HypothesisPair degenerate(double eta = 0.0) {
    return {FamilySpec::isotropic(), FamilySpec::elliptic(AxisMode::fixed(eta), true)};
  }

  void validate() const {
    null_family.validate();
    alt_family.validate();
    if (null_family.kind != FamilyKind::Isotropic)
      throw Error("HypothesisPair: null family must be isotropic");
    if (alt_family.axis_mode.kind == AxisMode::Kind::Range &&
        !(alt_family.axis_mode.halfwidth < std::numbers::pi / 4))
      throw Error("HypothesisPair: range halfwidth must be < pi/4");
    if (alt_family.kind == FamilyKind::MultiAxis) {
      Eigen::Matrix2d m = Eigen::Matrix2d::Zero();
      for (double a : alt_family.axes) {
        const Eigen::Vector2d e(std::cos(a), std::sin(a));
        m += e * e.transpose();
      }
      const double f = static_cast<double>(alt_family.axes.size()) / 2.0;
      if ((m - f * Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() > 1e-9)
        throw Error("HypothesisPair: multi-axis axes must form a tight frame "
                    "for the isotropic null to be nested");
    }
  }
};

struct OptimizerConfig {
  int max_iterations = 500;
  double relative_tolerance = 1e-8;
  bool moment_start = true;
  int random_starts = 3;
  double log_step = 0.25;    // initial simplex step, log-parameter units
  double angle_step = 0.3;   // initial simplex step, radians
  double perturb_sd = 0.5;   // random-start spread around the moment start
  bool keep_trace = false;
};

struct StartDiagnostic {
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct FitResult {
  KernelParams params = KernelParams::isotropic(1.0, 1.0, 0.0);
  // Log-likelihood for MLE fits (maximized); SSE for least-squares fits
  // (minimized).
  double objective = 0.0;
  bool converged = false;
  int restarts_used = 0;
  int evaluations = 0;
  int jitter_events = 0;
  std::vector<StartDiagnostic> trace;
};

namespace detail {

// Maps between optimizer coordinates and KernelParams. Layout:
// [ln signal, ln scale..., u_noise, (t_angle)] with noise = floor + exp(u)
// and range-mode angles passed through center + halfwidth*tanh(t).
class ParamCodec {
 public:
  ParamCodec(const FamilySpec& family, double noise_floor)
      : family_(family), noise_floor_(noise_floor) {}

  int dim() const {
    return 2 + family_.scale_count() + (family_.angle_is_free() ? 1 : 0);
  }

  KernelParams decode(const Vector& x) const {
    const double signal = std::exp(x[0]);
    const int ns = family_.scale_count();
    const double noise = noise_floor_ + std::exp(x[1 + ns]);
    const double angle = family_.angle_is_free() ? decode_angle(x[2 + ns]) : fixed_angle();
    switch (family_.kind) {
      case FamilyKind::Isotropic:
        return KernelParams::isotropic(signal, std::exp(x[1]), noise);
      case FamilyKind::Elliptic: {
        if (family_.tie_scales) {
          const double l = std::exp(x[1]);
          return KernelParams::elliptic(signal, l, l, angle, noise);
        }
        return KernelParams::elliptic(signal, std::exp(x[1]), std::exp(x[2]), angle, noise);
      }
      case FamilyKind::MultiAxis: {
        std::vector<double> scales(static_cast<std::size_t>(ns));
        for (int g = 0; g < ns; ++g) scales[static_cast<std::size_t>(g)] = std::exp(x[1 + g]);
        std::vector<double> axes = family_.axes;
        for (double& a : axes) a += angle;
        return KernelParams::multi_axis(signal, std::move(axes), family_.axis_group,
                                        std::move(scales), noise);
      }
    }
    throw Error("ParamCodec: unknown family");
  }

  Vector encode(const KernelParams& p) const {
    Vector x(dim());
    x[0] = std::log(p.signal_variance);
    const int ns = family_.scale_count();
    double angle = 0.0;
    if (const auto* iso = std::get_if<IsotropicShape>(&p.shape)) {
      if (family_.kind != FamilyKind::Isotropic &&
          !(family_.kind == FamilyKind::Elliptic && family_.tie_scales))
        throw Error("ParamCodec: cannot encode isotropic params into this family");
      x[1] = std::log(iso->length_scale);
    } else if (const auto* ell = std::get_if<EllipticShape>(&p.shape)) {
      if (family_.kind != FamilyKind::Elliptic)
        throw Error("ParamCodec: elliptic params need an elliptic family");
      if (family_.tie_scales) {
        x[1] = std::log(ell->length1);
      } else {
        x[1] = std::log(ell->length1);
        x[2] = std::log(ell->length2);
      }
      angle = ell->angle;
    } else {
      const auto& ma = std::get<MultiAxisShape>(p.shape);
      if (family_.kind != FamilyKind::MultiAxis ||
          static_cast<int>(ma.group_scales.size()) != ns)
        throw Error("ParamCodec: multi-axis params need a matching family");
      for (int g = 0; g < ns; ++g)
        x[1 + g] = std::log(ma.group_scales[static_cast<std::size_t>(g)]);
      angle = reduce_angle(ma.axes[0] - family_.axes[0]);
    }
    const double eff_noise = std::max(p.noise_variance - noise_floor_, noise_floor_ * 1e-3);
    x[1 + ns] = std::log(std::max(eff_noise, 1e-300));
    if (family_.angle_is_free()) x[2 + ns] = encode_angle(angle);
    return x;
  }

  Vector steps(const OptimizerConfig& cfg) const {
    Vector s = Vector::Constant(dim(), cfg.log_step);
    if (family_.angle_is_free()) {
      s[dim() - 1] = family_.axis_mode.kind == AxisMode::Kind::Range
                         ? 0.5  // tanh units
                         : cfg.angle_step;
    }
    return s;
  }

  bool has_angle() const { return family_.angle_is_free(); }
  const FamilySpec& family() const { return family_; }
  double noise_floor() const { return noise_floor_; }

 private:
  double fixed_angle() const { return family_.axis_mode.angle; }

  double decode_angle(double t) const {
    if (family_.axis_mode.kind == AxisMode::Kind::Range)
      return family_.axis_mode.angle + family_.axis_mode.halfwidth * std::tanh(t);
    return t;  // free: periodic objective, reduced mod pi on output
  }

  double encode_angle(double angle) const {
    if (family_.axis_mode.kind == AxisMode::Kind::Range) {
      // representative of `angle` nearest the interval center (angles mod pi)
      double delta = reduce_angle(angle - family_.axis_mode.angle + std::numbers::pi / 2) -
                     std::numbers::pi / 2;
      const double w = family_.axis_mode.halfwidth;
      delta = std::clamp(delta / w, -0.999999, 0.999999);
      return std::atanh(delta);
    }
    return angle;
  }

  FamilySpec family_;
  double noise_floor_;
};

// Reusable covariance + Cholesky workspace for likelihood evaluations on a
// fixed sample. Not thread-safe; one instance per fitting thread.
class GaussianLikelihood {
 public:
  GaussianLikelihood(const CoordinateSet& coords, const Vector& z, double mean)
      : geo_(coords), resid_(z.array() - mean), n_(z.size()) {
    cov_.resize(n_, n_);
  }

  // Log-likelihood at the given kernel parameters; -inf when the covariance
  // cannot be factored even with jitter.
  double operator()(const KernelParams& params) {
    if (!std::isfinite(params.signal_variance) || !std::isfinite(params.noise_variance))
      return -std::numeric_limits<double>::infinity();
    fill_covariance_lower(cov_, geo_, params);
    const double base = params.signal_variance + params.noise_variance;  // trace/n
    double applied = 0.0;
    for (int attempt = 0;; ++attempt) {
      llt_.compute(cov_);
      if (llt_.info() == Eigen::Success) break;
      if (attempt >= 5) return -std::numeric_limits<double>::infinity();
      const double target = base * 1e-10 * std::pow(10.0, attempt);
      cov_.diagonal().array() += target - applied;
      applied = target;
      ++jitter_events_;
    }
    const auto& lower = llt_.matrixLLT();
    double log_det_half = 0.0;
    for (Eigen::Index i = 0; i < n_; ++i) log_det_half += std::log(lower(i, i));
    y_ = llt_.matrixL().solve(resid_);
    return -0.5 * static_cast<double>(n_) * std::log(2.0 * std::numbers::pi) -
           log_det_half - 0.5 * y_.squaredNorm();
  }

  int jitter_events() const { return jitter_events_; }
  const PairwiseGeometry& geometry() const { return geo_; }

 private:
  PairwiseGeometry geo_;
  Vector resid_;
  Eigen::Index n_;
  Matrix cov_;
  Eigen::LLT<Matrix> llt_;
  Vector y_;
  int jitter_events_ = 0;
};

// Moment-based start: half the sample variance to each variance component,
// median pairwise distance as the length scale.
inline KernelParams moment_start(const FamilySpec& family, const Vector& z,
                                 const PairwiseGeometry& geo, double noise_floor) {
  const double var = std::max(sample_variance(z), 1e-12);
  const Eigen::Index n = geo.size();
  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = j + 1; i < n; ++i)
      if (geo.dist(i, j) > 0) dists.push_back(geo.dist(i, j));
  double median = 1.0;
  if (!dists.empty()) {
    const auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
    std::nth_element(dists.begin(), mid, dists.end());
    median = *mid;
  }
  const double sig = var / 2.0;
  const double noise = std::max(var / 2.0, noise_floor * 2.0);
  switch (family.kind) {
    case FamilyKind::Isotropic:
      return KernelParams::isotropic(sig, median, noise);
    case FamilyKind::Elliptic:
      return KernelParams::elliptic(sig, median, median, family.axis_mode.angle, noise);
    case FamilyKind::MultiAxis: {
      // equal scales reproducing the median-distance decay (unit rows sum to
      // R/2 * I for tight frames)
      const double scale =
          median * std::sqrt(static_cast<double>(family.axes.size()) / 2.0);
      std::vector<double> scales(static_cast<std::size_t>(family.group_count), scale);
      return KernelParams::multi_axis(sig, family.axes, family.axis_group, scales, noise);
    }
  }
  throw Error("moment_start: unknown family");
}

// Multi-start simplex driver shared by the MLE and least-squares fits.
// `eval` maps KernelParams to the (minimized) objective. Warm starts are also
// scored directly at params level, so the returned objective can never be
// worse than any warm start's (no encode/decode round-off).
template <typename Eval>
FitResult multi_start_minimize(Eval&& eval, const ParamCodec& codec,
                               const std::vector<KernelParams>& warm_starts,
                               const KernelParams& moment, const OptimizerConfig& cfg,
                               RngStream rng) {
  std::vector<Vector> starts;
  for (const KernelParams& warm : warm_starts) starts.push_back(codec.encode(warm));
  if (cfg.moment_start) starts.push_back(codec.encode(moment));
  RngStream start_rng = rng.derived(stream_key::starts);
  const Vector base = codec.encode(moment);
  for (int k = 0; k < cfg.random_starts; ++k) {
    RngStream r = start_rng.derived(static_cast<std::uint64_t>(k));
    Vector x = base;
    for (Eigen::Index i = 0; i < x.size(); ++i)
      x[i] += cfg.perturb_sd * r.normal();
    if (codec.has_angle() &&
        codec.family().axis_mode.kind == AxisMode::Kind::Free)
      x[x.size() - 1] = r.uniform(0.0, std::numbers::pi);
    starts.push_back(std::move(x));
  }
  if (starts.empty()) throw Error("fit: no optimizer starts configured");

  auto objective = [&](const Vector& x) -> double {
    try {
      return eval(codec.decode(x));
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  NelderMeadOptions nm;
  nm.max_iterations = cfg.max_iterations;
  nm.relative_tolerance = cfg.relative_tolerance;

  FitResult best;
  best.objective = std::numeric_limits<double>::infinity();
  bool have_best = false;
  for (const Vector& x0 : starts) {
    const NelderMeadResult run = nelder_mead(objective, x0, codec.steps(cfg), nm);
    ++best.restarts_used;
    best.evaluations += run.evaluations;
    if (cfg.keep_trace)
      best.trace.push_back({run.value, run.iterations, run.converged});
    if (!have_best || run.value < best.objective) {
      best.objective = run.value;
      best.params = codec.decode(run.x);
      best.converged = run.converged;
      have_best = true;
    }
  }
  for (const KernelParams& warm : warm_starts) {
    const double warm_value = eval(warm);
    ++best.evaluations;
    if (warm_value < best.objective) {
      best.objective = warm_value;
      best.params = warm;
      best.converged = true;
    }
  }
  if (!std::isfinite(best.objective))
    throw Error("fit: optimizer failed to reach a finite objective from any start");
  return best;
}

}  // namespace detail

// Embeds an isotropic fit into a larger family so nested fits can be
// warm-started. Elliptic embeddings (tied scales) reproduce the isotropic
// objective bitwise; multi-axis embeddings are exact for tight frames.
inline KernelParams embed_isotropic(const KernelParams& iso, const FamilySpec& target) {
  const auto* shape = std::get_if<IsotropicShape>(&iso.shape);
  if (!shape) throw Error("embed_isotropic: params are not isotropic");
  switch (target.kind) {
    case FamilyKind::Isotropic:
      return iso;
    case FamilyKind::Elliptic:
      return KernelParams::elliptic(iso.signal_variance, shape->length_scale,
                                    shape->length_scale, target.axis_mode.angle,
                                    iso.noise_variance);
    case FamilyKind::MultiAxis: {
      const double scale =
          shape->length_scale * std::sqrt(static_cast<double>(target.axes.size()) / 2.0);
      std::vector<double> scales(static_cast<std::size_t>(target.group_count), scale);
      std::vector<double> axes = target.axes;
      for (double& a : axes) a += target.axis_mode.angle;
      return KernelParams::multi_axis(iso.signal_variance, std::move(axes),
                                      target.axis_group, std::move(scales),
                                      iso.noise_variance);
    }
  }
  throw Error("embed_isotropic: unknown family");
}

// Maximum-likelihood kernel fit over a family's feasible set by multi-start
// Nelder-Mead on log parameters. The mean is estimated from z once and held
// fixed unless supplied.
inline FitResult fit_kernel_mle(const SpatialSample& sample, const FamilySpec& family,
                                const OptimizerConfig& cfg = {},
                                const std::optional<KernelParams>& warm_start = std::nullopt,
                                RngStream rng = RngStream(0, 0),
                                std::optional<double> mean = std::nullopt) {
  sample.validate();
  family.validate();
  if (sample.size() < 2) throw Error("fit_kernel_mle: need at least 2 observations");
  const double mu = mean ? *mean : estimate_mean(sample.values);
  const double noise_floor = std::max(1e-8 * sample_variance(sample.values), 1e-12);
  detail::GaussianLikelihood likelihood(sample.coords, sample.values, mu);
  detail::ParamCodec codec(family, noise_floor);
  const KernelParams moment =
      detail::moment_start(family, sample.values, likelihood.geometry(), noise_floor);

  auto eval = [&](const KernelParams& p) { return -likelihood(p); };
  std::vector<KernelParams> warms;
  if (warm_start) warms.push_back(*warm_start);
  FitResult fit = detail::multi_start_minimize(eval, codec, warms, moment, cfg, rng);
  fit.objective = -fit.objective;  // back to log-likelihood
  fit.jitter_events = likelihood.jitter_events();
  return fit;
}

}  // namespace aniso
