// Monte Carlo example checks: simulation-consistency of the fits and the
// stochastic behaviour of both tests at realistic sample sizes. Slower than
// the unit suite; everything is seeded and deterministic.

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <thread>
#include <vector>

#include "aniso/field_sim.hpp"
#include "aniso/parallel.hpp"
#include "aniso/test_parametric.hpp"
#include "aniso/test_rotational.hpp"

using namespace aniso;

namespace {

int worker_threads() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 2 : static_cast<int>(hw);
}

SpatialSample simulated(Eigen::Index n, const KernelParams& kernel, std::uint64_t seed) {
  SimulationConfig cfg;
  cfg.n = n;
  cfg.kernel = kernel;
  RngStream rng(seed, 0);
  const CoordinateSet coords = sample_coords(cfg, rng.derived(stream_key::coords));
  const Matrix cov = covariance_matrix(coords, kernel);
  return {coords, sample_gaussian_field(0.0, cov, rng.derived(stream_key::field)).values, {}};
}

}  // namespace

TEST_CASE("MLE simulation consistency: isotropic truth at n = 1000") {
  // On the unit square with length scale 1 the pair (signal, length) is only
  // weakly identified (their ratio is the microergodic quantity), so the
  // oracle-backed expectations are: the fitted likelihood never falls below
  // the likelihood at the generating parameters, the nugget lands within 50%
  // of truth, and signal/length stays within a factor two of the true ratio,
  // each on a majority of replicates.
  const auto truth = KernelParams::isotropic(1.0, 1.0, 1.0);
  const int reps = 20;
  std::vector<int> beats_truth(static_cast<std::size_t>(reps), 0);
  std::vector<int> noise_ok(static_cast<std::size_t>(reps), 0);
  std::vector<int> ratio_ok(static_cast<std::size_t>(reps), 0);
  OptimizerConfig cfg;
  cfg.random_starts = 1;
  cfg.relative_tolerance = 1e-6;
  parallel_for(static_cast<std::size_t>(reps), worker_threads(), [&](std::size_t r) {
    const SpatialSample s = simulated(1000, truth, 1000 + r);
    const FitResult fit = fit_kernel_mle(s, FamilySpec::isotropic(), cfg, std::nullopt,
                                         RngStream(81, r));
    const double mu = estimate_mean(s.values);
    const double ll_truth =
        log_likelihood(s.values, mu, covariance_matrix(s.coords, truth));
    beats_truth[r] = fit.objective >= ll_truth ? 1 : 0;
    noise_ok[r] = std::abs(fit.params.noise_variance - 1.0) <= 0.5 ? 1 : 0;
    const auto& shape = std::get<IsotropicShape>(fit.params.shape);
    const double ratio = fit.params.signal_variance / shape.length_scale;
    ratio_ok[r] = (ratio >= 0.5 && ratio <= 2.0) ? 1 : 0;
  });
  int n_beats = 0, n_noise = 0, n_ratio = 0;
  for (int r = 0; r < reps; ++r) {
    n_beats += beats_truth[static_cast<std::size_t>(r)];
    n_noise += noise_ok[static_cast<std::size_t>(r)];
    n_ratio += ratio_ok[static_cast<std::size_t>(r)];
  }
  INFO("beats-truth: ", n_beats, ", nugget within 50%: ", n_noise,
       ", signal/length ratio within 2x: ", n_ratio, " of ", reps);
  CHECK(n_beats == reps);  // the MLE can never score below the generating model
  CHECK(n_noise > reps / 2);
  CHECK(n_ratio > reps / 2);
}

TEST_CASE("MLE on isotropic data with the elliptic family keeps the scales balanced") {
  const auto truth = KernelParams::isotropic(1.0, 1.0, 1.0);
  const int reps = 20;
  std::vector<int> ok(static_cast<std::size_t>(reps), 0);
  OptimizerConfig cfg;
  cfg.random_starts = 1;
  cfg.relative_tolerance = 1e-6;
  parallel_for(static_cast<std::size_t>(reps), worker_threads(), [&](std::size_t r) {
    const SpatialSample s = simulated(1000, truth, 2000 + r);
    const FitResult fit = fit_kernel_mle(s, FamilySpec::elliptic(AxisMode::fixed(0.0)), cfg,
                                         std::nullopt, RngStream(82, r));
    const auto& shape = std::get<EllipticShape>(fit.params.shape);
    const double ratio = shape.length1 / shape.length2;
    ok[r] = (ratio >= 0.5 && ratio <= 2.0) ? 1 : 0;
  });
  int majority = 0;
  for (int v : ok) majority += v;
  INFO("balanced-ratio replicates: ", majority, "/", reps);
  CHECK(majority > reps / 2);
}

TEST_CASE("parametric test ranks a strongly anisotropic sample high in its bootstrap") {
  const auto truth = KernelParams::elliptic(1.0, 1.0, 10.0, 0.0, 1.0);
  const SpatialSample s = simulated(500, truth, 83);
  ParametricConfig cfg;
  cfg.B = 19;
  cfg.threads = worker_threads();
  cfg.observed_fit.random_starts = 2;
  cfg.observed_fit.relative_tolerance = 1e-6;
  cfg.replicate_fit.random_starts = 0;
  cfg.replicate_fit.moment_start = false;
  cfg.replicate_fit.relative_tolerance = 1e-6;
  const TestResult r =
      parametric_bootstrap_test(s, HypothesisPair::elliptic_fixed(0.0), cfg, RngStream(84, 0));
  INFO("phi = ", r.phi, ", p = ", r.p_value);
  CHECK(r.phi > 0.0);
  CHECK(r.p_value <= 0.1);  // the observed statistic outranks (almost) every replicate
}

TEST_CASE("ls_fit prefers the true axes over rotated ones for anisotropic data") {
  const double pi = std::numbers::pi;
  const auto truth = KernelParams::elliptic(1.0, 1.0, 5.0, 0.0, 1.0);
  const int reps = 20;
  std::vector<int> wins(static_cast<std::size_t>(reps), 0);
  OptimizerConfig cfg;
  cfg.random_starts = 1;
  cfg.relative_tolerance = 1e-6;
  parallel_for(static_cast<std::size_t>(reps), worker_threads(), [&](std::size_t r) {
    const SpatialSample s = simulated(500, truth, 3000 + r);
    RngStream rng(85, r);
    PairData pairs = build_pair_data(s, estimate_mean(s.values));
    pairs = subsample_pairs(pairs, 10000, rng.derived(stream_key::subsample));
    const LsFitResult iso = ls_fit(pairs, FamilySpec::isotropic(), cfg, {}, rng.derived(1));
    const FamilySpec aligned = FamilySpec::elliptic(AxisMode::fixed(0.0));
    const FamilySpec rotated = FamilySpec::elliptic(AxisMode::fixed(pi / 4));
    const LsFitResult fit_aligned =
        ls_fit(pairs, aligned, cfg, {embed_isotropic(iso.params, aligned)}, rng.derived(2));
    const LsFitResult fit_rotated =
        ls_fit(pairs, rotated, cfg, {embed_isotropic(iso.params, rotated)}, rng.derived(3));
    wins[r] = fit_aligned.sse < fit_rotated.sse ? 1 : 0;
  });
  int majority = 0;
  for (int v : wins) majority += v;
  INFO("true-axis wins: ", majority, "/", reps);
  CHECK(majority > reps / 2);
}

TEST_CASE("rotational test keeps its rejection rate in check on structureless noise") {
  // iid values carry no spatial structure; mild small-sample inflation is
  // tolerated but the rate must stay below 0.15
  const int reps = 100;
  std::vector<int> reject(static_cast<std::size_t>(reps), 0);
  parallel_for(static_cast<std::size_t>(reps), worker_threads(), [&](std::size_t r) {
    RngStream rng(86, r);
    SimulationConfig cfg_sim;
    cfg_sim.n = 200;
    const CoordinateSet coords = sample_coords(cfg_sim, rng.derived(stream_key::coords));
    Vector values(200);
    RngStream noise = rng.derived(stream_key::field);
    for (Eigen::Index i = 0; i < 200; ++i) values[i] = noise.normal();
    const SpatialSample s{coords, values, {}};

    RotationalConfig cfg;
    cfg.B = 100;
    cfg.pair_subsample = 10000;
    cfg.observed_fit.random_starts = 1;
    cfg.observed_fit.relative_tolerance = 1e-6;
    cfg.replicate_fit.random_starts = 0;
    cfg.replicate_fit.moment_start = false;
    cfg.replicate_fit.relative_tolerance = 1e-6;
    const TestResult t = rotational_test(s, cfg, rng.derived(7));
    reject[r] = t.p_value < 0.05 ? 1 : 0;
  });
  int rejections = 0;
  for (int v : reject) rejections += v;
  INFO("rejections: ", rejections, "/", reps);
  CHECK(static_cast<double>(rejections) / reps < 0.15);
}

TEST_CASE("rotational p-values on isotropic fields are not concentrated low") {
  const int reps = 60;
  std::vector<double> ps(static_cast<std::size_t>(reps), 1.0);
  const auto truth = KernelParams::isotropic(1.0, 1.0, 1.0);
  parallel_for(static_cast<std::size_t>(reps), worker_threads(), [&](std::size_t r) {
    const SpatialSample s = simulated(200, truth, 4000 + r);
    RotationalConfig cfg;
    cfg.B = 60;
    cfg.pair_subsample = 10000;
    cfg.observed_fit.random_starts = 1;
    cfg.observed_fit.relative_tolerance = 1e-6;
    cfg.replicate_fit.random_starts = 0;
    cfg.replicate_fit.moment_start = false;
    cfg.replicate_fit.relative_tolerance = 1e-6;
    ps[r] = rotational_test(s, cfg, RngStream(87, r)).p_value;
  });
  int below_tenth = 0;
  for (double p : ps)
    if (p < 0.1) ++below_tenth;
  // roughly 6 of 60 expected under uniformity; generous slack
  INFO("p < 0.1 count: ", below_tenth, "/", reps);
  CHECK(below_tenth <= 18);
}
