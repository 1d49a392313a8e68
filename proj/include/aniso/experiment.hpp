#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "aniso/field_sim.hpp"
#include "aniso/parallel.hpp"
#include "aniso/test_parametric.hpp"
#include "aniso/test_rotational.hpp"

namespace aniso {

enum class Algorithm { Parametric, Rotational };

inline std::string algorithm_name(Algorithm a) {
  return a == Algorithm::Parametric ? "parametric" : "rotational";
}

// Simulation study over (n, lambda2) cells: fields drawn from the elliptic
// exponential kernel with unit signal/noise variances and eta = 0, tests run
// per repetition, rejection rates reported at the given level.
struct ExperimentGrid {
  std::vector<int> sample_sizes = {200, 500, 1000};
  std::vector<double> lambda2_values = {1.0, 2.0, 5.0, 10.0};
  int repetitions = 200;
  int B = 200;
  double alpha = std::numbers::pi / 36;
  double lambda1 = 1.0;
  double signal_variance = 1.0;
  double noise_variance = 1.0;
  double eta = 0.0;
  double mean = 0.0;
  std::uint64_t seed = 0;
  Eigen::Index pair_cap = 10000;
  bool redraw_coords = true;  // fresh coordinates per repetition
  int threads = 1;
  double significance = 0.05;
  OptimizerConfig observed_fit;
  OptimizerConfig replicate_fit;

  void validate() const {
    if (sample_sizes.empty() || lambda2_values.empty())
      throw Error("ExperimentGrid: empty grid");
    for (int n : sample_sizes)
      if (n < 2) throw Error("ExperimentGrid: sample sizes must be >= 2");
    for (double l : lambda2_values)
      if (!(l > 0)) throw Error("ExperimentGrid: lambda2 must be positive");
    if (repetitions < 0) throw Error("ExperimentGrid: negative repetitions");
    if (B < 1) throw Error("ExperimentGrid: B must be >= 1");
  }
};

struct CellResult {
  int n = 0;
  double lambda2 = 0.0;
  std::string algorithm;
  int repetitions = 0;
  std::vector<double> p_values;  // by repetition; NaN marks a failed repetition
  double rejection_rate = 0.0;
  int failures = 0;
};

inline std::vector<CellResult> run_experiment_grid(const ExperimentGrid& grid,
                                                   const std::vector<Algorithm>& algorithms) {
  grid.validate();
  if (algorithms.empty()) throw Error("run_experiment_grid: no algorithms selected");

  struct Job {
    std::size_t cell;
    int rep;
  };
  const std::size_t n_cells = grid.sample_sizes.size() * grid.lambda2_values.size();
  std::vector<Job> jobs;
  jobs.reserve(n_cells * static_cast<std::size_t>(grid.repetitions));
  for (std::size_t c = 0; c < n_cells; ++c)
    for (int r = 0; r < grid.repetitions; ++r) jobs.push_back({c, r});

  // p_values[cell][algorithm][rep]
  std::vector<std::vector<std::vector<double>>> p_values(
      n_cells, std::vector<std::vector<double>>(
                   algorithms.size(),
                   std::vector<double>(static_cast<std::size_t>(grid.repetitions),
                                       std::numeric_limits<double>::quiet_NaN())));

  const RngStream root(grid.seed, 0);
  parallel_for(jobs.size(), grid.threads, [&](std::size_t idx) {
    const Job job = jobs[idx];
    const std::size_t ci = job.cell / grid.lambda2_values.size();
    const std::size_t li = job.cell % grid.lambda2_values.size();
    const int n = grid.sample_sizes[ci];
    const double lambda2 = grid.lambda2_values[li];

    const RngStream cell_stream = root.derived(job.cell);
    const RngStream rep_stream = cell_stream.derived(static_cast<std::uint64_t>(job.rep) + 1);

    SimulationConfig sim;
    sim.n = n;
    sim.kernel = KernelParams::elliptic(grid.signal_variance, grid.lambda1, lambda2,
                                        grid.eta, grid.noise_variance);
    sim.mean = grid.mean;
    const RngStream coord_stream = grid.redraw_coords
                                       ? rep_stream.derived(stream_key::coords)
                                       : cell_stream.derived(stream_key::coords);
    const CoordinateSet coords = sample_coords(sim, coord_stream);
    const Matrix cov = covariance_matrix(coords, sim.kernel);
    const FieldDraw draw =
        sample_gaussian_field(sim.mean, cov, rep_stream.derived(stream_key::field));
    const SpatialSample sample{coords, draw.values, {}};

    for (std::size_t a = 0; a < algorithms.size(); ++a) {
      const RngStream test_stream = rep_stream.derived(100 + a);
      try {
        double p;
        if (algorithms[a] == Algorithm::Parametric) {
          ParametricConfig cfg;
          cfg.B = grid.B;
          cfg.observed_fit = grid.observed_fit;
          cfg.replicate_fit = grid.replicate_fit;
          p = parametric_bootstrap_test(sample, HypothesisPair::elliptic_fixed(grid.eta),
                                        cfg, test_stream)
                  .p_value;
        } else {
          RotationalConfig cfg;
          cfg.eta = grid.eta;
          cfg.alpha = grid.alpha;
          cfg.B = grid.B;
          cfg.pair_subsample = grid.pair_cap;
          cfg.observed_fit = grid.observed_fit;
          cfg.replicate_fit = grid.replicate_fit;
          p = rotational_test(sample, cfg, test_stream).p_value;
        }
        p_values[job.cell][a][static_cast<std::size_t>(job.rep)] = p;
      } catch (const std::exception&) {
        // failure stays NaN; counted below
      }
    }
  });

  std::vector<CellResult> results;
  for (std::size_t c = 0; c < n_cells; ++c) {
    const std::size_t ci = c / grid.lambda2_values.size();
    const std::size_t li = c % grid.lambda2_values.size();
    for (std::size_t a = 0; a < algorithms.size(); ++a) {
      CellResult cell;
      cell.n = grid.sample_sizes[ci];
      cell.lambda2 = grid.lambda2_values[li];
      cell.algorithm = algorithm_name(algorithms[a]);
      cell.repetitions = grid.repetitions;
      cell.p_values = p_values[c][a];
      int rejections = 0, successes = 0;
      for (double p : cell.p_values) {
        if (std::isnan(p)) {
          ++cell.failures;
          continue;
        }
        ++successes;
        if (p < grid.significance) ++rejections;
      }
      cell.rejection_rate =
          successes > 0 ? static_cast<double>(rejections) / successes : 0.0;
      results.push_back(std::move(cell));
    }
  }
  return results;
}

}  // namespace aniso
