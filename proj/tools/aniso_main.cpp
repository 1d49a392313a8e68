// Command-line surface for the anisotropy test library: simulation,
// hypothesis tests, variogram profiles, the simulation-study harness, and
// dataset ingestion. Every run is reproducible from its seed and echoed
// config.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "aniso/emit.hpp"
#include "aniso/experiment.hpp"
#include "aniso/field_sim.hpp"
#include "aniso/test_parametric.hpp"
#include "aniso/test_rotational.hpp"
#include "aniso/variogram.hpp"

namespace {

struct GlobalOptions {
  std::uint64_t seed = 0;
  int threads = static_cast<int>(std::thread::hardware_concurrency());
  std::string output;
  std::string format = "json";
};

struct InputOptions {
  std::string path;
  std::string x_column = "x";
  std::string y_column = "y";
  std::string value_column = "value";
  std::string preprocess;
};

std::vector<double> parse_double_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    out.push_back(std::stod(tok));
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& csv) {
  std::vector<int> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    out.push_back(std::stoi(tok));
  }
  return out;
}

std::vector<aniso::PreprocessStep> parse_preprocess(const std::string& spec) {
  std::vector<aniso::PreprocessStep> steps;
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    if (tok == "standardize-values") {
      steps.push_back(aniso::PreprocessStep::standardize_values());
    } else if (tok == "standardize-coords") {
      steps.push_back(aniso::PreprocessStep::standardize_coords());
    } else if (tok == "standardize-coords-zscore") {
      steps.push_back(
          aniso::PreprocessStep::standardize_coords(aniso::CoordScaleMode::ZScore));
    } else if (tok == "log-values") {
      steps.push_back(aniso::PreprocessStep::log_values());
    } else if (tok.rfind("drop-outliers:", 0) == 0) {
      steps.push_back(aniso::PreprocessStep::drop_outliers(std::stod(tok.substr(14))));
    } else {
      throw aniso::Error("unknown preprocess step '" + tok + "'");
    }
  }
  return steps;
}

aniso::SpatialSample load_input(const InputOptions& in) {
  aniso::ColumnMap columns{in.x_column, in.y_column, in.value_column};
  aniso::SpatialSample sample = aniso::load_dataset(in.path, columns);
  if (!in.preprocess.empty())
    sample = aniso::preprocess(std::move(sample), parse_preprocess(in.preprocess));
  return sample;
}

std::string output_stem(const std::string& path) {
  for (const std::string ext : {".json", ".csv"}) {
    if (path.size() > ext.size() && path.substr(path.size() - ext.size()) == ext)
      return path.substr(0, path.size() - ext.size());
  }
  return path;
}

void emit_record(const GlobalOptions& global, const aniso::Json& record,
                 const std::string& table, const std::string& table_suffix) {
  if (global.output.empty()) {
    if (global.format == "csv")
      std::cout << table;
    else
      std::cout << record.dump(2) << "\n";
    return;
  }
  aniso::write_json_file(global.output, record);
  if (!table.empty())
    aniso::write_text_file(output_stem(global.output) + table_suffix + ".csv", table);
}

void add_input_options(CLI::App* cmd, InputOptions& in) {
  cmd->add_option("--input", in.path, "Input delimited text file with header row")
      ->required();
  cmd->add_option("--x-column", in.x_column, "Column name for the x coordinate");
  cmd->add_option("--y-column", in.y_column, "Column name for the y coordinate");
  cmd->add_option("--value-column", in.value_column, "Column name for the observed value");
  cmd->add_option("--preprocess", in.preprocess,
                  "Comma list: standardize-values, standardize-coords, "
                  "standardize-coords-zscore, log-values, drop-outliers:K");
}

struct HypothesisOptions {
  double axis = 0.0;
  bool free_axes = false;
  double range_center = 0.0;
  double range_halfwidth = 0.0;
  std::string multi_axes;
  std::string multi_groups;

  aniso::HypothesisPair build() const {
    if (!multi_axes.empty()) {
      auto axes = parse_double_list(multi_axes);
      auto groups = multi_groups.empty() ? std::vector<int>(axes.size(), 0)
                                         : parse_int_list(multi_groups);
      return aniso::HypothesisPair::multi_axis(std::move(axes), std::move(groups));
    }
    if (free_axes) return aniso::HypothesisPair::elliptic_free();
    if (range_halfwidth > 0)
      return aniso::HypothesisPair::elliptic_range(range_center, range_halfwidth);
    return aniso::HypothesisPair::elliptic_fixed(axis);
  }
};

aniso::Json config_echo(const GlobalOptions& global) {
  aniso::Json j;
  j["seed"] = global.seed;
  j["threads"] = global.threads;
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Resampling-based anisotropy tests for stationary spatial random fields"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may appear after the subcommand
  app.set_config("--config", "", "Config file mirroring all flags (flags override)");

  GlobalOptions global;
  app.add_option("--seed", global.seed, "RNG seed (all output is a pure function of it)")
      ->capture_default_str();
  app.add_option("--threads", global.threads, "Worker threads")->capture_default_str();
  app.add_option("--output", global.output, "Output path (stdout when omitted)");
  app.add_option("--format", global.format, "Stdout format: json or csv")
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();

  // --- simulate ---------------------------------------------------------
  auto* simulate = app.add_subcommand("simulate", "Sample a Gaussian random field");
  int sim_n = 200;
  double sim_l1 = 1.0, sim_l2 = 1.0, sim_eta = 0.0;
  double sim_signal = 1.0, sim_noise = 1.0, sim_mean = 0.0;
  simulate->add_option("--n", sim_n, "Sample size")->capture_default_str();
  simulate->add_option("--lambda1", sim_l1, "First length scale")->capture_default_str();
  simulate->add_option("--lambda2", sim_l2, "Second length scale")->capture_default_str();
  simulate->add_option("--eta", sim_eta, "Anisotropy axis (radians)")->capture_default_str();
  simulate->add_option("--signal-variance", sim_signal, "Signal variance")
      ->capture_default_str();
  simulate->add_option("--noise-variance", sim_noise, "Noise variance")
      ->capture_default_str();
  simulate->add_option("--mean", sim_mean, "Field mean")->capture_default_str();

  // --- test-parametric ----------------------------------------------------
  auto* parametric = app.add_subcommand(
      "test-parametric", "Parametric bootstrap likelihood-ratio anisotropy test");
  InputOptions par_in;
  add_input_options(parametric, par_in);
  HypothesisOptions par_hyp;
  int par_B = 200;
  std::string par_mean_mode = "estimate";
  int par_random_starts = 3, par_rep_random_starts = 1, par_max_iter = 500;
  double par_tol = 1e-8;
  parametric->add_option("--axes", par_hyp.axis, "Fixed first anisotropy axis (radians)");
  parametric->add_flag("--free-axes", par_hyp.free_axes,
                       "Optimize the axes instead of fixing them");
  parametric->add_option("--range-center", par_hyp.range_center,
                         "Axis range center (radians)");
  parametric->add_option("--range-halfwidth", par_hyp.range_halfwidth,
                         "Axis range halfwidth (radians); enables range mode");
  parametric->add_option("--multi-axes", par_hyp.multi_axes,
                         "Multi-axis alternative: comma list of axes (radians)");
  parametric->add_option("--multi-groups", par_hyp.multi_groups,
                         "Scale-group index per axis, comma list");
  parametric->add_option("--B", par_B, "Bootstrap replicates")->capture_default_str();
  parametric->add_option("--mean-mode", par_mean_mode, "estimate or zero")
      ->check(CLI::IsMember({"estimate", "zero"}))
      ->capture_default_str();
  parametric->add_option("--random-starts", par_random_starts,
                         "Random optimizer starts for the observed fits")
      ->capture_default_str();
  parametric->add_option("--replicate-random-starts", par_rep_random_starts,
                         "Random optimizer starts for replicate fits")
      ->capture_default_str();
  parametric->add_option("--max-iterations", par_max_iter, "Optimizer iteration cap")
      ->capture_default_str();
  parametric->add_option("--tolerance", par_tol, "Optimizer relative tolerance")
      ->capture_default_str();

  // --- test-rotational ------------------------------------------------
  auto* rotational = app.add_subcommand(
      "test-rotational", "Non-parametric rotational axis-sampling anisotropy test");
  InputOptions rot_in;
  add_input_options(rotational, rot_in);
  double rot_eta = 0.0, rot_alpha = std::numbers::pi / 36;
  int rot_B = 200;
  long long rot_pair_cap = 10000;
  double rot_range_halfwidth = 0.0;
  bool rot_exclude_self = false;
  std::string rot_mean_mode = "estimate";
  std::string rot_multi_axes, rot_multi_groups;
  int rot_random_starts = 3, rot_rep_random_starts = 1, rot_max_iter = 500;
  double rot_tol = 1e-8;
  rotational->add_option("--eta", rot_eta, "Specified first axis (radians)")
      ->capture_default_str();
  rotational->add_option("--alpha", rot_alpha, "Exclusion band around the axes (radians)")
      ->capture_default_str();
  rotational->add_option("--B", rot_B, "Axis resamples")->capture_default_str();
  rotational->add_option("--pair-cap", rot_pair_cap,
                         "Pair subsample cap (0 disables the cap)")
      ->capture_default_str();
  rotational->add_option("--range-halfwidth", rot_range_halfwidth,
                         "Range-relaxed mode halfwidth (radians)");
  rotational->add_flag("--exclude-self-pairs", rot_exclude_self,
                       "Drop i == j pairs from the regression set");
  rotational->add_option("--mean-mode", rot_mean_mode, "estimate or zero")
      ->check(CLI::IsMember({"estimate", "zero"}))
      ->capture_default_str();
  rotational->add_option("--multi-axes", rot_multi_axes,
                         "Multi-axis alternative: comma list of axes (radians)");
  rotational->add_option("--multi-groups", rot_multi_groups,
                         "Scale-group index per axis, comma list");
  rotational->add_option("--random-starts", rot_random_starts,
                         "Random optimizer starts for the observed fits")
      ->capture_default_str();
  rotational->add_option("--replicate-random-starts", rot_rep_random_starts,
                         "Random optimizer starts for rotated fits")
      ->capture_default_str();
  rotational->add_option("--max-iterations", rot_max_iter, "Optimizer iteration cap")
      ->capture_default_str();
  rotational->add_option("--tolerance", rot_tol, "Optimizer relative tolerance")
      ->capture_default_str();

  // --- variogram --------------------------------------------------------
  auto* variogram = app.add_subcommand("variogram", "Directional empirical variogram table");
  InputOptions var_in;
  add_input_options(variogram, var_in);
  std::string var_directions = "0,0.7853981633974483,1.5707963267948966,2.356194490192345";
  int var_bins = 10;
  double var_angular_tol = std::numbers::pi / 8;
  double var_max_distance = 0.0;
  variogram->add_option("--directions", var_directions, "Comma list of directions (radians)")
      ->capture_default_str();
  variogram->add_option("--bins", var_bins, "Number of distance bins")->capture_default_str();
  variogram->add_option("--angular-tolerance", var_angular_tol,
                        "Angular halfwidth per direction (radians)")
      ->capture_default_str();
  variogram->add_option("--max-distance", var_max_distance,
                        "Upper distance limit (default: half the max pairwise distance)");

  // --- bench-grid -------------------------------------------------------
  auto* bench = app.add_subcommand("bench-grid",
                                   "Simulation study: rejection rates over an (n, lambda2) grid");
  std::string bench_ns = "200,500,1000", bench_l2 = "1,2,5,10";
  std::string bench_algorithms = "parametric,rotational";
  int bench_reps = 200, bench_B = 200;
  double bench_alpha = std::numbers::pi / 36;
  long long bench_pair_cap = 10000;
  bool bench_fixed_coords = false;
  int bench_obs_starts = 2, bench_rep_starts = 0;
  int bench_max_iter = 400;
  double bench_tol = 1e-6;
  double bench_significance = 0.05;
  bench->add_option("--n-list", bench_ns, "Comma list of sample sizes")->capture_default_str();
  bench->add_option("--lambda2-list", bench_l2, "Comma list of lambda2 values")
      ->capture_default_str();
  bench->add_option("--repetitions", bench_reps, "Monte Carlo repetitions per cell")
      ->capture_default_str();
  bench->add_option("--B", bench_B, "Resamples per test")->capture_default_str();
  bench->add_option("--alpha", bench_alpha, "Rotational exclusion band")->capture_default_str();
  bench->add_option("--pair-cap", bench_pair_cap, "Rotational pair subsample cap")
      ->capture_default_str();
  bench->add_option("--algorithms", bench_algorithms, "Comma subset of parametric,rotational")
      ->capture_default_str();
  bench->add_flag("--fixed-coords", bench_fixed_coords,
                  "Hold coordinates fixed across repetitions within a cell");
  bench->add_option("--observed-random-starts", bench_obs_starts,
                    "Random starts for observed fits")
      ->capture_default_str();
  bench->add_option("--replicate-random-starts", bench_rep_starts,
                    "Random starts for replicate fits")
      ->capture_default_str();
  bench->add_option("--max-iterations", bench_max_iter, "Optimizer iteration cap")
      ->capture_default_str();
  bench->add_option("--tolerance", bench_tol, "Optimizer relative tolerance")
      ->capture_default_str();
  bench->add_option("--significance", bench_significance, "Rejection level")
      ->capture_default_str();

  // --- ingest -----------------------------------------------------------
  auto* ingest = app.add_subcommand("ingest", "Load, preprocess and re-emit a dataset");
  InputOptions ing_in;
  add_input_options(ingest, ing_in);

  try {
    app.parse(argc, argv);

    if (*simulate) {
      aniso::SimulationConfig sim;
      sim.n = sim_n;
      sim.kernel =
          aniso::KernelParams::elliptic(sim_signal, sim_l1, sim_l2, sim_eta, sim_noise);
      sim.mean = sim_mean;
      aniso::RngStream rng(global.seed, 0);
      const auto coords = aniso::sample_coords(sim, rng.derived(aniso::stream_key::coords));
      const auto cov = aniso::covariance_matrix(coords, sim.kernel);
      const auto draw =
          aniso::sample_gaussian_field(sim.mean, cov, rng.derived(aniso::stream_key::field));
      const aniso::SpatialSample sample{coords, draw.values, {}};
      const std::string csv = aniso::sample_csv(sample);
      if (global.output.empty())
        std::cout << csv;
      else
        aniso::write_text_file(global.output, csv);
      return 0;
    }

    if (*parametric) {
      const aniso::SpatialSample sample = load_input(par_in);
      aniso::ParametricConfig cfg;
      cfg.B = par_B;
      cfg.threads = global.threads;
      cfg.mean_mode =
          par_mean_mode == "zero" ? aniso::MeanMode::Zero : aniso::MeanMode::Estimate;
      cfg.observed_fit.random_starts = par_random_starts;
      cfg.observed_fit.max_iterations = par_max_iter;
      cfg.observed_fit.relative_tolerance = par_tol;
      cfg.replicate_fit = cfg.observed_fit;
      cfg.replicate_fit.random_starts = par_rep_random_starts;
      const aniso::HypothesisPair hyp = par_hyp.build();
      const aniso::TestResult result =
          aniso::parametric_bootstrap_test(sample, hyp, cfg, aniso::RngStream(global.seed, 0));
      aniso::Json record;
      record["config"] = config_echo(global);
      record["config"]["B"] = par_B;
      record["config"]["mean_mode"] = par_mean_mode;
      record["config"]["input"] = par_in.path;
      record["config"]["preprocess"] = par_in.preprocess;
      record["config"]["random_starts"] = par_random_starts;
      record["config"]["replicate_random_starts"] = par_rep_random_starts;
      record["config"]["max_iterations"] = par_max_iter;
      record["config"]["tolerance"] = par_tol;
      if (par_hyp.free_axes)
        record["config"]["axes_mode"] = "free";
      else if (!par_hyp.multi_axes.empty()) {
        record["config"]["axes_mode"] = "multi";
        record["config"]["multi_axes"] = par_hyp.multi_axes;
        record["config"]["multi_groups"] = par_hyp.multi_groups;
      } else if (par_hyp.range_halfwidth > 0) {
        record["config"]["axes_mode"] = "range";
        record["config"]["range_center"] = par_hyp.range_center;
        record["config"]["range_halfwidth"] = par_hyp.range_halfwidth;
      } else {
        record["config"]["axes_mode"] = "fixed";
        record["config"]["axes"] = par_hyp.axis;
      }
      record["preprocessing_log"] = aniso::to_json(sample.preprocessing_log);
      record["result"] = aniso::to_json(result);
      emit_record(global, record, aniso::resamples_csv(result), "_resamples");
      return 0;
    }

    if (*rotational) {
      const aniso::SpatialSample sample = load_input(rot_in);
      aniso::RotationalConfig cfg;
      cfg.eta = rot_eta;
      cfg.alpha = rot_alpha;
      cfg.B = rot_B;
      cfg.pair_subsample = static_cast<Eigen::Index>(rot_pair_cap);
      if (rot_range_halfwidth > 0) cfg.range_halfwidth = rot_range_halfwidth;
      cfg.include_self_pairs = !rot_exclude_self;
      cfg.mean_mode =
          rot_mean_mode == "zero" ? aniso::MeanMode::Zero : aniso::MeanMode::Estimate;
      cfg.threads = global.threads;
      cfg.observed_fit.random_starts = rot_random_starts;
      cfg.observed_fit.max_iterations = rot_max_iter;
      cfg.observed_fit.relative_tolerance = rot_tol;
      cfg.replicate_fit = cfg.observed_fit;
      cfg.replicate_fit.random_starts = rot_rep_random_starts;
      if (!rot_multi_axes.empty()) {
        auto axes = parse_double_list(rot_multi_axes);
        auto groups = rot_multi_groups.empty() ? std::vector<int>(axes.size(), 0)
                                               : parse_int_list(rot_multi_groups);
        cfg.multi_axis_alt = aniso::FamilySpec::multi_axis(std::move(axes), std::move(groups));
      }
      const aniso::TestResult result =
          aniso::rotational_test(sample, cfg, aniso::RngStream(global.seed, 0));
      aniso::Json record;
      record["config"] = config_echo(global);
      record["config"]["eta"] = rot_eta;
      record["config"]["alpha"] = rot_alpha;
      record["config"]["B"] = rot_B;
      record["config"]["pair_cap"] = rot_pair_cap;
      record["config"]["input"] = rot_in.path;
      record["config"]["preprocess"] = rot_in.preprocess;
      record["config"]["mean_mode"] = rot_mean_mode;
      record["config"]["include_self_pairs"] = !rot_exclude_self;
      record["config"]["random_starts"] = rot_random_starts;
      record["config"]["replicate_random_starts"] = rot_rep_random_starts;
      record["config"]["max_iterations"] = rot_max_iter;
      record["config"]["tolerance"] = rot_tol;
      if (rot_range_halfwidth > 0) record["config"]["range_halfwidth"] = rot_range_halfwidth;
      if (!rot_multi_axes.empty()) {
        record["config"]["multi_axes"] = rot_multi_axes;
        record["config"]["multi_groups"] = rot_multi_groups;
      }
      record["preprocessing_log"] = aniso::to_json(sample.preprocessing_log);
      record["result"] = aniso::to_json(result);
      emit_record(global, record, aniso::resamples_csv(result), "_resamples");
      return 0;
    }

    if (*variogram) {
      const aniso::SpatialSample sample = load_input(var_in);
      const auto cells = aniso::directional_variogram_profile(
          sample, parse_double_list(var_directions), var_bins, var_angular_tol,
          var_max_distance);
      const std::string csv = aniso::variogram_csv(cells);
      if (global.output.empty())
        std::cout << csv;
      else
        aniso::write_text_file(global.output, csv);
      return 0;
    }

    if (*bench) {
      aniso::ExperimentGrid grid;
      grid.sample_sizes.clear();
      for (double n : parse_double_list(bench_ns))
        grid.sample_sizes.push_back(static_cast<int>(n));
      grid.lambda2_values = parse_double_list(bench_l2);
      grid.repetitions = bench_reps;
      grid.B = bench_B;
      grid.alpha = bench_alpha;
      grid.pair_cap = static_cast<Eigen::Index>(bench_pair_cap);
      grid.redraw_coords = !bench_fixed_coords;
      grid.seed = global.seed;
      grid.threads = global.threads;
      grid.significance = bench_significance;
      grid.observed_fit.random_starts = bench_obs_starts;
      grid.observed_fit.max_iterations = bench_max_iter;
      grid.observed_fit.relative_tolerance = bench_tol;
      grid.replicate_fit = grid.observed_fit;
      grid.replicate_fit.random_starts = bench_rep_starts;
      std::vector<aniso::Algorithm> algorithms;
      {
        std::stringstream ss(bench_algorithms);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
          if (tok == "parametric")
            algorithms.push_back(aniso::Algorithm::Parametric);
          else if (tok == "rotational")
            algorithms.push_back(aniso::Algorithm::Rotational);
          else if (!tok.empty())
            throw aniso::Error("unknown algorithm '" + tok + "'");
        }
      }
      const auto cells = aniso::run_experiment_grid(grid, algorithms);
      aniso::Json record;
      record["config"] = config_echo(global);
      record["config"]["n_list"] = grid.sample_sizes;
      record["config"]["lambda2_list"] = grid.lambda2_values;
      record["config"]["repetitions"] = grid.repetitions;
      record["config"]["B"] = grid.B;
      record["config"]["significance"] = grid.significance;
      aniso::Json cell_array = aniso::Json::array();
      for (const auto& c : cells) cell_array.push_back(aniso::to_json(c));
      record["cells"] = cell_array;
      if (global.output.empty()) {
        if (global.format == "csv")
          std::cout << aniso::grid_csv(cells);
        else
          std::cout << record.dump(2) << "\n";
      } else {
        aniso::write_json_file(global.output, record);
        aniso::write_text_file(output_stem(global.output) + "_summary.csv",
                               aniso::grid_csv(cells));
        aniso::write_text_file(output_stem(global.output) + "_pvalues.csv",
                               aniso::grid_pvalues_csv(cells));
      }
      return 0;
    }

    if (*ingest) {
      const aniso::SpatialSample sample = load_input(ing_in);
      const std::string csv = aniso::sample_csv(sample);
      if (global.output.empty()) {
        std::cout << csv;
      } else {
        aniso::write_text_file(global.output, csv);
        aniso::Json log;
        log["input"] = ing_in.path;
        log["n"] = sample.size();
        log["preprocessing_log"] = aniso::to_json(sample.preprocessing_log);
        aniso::write_json_file(output_stem(global.output) + "_log.json", log);
      }
      return 0;
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    aniso::Json err;
    err["error"] = e.what();
    std::cerr << err.dump() << "\n";
    return 1;
  }
  return 0;
}
