#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "aniso/experiment.hpp"
#include "aniso/test_common.hpp"
#include "aniso/variogram.hpp"

namespace aniso {

using Json = nlohmann::json;

inline Json to_json(const KernelParams& params) {
  Json j;
  j["signal_variance"] = params.signal_variance;
  j["noise_variance"] = params.noise_variance;
  if (const auto* iso = std::get_if<IsotropicShape>(&params.shape)) {
    j["type"] = "isotropic";
    j["length_scale"] = iso->length_scale;
  } else if (const auto* ell = std::get_if<EllipticShape>(&params.shape)) {
    j["type"] = "elliptic";
    j["length1"] = ell->length1;
    j["length2"] = ell->length2;
    j["angle"] = ell->angle;
  } else {
    const auto& ma = std::get<MultiAxisShape>(params.shape);
    j["type"] = "multi_axis";
    j["axes"] = ma.axes;
    j["axis_group"] = ma.axis_group;
    j["group_scales"] = ma.group_scales;
  }
  return j;
}

inline Json to_json(const FitResult& fit, const std::string& objective_name) {
  Json j;
  j["params"] = to_json(fit.params);
  j[objective_name] = fit.objective;
  j["converged"] = fit.converged;
  j["restarts_used"] = fit.restarts_used;
  j["evaluations"] = fit.evaluations;
  return j;
}

// Structured record of a test run. Runtime never enters the record:
// identical inputs serialize to identical bytes.
inline Json to_json(const TestResult& result) {
  const std::string objective =
      result.algorithm == "parametric" ? "log_likelihood" : "sse";
  Json j;
  j["algorithm"] = result.algorithm;
  j["phi"] = result.phi;
  j["phi_resampled"] = result.phi_resampled;
  j["b_requested"] = result.b_requested;
  j["b_effective"] = result.b_effective();
  j["p_value"] = result.p_value;
  j["null_fit"] = to_json(result.null_fit, objective);
  j["alt_fit"] = to_json(result.alt_fit, objective);
  if (!result.resampled_angles.empty()) j["resampled_angles"] = result.resampled_angles;
  Json prov;
  prov["seed"] = result.provenance.seed;
  prov["stream_id"] = result.provenance.stream_id;
  prov["jitter_events"] = result.provenance.jitter_events;
  prov["mean_used"] = result.provenance.mean_used;
  if (result.provenance.pair_count > 0) prov["pair_count"] = result.provenance.pair_count;
  Json failures = Json::array();
  for (const auto& f : result.provenance.failures)
    failures.push_back({{"replicate", f.replicate}, {"message", f.message}});
  prov["replicate_failures"] = failures;
  j["provenance"] = prov;
  return j;
}

inline Json to_json(const std::vector<PreprocessRecord>& log) {
  Json j = Json::array();
  for (const auto& rec : log) {
    Json r;
    r["op"] = rec.op;
    for (const auto& [k, v] : rec.params) r[k] = v;
    j.push_back(r);
  }
  return j;
}

inline Json to_json(const CellResult& cell) {
  Json j;
  j["n"] = cell.n;
  j["lambda2"] = cell.lambda2;
  j["algorithm"] = cell.algorithm;
  j["repetitions"] = cell.repetitions;
  j["failures"] = cell.failures;
  j["rejection_rate"] = cell.rejection_rate;
  Json ps = Json::array();
  for (double p : cell.p_values) {
    if (std::isnan(p))
      ps.push_back(nullptr);
    else
      ps.push_back(p);
  }
  j["p_values"] = ps;
  return j;
}

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("emit: cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw Error("emit: write failed for '" + path + "'");
}

inline void write_json_file(const std::string& path, const Json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

// Flat table of the observed and resampled statistics for external plotting.
inline std::string resamples_csv(const TestResult& result) {
  std::string out = "index,kind,phi\n";
  out += "0,observed," + detail::format_double(result.phi) + "\n";
  for (std::size_t b = 0; b < result.phi_resampled.size(); ++b)
    out += std::to_string(b + 1) + ",resampled," +
           detail::format_double(result.phi_resampled[b]) + "\n";
  return out;
}

inline std::string grid_csv(const std::vector<CellResult>& cells) {
  std::string out = "n,lambda2,algorithm,repetitions,failures,rejection_rate\n";
  for (const auto& c : cells)
    out += std::to_string(c.n) + "," + detail::format_double(c.lambda2) + "," +
           c.algorithm + "," + std::to_string(c.repetitions) + "," +
           std::to_string(c.failures) + "," + detail::format_double(c.rejection_rate) +
           "\n";
  return out;
}

inline std::string grid_pvalues_csv(const std::vector<CellResult>& cells) {
  std::string out = "n,lambda2,algorithm,repetition,p_value\n";
  for (const auto& c : cells)
    for (std::size_t r = 0; r < c.p_values.size(); ++r) {
      out += std::to_string(c.n) + "," + detail::format_double(c.lambda2) + "," +
             c.algorithm + "," + std::to_string(r) + ",";
      out += std::isnan(c.p_values[r]) ? "NA" : detail::format_double(c.p_values[r]);
      out += "\n";
    }
  return out;
}

inline std::string variogram_csv(const std::vector<VariogramCell>& cells) {
  std::string out = "direction,distance,distance_lo,distance_hi,gamma,pair_count\n";
  for (const auto& c : cells) {
    out += detail::format_double(c.direction) + "," + detail::format_double(c.distance) +
           "," + detail::format_double(c.distance_lo) + "," +
           detail::format_double(c.distance_hi) + ",";
    out += c.value ? detail::format_double(*c.value) : "NA";
    out += "," + std::to_string(c.pair_count) + "\n";
  }
  return out;
}

inline std::string sample_csv(const SpatialSample& sample) {
  std::string out = "x,y,value\n";
  for (Eigen::Index i = 0; i < sample.size(); ++i)
    out += detail::format_double(sample.coords.points(i, 0)) + "," +
           detail::format_double(sample.coords.points(i, 1)) + "," +
           detail::format_double(sample.values[i]) + "\n";
  return out;
}

}  // namespace aniso
