#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace aniso {

struct NelderMeadOptions {
  int max_iterations = 500;
  double relative_tolerance = 1e-8;  // on the simplex value spread
  double absolute_tolerance = 1e-12;
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = std::numeric_limits<double>::infinity();
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

// Downhill simplex minimization (reflection/expansion/contraction/shrink with
// the classic coefficients). Non-finite objective values are treated as +inf
// so the simplex contracts away from infeasible regions.
inline NelderMeadResult nelder_mead(
    const std::function<double(const Eigen::VectorXd&)>& objective,
    const Eigen::VectorXd& start, const Eigen::VectorXd& initial_steps,
    const NelderMeadOptions& opts = {}) {
  const int dim = static_cast<int>(start.size());
  NelderMeadResult result;
  result.x = start;

  auto safe_eval = [&](const Eigen::VectorXd& x) {
    ++result.evaluations;
    const double f = objective(x);
    return std::isfinite(f) ? f : std::numeric_limits<double>::infinity();
  };

  std::vector<Eigen::VectorXd> vertex(static_cast<std::size_t>(dim) + 1, start);
  std::vector<double> value(static_cast<std::size_t>(dim) + 1);
  for (int i = 0; i < dim; ++i) {
    double step = initial_steps[i];
    if (step == 0.0) step = 0.1;
    vertex[static_cast<std::size_t>(i) + 1][i] += step;
  }
  for (std::size_t i = 0; i < vertex.size(); ++i) value[i] = safe_eval(vertex[i]);

  std::vector<std::size_t> order(vertex.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto sort_order = [&] {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return value[a] < value[b]; });
  };

  constexpr double kReflect = 1.0, kExpand = 2.0, kContract = 0.5, kShrink = 0.5;

  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    sort_order();
    const std::size_t best = order.front(), worst = order.back();
    const std::size_t second_worst = order[order.size() - 2];
    result.iterations = iter;

    const double spread = value[worst] - value[best];
    if (std::isfinite(value[best]) &&
        spread <= opts.relative_tolerance * (std::abs(value[best]) + opts.absolute_tolerance)) {
      result.converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
    for (std::size_t i : order)
      if (i != worst) centroid += vertex[i];
    centroid /= static_cast<double>(dim);

    const Eigen::VectorXd reflected = centroid + kReflect * (centroid - vertex[worst]);
    const double f_reflected = safe_eval(reflected);

    if (f_reflected < value[best]) {
      const Eigen::VectorXd expanded = centroid + kExpand * (reflected - centroid);
      const double f_expanded = safe_eval(expanded);
      if (f_expanded < f_reflected) {
        vertex[worst] = expanded;
        value[worst] = f_expanded;
      } else {
        vertex[worst] = reflected;
        value[worst] = f_reflected;
      }
    } else if (f_reflected < value[second_worst]) {
      vertex[worst] = reflected;
      value[worst] = f_reflected;
    } else {
      const bool outside = f_reflected < value[worst];
      const Eigen::VectorXd contracted =
          outside ? centroid + kContract * (reflected - centroid)
                  : centroid + kContract * (vertex[worst] - centroid);
      const double f_contracted = safe_eval(contracted);
      if (f_contracted < (outside ? f_reflected : value[worst])) {
        vertex[worst] = contracted;
        value[worst] = f_contracted;
      } else {
        for (std::size_t i : order) {
          if (i == best) continue;
          vertex[i] = vertex[best] + kShrink * (vertex[i] - vertex[best]);
          value[i] = safe_eval(vertex[i]);
        }
      }
    }
  }

  sort_order();
  result.x = vertex[order.front()];
  result.value = value[order.front()];
  return result;
}

}  // namespace aniso
