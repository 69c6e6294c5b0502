#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace epiforge {

struct NelderMeadOptions {
  double reflection = 1.0;
  double expansion = 2.0;
  double contraction = 0.5;
  double shrink = 0.5;
  double xatol = 1e-4;
  double fatol = 1e-4;
  /// 0 selects 200 * dimension for both the iteration and evaluation caps.
  std::size_t max_iterations = 0;
  std::size_t max_evaluations = 0;
  /// Keep the best objective value after every iteration.
  bool record_history = false;
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  bool converged = false;
  std::vector<double> best_history;
};

/// Downhill simplex minimization. The starting simplex perturbs each
/// coordinate of `x0` by 5% (0.00025 for zero coordinates). Iteration stops
/// once every vertex lies within `xatol` of the best one in each coordinate
/// and the objective spread is within `fatol`, or when a cap is hit.
/// Non-finite objective values are treated as +infinity.
NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& objective,
                             std::vector<double> x0, const NelderMeadOptions& options = {});

}  // namespace epiforge
