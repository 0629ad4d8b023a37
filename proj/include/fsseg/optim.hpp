#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <functional>
#include <vector>

namespace fsseg {

// Evaluates the objective at x and fills grad (same length as x). Must be
// deterministic for fixed x.
using ObjectiveFunction = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct OptimizerConfig {
  int history_size = 10;
  int max_iterations = 300;
  double gradient_tolerance = 1e-5;  // on the max-norm of the gradient
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.9;
};

struct IterationRecord {
  double value;
  double gradient_norm;
  double step_length;
};

struct OptimizationTrace {
  int iterations = 0;
  double final_value = 0.0;
  double final_gradient_norm = 0.0;
  bool converged = false;
  std::vector<IterationRecord> per_iteration;
};

struct MinimizeResult {
  Eigen::VectorXd x;
  OptimizationTrace trace;
};

// L-BFGS (two-loop recursion) with a strong-Wolfe bracketing/zoom line
// search. Stops when the gradient max-norm drops to the tolerance or the
// iteration cap is hit; the converged flag records which. Throws
// NumericError on non-finite values or after 40 failed trial steps.
MinimizeResult minimize(const ObjectiveFunction& f, const Eigen::VectorXd& x0,
                        const OptimizerConfig& cfg = {});

// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
double check_gradient(const ObjectiveFunction& f, const Eigen::VectorXd& x,
                      double epsilon = 1e-5);

void write_trace_csv(const OptimizationTrace& trace, const std::filesystem::path& path);

}  // namespace fsseg
