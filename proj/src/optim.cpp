#include "fsseg/optim.hpp"

#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>

#include "fsseg/errors.hpp"

namespace fsseg {

namespace {

constexpr int kMaxLineSearchEvals = 40;

struct Evaluation {
  double value;
  Eigen::VectorXd gradient;
};

Evaluation evaluate(const ObjectiveFunction& f, const Eigen::VectorXd& x) {
  Evaluation e;
  e.gradient.resize(x.size());
  e.value = f(x, e.gradient);
  if (!std::isfinite(e.value) || !e.gradient.allFinite()) {
    throw NumericError("objective returned a non-finite value or gradient");
  }
  return e;
}

struct LineSearchResult {
  double step;
  Eigen::VectorXd x;
  Evaluation eval;
};

// Strong-Wolfe line search, bracketing then zoom (Nocedal & Wright alg. 3.5/3.6).
LineSearchResult wolfe_line_search(const ObjectiveFunction& f, const Eigen::VectorXd& x0,
                                   const Evaluation& at0, const Eigen::VectorXd& direction,
                                   double initial_step, const OptimizerConfig& cfg) {
  const double phi0 = at0.value;
  const double dphi0 = at0.gradient.dot(direction);
  if (dphi0 >= 0.0) throw NumericError("line search started in a non-descent direction");

  int evals = 0;
  auto phi_at = [&](double t) -> std::pair<Eigen::VectorXd, Evaluation> {
    if (++evals > kMaxLineSearchEvals) {
      throw NumericError("line search failed after " + std::to_string(kMaxLineSearchEvals) +
                         " trial steps");
    }
    Eigen::VectorXd xt = x0 + t * direction;
    Evaluation e = evaluate(f, xt);
    return {std::move(xt), std::move(e)};
  };

  auto armijo = [&](double t, double value) { return value <= phi0 + cfg.wolfe_c1 * t * dphi0; };
  auto curvature = [&](double dphi) { return std::abs(dphi) <= -cfg.wolfe_c2 * dphi0; };

  struct Point {
    double t, value, dphi;
    Eigen::VectorXd x;
    Evaluation eval;
  };
  auto make_point = [&](double t) {
    auto [xt, e] = phi_at(t);
    double dphi = e.gradient.dot(direction);
    return Point{t, e.value, dphi, std::move(xt), std::move(e)};
  };

  auto zoom = [&](Point lo, Point hi) -> LineSearchResult {
    for (;;) {
      // Quadratic interpolation using lo's value/slope and hi's value,
      // safeguarded by bisection.
      double t;
      double denom = 2.0 * (hi.value - lo.value - lo.dphi * (hi.t - lo.t));
      if (std::abs(denom) > 1e-300) {
        t = lo.t - lo.dphi * (hi.t - lo.t) * (hi.t - lo.t) / denom;
      } else {
        t = 0.5 * (lo.t + hi.t);
      }
      const double lo_t = std::min(lo.t, hi.t);
      const double hi_t = std::max(lo.t, hi.t);
      const double width = hi_t - lo_t;
      if (!(t > lo_t + 0.1 * width && t < hi_t - 0.1 * width)) t = 0.5 * (lo.t + hi.t);

      Point cand = make_point(t);
      if (!armijo(cand.t, cand.value) || cand.value >= lo.value) {
        hi = std::move(cand);
      } else {
        if (curvature(cand.dphi)) {
          return {cand.t, std::move(cand.x), std::move(cand.eval)};
        }
        if (cand.dphi * (hi.t - lo.t) >= 0.0) hi = std::move(lo);
        lo = std::move(cand);
      }
    }
  };

  Point prev{0.0, phi0, dphi0, x0, at0};
  double t = initial_step;
  for (;;) {
    Point cand = make_point(t);
    if (!armijo(cand.t, cand.value) || (evals > 1 && cand.value >= prev.value)) {
      return zoom(std::move(prev), std::move(cand));
    }
    if (curvature(cand.dphi)) {
      return {cand.t, std::move(cand.x), std::move(cand.eval)};
    }
    if (cand.dphi >= 0.0) {
      return zoom(std::move(cand), std::move(prev));
    }
    prev = std::move(cand);
    t *= 2.0;
  }
}

}  // namespace

MinimizeResult minimize(const ObjectiveFunction& f, const Eigen::VectorXd& x0,
                        const OptimizerConfig& cfg) {
  if (cfg.history_size < 1) throw ConfigError("history_size must be at least 1");
  if (!(cfg.wolfe_c1 > 0.0 && cfg.wolfe_c1 < cfg.wolfe_c2 && cfg.wolfe_c2 < 1.0)) {
    throw ConfigError("Wolfe constants must satisfy 0 < c1 < c2 < 1");
  }
  if (cfg.gradient_tolerance < 0.0) throw ConfigError("gradient_tolerance must be non-negative");

  MinimizeResult result;
  result.x = x0;
  Evaluation cur = evaluate(f, result.x);

  OptimizationTrace& trace = result.trace;
  trace.final_value = cur.value;
  trace.final_gradient_norm = cur.gradient.lpNorm<Eigen::Infinity>();
  if (trace.final_gradient_norm <= cfg.gradient_tolerance) {
    trace.converged = true;
    return result;
  }

  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;
  Eigen::VectorXd direction(x0.size());
  std::vector<double> alpha;

  for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
    // Two-loop recursion for -H * g.
    direction = cur.gradient;
    const std::size_t h = s_hist.size();
    alpha.assign(h, 0.0);
    for (std::size_t i = h; i-- > 0;) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(direction);
      direction -= alpha[i] * y_hist[i];
    }
    if (h > 0) {
      const double gamma = s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
      direction *= gamma;
    }
    for (std::size_t i = 0; i < h; ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(direction);
      direction += (alpha[i] - beta) * s_hist[i];
    }
    direction = -direction;

    if (cur.gradient.dot(direction) >= 0.0) {
      // Stale curvature pairs can spoil the direction; fall back to steepest
      // descent and clear the memory.
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      direction = -cur.gradient;
    }

    const double initial_step =
        s_hist.empty() ? std::min(1.0, 1.0 / cur.gradient.lpNorm<Eigen::Infinity>()) : 1.0;
    LineSearchResult ls = wolfe_line_search(f, result.x, cur, direction, initial_step, cfg);

    Eigen::VectorXd s = ls.x - result.x;
    Eigen::VectorXd y = ls.eval.gradient - cur.gradient;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (static_cast<int>(s_hist.size()) == cfg.history_size) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
    }

    result.x = std::move(ls.x);
    cur = std::move(ls.eval);

    const double gnorm = cur.gradient.lpNorm<Eigen::Infinity>();
    trace.per_iteration.push_back({cur.value, gnorm, ls.step});
    trace.iterations = iter;
    trace.final_value = cur.value;
    trace.final_gradient_norm = gnorm;
    if (gnorm <= cfg.gradient_tolerance) {
      trace.converged = true;
      break;
    }
  }
  return result;
}

double check_gradient(const ObjectiveFunction& f, const Eigen::VectorXd& x, double epsilon) {
  if (epsilon <= 0.0) throw ConfigError("check_gradient: epsilon must be positive");
  Eigen::VectorXd analytic(x.size());
  f(x, analytic);

  Eigen::VectorXd probe = x;
  Eigen::VectorXd scratch(x.size());
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + epsilon;
    const double plus = f(probe, scratch);
    probe[i] = x[i] - epsilon;
    const double minus = f(probe, scratch);
    probe[i] = x[i];
    const double numeric = (plus - minus) / (2.0 * epsilon);
    const double rel = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
    worst = std::max(worst, rel);
  }
  return worst;
}

void write_trace_csv(const OptimizationTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write trace file " + path.string());
  out << "iteration,value,gradient_norm,step_length\n";
  char buf[128];
  for (std::size_t i = 0; i < trace.per_iteration.size(); ++i) {
    const IterationRecord& r = trace.per_iteration[i];
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g\n", i + 1, r.value, r.gradient_norm,
                  r.step_length);
    out << buf;
  }
}

}  // namespace fsseg
