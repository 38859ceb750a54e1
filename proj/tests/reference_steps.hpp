#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "armc/observations.hpp"
#include "armc/solvers.hpp"
#include "test_helpers.hpp"

// Dense reference implementations of one solver iteration, written directly
// from the update equations with full matrices and a dense SVD. Independent
// of the armc kernels: residuals, thresholding, projection and truncation are
// all recomputed here.
namespace reference {

inline double threshold_scalar(armc::ThresholdKind kind, double scad_a, double x, double lam) {
  const double ax = std::abs(x);
  if (ax <= lam) return 0.0;
  const double sgn = x > 0 ? 1.0 : -1.0;
  switch (kind) {
    case armc::ThresholdKind::Hard:
      return x;
    case armc::ThresholdKind::Soft:
      return sgn * (ax - lam);
    case armc::ThresholdKind::Scad:
      if (ax <= 2.0 * lam) return sgn * (ax - lam);
      if (ax < scad_a * lam) return sgn * ((scad_a - 1.0) * ax - scad_a * lam) / (scad_a - 2.0);
      return x;
  }
  return 0.0;
}

struct StepResult {
  Eigen::MatrixXd l_next;
  Eigen::MatrixXd s;  // dense S^t (zero off Omega)
};

// One iteration of the tangent-projected update (or the projection-free one
// when use_tangent is false), computed densely.
inline StepResult dense_step(const armc::ObservationSet& obs, const armc::LowRankFactors& l,
                             const armc::ThresholdRule& rule, int t, int r, bool use_tangent) {
  const int n = obs.n;
  Eigen::MatrixXd mask = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t k = 0; k < obs.count(); ++k) {
    mask(obs.rows[k], obs.cols[k]) = 1.0;
    m(obs.rows[k], obs.cols[k]) = obs.vals[k];
  }
  const Eigen::MatrixXd ldense = l.u * l.sigma.asDiagonal() * l.v.transpose();
  const double xi = rule.beta1 * std::pow(rule.gamma, t) + rule.beta2;

  StepResult out;
  out.s = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (mask(i, j) == 0.0) continue;
      const double res = m(i, j) - ldense(i, j);
      out.s(i, j) = threshold_scalar(rule.kind, rule.scad_a, res, xi);
      g(i, j) = (res - out.s(i, j)) / obs.p;
    }
  }
  Eigen::MatrixXd w = ldense + g;
  if (use_tangent) w = oracle::project_tangent(l.u, l.v, w);
  out.l_next = oracle::svd_truncate(w, r);
  return out;
}

}  // namespace reference
