#pragma once

#include <string>

#include "armc/observations.hpp"

namespace armc {

enum class ThresholdKind { Hard, Soft, Scad };

// Thresholding operator family plus the geometric schedule xi^t = beta1 *
// gamma^t + beta2.
struct ThresholdRule {
  ThresholdKind kind = ThresholdKind::Soft;
  double scad_a = 3.7;  // SCAD shape, must be > 2
  double beta1 = 0.0;
  double beta2 = 0.0;
  double gamma = 0.9;
};

void validate(const ThresholdRule& rule);

// beta1 * gamma^t + beta2.
double schedule(const ThresholdRule& rule, int t);

double apply_scalar(const ThresholdRule& rule, double x, double lam);

// Entrywise apply_scalar; sub-threshold entries map to exact zero.
SparseValues apply_sparse(const ThresholdRule& rule, const SparseValues& vals, double lam);

// Lipschitz constant K of the operator (infinity for hard thresholding).
double lipschitz_constant(const ThresholdRule& rule);

// Deviation bound B with |T(x) - x| <= B * lambda.
double deviation_constant(const ThresholdRule& rule);

ThresholdKind threshold_kind_from_string(const std::string& s);
std::string to_string(ThresholdKind kind);

}  // namespace armc
