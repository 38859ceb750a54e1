#include "armc/thresholding.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace armc {

void validate(const ThresholdRule& rule) {
  if (!(rule.gamma > 0.0 && rule.gamma < 1.0))
    throw std::invalid_argument("threshold rule: gamma must be in (0,1)");
  if (rule.beta1 < 0.0 || rule.beta2 < 0.0)
    throw std::invalid_argument("threshold rule: beta1 and beta2 must be non-negative");
  if (rule.kind == ThresholdKind::Scad && !(rule.scad_a > 2.0))
    throw std::invalid_argument("threshold rule: SCAD shape must be > 2");
}

double schedule(const ThresholdRule& rule, int t) {
  if (t < 0) throw std::invalid_argument("schedule: t must be >= 0");
  return rule.beta1 * std::pow(rule.gamma, t) + rule.beta2;
}

double apply_scalar(const ThresholdRule& rule, double x, double lam) {
  if (!(lam > 0.0)) throw std::invalid_argument("apply_scalar: threshold must be positive");
  const double ax = std::abs(x);
  if (ax <= lam) return 0.0;
  const double sgn = x > 0.0 ? 1.0 : -1.0;
  switch (rule.kind) {
    case ThresholdKind::Hard:
      return x;
    case ThresholdKind::Soft:
      return sgn * (ax - lam);
    case ThresholdKind::Scad: {
      const double a = rule.scad_a;
      if (!(a > 2.0)) throw std::invalid_argument("apply_scalar: SCAD shape must be > 2");
      if (ax <= 2.0 * lam) return sgn * (ax - lam);
      if (ax < a * lam) return sgn * ((a - 1.0) * ax - a * lam) / (a - 2.0);
      return x;
    }
  }
  return 0.0;
}

SparseValues apply_sparse(const ThresholdRule& rule, const SparseValues& vals, double lam) {
  if (!(lam > 0.0)) throw std::invalid_argument("apply_sparse: threshold must be positive");
  SparseValues out;
  out.vals.resize(vals.vals.size());
  for (std::size_t t = 0; t < vals.vals.size(); ++t)
    out.vals[t] = apply_scalar(rule, vals.vals[t], lam);
  return out;
}

double lipschitz_constant(const ThresholdRule& rule) {
  switch (rule.kind) {
    case ThresholdKind::Hard:
      return std::numeric_limits<double>::infinity();
    case ThresholdKind::Soft:
      return 1.0;
    case ThresholdKind::Scad:
      return (rule.scad_a - 1.0) / (rule.scad_a - 2.0);
  }
  return std::numeric_limits<double>::infinity();
}

double deviation_constant(const ThresholdRule&) { return 1.0; }

ThresholdKind threshold_kind_from_string(const std::string& s) {
  if (s == "hard") return ThresholdKind::Hard;
  if (s == "soft") return ThresholdKind::Soft;
  if (s == "scad") return ThresholdKind::Scad;
  throw std::invalid_argument("unknown threshold kind: " + s);
}

std::string to_string(ThresholdKind kind) {
  switch (kind) {
    case ThresholdKind::Hard:
      return "hard";
    case ThresholdKind::Soft:
      return "soft";
    case ThresholdKind::Scad:
      return "scad";
  }
  return "?";
}

}  // namespace armc
