#pragma once

#include <utility>

#include "armc/solvers.hpp"
#include "armc/synthgen.hpp"

namespace armc {

struct EvalReport {
  double rel_inf_error = 0.0;  // ||L_out - L*||_inf / ||L*||_inf
  double rel_fro_error = 0.0;  // ||L_out - L*||_F / ||L*||_F
  bool success = false;        // rel_inf_error <= 1e-3
  double support_precision = 1.0;
  double support_recall = 1.0;
  bool contained = true;  // Supp(S_out) subset of the true outlier support
  bool sampled_inf = false;
};

// Success threshold of the synthetic benchmarks.
inline constexpr double kSuccessRelInf = 1e-3;

// Exact sup-norm evaluation up to this dimension; probe-sampled above.
inline constexpr int kExactEvalMaxN = 2000;

EvalReport evaluate(const SolveResult& result, const ProblemInstance& instance);

// (mu_u, mu_v) with mu = (n/r) * max_i ||row_i||^2.
std::pair<double, double> incoherence(const LowRankFactors& f);

// 10 log10(||L*||_F^2 / (n^2 sigma^2)): average signal power over average
// noise power.
double snr_db(const ProblemInstance& instance);

// Noise level that realizes a target SNR for a given ground truth.
double sigma_for_snr_db(const LowRankFactors& truth, double target_db);

}  // namespace armc
