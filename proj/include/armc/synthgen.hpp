#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "armc/linalg.hpp"
#include "armc/observations.hpp"

namespace armc {

struct InstanceParams {
  int n = 0;
  int r = 0;
  double kappa = 1.0;
  double p = 1.0;
  double alpha = 0.0;
  double sigma = 0.0;
  uint64_t seed = 0;
  int outlier_resamples = 0;       // redraws spent on the per-row/col cap
  bool outlier_cap_satisfied = true;
};

// Ground-truth bundle for a synthetic trial. Outliers are stored as positions
// into the observation arrays (S* restricted to Omega).
struct ProblemInstance {
  LowRankFactors truth;
  std::vector<std::size_t> outlier_idx;
  std::vector<double> outlier_vals;
  double sigma_noise = 0.0;
  ObservationSet obs;
  InstanceParams params;
};

// Incoherent rank-r ground truth: Gaussian factors, orthogonalization, row
// norms clipped to sqrt(r/n), re-orthogonalization. Spectrum uniform on
// [1/kappa, 1] with the endpoints pinned so sigma_1/sigma_r == kappa exactly.
LowRankFactors generate_truth(int n, int r, double kappa, uint64_t seed);

// Bernoulli(p) observation mask, alpha-fraction uniform outliers in
// [-||L*||_inf, ||L*||_inf], Gaussian noise at level sigma_noise. The
// per-row/column outlier cap of 2*alpha*p*n is verified post hoc; a violating
// draw is redone with an incremented sub-seed (counted in params). When the
// cap is statistically unreachable (small alpha*p*n) the attempt budget runs
// out and the last iid draw is kept, with outlier_cap_satisfied = false.
ProblemInstance sample_instance(const LowRankFactors& truth, double p, double alpha,
                                double sigma_noise, uint64_t seed);

// Factor binary format: magic "ARMCF1", n and r as 8-byte little-endian
// unsigned, then U, sigma, V as little-endian IEEE-754 doubles, row-major.
void write_factors_file(const std::string& path, const LowRankFactors& f);
LowRankFactors read_factors_file(const std::string& path);

// Dense matrix binary format: magic "ARMCM1", rows/cols as 8-byte
// little-endian unsigned, then row-major doubles.
void write_dense_file(const std::string& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_dense_file(const std::string& path);

// Instance on disk: <prefix>.coo, <prefix>.meta (key=value lines), and
// <prefix>.truth (factor binary). The outlier list is not serialized; for
// noiseless instances it is recovered exactly from M - L* on reload.
void write_instance(const std::string& prefix, const ProblemInstance& inst);
ProblemInstance read_instance(const std::string& prefix);

}  // namespace armc
