#include "armc/metrics.hpp"

#include <cmath>

#include "armc/rng.hpp"

namespace armc {

namespace {
constexpr uint64_t kEvalProbeTag = 0xe7a1;
constexpr std::size_t kEvalProbeCount = 1000000;
}  // namespace

EvalReport evaluate(const SolveResult& result, const ProblemInstance& instance) {
  const LowRankFactors& truth = instance.truth;
  if (result.l_out.n() != truth.n()) throw std::invalid_argument("evaluate: dimension mismatch");
  if (result.s_out.count() != instance.obs.count())
    throw std::invalid_argument("evaluate: sparse estimate misaligned with observations");

  EvalReport rep;
  const int n = truth.n();

  if (n <= kExactEvalMaxN) {
    rep.rel_inf_error = max_abs_diff(result.l_out, truth) / max_abs_entry(truth);
  } else {
    rep.sampled_inf = true;
    const std::size_t total = static_cast<std::size_t>(n) * n;
    const std::size_t count = std::min(kEvalProbeCount, total);
    std::vector<int32_t> rows(count), cols(count);
    Rng rng(mix_seed(instance.params.seed, {kEvalProbeTag}));
    for (std::size_t t = 0; t < count; ++t) {
      rows[t] = static_cast<int32_t>(rng.next_u64() % n);
      cols[t] = static_cast<int32_t>(rng.next_u64() % n);
    }
    std::vector<double> tv;
    eval_on_support(truth, rows, cols, tv);
    double denom = 0.0;
    for (double x : tv) denom = std::max(denom, std::abs(x));
    if (denom <= 0.0) denom = 1.0;
    rep.rel_inf_error = max_abs_diff_probe(result.l_out, truth, rows, cols) / denom;
  }
  rep.rel_fro_error = fro_distance(result.l_out, truth) / truth.fro_norm();
  rep.success = rep.rel_inf_error <= kSuccessRelInf;

  std::vector<uint8_t> is_outlier(instance.obs.count(), 0);
  for (std::size_t idx : instance.outlier_idx) is_outlier[idx] = 1;
  std::size_t nz = 0, hits = 0;
  for (std::size_t t = 0; t < result.s_out.count(); ++t) {
    if (result.s_out.vals[t] == 0.0) continue;
    ++nz;
    hits += is_outlier[t];
  }
  rep.support_precision = nz == 0 ? 1.0 : static_cast<double>(hits) / static_cast<double>(nz);
  rep.support_recall = instance.outlier_idx.empty()
                           ? 1.0
                           : static_cast<double>(hits) /
                                 static_cast<double>(instance.outlier_idx.size());
  rep.contained = hits == nz;
  return rep;
}

std::pair<double, double> incoherence(const LowRankFactors& f) {
  const double scale = static_cast<double>(f.n()) / f.rank();
  return {scale * f.u.rowwise().squaredNorm().maxCoeff(),
          scale * f.v.rowwise().squaredNorm().maxCoeff()};
}

double snr_db(const ProblemInstance& instance) {
  if (!(instance.sigma_noise > 0.0))
    throw std::invalid_argument("snr_db: requires a positive noise level");
  const double n = instance.truth.n();
  const double signal = instance.truth.sigma.squaredNorm();
  return 10.0 * std::log10(signal / (n * n * instance.sigma_noise * instance.sigma_noise));
}

double sigma_for_snr_db(const LowRankFactors& truth, double target_db) {
  const double n = truth.n();
  return truth.fro_norm() / (n * std::pow(10.0, target_db / 20.0));
}

}  // namespace armc
