#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "armc/metrics.hpp"
#include "armc/rng.hpp"
#include "armc/solvers.hpp"
#include "armc/synthgen.hpp"
#include "reference_steps.hpp"
#include "test_helpers.hpp"

using namespace armc;

namespace {

SolverConfig base_config(int rank, uint64_t seed = 3) {
  SolverConfig cfg;
  cfg.rank = rank;
  cfg.seed = seed;
  cfg.rule.kind = ThresholdKind::Soft;
  cfg.rule.beta1 = 1.0;
  cfg.rule.beta2 = 0.0;
  cfg.rule.gamma = 0.9;
  return cfg;
}

SolverConfig config_for(const ProblemInstance& inst, SolverVariant variant, uint64_t seed = 3) {
  SolverConfig cfg = base_config(inst.params.r, seed);
  cfg.variant = variant;
  const auto [mu_u, mu_v] = incoherence(inst.truth);
  cfg.rule.beta1 =
      1.1 * std::max(mu_u, mu_v) * inst.params.r * inst.truth.sigma(0) / inst.params.n;
  cfg.track_truth = inst.truth;
  return cfg;
}

// Small perturbation of the truth, still orthonormal: the mid-convergence
// iterate shape the randomized baselines see.
LowRankFactors perturb(const LowRankFactors& f, double delta, uint64_t seed) {
  LowRankFactors out;
  out.u = qr_thin(f.u + delta * gaussian_matrix(f.n(), f.rank(), mix_seed(seed, {1}))).q;
  out.v = qr_thin(f.v + delta * gaussian_matrix(f.n(), f.rank(), mix_seed(seed, {2}))).q;
  out.sigma = f.sigma * (1.0 + delta);
  return out;
}

}  // namespace

TEST_CASE("initialize: clean full observation recovers a rank-1 matrix exactly") {
  const int n = 20;
  LowRankFactors truth = generate_truth(n, 1, 1.0, 7);
  truth.sigma(0) = 3.0;
  const ProblemInstance inst = sample_instance(truth, 1.0, 0.0, 0.0, 8);

  SolverConfig cfg = base_config(1);
  cfg.rule.beta1 = max_abs_entry(truth);  // xi0 = ||M||_inf absorbs everything
  const auto [s0, l1] = initialize(inst.obs, cfg);
  for (double v : s0.vals) CHECK(v == 0.0);
  CHECK(oracle::rel_fro(l1.dense(), truth.dense()) <= 1e-10);
}

TEST_CASE("initialize: spectral initialization lands inside the basin") {
  const LowRankFactors truth = generate_truth(60, 3, 2.0, 2);
  const ProblemInstance inst = sample_instance(truth, 0.5, 0.0, 0.0, 2);
  SolverConfig cfg = config_for(inst, SolverVariant::Armc, 2);
  const auto [s0, l1] = initialize(inst.obs, cfg);
  CHECK(fro_distance(l1, truth) / truth.fro_norm() < 0.5);
}

TEST_CASE("initialize: empty observations rejected") {
  ObservationSet obs;
  obs.n = 10;
  obs.p = 0.5;
  CHECK_THROWS_AS(initialize(obs, base_config(2)), std::invalid_argument);
}

TEST_CASE("armc_step: fixed point at the ground truth") {
  const LowRankFactors truth = generate_truth(40, 2, 2.0, 11);
  const ProblemInstance inst = sample_instance(truth, 0.5, 0.0, 0.0, 12);
  SolverConfig cfg = config_for(inst, SolverVariant::Armc);
  const auto [s, l_next] = armc_step(truth, inst.obs, cfg, 3);
  for (double v : s.vals) CHECK(v == 0.0);
  CHECK(oracle::rel_fro(l_next.dense(), truth.dense()) <= 1e-10);
}

TEST_CASE("armc_step: equals the dense tangent-projection reference") {
  // Arbitrary iterate, observations and data: the structured truncation is
  // exact algebra, so agreement holds without any spectral-decay assumption.
  const int n = 40, r = 2;
  const LowRankFactors truth = generate_truth(n, r, 2.0, 6);
  const ProblemInstance inst = sample_instance(truth, 0.5, 0.1, 0.0, 6);
  const LowRankFactors l = perturb(truth, 0.05, 6);
  SolverConfig cfg = config_for(inst, SolverVariant::Armc);

  const int t = 2;
  const auto [s, l_next] = armc_step(l, inst.obs, cfg, t);
  const reference::StepResult ref = reference::dense_step(inst.obs, l, cfg.rule, t, r, true);

  CHECK(oracle::rel_fro(l_next.dense(), ref.l_next) <= 1e-9);
  for (std::size_t k = 0; k < inst.obs.count(); ++k)
    CHECK(s.vals[k] ==
          doctest::Approx(ref.s(inst.obs.rows[k], inst.obs.cols[k])).epsilon(1e-9));
}

TEST_CASE("armc_step: zero update direction is a fixed point of the projection") {
  // Hard thresholding with every residual above the threshold: S^t equals the
  // residual exactly, so W = L^t and the step must return L^t.
  const int n = 30, r = 3;
  LowRankFactors l;
  l.u = qr_thin(gaussian_matrix(n, r, 41)).q;
  l.v = qr_thin(gaussian_matrix(n, r, 42)).q;
  l.sigma.resize(r);
  l.sigma << 2.0, 1.5, 1.0;

  Rng rng(43);
  std::vector<int32_t> rows, cols;
  std::vector<double> vals;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (rng.uniform() < 0.4) {
        rows.push_back(i);
        cols.push_back(j);
        vals.push_back(0.0);
      }
  ObservationSet obs = make_observation_set(n, 0.4, rows, cols, vals);
  SparseValues lv = eval_on_support(l, obs);
  Rng vrng(44);
  for (std::size_t k = 0; k < obs.count(); ++k)
    obs.vals[k] = lv.vals[k] + (vrng.uniform() < 0.5 ? 5.0 : -5.0);  // all far above xi

  SolverConfig cfg = base_config(r);
  cfg.rule.kind = ThresholdKind::Hard;
  cfg.rule.beta1 = 1.0;  // xi^t < 1 < 5 for t >= 1
  const auto [s, l_next] = armc_step(l, obs, cfg, 1);
  for (std::size_t k = 0; k < obs.count(); ++k)
    CHECK(s.vals[k] == doctest::Approx(obs.vals[k] - lv.vals[k]).epsilon(1e-12));
  CHECK(oracle::rel_fro(l_next.dense(), l.dense()) <= 1e-12);
}

TEST_CASE("rrmc_step: fixed point and dense oracle on a decaying-tail iterate") {
  const int n = 40, r = 2;
  const LowRankFactors truth = generate_truth(n, r, 2.0, 6);
  const ProblemInstance inst = sample_instance(truth, 0.6, 0.0, 0.0, 66);
  SolverConfig cfg = config_for(inst, SolverVariant::Rrmc);

  {
    const auto [s, l_next] = rrmc_step(truth, inst.obs, cfg, 3);
    for (double v : s.vals) CHECK(v == 0.0);
    CHECK(oracle::rel_fro(l_next.dense(), truth.dense()) <= 1e-8);
  }

  // Near the truth the iterate W = L + G has a fast-decaying tail, so the
  // randomized truncation matches the dense SVD oracle tightly.
  const LowRankFactors l = perturb(truth, 1e-3, 7);
  const int t = 6;
  ThresholdRule hard = cfg.rule;
  hard.kind = ThresholdKind::Hard;
  const auto [s, l_next] = rrmc_step(l, inst.obs, cfg, t);
  const reference::StepResult ref = reference::dense_step(inst.obs, l, hard, t, r, false);
  CHECK(oracle::rel_fro(l_next.dense(), ref.l_next) <= 1e-6);
}

TEST_CASE("rmc_step: dense oracle and hard-threshold rejection") {
  const int n = 40, r = 2;
  const LowRankFactors truth = generate_truth(n, r, 2.0, 6);
  const ProblemInstance inst = sample_instance(truth, 0.6, 0.0, 0.0, 67);
  SolverConfig cfg = config_for(inst, SolverVariant::Rmc);

  const LowRankFactors l = perturb(truth, 1e-3, 9);
  const int t = 6;
  const auto [s, l_next] = rmc_step(l, inst.obs, cfg, t);
  const reference::StepResult ref = reference::dense_step(inst.obs, l, cfg.rule, t, r, false);
  CHECK(oracle::rel_fro(l_next.dense(), ref.l_next) <= 1e-6);
  for (std::size_t k = 0; k < inst.obs.count(); ++k)
    CHECK(s.vals[k] ==
          doctest::Approx(ref.s(inst.obs.rows[k], inst.obs.cols[k])).epsilon(1e-9));

  cfg.rule.kind = ThresholdKind::Hard;
  CHECK_THROWS_AS(rmc_step(l, inst.obs, cfg, t), std::invalid_argument);
}

TEST_CASE("solve: full clean observation converges in <= 3 iterations to machine level") {
  const LowRankFactors truth = generate_truth(30, 3, 2.0, 5);
  const ProblemInstance inst = sample_instance(truth, 1.0, 0.0, 0.0, 5);
  SolverConfig cfg = config_for(inst, SolverVariant::Armc);
  const SolveResult res = solve(inst.obs, cfg);
  CHECK(res.converged);
  CHECK(res.iters <= 3);
  CHECK(fro_distance(res.l_out, truth) / truth.fro_norm() <= 1e-10);
  CHECK(res.trace.size() == static_cast<std::size_t>(res.iters));
}

TEST_CASE("solve: desk-size robust recovery with outliers") {
  const LowRankFactors truth = generate_truth(200, 3, 2.0, 31);
  const ProblemInstance inst = sample_instance(truth, 0.3, 0.1, 0.0, 32);
  SolverConfig cfg = config_for(inst, SolverVariant::Armc, 33);
  cfg.truth_stop_tol = 1e-3;
  cfg.max_iters = 150;
  const SolveResult res = solve(inst.obs, cfg);
  CHECK(res.converged);
  CHECK(res.trace.back().rel_inf_error <= 1e-3);

  // Support containment and eventual decay along the trace.
  for (const IterationRecord& rec : res.trace) CHECK(rec.support_contained);
  for (std::size_t i = 4; i < res.trace.size(); ++i)
    CHECK(res.trace[i].rel_inf_error < res.trace[i - 1].rel_inf_error);
}

TEST_CASE("solve: armc and rmc take comparable iteration counts") {
  const LowRankFactors truth = generate_truth(200, 3, 2.0, 51);
  const ProblemInstance inst = sample_instance(truth, 0.3, 0.1, 0.0, 52);
  SolverConfig cfg = config_for(inst, SolverVariant::Armc, 53);
  cfg.truth_stop_tol = 1e-3;
  const SolveResult armc_res = solve(inst.obs, cfg);
  cfg.variant = SolverVariant::Rmc;
  const SolveResult rmc_res = solve(inst.obs, cfg);
  CHECK(armc_res.converged);
  CHECK(rmc_res.converged);
  CHECK(std::abs(armc_res.iters - rmc_res.iters) <= 0.1 * rmc_res.iters + 1e-9);
}

TEST_CASE("solve: deterministic for identical inputs") {
  const LowRankFactors truth = generate_truth(60, 2, 2.0, 71);
  const ProblemInstance inst = sample_instance(truth, 0.5, 0.1, 0.0, 72);
  SolverConfig cfg = config_for(inst, SolverVariant::Rmc, 73);
  cfg.max_iters = 12;
  cfg.tol_rel_change = 0.0;
  const SolveResult a = solve(inst.obs, cfg);
  const SolveResult b = solve(inst.obs, cfg);
  CHECK(a.iters == b.iters);
  CHECK((a.l_out.u.array() == b.l_out.u.array()).all());
  CHECK((a.l_out.sigma.array() == b.l_out.sigma.array()).all());
  CHECK((a.l_out.v.array() == b.l_out.v.array()).all());
  CHECK(a.s_out.vals == b.s_out.vals);
  for (int i = 0; i < a.iters; ++i) {
    CHECK(a.trace[i].rel_change == b.trace[i].rel_change);
    CHECK(a.trace[i].rel_inf_error == b.trace[i].rel_inf_error);
  }
}

TEST_CASE("solve: rank collapse reported with partial trace") {
  // Far too few observations for the requested rank: the initialization
  // spectrum collapses.
  std::vector<int32_t> rows, cols;
  std::vector<double> vals;
  for (int k = 0; k < 6; ++k) {
    rows.push_back(k);
    cols.push_back(k);
    vals.push_back(1.0);
  }
  const ObservationSet obs = make_observation_set(30, 0.01, rows, cols, vals);
  SolverConfig cfg = base_config(8);
  const SolveResult res = solve(obs, cfg);
  CHECK(res.failed);
  CHECK(!res.converged);
  CHECK(!res.fail_reason.empty());
}

TEST_CASE("solve: truth stop tolerance shortens the run") {
  const LowRankFactors truth = generate_truth(100, 2, 2.0, 91);
  const ProblemInstance inst = sample_instance(truth, 0.4, 0.05, 0.0, 92);
  SolverConfig cfg = config_for(inst, SolverVariant::Armc, 93);
  cfg.truth_stop_tol = 1e-2;
  const SolveResult coarse = solve(inst.obs, cfg);
  cfg.truth_stop_tol = 1e-4;
  const SolveResult fine = solve(inst.obs, cfg);
  CHECK(coarse.converged);
  CHECK(fine.converged);
  CHECK(coarse.iters < fine.iters);
  CHECK(coarse.trace.back().rel_inf_error <= 1e-2);
  CHECK(fine.trace.back().rel_inf_error <= 1e-4);
}
