#include "armc/solvers.hpp"

#include <chrono>
#include <cmath>

#include "armc/rng.hpp"

namespace armc {

namespace {

// Tags for deriving independent RNG streams from the config seed.
constexpr uint64_t kInitTag = 0x1a17;
constexpr uint64_t kStepTag = 0x57e9;
constexpr uint64_t kProbeTag = 0x9206;

double elapsed_seconds(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void validate_config(const ObservationSet& obs, const SolverConfig& cfg) {
  if (obs.count() == 0) throw std::invalid_argument("solver: empty observation set");
  if (cfg.rank < 1 || cfg.rank > obs.n) throw std::invalid_argument("solver: invalid rank");
  if (cfg.max_iters < 1) throw std::invalid_argument("solver: max_iters must be >= 1");
  if (cfg.tol_rel_change < 0.0) throw std::invalid_argument("solver: negative tolerance");
  validate(cfg.rule);
  if (cfg.variant == SolverVariant::Rmc && cfg.rule.kind == ThresholdKind::Hard)
    throw std::invalid_argument("solver: the RMC baseline requires a continuous threshold");
}

// p^{-1} (M - L - S) on Omega.
SparseValues scaled_gradient_values(const ObservationSet& obs, const SparseValues& res,
                                    const SparseValues& s) {
  SparseValues g;
  const std::size_t m = obs.count();
  g.vals.resize(m);
  const double inv_p = 1.0 / obs.p;
  for (std::size_t t = 0; t < m; ++t) g.vals[t] = (res.vals[t] - s.vals[t]) * inv_p;
  return g;
}

// S^t = T_{xi^t}(P_Omega(M - L^t)) plus the scaled update direction.
struct SparseUpdate {
  SparseValues s;
  SparseValues g;  // p^{-1}(M - L - S) on Omega
};

SparseUpdate sparse_update(const LowRankFactors& l, const ObservationSet& obs,
                           const ThresholdRule& rule, int t) {
  SparseUpdate out;
  const double xi = schedule(rule, t);
  SparseValues res = residual(obs, l);
  out.s = apply_sparse(rule, res, xi);
  out.g = scaled_gradient_values(obs, res, out.s);
  return out;
}

// Rank-r truncation of the implicit matrix U Sigma V^T + G by subspace
// iteration (the projection-free baselines' low-rank update).
LowRankFactors truncate_lowrank_plus_sparse(const LowRankFactors& l, const ObservationSet& obs,
                                            const SparseValues& g, const SolverConfig& cfg,
                                            uint64_t seed) {
  const auto apply = [&](const Eigen::MatrixXd& x) {
    Eigen::MatrixXd out = sparse_times_dense(obs, g, x, false);
    out.noalias() += l.u * (l.sigma.asDiagonal() * (l.v.transpose() * x));
    return out;
  };
  const auto apply_adjoint = [&](const Eigen::MatrixXd& x) {
    Eigen::MatrixXd out = sparse_times_dense(obs, g, x, true);
    out.noalias() += l.v * (l.sigma.asDiagonal() * (l.u.transpose() * x));
    return out;
  };
  return truncated_svd_operator(apply, apply_adjoint, obs.n, cfg.rank, cfg.oversample,
                                cfg.power_iters, seed);
}

struct TruthTracker {
  bool active = false;
  bool sampled = false;
  // Exact mode: densified truth. Probe mode: fixed entry sample.
  Eigen::MatrixXd truth_dense;
  std::vector<int32_t> probe_rows, probe_cols;
  LowRankFactors truth;
  double denom = 1.0;  // ||L*||_inf over the evaluated entries
  // Nonzero pattern of P_Omega(M - L*): the detectable corruption support.
  std::vector<uint8_t> corrupted;
  std::size_t corrupted_count = 0;

  double rel_inf(const LowRankFactors& l) const {
    const double d = sampled ? max_abs_diff_probe(l, truth, probe_rows, probe_cols)
                             : max_abs_diff_dense(l, truth_dense);
    return d / denom;
  }
};

TruthTracker make_tracker(const ObservationSet& obs, const SolverConfig& cfg) {
  TruthTracker tr;
  if (!cfg.track_truth) return tr;
  tr.active = true;
  tr.truth = *cfg.track_truth;
  if (tr.truth.n() != obs.n) throw std::invalid_argument("solver: truth dimension mismatch");

  if (obs.n <= cfg.exact_truth_max_n) {
    tr.truth_dense = tr.truth.dense();
    tr.denom = tr.truth_dense.cwiseAbs().maxCoeff();
  } else {
    tr.sampled = true;
    const std::size_t total = static_cast<std::size_t>(obs.n) * obs.n;
    const std::size_t count = std::min(cfg.probe_count, total);
    tr.probe_rows.resize(count);
    tr.probe_cols.resize(count);
    Rng rng(mix_seed(cfg.seed, {kProbeTag}));
    for (std::size_t t = 0; t < count; ++t) {
      tr.probe_rows[t] = static_cast<int32_t>(rng.next_u64() % obs.n);
      tr.probe_cols[t] = static_cast<int32_t>(rng.next_u64() % obs.n);
    }
    std::vector<double> tv;
    eval_on_support(tr.truth, tr.probe_rows, tr.probe_cols, tv);
    double d = 0.0;
    for (double x : tv) d = std::max(d, std::abs(x));
    tr.denom = d;
  }
  if (tr.denom <= 0.0) tr.denom = 1.0;

  SparseValues tvals = eval_on_support(tr.truth, obs);
  tr.corrupted.resize(obs.count());
  for (std::size_t t = 0; t < obs.count(); ++t) {
    tr.corrupted[t] = obs.vals[t] != tvals.vals[t] ? 1 : 0;
    tr.corrupted_count += tr.corrupted[t];
  }
  return tr;
}

void record_support_metrics(const TruthTracker& tr, const SparseValues& s, IterationRecord& rec) {
  std::size_t nz = 0, hits = 0;
  for (std::size_t t = 0; t < s.vals.size(); ++t) {
    if (s.vals[t] == 0.0) continue;
    ++nz;
    hits += tr.corrupted[t];
  }
  rec.support_precision = nz == 0 ? 1.0 : static_cast<double>(hits) / static_cast<double>(nz);
  rec.support_recall = tr.corrupted_count == 0
                           ? 1.0
                           : static_cast<double>(hits) / static_cast<double>(tr.corrupted_count);
  rec.support_contained = hits == nz;
}

}  // namespace

SolverVariant variant_from_string(const std::string& s) {
  if (s == "armc") return SolverVariant::Armc;
  if (s == "rmc") return SolverVariant::Rmc;
  if (s == "rrmc") return SolverVariant::Rrmc;
  throw std::invalid_argument("unknown solver variant: " + s);
}

std::string to_string(SolverVariant v) {
  switch (v) {
    case SolverVariant::Armc:
      return "armc";
    case SolverVariant::Rmc:
      return "rmc";
    case SolverVariant::Rrmc:
      return "rrmc";
  }
  return "?";
}

std::pair<SparseValues, LowRankFactors> initialize(const ObservationSet& obs,
                                                   const SolverConfig& cfg) {
  validate_config(obs, cfg);
  const double xi0 = schedule(cfg.rule, 0);
  SparseValues s0;
  if (xi0 > 0.0) {
    s0 = apply_sparse(cfg.rule, SparseValues{obs.vals}, xi0);
  } else {
    s0.vals.assign(obs.count(), 0.0);
  }

  SparseValues init_vals;
  init_vals.vals.resize(obs.count());
  const double inv_p = 1.0 / obs.p;
  for (std::size_t t = 0; t < obs.count(); ++t)
    init_vals.vals[t] = (obs.vals[t] - s0.vals[t]) * inv_p;

  const auto apply = [&](const Eigen::MatrixXd& x) {
    return sparse_times_dense(obs, init_vals, x, false);
  };
  const auto apply_adjoint = [&](const Eigen::MatrixXd& x) {
    return sparse_times_dense(obs, init_vals, x, true);
  };
  LowRankFactors l1 = truncated_svd_operator(apply, apply_adjoint, obs.n, cfg.rank,
                                             cfg.oversample, cfg.power_iters,
                                             mix_seed(cfg.seed, {kInitTag}));
  return {std::move(s0), std::move(l1)};
}

std::pair<SparseValues, LowRankFactors> armc_step(const LowRankFactors& l,
                                                  const ObservationSet& obs,
                                                  const SolverConfig& cfg, int t) {
  SparseUpdate up = sparse_update(l, obs, cfg.rule, t);

  // W = L + G. P_T(W) = U y1^T + y2 V^T with y2 = W V and y1 = W^T U - V C^T,
  // C = U^T W V. All products touch only Omega and n x r blocks.
  Eigen::MatrixXd gv = sparse_times_dense(obs, up.g, l.v, false);
  Eigen::MatrixXd gtu = sparse_times_dense(obs, up.g, l.u, true);

  StructuredTangentForm form;
  form.u = l.u;
  form.v = l.v;
  form.y2 = l.u * l.sigma.asDiagonal() + gv;
  Eigen::MatrixXd c = l.u.transpose() * gv;
  c += Eigen::MatrixXd(l.sigma.asDiagonal());
  Eigen::MatrixXd a = l.v * l.sigma.asDiagonal() + gtu;
  form.y1 = a - l.v * c.transpose();

  LowRankFactors l_next = truncate_structured(form, cfg.rank);
  return {std::move(up.s), std::move(l_next)};
}

std::pair<SparseValues, LowRankFactors> rrmc_step(const LowRankFactors& l,
                                                  const ObservationSet& obs,
                                                  const SolverConfig& cfg, int t) {
  ThresholdRule hard = cfg.rule;
  hard.kind = ThresholdKind::Hard;
  SparseUpdate up;
  {
    const double xi = schedule(hard, t);
    SparseValues res = residual(obs, l);
    up.s = apply_sparse(hard, res, xi);
    up.g = scaled_gradient_values(obs, res, up.s);
  }
  LowRankFactors l_next =
      truncate_lowrank_plus_sparse(l, obs, up.g, cfg, mix_seed(cfg.seed, {kStepTag, uint64_t(t)}));
  return {std::move(up.s), std::move(l_next)};
}

std::pair<SparseValues, LowRankFactors> rmc_step(const LowRankFactors& l,
                                                 const ObservationSet& obs,
                                                 const SolverConfig& cfg, int t) {
  if (cfg.rule.kind == ThresholdKind::Hard)
    throw std::invalid_argument("rmc_step: requires soft or SCAD thresholding");
  SparseUpdate up = sparse_update(l, obs, cfg.rule, t);
  LowRankFactors l_next =
      truncate_lowrank_plus_sparse(l, obs, up.g, cfg, mix_seed(cfg.seed, {kStepTag, uint64_t(t)}));
  return {std::move(up.s), std::move(l_next)};
}

SolveResult solve(const ObservationSet& obs, const SolverConfig& cfg) {
  validate_config(obs, cfg);
  SolveResult result;

  TruthTracker tracker = make_tracker(obs, cfg);
  result.truth_error_sampled = tracker.sampled;

  auto t_init = std::chrono::steady_clock::now();
  SparseValues s;
  LowRankFactors l;
  try {
    std::tie(s, l) = initialize(obs, cfg);
  } catch (const RankCollapseError& e) {
    result.failed = true;
    result.fail_reason = e.what();
    return result;
  }
  result.init_seconds = elapsed_seconds(t_init);
  result.total_step_seconds = result.init_seconds;

  for (int t = 1; t <= cfg.max_iters; ++t) {
    IterationRecord rec;
    rec.t = t;
    rec.xi = schedule(cfg.rule, t);

    auto t0 = std::chrono::steady_clock::now();
    std::pair<SparseValues, LowRankFactors> step;
    try {
      switch (cfg.variant) {
        case SolverVariant::Armc:
          step = armc_step(l, obs, cfg, t);
          break;
        case SolverVariant::Rmc:
          step = rmc_step(l, obs, cfg, t);
          break;
        case SolverVariant::Rrmc:
          step = rrmc_step(l, obs, cfg, t);
          break;
      }
    } catch (const RankCollapseError& e) {
      result.failed = true;
      result.fail_reason = e.what();
      break;
    }
    rec.seconds = elapsed_seconds(t0);
    result.total_step_seconds += rec.seconds;

    rec.rel_change = fro_distance(step.second, l) / l.fro_norm();

    s = std::move(step.first);
    l = std::move(step.second);

    if (tracker.active) {
      rec.rel_inf_error = tracker.rel_inf(l);
      record_support_metrics(tracker, s, rec);
    }

    result.trace.push_back(rec);
    result.iters = t;

    if (tracker.active && cfg.truth_stop_tol > 0.0 && rec.rel_inf_error <= cfg.truth_stop_tol) {
      result.converged = true;
      break;
    }
    if (rec.rel_change <= cfg.tol_rel_change) {
      result.converged = true;
      break;
    }
  }

  result.l_out = std::move(l);
  result.s_out = std::move(s);
  return result;
}

}  // namespace armc
