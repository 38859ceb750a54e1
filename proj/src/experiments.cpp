#include "armc/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <thread>
#include <tuple>

#include "armc/rng.hpp"

namespace armc {

namespace {

constexpr uint64_t kTruthSubseed = 1;
constexpr uint64_t kInstanceSubseed = 2;
constexpr uint64_t kSolverSubseed = 3;
constexpr uint64_t kSubsampleSubseed = 4;

void parallel_for(int jobs, std::size_t count, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (!abort.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) break;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        abort.store(true);
        break;
      }
    }
  };
  std::vector<std::thread> pool;
  const int nthreads = static_cast<int>(std::min<std::size_t>(jobs, count));
  pool.reserve(nthreads);
  for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

std::vector<double> default_phase_p_grid() {
  std::vector<double> ps;
  for (int i = 1; i <= 13; ++i) ps.push_back(0.02 * i);
  return ps;
}

}  // namespace

uint64_t trial_seed(uint64_t master, std::initializer_list<uint64_t> axis_words, int trial) {
  uint64_t h = splitmix64(master);
  for (uint64_t w : axis_words) h = hash_combine(h, w);
  return hash_combine(h, static_cast<uint64_t>(trial));
}

SolverConfig config_for_instance(const RunTemplate& base, const ProblemInstance& inst,
                                 SolverVariant variant, uint64_t solver_seed) {
  SolverConfig cfg;
  cfg.rank = inst.params.r;
  cfg.variant = variant;
  cfg.max_iters = base.max_iters;
  cfg.tol_rel_change = base.tol_rel_change;
  cfg.truth_stop_tol = base.truth_stop_tol;
  cfg.oversample = base.oversample;
  cfg.power_iters = base.power_iters;
  cfg.seed = solver_seed;
  cfg.track_truth = inst.truth;

  cfg.rule.kind = variant == SolverVariant::Rrmc ? ThresholdKind::Hard : base.kind;
  cfg.rule.scad_a = base.scad_a;
  cfg.rule.gamma = base.gamma;
  if (base.beta1 > 0.0) {
    cfg.rule.beta1 = base.beta1;
  } else {
    const auto [mu_u, mu_v] = incoherence(inst.truth);
    const double mu = std::max(mu_u, mu_v);
    cfg.rule.beta1 = 1.1 * mu * inst.params.r * inst.truth.sigma(0) / inst.params.n;
  }
  if (base.beta2_override >= 0.0) {
    cfg.rule.beta2 = base.beta2_override;
  } else if (inst.sigma_noise > 0.0) {
    cfg.rule.beta2 = 1.1 * (1.0 + base.gamma) * base.c_noise * inst.sigma_noise *
                     std::sqrt(std::log(static_cast<double>(inst.params.n)));
  } else {
    cfg.rule.beta2 = 0.0;
  }
  return cfg;
}

TrialRow run_trial(const RunTemplate& base, SolverVariant variant, int n, int r, double kappa,
                   double p, double alpha, double sigma, double snr, int trial, uint64_t seed) {
  return run_trial(base, variant, n, r, kappa, p, alpha, sigma, snr, trial, seed, nullptr);
}

TrialRow run_trial(const RunTemplate& base, SolverVariant variant, int n, int r, double kappa,
                   double p, double alpha, double sigma, double snr, int trial, uint64_t seed,
                   SolveResult* result_out) {
  LowRankFactors truth = generate_truth(n, r, kappa, mix_seed(seed, {kTruthSubseed}));
  if (snr > 0.0) sigma = sigma_for_snr_db(truth, snr);
  ProblemInstance inst =
      sample_instance(truth, p, alpha, sigma, mix_seed(seed, {kInstanceSubseed}));
  SolverConfig cfg = config_for_instance(base, inst, variant, mix_seed(seed, {kSolverSubseed}));
  SolveResult res = solve(inst.obs, cfg);

  TrialRow row;
  row.variant = variant;
  row.n = n;
  row.r = r;
  row.kappa = kappa;
  row.p = p;
  row.alpha = alpha;
  row.sigma = sigma;
  row.snr_db = snr;
  row.trial = trial;
  row.seed = seed;
  row.iters = res.iters;
  row.converged = res.converged;
  row.failed = res.failed;
  row.total_seconds = res.total_step_seconds;
  row.mean_iter_seconds =
      res.iters > 0 ? (res.total_step_seconds - res.init_seconds) / res.iters : 0.0;
  if (!res.failed) {
    row.eval = evaluate(res, inst);
  } else {
    row.eval.success = false;
    row.eval.rel_inf_error = std::numeric_limits<double>::infinity();
    row.eval.rel_fro_error = std::numeric_limits<double>::infinity();
    row.eval.contained = false;
  }
  if (result_out) *result_out = std::move(res);
  return row;
}

std::vector<TrialRow> run_phase(const PhaseSpec& spec) {
  std::vector<double> p_list = spec.p_list.empty() ? default_phase_p_grid() : spec.p_list;
  struct Task {
    SolverVariant variant;
    double kappa, p, alpha;
    int trial;
  };
  std::vector<Task> tasks;
  for (double kappa : spec.kappa_list)
    for (double p : p_list)
      for (double alpha : spec.alpha_list)
        for (int trial = 0; trial < spec.trials; ++trial)
          for (SolverVariant variant : spec.base.variants)
            tasks.push_back({variant, kappa, p, alpha, trial});

  std::vector<TrialRow> rows(tasks.size());
  parallel_for(spec.base.jobs, tasks.size(), [&](std::size_t i) {
    const Task& tk = tasks[i];
    const uint64_t seed = trial_seed(spec.base.master_seed,
                                     {bits_of(tk.kappa), bits_of(tk.p), bits_of(tk.alpha)},
                                     tk.trial);
    rows[i] = run_trial(spec.base, tk.variant, spec.n, spec.r, tk.kappa, tk.p, tk.alpha, 0.0,
                        0.0, tk.trial, seed);
  });
  return rows;
}

std::vector<TrialRow> run_runtime(const RuntimeSpec& spec) {
  struct Task {
    SolverVariant variant;
    int n;
    double alpha;
    int trial;
  };
  std::vector<Task> tasks;
  for (int n : spec.n_list)
    for (double alpha : spec.alpha_list)
      for (int trial = 0; trial < spec.trials; ++trial)
        for (SolverVariant variant : spec.base.variants)
          tasks.push_back({variant, n, alpha, trial});

  std::vector<TrialRow> rows(tasks.size());
  // Timing experiment: trials run sequentially unless explicitly overridden.
  parallel_for(spec.base.jobs, tasks.size(), [&](std::size_t i) {
    const Task& tk = tasks[i];
    const double p = std::min(1.0, spec.oversampling * spec.r / tk.n);
    const uint64_t seed = trial_seed(spec.base.master_seed,
                                     {static_cast<uint64_t>(tk.n), bits_of(tk.alpha)}, tk.trial);
    rows[i] = run_trial(spec.base, tk.variant, tk.n, spec.r, spec.kappa, p, tk.alpha, 0.0, 0.0,
                        tk.trial, seed);
  });
  return rows;
}

std::vector<TrialRow> run_stability(const StabilitySpec& spec) {
  struct Task {
    SolverVariant variant;
    int r;
    double alpha, snr;
    int trial;
  };
  std::vector<Task> tasks;
  for (double snr : spec.snr_list)
    for (double alpha : spec.alpha_list)
      for (int r : spec.r_list)
        for (int trial = 0; trial < spec.trials; ++trial)
          for (SolverVariant variant : spec.base.variants)
            tasks.push_back({variant, r, alpha, snr, trial});

  std::vector<TrialRow> rows(tasks.size());
  parallel_for(spec.base.jobs, tasks.size(), [&](std::size_t i) {
    const Task& tk = tasks[i];
    const uint64_t seed = trial_seed(
        spec.base.master_seed,
        {bits_of(tk.snr), bits_of(tk.alpha), static_cast<uint64_t>(tk.r)}, tk.trial);
    rows[i] = run_trial(spec.base, tk.variant, spec.n, tk.r, spec.kappa, spec.p, tk.alpha, 0.0,
                        tk.snr, tk.trial, seed);
  });
  return rows;
}

double median(std::vector<double> xs) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  const std::size_t mid = xs.size() / 2;
  if (xs.size() % 2 == 1) return xs[mid];
  return 0.5 * (xs[mid - 1] + xs[mid]);
}

namespace {

std::ofstream open_csv(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ParseError("cannot open for writing: " + path);
  return f;
}

std::string fmt(double x) { return format_double(x); }

// Group key: every axis that identifies a cell.
using CellKey = std::tuple<std::string, int, int, uint64_t, uint64_t, uint64_t, uint64_t>;

CellKey cell_key(const TrialRow& r) {
  return {to_string(r.variant), r.n,      r.r,
          bits_of(r.kappa),     bits_of(r.p), bits_of(r.alpha), bits_of(r.snr_db)};
}

}  // namespace

void write_phase_csv(const std::string& prefix, const std::vector<TrialRow>& rows) {
  auto trials = open_csv(prefix + ".trials.csv");
  trials << "variant,n,r,kappa,p,alpha,trial,seed,iters,converged,failed,success,"
            "rel_inf,rel_fro,support_precision,support_recall,contained,total_seconds\n";
  for (const TrialRow& r : rows) {
    trials << to_string(r.variant) << ',' << r.n << ',' << r.r << ',' << fmt(r.kappa) << ','
           << fmt(r.p) << ',' << fmt(r.alpha) << ',' << r.trial << ',' << r.seed << ','
           << r.iters << ',' << int(r.converged) << ',' << int(r.failed) << ','
           << int(r.eval.success) << ',' << fmt(r.eval.rel_inf_error) << ','
           << fmt(r.eval.rel_fro_error) << ',' << fmt(r.eval.support_precision) << ','
           << fmt(r.eval.support_recall) << ',' << int(r.eval.contained) << ','
           << fmt(r.total_seconds) << "\n";
  }

  std::map<CellKey, std::pair<int, int>> cells;  // successes, trials
  for (const TrialRow& r : rows) {
    auto& c = cells[cell_key(r)];
    c.first += r.eval.success ? 1 : 0;
    c.second += 1;
  }
  auto agg = open_csv(prefix + ".cells.csv");
  agg << "variant,n,r,kappa,p,alpha,snr_db,trials,success_rate\n";
  for (const auto& [key, c] : cells) {
    agg << std::get<0>(key) << ',' << std::get<1>(key) << ',' << std::get<2>(key) << ','
        << fmt(std::bit_cast<double>(std::get<3>(key))) << ','
        << fmt(std::bit_cast<double>(std::get<4>(key))) << ','
        << fmt(std::bit_cast<double>(std::get<5>(key))) << ','
        << fmt(std::bit_cast<double>(std::get<6>(key))) << ',' << c.second << ','
        << fmt(static_cast<double>(c.first) / c.second) << "\n";
  }
}

void write_runtime_csv(const std::string& prefix, const std::vector<TrialRow>& rows) {
  auto trials = open_csv(prefix + ".trials.csv");
  trials << "variant,n,r,kappa,alpha,p,trial,seed,iters,converged,success,"
            "total_seconds,mean_iter_seconds\n";
  for (const TrialRow& r : rows) {
    trials << to_string(r.variant) << ',' << r.n << ',' << r.r << ',' << fmt(r.kappa) << ','
           << fmt(r.alpha) << ',' << fmt(r.p) << ',' << r.trial << ',' << r.seed << ','
           << r.iters << ',' << int(r.converged) << ',' << int(r.eval.success) << ','
           << fmt(r.total_seconds) << ',' << fmt(r.mean_iter_seconds) << "\n";
  }

  std::map<CellKey, std::vector<const TrialRow*>> cells;
  for (const TrialRow& r : rows) cells[cell_key(r)].push_back(&r);
  auto agg = open_csv(prefix + ".cells.csv");
  agg << "variant,n,r,kappa,alpha,p,trials,median_iters,median_total_seconds,"
         "median_mean_iter_seconds\n";
  for (const auto& [key, cell] : cells) {
    std::vector<double> iters, total, per_iter;
    for (const TrialRow* r : cell) {
      iters.push_back(r->iters);
      total.push_back(r->total_seconds);
      per_iter.push_back(r->mean_iter_seconds);
    }
    agg << std::get<0>(key) << ',' << std::get<1>(key) << ',' << std::get<2>(key) << ','
        << fmt(std::bit_cast<double>(std::get<3>(key))) << ','
        << fmt(std::bit_cast<double>(std::get<5>(key))) << ','
        << fmt(std::bit_cast<double>(std::get<4>(key))) << ',' << cell.size() << ','
        << fmt(median(iters)) << ',' << fmt(median(total)) << ',' << fmt(median(per_iter))
        << "\n";
  }
}

void write_stability_csv(const std::string& prefix, const std::vector<TrialRow>& rows) {
  auto trials = open_csv(prefix + ".trials.csv");
  trials << "snr_db,alpha,r,rel_inf,rel_fro,trial\n";
  for (const TrialRow& r : rows) {
    trials << fmt(r.snr_db) << ',' << fmt(r.alpha) << ',' << r.r << ','
           << fmt(r.eval.rel_inf_error) << ',' << fmt(r.eval.rel_fro_error) << ',' << r.trial
           << "\n";
  }

  std::map<CellKey, std::vector<const TrialRow*>> cells;
  for (const TrialRow& r : rows) cells[cell_key(r)].push_back(&r);
  auto agg = open_csv(prefix + ".cells.csv");
  agg << "snr_db,alpha,r,trials,median_rel_inf,median_rel_fro\n";
  for (const auto& [key, cell] : cells) {
    std::vector<double> inf, fro;
    for (const TrialRow* r : cell) {
      inf.push_back(r->eval.rel_inf_error);
      fro.push_back(r->eval.rel_fro_error);
    }
    agg << fmt(std::bit_cast<double>(std::get<6>(key))) << ','
        << fmt(std::bit_cast<double>(std::get<5>(key))) << ',' << std::get<2>(key) << ','
        << cell.size() << ',' << fmt(median(inf)) << ',' << fmt(median(fro)) << "\n";
  }
}

void write_trace_csv(const std::string& path, const SolveResult& result) {
  auto f = open_csv(path);
  f << "# truth_error=" << (result.truth_error_sampled ? "probe" : "exact") << "\n";
  f << "iter,xi,rel_change,step_seconds,rel_inf,support_precision,support_recall,"
       "support_contained\n";
  for (const IterationRecord& rec : result.trace) {
    f << rec.t << ',' << fmt(rec.xi) << ',' << fmt(rec.rel_change) << ',' << fmt(rec.seconds)
      << ',' << fmt(rec.rel_inf_error) << ',' << fmt(rec.support_precision) << ','
      << fmt(rec.support_recall) << ',' << int(rec.support_contained) << "\n";
  }
}

SolveIoResult run_solve(const SolveIoSpec& spec) {
  ObservationSet obs;
  if (spec.dense_input) {
    Eigen::MatrixXd m = read_dense_file(spec.input_path);
    if (m.rows() != m.cols())
      throw ParseError("dense input must be square (" + std::to_string(m.rows()) + "x" +
                       std::to_string(m.cols()) + ")");
    const int n = static_cast<int>(m.rows());
    std::vector<int32_t> rows, cols;
    std::vector<double> vals;
    const bool subsample = spec.subsample_p > 0.0 && spec.subsample_p < 1.0;
    Rng rng(mix_seed(spec.base.master_seed, {kSubsampleSubseed}));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (subsample && !(rng.uniform() < spec.subsample_p)) continue;
        rows.push_back(i);
        cols.push_back(j);
        vals.push_back(m(i, j));
      }
    obs = make_observation_set(n, subsample ? spec.subsample_p : 1.0, std::move(rows),
                               std::move(cols), std::move(vals));
  } else {
    obs = read_coo_file(spec.input_path);
  }

  SolverConfig cfg;
  cfg.rank = spec.rank;
  cfg.variant = spec.variant;
  cfg.max_iters = spec.base.max_iters;
  cfg.tol_rel_change = spec.base.tol_rel_change;
  cfg.oversample = spec.base.oversample;
  cfg.power_iters = spec.base.power_iters;
  cfg.seed = mix_seed(spec.base.master_seed, {kSolverSubseed});
  cfg.rule.kind = spec.variant == SolverVariant::Rrmc ? ThresholdKind::Hard : spec.base.kind;
  cfg.rule.scad_a = spec.base.scad_a;
  cfg.rule.gamma = spec.base.gamma;
  cfg.rule.beta2 = spec.base.beta2_override >= 0.0 ? spec.base.beta2_override : 0.0;
  if (spec.base.beta1 > 0.0) {
    cfg.rule.beta1 = spec.base.beta1;
  } else {
    // Data-driven default: the maximum absolute observed value.
    double m = 0.0;
    for (double v : obs.vals) m = std::max(m, std::abs(v));
    cfg.rule.beta1 = m;
  }

  std::optional<LowRankFactors> truth;
  if (!spec.truth_path.empty()) {
    truth = read_factors_file(spec.truth_path);
    cfg.track_truth = truth;
    cfg.truth_stop_tol = spec.base.truth_stop_tol;
  }

  SolveIoResult out;
  out.beta1 = cfg.rule.beta1;
  out.beta2 = cfg.rule.beta2;
  out.result = solve(obs, cfg);

  if (out.result.failed) return out;

  write_factors_file(spec.out_prefix + ".L.armcf", out.result.l_out);
  // Sparse estimate: nonzero triplets only.
  {
    ObservationSet s_obs;
    s_obs.n = obs.n;
    s_obs.p = obs.p;
    for (std::size_t t = 0; t < obs.count(); ++t) {
      if (out.result.s_out.vals[t] == 0.0) continue;
      s_obs.rows.push_back(obs.rows[t]);
      s_obs.cols.push_back(obs.cols[t]);
      s_obs.vals.push_back(out.result.s_out.vals[t]);
    }
    write_coo_file(spec.out_prefix + ".S.coo", s_obs);
  }
  write_trace_csv(spec.out_prefix + ".trace.csv", out.result);

  if (truth) {
    out.evaluated = true;
    out.rel_fro_error = fro_distance(out.result.l_out, *truth) / truth->fro_norm();
    out.rel_inf_error = obs.n <= kExactEvalMaxN
                            ? max_abs_diff(out.result.l_out, *truth) / max_abs_entry(*truth)
                            : out.result.trace.empty()
                                  ? 0.0
                                  : out.result.trace.back().rel_inf_error;
  }
  return out;
}

}  // namespace armc
