#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "armc/metrics.hpp"
#include "armc/solvers.hpp"
#include "armc/synthgen.hpp"

namespace armc {

// Solver/threshold template shared by all experiment kinds. beta1 <= 0 means
// "calibrate per instance" (1.1 * mu * r * sigma_1 / n from the generated
// truth); beta2 is derived from the noise level unless overridden.
struct RunTemplate {
  ThresholdKind kind = ThresholdKind::Soft;
  double scad_a = 3.7;
  double gamma = 0.9;
  double beta1 = 0.0;
  double beta2_override = -1.0;  // < 0: auto (0 for noiseless, noise formula otherwise)
  double c_noise = 1.0;          // calibration constant in the beta2 noise formula
  int max_iters = 150;
  double tol_rel_change = 1e-7;
  double truth_stop_tol = 1e-3;
  int oversample = 10;
  int power_iters = 4;
  std::vector<SolverVariant> variants = {SolverVariant::Armc};
  uint64_t master_seed = 1;
  int jobs = 1;
};

struct PhaseSpec {
  int n = 500;
  int r = 5;
  int trials = 25;
  std::vector<double> kappa_list = {1.0, 5.0};
  std::vector<double> p_list;      // defaults to 0.02..0.26 step 0.02
  std::vector<double> alpha_list = {0.15};
  RunTemplate base;
};

struct RuntimeSpec {
  int r = 10;
  double kappa = 2.0;
  int trials = 5;
  std::vector<int> n_list = {2000, 4000, 8000};
  std::vector<double> alpha_list = {0.1};
  double oversampling = 40.0;  // p = oversampling * r / n
  RunTemplate base;
};

struct StabilitySpec {
  int n = 1000;
  double kappa = 2.0;
  double p = 0.3;
  int trials = 5;
  std::vector<int> r_list = {5};
  std::vector<double> alpha_list = {0.1, 0.2};
  std::vector<double> snr_list = {20, 30, 40, 50, 60};
  RunTemplate base;
};

// One synthetic trial: generate, solve, evaluate.
struct TrialRow {
  SolverVariant variant = SolverVariant::Armc;
  int n = 0, r = 0;
  double kappa = 0.0, p = 0.0, alpha = 0.0, sigma = 0.0, snr_db = 0.0;
  int trial = 0;
  uint64_t seed = 0;
  int iters = 0;
  bool converged = false;
  bool failed = false;
  EvalReport eval;
  double total_seconds = 0.0;      // init + steps, diagnostics excluded
  double mean_iter_seconds = 0.0;  // steps only
};

// Deterministic per-trial seed: hash of master seed, the cell's axis values,
// and the trial index. Stable under grid edits.
uint64_t trial_seed(uint64_t master, std::initializer_list<uint64_t> axis_words, int trial);

SolverConfig config_for_instance(const RunTemplate& base, const ProblemInstance& inst,
                                 SolverVariant variant, uint64_t solver_seed);

TrialRow run_trial(const RunTemplate& base, SolverVariant variant, int n, int r, double kappa,
                   double p, double alpha, double sigma, double snr, int trial, uint64_t seed);
// Trial with full trace kept (acceptance diagnostics).
TrialRow run_trial(const RunTemplate& base, SolverVariant variant, int n, int r, double kappa,
                   double p, double alpha, double sigma, double snr, int trial, uint64_t seed,
                   SolveResult* result_out);

std::vector<TrialRow> run_phase(const PhaseSpec& spec);
std::vector<TrialRow> run_runtime(const RuntimeSpec& spec);
std::vector<TrialRow> run_stability(const StabilitySpec& spec);

// CSV emission. Each experiment writes <prefix>.trials.csv (one row per
// trial) and <prefix>.cells.csv (one aggregate row per grid cell).
void write_phase_csv(const std::string& prefix, const std::vector<TrialRow>& rows);
void write_runtime_csv(const std::string& prefix, const std::vector<TrialRow>& rows);
void write_stability_csv(const std::string& prefix, const std::vector<TrialRow>& rows);

// Generic solve over ingested data (COO text or dense binary).
struct SolveIoSpec {
  std::string input_path;
  bool dense_input = false;
  double subsample_p = 0.0;  // for dense input: Bernoulli rate, 0/1 = keep all
  std::string truth_path;    // optional factor file for tracking/evaluation
  std::string out_prefix = "solve_out";
  int rank = 1;
  RunTemplate base;
  SolverVariant variant = SolverVariant::Armc;
};

struct SolveIoResult {
  SolveResult result;
  double beta1 = 0.0;
  double beta2 = 0.0;
  bool evaluated = false;
  double rel_inf_error = 0.0;
  double rel_fro_error = 0.0;
};

SolveIoResult run_solve(const SolveIoSpec& spec);

void write_trace_csv(const std::string& path, const SolveResult& result);

// Median of an unsorted vector (copy taken); average of the middle pair for
// even sizes.
double median(std::vector<double> xs);

}  // namespace armc
