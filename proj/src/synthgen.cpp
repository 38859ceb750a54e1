#include "armc/synthgen.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "armc/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "binary file formats assume a little-endian host");

namespace armc {

namespace {

constexpr uint64_t kTruthLeftTag = 0xa1;
constexpr uint64_t kTruthRightTag = 0xa2;
constexpr uint64_t kTruthSpectrumTag = 0xa3;
constexpr uint64_t kMaskTag = 0xb1;
constexpr uint64_t kOutlierTag = 0xb2;
constexpr uint64_t kNoiseTag = 0xb3;

Eigen::MatrixXd incoherent_basis(int n, int r, uint64_t seed) {
  Eigen::MatrixXd q = qr_thin(gaussian_matrix(n, r, seed)).q;
  const double cap = std::sqrt(static_cast<double>(r) / n);
  for (int i = 0; i < n; ++i) {
    const double nrm = q.row(i).norm();
    if (nrm > cap) q.row(i) *= cap / nrm;
  }
  return qr_thin(q).q;
}

}  // namespace

LowRankFactors generate_truth(int n, int r, double kappa, uint64_t seed) {
  if (r < 1 || r > n) throw std::invalid_argument("generate_truth: invalid rank");
  if (kappa < 1.0) throw std::invalid_argument("generate_truth: kappa must be >= 1");
  if (r == 1 && kappa != 1.0)
    throw std::invalid_argument("generate_truth: r = 1 forces kappa = 1");

  LowRankFactors f;
  f.u = incoherent_basis(n, r, mix_seed(seed, {kTruthLeftTag}));
  f.v = incoherent_basis(n, r, mix_seed(seed, {kTruthRightTag}));

  Rng rng(mix_seed(seed, {kTruthSpectrumTag}));
  f.sigma.resize(r);
  for (int i = 0; i < r; ++i) f.sigma(i) = rng.uniform(1.0 / kappa, 1.0);
  std::sort(f.sigma.data(), f.sigma.data() + r, std::greater<double>());
  f.sigma(0) = 1.0;
  f.sigma(r - 1) = 1.0 / kappa;
  return f;
}

ProblemInstance sample_instance(const LowRankFactors& truth, double p, double alpha,
                                double sigma_noise, uint64_t seed) {
  if (!(p > 0.0) || p > 1.0) throw std::invalid_argument("sample_instance: p must be in (0,1]");
  if (alpha < 0.0 || alpha >= 1.0)
    throw std::invalid_argument("sample_instance: alpha must be in [0,1)");
  if (sigma_noise < 0.0) throw std::invalid_argument("sample_instance: negative noise level");

  const int n = truth.n();
  ProblemInstance inst;
  inst.truth = truth;
  inst.sigma_noise = sigma_noise;
  const double kappa = truth.sigma(0) / truth.sigma(truth.rank() - 1);
  inst.params = {n, truth.rank(), kappa, p, alpha, sigma_noise, seed, 0};

  // Bernoulli(p) mask, row-major scan so triplets come out sorted.
  std::vector<int32_t> rows, cols;
  const double expected = p * static_cast<double>(n) * n;
  rows.reserve(static_cast<std::size_t>(expected * 1.05) + 64);
  cols.reserve(rows.capacity());
  {
    Rng rng(mix_seed(seed, {kMaskTag}));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (rng.uniform() < p) {
          rows.push_back(i);
          cols.push_back(j);
        }
  }
  const std::size_t m = rows.size();
  if (m == 0) throw std::invalid_argument("sample_instance: empty observation set drawn");

  std::vector<double> lvals;
  eval_on_support(truth, rows, cols, lvals);
  const double linf = max_abs_entry(truth);

  // Outliers: iid corruption at rate alpha, redrawn wholesale if any row or
  // column exceeds the 2*alpha*p*n cap.
  const double cap = 2.0 * alpha * p * n;
  std::vector<uint8_t> is_outlier(m, 0);
  std::vector<double> outlier_val(m, 0.0);
  if (alpha > 0.0) {
    constexpr int kMaxAttempts = 200;
    std::vector<int32_t> row_count(n), col_count(n);
    bool ok = false;
    int attempt = 0;
    for (; attempt < kMaxAttempts && !ok; ++attempt) {
      Rng rng(mix_seed(seed, {kOutlierTag, static_cast<uint64_t>(attempt)}));
      std::fill(is_outlier.begin(), is_outlier.end(), 0);
      std::fill(row_count.begin(), row_count.end(), 0);
      std::fill(col_count.begin(), col_count.end(), 0);
      for (std::size_t t = 0; t < m; ++t) {
        if (rng.uniform() < alpha) {
          is_outlier[t] = 1;
          outlier_val[t] = rng.uniform(-linf, linf);
          ++row_count[rows[t]];
          ++col_count[cols[t]];
        }
      }
      ok = *std::max_element(row_count.begin(), row_count.end()) <= cap &&
           *std::max_element(col_count.begin(), col_count.end()) <= cap;
    }
    inst.params.outlier_resamples = attempt - 1;
    inst.params.outlier_cap_satisfied = ok;
  }

  std::vector<double> mvals(m);
  if (sigma_noise > 0.0) {
    Rng rng(mix_seed(seed, {kNoiseTag}));
    for (std::size_t t = 0; t < m; ++t)
      mvals[t] = lvals[t] + (is_outlier[t] ? outlier_val[t] : 0.0) + sigma_noise * rng.gaussian();
  } else {
    for (std::size_t t = 0; t < m; ++t)
      mvals[t] = lvals[t] + (is_outlier[t] ? outlier_val[t] : 0.0);
  }

  for (std::size_t t = 0; t < m; ++t) {
    if (is_outlier[t]) {
      inst.outlier_idx.push_back(t);
      inst.outlier_vals.push_back(outlier_val[t]);
    }
  }
  inst.obs = make_observation_set(n, p, std::move(rows), std::move(cols), std::move(mvals));
  return inst;
}

namespace {

void write_raw(std::ofstream& f, const void* data, std::size_t bytes) {
  f.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
}

void read_raw(std::ifstream& f, void* data, std::size_t bytes) {
  f.read(static_cast<char*>(data), static_cast<std::streamsize>(bytes));
  if (!f) throw ParseError("unexpected end of binary file");
}

void write_u64(std::ofstream& f, uint64_t v) { write_raw(f, &v, 8); }

uint64_t read_u64(std::ifstream& f) {
  uint64_t v = 0;
  read_raw(f, &v, 8);
  return v;
}

void write_matrix_rowmajor(std::ofstream& f, const Eigen::MatrixXd& m) {
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  RowMajor rm = m;
  write_raw(f, rm.data(), sizeof(double) * static_cast<std::size_t>(rm.size()));
}

Eigen::MatrixXd read_matrix_rowmajor(std::ifstream& f, int rows, int cols) {
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  RowMajor rm(rows, cols);
  read_raw(f, rm.data(), sizeof(double) * static_cast<std::size_t>(rm.size()));
  return rm;
}

void check_magic(std::ifstream& f, const char* magic) {
  char buf[6];
  read_raw(f, buf, 6);
  if (std::memcmp(buf, magic, 6) != 0) throw ParseError("bad magic in binary file");
}

}  // namespace

void write_factors_file(const std::string& path, const LowRankFactors& fac) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open for writing: " + path);
  write_raw(f, "ARMCF1", 6);
  write_u64(f, static_cast<uint64_t>(fac.n()));
  write_u64(f, static_cast<uint64_t>(fac.rank()));
  write_matrix_rowmajor(f, fac.u);
  write_raw(f, fac.sigma.data(), sizeof(double) * static_cast<std::size_t>(fac.sigma.size()));
  write_matrix_rowmajor(f, fac.v);
  if (!f) throw ParseError("write failed: " + path);
}

LowRankFactors read_factors_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open: " + path);
  check_magic(f, "ARMCF1");
  const auto n = static_cast<int>(read_u64(f));
  const auto r = static_cast<int>(read_u64(f));
  if (n <= 0 || r <= 0 || r > n) throw ParseError("factor file: invalid dimensions");
  LowRankFactors fac;
  fac.u = read_matrix_rowmajor(f, n, r);
  fac.sigma.resize(r);
  read_raw(f, fac.sigma.data(), sizeof(double) * static_cast<std::size_t>(r));
  fac.v = read_matrix_rowmajor(f, n, r);
  return fac;
}

void write_dense_file(const std::string& path, const Eigen::MatrixXd& m) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open for writing: " + path);
  write_raw(f, "ARMCM1", 6);
  write_u64(f, static_cast<uint64_t>(m.rows()));
  write_u64(f, static_cast<uint64_t>(m.cols()));
  write_matrix_rowmajor(f, m);
  if (!f) throw ParseError("write failed: " + path);
}

Eigen::MatrixXd read_dense_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open: " + path);
  check_magic(f, "ARMCM1");
  const auto rows = static_cast<int64_t>(read_u64(f));
  const auto cols = static_cast<int64_t>(read_u64(f));
  if (rows <= 0 || cols <= 0 || rows > (1 << 20) || cols > (1 << 20))
    throw ParseError("dense file: invalid dimensions");
  return read_matrix_rowmajor(f, static_cast<int>(rows), static_cast<int>(cols));
}

void write_instance(const std::string& prefix, const ProblemInstance& inst) {
  write_coo_file(prefix + ".coo", inst.obs);
  write_factors_file(prefix + ".truth", inst.truth);
  std::ofstream meta(prefix + ".meta");
  if (!meta) throw ParseError("cannot open for writing: " + prefix + ".meta");
  meta << "n=" << inst.params.n << "\n";
  meta << "r=" << inst.params.r << "\n";
  meta << "kappa=" << format_double(inst.params.kappa) << "\n";
  meta << "p=" << format_double(inst.params.p) << "\n";
  meta << "alpha=" << format_double(inst.params.alpha) << "\n";
  meta << "sigma=" << format_double(inst.params.sigma) << "\n";
  meta << "seed=" << inst.params.seed << "\n";
}

ProblemInstance read_instance(const std::string& prefix) {
  ProblemInstance inst;
  inst.obs = read_coo_file(prefix + ".coo");
  inst.truth = read_factors_file(prefix + ".truth");

  std::ifstream meta(prefix + ".meta");
  if (!meta) throw ParseError("cannot open: " + prefix + ".meta");
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(meta, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto get = [&](const char* key) -> std::string {
    auto it = kv.find(key);
    if (it == kv.end()) throw ParseError(std::string("meta file: missing key ") + key);
    return it->second;
  };
  inst.params.n = std::stoi(get("n"));
  inst.params.r = std::stoi(get("r"));
  inst.params.kappa = std::stod(get("kappa"));
  inst.params.p = std::stod(get("p"));
  inst.params.alpha = std::stod(get("alpha"));
  inst.params.sigma = std::stod(get("sigma"));
  inst.params.seed = std::stoull(get("seed"));
  inst.sigma_noise = inst.params.sigma;

  // Outlier support is recoverable exactly only without noise: it is the set
  // of observed entries that differ from the truth evaluation.
  if (inst.sigma_noise == 0.0) {
    SparseValues lvals = eval_on_support(inst.truth, inst.obs);
    for (std::size_t t = 0; t < inst.obs.count(); ++t) {
      if (inst.obs.vals[t] != lvals.vals[t]) {
        inst.outlier_idx.push_back(t);
        inst.outlier_vals.push_back(inst.obs.vals[t] - lvals.vals[t]);
      }
    }
  }
  return inst;
}

}  // namespace armc
