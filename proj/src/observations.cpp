#include "armc/observations.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace armc {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_aligned(const ObservationSet& obs, const LowRankFactors& l) {
  if (l.n() != obs.n) throw std::invalid_argument("observations: dimension mismatch");
}

}  // namespace

ObservationSet make_observation_set(int32_t n, double p, std::vector<int32_t> rows,
                                    std::vector<int32_t> cols, std::vector<double> vals) {
  if (n <= 0) throw std::invalid_argument("observation set: n must be positive");
  if (!(p > 0.0) || p > 1.0) throw std::invalid_argument("observation set: p must be in (0,1]");
  if (rows.size() != cols.size() || rows.size() != vals.size())
    throw std::invalid_argument("observation set: triplet arrays must align");

  const std::size_t m = rows.size();
  for (std::size_t t = 0; t < m; ++t) {
    if (rows[t] < 0 || rows[t] >= n || cols[t] < 0 || cols[t] >= n)
      throw std::invalid_argument("observation set: index out of range");
  }

  bool sorted = true;
  for (std::size_t t = 1; t < m && sorted; ++t) {
    sorted = rows[t - 1] < rows[t] || (rows[t - 1] == rows[t] && cols[t - 1] < cols[t]);
  }
  ObservationSet obs;
  obs.n = n;
  obs.p = p;
  if (sorted) {
    obs.rows = std::move(rows);
    obs.cols = std::move(cols);
    obs.vals = std::move(vals);
  } else {
    std::vector<std::size_t> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    std::sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
      return rows[a] < rows[b] || (rows[a] == rows[b] && cols[a] < cols[b]);
    });
    obs.rows.resize(m);
    obs.cols.resize(m);
    obs.vals.resize(m);
    for (std::size_t t = 0; t < m; ++t) {
      obs.rows[t] = rows[perm[t]];
      obs.cols[t] = cols[perm[t]];
      obs.vals[t] = vals[perm[t]];
    }
    for (std::size_t t = 1; t < m; ++t) {
      if (obs.rows[t] == obs.rows[t - 1] && obs.cols[t] == obs.cols[t - 1])
        throw std::invalid_argument("observation set: duplicate entry");
    }
    return obs;
  }
  for (std::size_t t = 1; t < m; ++t) {
    if (obs.rows[t] == obs.rows[t - 1] && obs.cols[t] == obs.cols[t - 1])
      throw std::invalid_argument("observation set: duplicate entry");
  }
  return obs;
}

void eval_on_support(const LowRankFactors& l, const std::vector<int32_t>& rows,
                     const std::vector<int32_t>& cols, std::vector<double>& out) {
  const std::size_t m = rows.size();
  out.resize(m);
  RowMajor us = l.u * l.sigma.asDiagonal();
  RowMajor v = l.v;
  for (std::size_t t = 0; t < m; ++t) out[t] = us.row(rows[t]).dot(v.row(cols[t]));
}

SparseValues eval_on_support(const LowRankFactors& l, const ObservationSet& obs) {
  check_aligned(obs, l);
  SparseValues sv;
  eval_on_support(l, obs.rows, obs.cols, sv.vals);
  return sv;
}

SparseValues residual(const ObservationSet& obs, const LowRankFactors& l,
                      const SparseValues* s) {
  check_aligned(obs, l);
  if (s && s->vals.size() != obs.count())
    throw std::invalid_argument("residual: sparse values misaligned");
  SparseValues r = eval_on_support(l, obs);
  const std::size_t m = obs.count();
  for (std::size_t t = 0; t < m; ++t) {
    r.vals[t] = obs.vals[t] - r.vals[t] - (s ? s->vals[t] : 0.0);
  }
  return r;
}

Eigen::MatrixXd sparse_times_dense(const ObservationSet& obs, const SparseValues& vals,
                                   const Eigen::Ref<const Eigen::MatrixXd>& x, bool transpose) {
  if (x.rows() != obs.n) throw std::invalid_argument("sparse_times_dense: dimension mismatch");
  if (vals.count() != obs.count())
    throw std::invalid_argument("sparse_times_dense: sparse values misaligned");
  const std::size_t m = obs.count();
  RowMajor xr = x;
  RowMajor out = RowMajor::Zero(obs.n, x.cols());
  if (!transpose) {
    for (std::size_t t = 0; t < m; ++t)
      out.row(obs.rows[t]) += vals.vals[t] * xr.row(obs.cols[t]);
  } else {
    for (std::size_t t = 0; t < m; ++t)
      out.row(obs.cols[t]) += vals.vals[t] * xr.row(obs.rows[t]);
  }
  return out;
}

std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

void write_coo(std::ostream& out, const ObservationSet& obs) {
  out << "# n=" << obs.n << " p=" << format_double(obs.p) << "\n";
  const std::size_t m = obs.count();
  for (std::size_t t = 0; t < m; ++t) {
    out << obs.rows[t] << ',' << obs.cols[t] << ',' << format_double(obs.vals[t]) << "\n";
  }
}

namespace {

bool parse_double(const std::string& s, double& out) {
  const char* b = s.data();
  const char* e = s.data() + s.size();
  auto res = std::from_chars(b, e, out);
  return res.ec == std::errc() && res.ptr == e;
}

bool parse_int(const std::string& s, int64_t& out) {
  const char* b = s.data();
  const char* e = s.data() + s.size();
  auto res = std::from_chars(b, e, out);
  return res.ec == std::errc() && res.ptr == e;
}

std::string trimmed(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

ObservationSet read_coo(std::istream& in) {
  std::string line;
  int64_t n = -1;
  double p = -1.0;
  std::vector<int32_t> rows, cols;
  std::vector<double> vals;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trimmed(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      std::istringstream hs(t.substr(1));
      std::string tok;
      while (hs >> tok) {
        if (tok.rfind("n=", 0) == 0) {
          if (!parse_int(tok.substr(2), n) || n <= 0)
            throw ParseError("line " + std::to_string(lineno) + ": bad n in header");
        } else if (tok.rfind("p=", 0) == 0) {
          if (!parse_double(tok.substr(2), p))
            throw ParseError("line " + std::to_string(lineno) + ": bad p in header");
        }
      }
      continue;
    }
    const std::size_t c1 = t.find(',');
    const std::size_t c2 = c1 == std::string::npos ? std::string::npos : t.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw ParseError("line " + std::to_string(lineno) + ": expected i,j,value");
    int64_t i = 0, j = 0;
    double v = 0.0;
    if (!parse_int(trimmed(t.substr(0, c1)), i) ||
        !parse_int(trimmed(t.substr(c1 + 1, c2 - c1 - 1)), j) ||
        !parse_double(trimmed(t.substr(c2 + 1)), v))
      throw ParseError("line " + std::to_string(lineno) + ": malformed triplet");
    if (n > 0 && (i < 0 || i >= n || j < 0 || j >= n))
      throw ParseError("line " + std::to_string(lineno) + ": index out of range");
    rows.push_back(static_cast<int32_t>(i));
    cols.push_back(static_cast<int32_t>(j));
    vals.push_back(v);
  }
  if (n <= 0) throw ParseError("missing \"# n=<n>\" header line");
  if (p < 0.0) p = static_cast<double>(vals.size()) / (static_cast<double>(n) * static_cast<double>(n));
  try {
    return make_observation_set(static_cast<int32_t>(n), p, std::move(rows), std::move(cols),
                                std::move(vals));
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what());
  }
}

void write_coo_file(const std::string& path, const ObservationSet& obs) {
  std::ofstream f(path);
  if (!f) throw ParseError("cannot open for writing: " + path);
  write_coo(f, obs);
  if (!f) throw ParseError("write failed: " + path);
}

ObservationSet read_coo_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open: " + path);
  return read_coo(f);
}

}  // namespace armc
