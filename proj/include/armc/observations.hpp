#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "armc/linalg.hpp"

namespace armc {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Observed entries of an n x n matrix: sorted COO triplets (no duplicates)
// plus the Bernoulli sampling rate p used for the p^{-1} rescaling.
struct ObservationSet {
  std::vector<int32_t> rows;
  std::vector<int32_t> cols;
  std::vector<double> vals;
  int32_t n = 0;
  double p = 1.0;

  std::size_t count() const { return vals.size(); }
};

// Values aligned index-for-index with a parent ObservationSet's triplets.
struct SparseValues {
  std::vector<double> vals;

  std::size_t count() const { return vals.size(); }
};

// Sorts triplets lexicographically by (row, col); throws on duplicates,
// out-of-range indices, or invalid p.
ObservationSet make_observation_set(int32_t n, double p, std::vector<int32_t> rows,
                                    std::vector<int32_t> cols, std::vector<double> vals);

// vals[t] = sum_k u(i_t,k) * sigma(k) * v(j_t,k). O(|Omega| r).
SparseValues eval_on_support(const LowRankFactors& l, const ObservationSet& obs);
void eval_on_support(const LowRankFactors& l, const std::vector<int32_t>& rows,
                     const std::vector<int32_t>& cols, std::vector<double>& out);

// P_Omega(M - L - S); S omitted when s is null.
SparseValues residual(const ObservationSet& obs, const LowRankFactors& l,
                      const SparseValues* s = nullptr);

// (sparse matrix with obs pattern and `vals`) * x, or its adjoint applied
// to x. O(|Omega| k).
Eigen::MatrixXd sparse_times_dense(const ObservationSet& obs, const SparseValues& vals,
                                   const Eigen::Ref<const Eigen::MatrixXd>& x,
                                   bool transpose = false);

// COO text format: header "# n=<n> p=<p>", then lines "i,j,value" with
// 0-based indices and shortest round-trip decimals.
void write_coo(std::ostream& out, const ObservationSet& obs);
ObservationSet read_coo(std::istream& in);
void write_coo_file(const std::string& path, const ObservationSet& obs);
ObservationSet read_coo_file(const std::string& path);

// Shortest decimal representation that round-trips to the same double.
std::string format_double(double x);

}  // namespace armc
