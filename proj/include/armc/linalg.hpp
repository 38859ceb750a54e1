#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

namespace armc {

// Thrown when a rank-r iterate degenerates (sigma_r vanishes relative to
// sigma_1). Algorithm iterates are required to stay at rank exactly r, so a
// collapse indicates a mis-set rank or pathological data, not a condition to
// silently absorb.
class RankCollapseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Compact SVD triple U * diag(sigma) * V^T. U, V are n x r with orthonormal
// columns; sigma is sorted non-increasing and strictly positive.
struct LowRankFactors {
  Eigen::MatrixXd u;
  Eigen::VectorXd sigma;
  Eigen::MatrixXd v;

  int n() const { return static_cast<int>(u.rows()); }
  int rank() const { return static_cast<int>(sigma.size()); }
  double fro_norm() const { return sigma.norm(); }
  Eigen::MatrixXd dense() const { return u * sigma.asDiagonal() * v.transpose(); }
};

// U*y1^T + y2*V^T with U, V orthonormal n x r. Every element of the tangent
// space at a rank-r point has this shape; its rank is at most 2r.
struct StructuredTangentForm {
  Eigen::MatrixXd u;
  Eigen::MatrixXd v;
  Eigen::MatrixXd y1;
  Eigen::MatrixXd y2;

  Eigen::MatrixXd dense() const { return u * y1.transpose() + y2 * v.transpose(); }
};

struct QrThinResult {
  Eigen::MatrixXd q;  // n x k, orthonormal columns
  Eigen::MatrixXd r;  // k x k, upper triangular, non-negative diagonal
  bool rank_deficient = false;
};

// Thin QR by classical Gram-Schmidt with one full reorthogonalization pass.
// Rank-deficient columns get a zero diagonal in r and a deterministic
// orthonormal completion direction in q; the reconstruction a = q*r still
// holds to rounding.
QrThinResult qr_thin(const Eigen::MatrixXd& a);

struct SplitQrResult {
  Eigen::MatrixXd coeff;  // base^T * a, i.e. components inside span(base)
  Eigen::MatrixXd q;      // orthonormal, orthogonal to base
  Eigen::MatrixXd r;      // upper triangular
  bool rank_deficient = false;
};

// Decompose a = base*coeff + q*r with [base q] orthonormal. base must have
// orthonormal columns. Used to orthogonalize tangent-space blocks against
// the current factors.
SplitQrResult split_qr(const Eigen::MatrixXd& base, const Eigen::MatrixXd& a);

struct SvdSmallResult {
  Eigen::MatrixXd p;  // m x m orthonormal
  Eigen::VectorXd s;  // non-increasing, >= 0
  Eigen::MatrixXd q;  // m x m orthonormal
  bool converged = true;
};

// Full SVD of a small square dense matrix by one-sided Jacobi rotations.
// Deterministic (fixed cyclic pivot order) and accurate to high relative
// precision for the tiny cores this library feeds it.
SvdSmallResult svd_small(const Eigen::MatrixXd& k);

// Block linear operator: x (n x k) -> A*x (n x k).
using MatOp = std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>;

// Best rank-r approximation of an implicitly defined square operator by
// randomized subspace iteration. Deterministic for a fixed seed.
LowRankFactors truncated_svd_operator(const MatOp& apply, const MatOp& apply_adjoint,
                                      int n, int r, int oversample, int power_iters,
                                      uint64_t seed);

// Best rank-r approximation of U*y1^T + y2*V^T using the 2r structure:
// split y1/y2 against V/U, assemble the 2r x 2r core, SVD it, rotate back.
// O(n r^2) plus the cost of forming y1, y2.
LowRankFactors truncate_structured(const StructuredTangentForm& form, int r);

// Frobenius inner product / distance between two factorizations via r x r
// Gram products; no densification.
double inner_product(const LowRankFactors& a, const LowRankFactors& b);
double fro_distance(const LowRankFactors& a, const LowRankFactors& b);

// max_ij |L_ij|, streamed over row blocks.
double max_abs_entry(const LowRankFactors& l);

// max_ij |A_ij - B_ij| over all n^2 entries, streamed.
double max_abs_diff(const LowRankFactors& a, const LowRankFactors& b);

// Same against a pre-densified reference.
double max_abs_diff_dense(const LowRankFactors& a, const Eigen::MatrixXd& b);

// max |A_ij - B_ij| over an explicit probe list.
double max_abs_diff_probe(const LowRankFactors& a, const LowRankFactors& b,
                          const std::vector<int32_t>& rows, const std::vector<int32_t>& cols);

// n x k matrix of iid standard normals, column-major fill, seeded.
Eigen::MatrixXd gaussian_matrix(int rows, int cols, uint64_t seed);

}  // namespace armc
