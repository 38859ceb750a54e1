#include "armc/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "armc/rng.hpp"

namespace armc {

namespace {

constexpr double kDeficiencyTol = 1e-12;
constexpr double kCollapseTol = 1e-14;

// Deterministic direction orthonormal to base and to the first j columns of
// q. Scans canonical basis vectors starting at `hint`; falls back to the best
// candidate seen, or a zero column when the span is already full.
Eigen::VectorXd completion_direction(const Eigen::MatrixXd& base, const Eigen::MatrixXd& q,
                                     int j, int hint) {
  const int n = static_cast<int>(q.rows());
  auto project_out = [&](Eigen::VectorXd w) {
    for (int pass = 0; pass < 2; ++pass) {
      if (base.cols() > 0) w -= base * (base.transpose() * w);
      if (j > 0) w -= q.leftCols(j) * (q.leftCols(j).transpose() * w);
    }
    return w;
  };
  double best_norm = -1.0;
  int best_idx = 0;
  for (int c = 0; c < n; ++c) {
    const int idx = (hint + c) % n;
    Eigen::VectorXd w = project_out(Eigen::VectorXd::Unit(n, idx));
    const double nrm = w.norm();
    if (nrm >= 0.5) return w / nrm;
    if (nrm > best_norm) {
      best_norm = nrm;
      best_idx = idx;
    }
  }
  Eigen::VectorXd w = project_out(Eigen::VectorXd::Unit(n, best_idx));
  const double nrm = w.norm();
  if (nrm > 1e-8) return w / nrm;
  return Eigen::VectorXd::Zero(n);
}

void fix_sign_pair(Eigen::MatrixXd& u, Eigen::MatrixXd& v, int col) {
  int idx = 0;
  u.col(col).cwiseAbs().maxCoeff(&idx);
  if (u(idx, col) < 0.0) {
    u.col(col) = -u.col(col);
    v.col(col) = -v.col(col);
  }
}

}  // namespace

SplitQrResult split_qr(const Eigen::MatrixXd& base, const Eigen::MatrixXd& a) {
  const int n = static_cast<int>(a.rows());
  const int k = static_cast<int>(a.cols());
  const int b = static_cast<int>(base.cols());
  if (b > 0 && base.rows() != n) throw std::invalid_argument("split_qr: base row mismatch");

  SplitQrResult out;
  out.coeff = Eigen::MatrixXd::Zero(b, k);
  out.q = Eigen::MatrixXd::Zero(n, k);
  out.r = Eigen::MatrixXd::Zero(k, k);

  for (int j = 0; j < k; ++j) {
    Eigen::VectorXd w = a.col(j);
    const double orig = w.norm();
    // CGS with one unconditional reorthogonalization pass ("twice is enough").
    for (int pass = 0; pass < 2; ++pass) {
      if (b > 0) {
        Eigen::VectorXd c = base.transpose() * w;
        w -= base * c;
        out.coeff.col(j) += c;
      }
      if (j > 0) {
        Eigen::VectorXd c = out.q.leftCols(j).transpose() * w;
        w -= out.q.leftCols(j) * c;
        out.r.col(j).head(j) += c;
      }
    }
    const double nrm = w.norm();
    if (nrm <= kDeficiencyTol * orig) {
      out.rank_deficient = true;
      out.r(j, j) = 0.0;
      out.q.col(j) = completion_direction(base, out.q, j, j);
    } else {
      out.r(j, j) = nrm;
      out.q.col(j) = w / nrm;
    }
  }
  return out;
}

QrThinResult qr_thin(const Eigen::MatrixXd& a) {
  if (a.cols() > a.rows()) throw std::invalid_argument("qr_thin: requires k <= n");
  SplitQrResult s = split_qr(Eigen::MatrixXd(a.rows(), 0), a);
  return {std::move(s.q), std::move(s.r), s.rank_deficient};
}

SvdSmallResult svd_small(const Eigen::MatrixXd& k) {
  if (k.rows() != k.cols()) throw std::invalid_argument("svd_small: square input required");
  const int m = static_cast<int>(k.rows());
  if (m > 4096) throw std::invalid_argument("svd_small: input too large for dense regime");

  SvdSmallResult out;
  if (m == 0) {
    out.p.resize(0, 0);
    out.s.resize(0);
    out.q.resize(0, 0);
    return out;
  }

  Eigen::MatrixXd a = k;
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(m, m);

  // One-sided Jacobi: rotate column pairs until all are mutually orthogonal.
  constexpr double tol = 1e-15;
  constexpr int max_sweeps = 100;
  int sweep = 0;
  for (; sweep < max_sweeps; ++sweep) {
    bool changed = false;
    for (int i = 0; i < m - 1; ++i) {
      for (int j = i + 1; j < m; ++j) {
        const double alpha = a.col(i).squaredNorm();
        const double beta = a.col(j).squaredNorm();
        const double g = a.col(i).dot(a.col(j));
        if (alpha == 0.0 || beta == 0.0) continue;
        if (std::abs(g) <= tol * std::sqrt(alpha * beta)) continue;
        changed = true;
        const double zeta = (beta - alpha) / (2.0 * g);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        const Eigen::VectorXd ai = a.col(i);
        a.col(i) = c * ai - s * a.col(j);
        a.col(j) = s * ai + c * a.col(j);
        const Eigen::VectorXd vi = v.col(i);
        v.col(i) = c * vi - s * v.col(j);
        v.col(j) = s * vi + c * v.col(j);
      }
    }
    if (!changed) break;
  }
  out.converged = sweep < max_sweeps;

  Eigen::VectorXd norms(m);
  for (int j = 0; j < m; ++j) norms(j) = a.col(j).norm();

  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return norms(x) > norms(y); });

  out.p = Eigen::MatrixXd::Zero(m, m);
  out.s.resize(m);
  out.q.resize(m, m);
  const double smax = norms(order[0]);
  for (int j = 0; j < m; ++j) {
    const int src = order[j];
    out.s(j) = norms(src);
    out.q.col(j) = v.col(src);
    if (norms(src) > smax * 1e-15 && norms(src) > 0.0) {
      out.p.col(j) = a.col(src) / norms(src);
    } else {
      out.p.col(j) = completion_direction(Eigen::MatrixXd(m, 0), out.p, j, j);
    }
  }
  for (int j = 0; j < m; ++j) fix_sign_pair(out.p, out.q, j);
  return out;
}

LowRankFactors truncated_svd_operator(const MatOp& apply, const MatOp& apply_adjoint,
                                      int n, int r, int oversample, int power_iters,
                                      uint64_t seed) {
  if (r < 1 || r > n) throw std::invalid_argument("truncated_svd_operator: invalid rank");
  if (oversample < 0 || power_iters < 0)
    throw std::invalid_argument("truncated_svd_operator: invalid parameters");
  const int ell = std::min(r + oversample, n);

  Eigen::MatrixXd probe = gaussian_matrix(n, ell, seed);
  Eigen::MatrixXd q = qr_thin(apply(probe)).q;
  for (int it = 0; it < power_iters; ++it) {
    Eigen::MatrixXd z = qr_thin(apply_adjoint(q)).q;
    q = qr_thin(apply(z)).q;
  }

  // A ~ Q Q^T A; with A^T Q = Qb Rb this is (Q P) S (Qb W)^T for Rb^T = P S W^T.
  Eigen::MatrixXd bt = apply_adjoint(q);
  QrThinResult bqr = qr_thin(bt);
  SvdSmallResult core = svd_small(bqr.r.transpose());

  LowRankFactors out;
  out.u = q * core.p.leftCols(r);
  out.sigma = core.s.head(r);
  out.v = bqr.q * core.q.leftCols(r);
  if (out.sigma(0) <= 0.0 || out.sigma(r - 1) <= kCollapseTol * out.sigma(0))
    throw RankCollapseError("truncated_svd_operator: rank-r spectrum collapsed");
  for (int j = 0; j < r; ++j) fix_sign_pair(out.u, out.v, j);
  return out;
}

LowRankFactors truncate_structured(const StructuredTangentForm& form, int r) {
  const int n = static_cast<int>(form.u.rows());
  const int rin = static_cast<int>(form.u.cols());
  if (form.v.rows() != n || form.v.cols() != rin || form.y1.rows() != n ||
      form.y1.cols() != rin || form.y2.rows() != n || form.y2.cols() != rin)
    throw std::invalid_argument("truncate_structured: inconsistent form dimensions");
  if (r < 1 || r > 2 * rin) throw std::invalid_argument("truncate_structured: invalid rank");

  // y2 = U c2 + Qu Ru,  y1 = V c1 + Qv Rv, with Qu _|_ U and Qv _|_ V.
  SplitQrResult su = split_qr(form.u, form.y2);
  SplitQrResult sv = split_qr(form.v, form.y1);

  // U y1^T + y2 V^T = [U Qu] K [V Qv]^T with K = [ c1^T + c2, Rv^T ; Ru, 0 ].
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(2 * rin, 2 * rin);
  k.topLeftCorner(rin, rin) = sv.coeff.transpose() + su.coeff;
  k.topRightCorner(rin, rin) = sv.r.transpose();
  k.bottomLeftCorner(rin, rin) = su.r;

  SvdSmallResult core = svd_small(k);

  LowRankFactors out;
  out.sigma = core.s.head(r);
  if (out.sigma(0) <= 0.0 || out.sigma(r - 1) <= kCollapseTol * out.sigma(0))
    throw RankCollapseError("truncate_structured: rank-r spectrum collapsed");

  Eigen::MatrixXd left(n, 2 * rin), right(n, 2 * rin);
  left << form.u, su.q;
  right << form.v, sv.q;
  out.u = left * core.p.leftCols(r);
  out.v = right * core.q.leftCols(r);
  for (int j = 0; j < r; ++j) fix_sign_pair(out.u, out.v, j);
  return out;
}

double inner_product(const LowRankFactors& a, const LowRankFactors& b) {
  if (a.n() != b.n()) throw std::invalid_argument("inner_product: dimension mismatch");
  Eigen::MatrixXd pu = a.u.transpose() * b.u;  // ra x rb
  Eigen::MatrixXd pv = a.v.transpose() * b.v;
  pu = a.sigma.asDiagonal() * pu * b.sigma.asDiagonal();
  return pu.cwiseProduct(pv).sum();
}

double fro_distance(const LowRankFactors& a, const LowRankFactors& b) {
  if (a.n() != b.n()) throw std::invalid_argument("fro_distance: dimension mismatch");
  // A - B = [Ua Sa | Ub Sb] [Va | -Vb]^T; with thin QR of both stacked blocks
  // the norm reduces to a small triangular product. Unlike the expanded Gram
  // form this does not cancel two large near-equal sums, so it stays accurate
  // down to machine scale when A and B are close.
  const int ra = a.rank(), rb = b.rank();
  Eigen::MatrixXd x(a.n(), ra + rb);
  x << a.u * a.sigma.asDiagonal(), b.u * b.sigma.asDiagonal();
  Eigen::MatrixXd y(a.n(), ra + rb);
  y << a.v, -b.v;
  const QrThinResult qx = qr_thin(x);
  const QrThinResult qy = qr_thin(y);
  return (qx.r * qy.r.transpose()).norm();
}

namespace {
constexpr int kRowBlock = 256;
}

double max_abs_entry(const LowRankFactors& l) {
  const int n = l.n();
  Eigen::MatrixXd us = l.u * l.sigma.asDiagonal();
  double best = 0.0;
  for (int i0 = 0; i0 < n; i0 += kRowBlock) {
    const int rows = std::min(kRowBlock, n - i0);
    Eigen::MatrixXd block = us.middleRows(i0, rows) * l.v.transpose();
    best = std::max(best, block.cwiseAbs().maxCoeff());
  }
  return best;
}

double max_abs_diff(const LowRankFactors& a, const LowRankFactors& b) {
  if (a.n() != b.n()) throw std::invalid_argument("max_abs_diff: dimension mismatch");
  const int n = a.n();
  Eigen::MatrixXd usa = a.u * a.sigma.asDiagonal();
  Eigen::MatrixXd usb = b.u * b.sigma.asDiagonal();
  double best = 0.0;
  for (int i0 = 0; i0 < n; i0 += kRowBlock) {
    const int rows = std::min(kRowBlock, n - i0);
    Eigen::MatrixXd block = usa.middleRows(i0, rows) * a.v.transpose();
    block.noalias() -= usb.middleRows(i0, rows) * b.v.transpose();
    best = std::max(best, block.cwiseAbs().maxCoeff());
  }
  return best;
}

double max_abs_diff_dense(const LowRankFactors& a, const Eigen::MatrixXd& b) {
  if (a.n() != b.rows() || b.rows() != b.cols())
    throw std::invalid_argument("max_abs_diff_dense: dimension mismatch");
  const int n = a.n();
  Eigen::MatrixXd usa = a.u * a.sigma.asDiagonal();
  double best = 0.0;
  for (int i0 = 0; i0 < n; i0 += kRowBlock) {
    const int rows = std::min(kRowBlock, n - i0);
    Eigen::MatrixXd block = usa.middleRows(i0, rows) * a.v.transpose();
    block -= b.middleRows(i0, rows);
    best = std::max(best, block.cwiseAbs().maxCoeff());
  }
  return best;
}

double max_abs_diff_probe(const LowRankFactors& a, const LowRankFactors& b,
                          const std::vector<int32_t>& rows, const std::vector<int32_t>& cols) {
  if (a.n() != b.n()) throw std::invalid_argument("max_abs_diff_probe: dimension mismatch");
  if (rows.size() != cols.size()) throw std::invalid_argument("max_abs_diff_probe: probe mismatch");
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  RowMajor usa = a.u * a.sigma.asDiagonal();
  RowMajor va = a.v;
  RowMajor usb = b.u * b.sigma.asDiagonal();
  RowMajor vb = b.v;
  double best = 0.0;
  for (size_t t = 0; t < rows.size(); ++t) {
    const int i = rows[t], j = cols[t];
    const double d = usa.row(i).dot(va.row(j)) - usb.row(i).dot(vb.row(j));
    best = std::max(best, std::abs(d));
  }
  return best;
}

Eigen::MatrixXd gaussian_matrix(int rows, int cols, uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = rng.gaussian();
  return m;
}

}  // namespace armc
