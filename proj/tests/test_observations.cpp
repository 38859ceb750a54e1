#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "armc/observations.hpp"
#include "armc/rng.hpp"
#include "test_helpers.hpp"

using namespace armc;

namespace {

LowRankFactors random_factors(int n, int r, uint64_t seed) {
  LowRankFactors f;
  f.u = qr_thin(gaussian_matrix(n, r, mix_seed(seed, {1}))).q;
  f.v = qr_thin(gaussian_matrix(n, r, mix_seed(seed, {2}))).q;
  Rng rng(mix_seed(seed, {3}));
  f.sigma.resize(r);
  for (int i = 0; i < r; ++i) f.sigma(i) = rng.uniform(0.5, 2.0);
  std::sort(f.sigma.data(), f.sigma.data() + r, std::greater<double>());
  return f;
}

ObservationSet full_support(int n, const Eigen::MatrixXd& m, double p = 1.0) {
  std::vector<int32_t> rows, cols;
  std::vector<double> vals;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      rows.push_back(i);
      cols.push_back(j);
      vals.push_back(m(i, j));
    }
  return make_observation_set(n, p, rows, cols, vals);
}

ObservationSet random_support(int n, int count, uint64_t seed, double p = 0.5) {
  Rng rng(seed);
  std::vector<int32_t> rows, cols;
  std::vector<double> vals;
  std::vector<uint8_t> used(static_cast<std::size_t>(n) * n, 0);
  while (static_cast<int>(rows.size()) < count) {
    const int i = static_cast<int>(rng.next_u64() % n);
    const int j = static_cast<int>(rng.next_u64() % n);
    if (used[static_cast<std::size_t>(i) * n + j]) continue;
    used[static_cast<std::size_t>(i) * n + j] = 1;
    rows.push_back(i);
    cols.push_back(j);
    vals.push_back(rng.uniform(-1.0, 1.0));
  }
  return make_observation_set(n, p, rows, cols, vals);
}

}  // namespace

TEST_CASE("make_observation_set: sorts permuted input, rejects bad data") {
  std::vector<int32_t> rows = {2, 0, 1};
  std::vector<int32_t> cols = {1, 2, 0};
  std::vector<double> vals = {3.0, 1.0, 2.0};
  const ObservationSet obs = make_observation_set(3, 0.5, rows, cols, vals);
  CHECK(obs.rows == std::vector<int32_t>{0, 1, 2});
  CHECK(obs.cols == std::vector<int32_t>{2, 0, 1});
  CHECK(obs.vals == std::vector<double>{1.0, 2.0, 3.0});

  CHECK_THROWS_AS(make_observation_set(3, 0.5, {0, 0}, {1, 1}, {1.0, 2.0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(make_observation_set(3, 0.5, {3}, {0}, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(make_observation_set(3, 0.0, {0}, {0}, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(make_observation_set(3, 1.5, {0}, {0}, {1.0}), std::invalid_argument);
}

TEST_CASE("make_observation_set: sorting invariant on random permutations") {
  Rng rng(909);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 5 + static_cast<int>(rng.next_u64() % 20);
    ObservationSet base = random_support(n, n, mix_seed(42, {uint64_t(trial)}));
    std::vector<std::size_t> perm(base.count());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    for (std::size_t i = perm.size(); i > 1; --i)
      std::swap(perm[i - 1], perm[rng.next_u64() % i]);
    std::vector<int32_t> rows, cols;
    std::vector<double> vals;
    for (std::size_t i : perm) {
      rows.push_back(base.rows[i]);
      cols.push_back(base.cols[i]);
      vals.push_back(base.vals[i]);
    }
    const ObservationSet obs = make_observation_set(n, base.p, rows, cols, vals);
    CHECK(obs.rows == base.rows);
    CHECK(obs.cols == base.cols);
    CHECK(obs.vals == base.vals);
  }
}

TEST_CASE("eval_on_support: rank-1 outer product entries") {
  LowRankFactors l;
  l.u = Eigen::MatrixXd::Zero(3, 1);
  l.u(0, 0) = 1.0;
  l.v = l.u;
  l.sigma = Eigen::VectorXd::Constant(1, 2.0);
  const ObservationSet obs = make_observation_set(3, 1.0, {0, 1}, {0, 1}, {0.0, 0.0});
  const SparseValues sv = eval_on_support(l, obs);
  CHECK(sv.vals[0] == doctest::Approx(2.0));
  CHECK(sv.vals[1] == doctest::Approx(0.0));
}

TEST_CASE("eval_on_support: full support matches densified factors") {
  const int n = 5;
  const LowRankFactors l = random_factors(n, 2, 88);
  const Eigen::MatrixXd dense = l.dense();
  const ObservationSet obs = full_support(n, Eigen::MatrixXd::Zero(n, n));
  const SparseValues sv = eval_on_support(l, obs);
  for (std::size_t t = 0; t < obs.count(); ++t)
    CHECK(sv.vals[t] == doctest::Approx(dense(obs.rows[t], obs.cols[t])).epsilon(1e-12));
}

TEST_CASE("eval_on_support: empty support and dimension mismatch") {
  const LowRankFactors l = random_factors(4, 2, 3);
  ObservationSet obs;
  obs.n = 4;
  obs.p = 1.0;
  CHECK(eval_on_support(l, obs).vals.empty());

  obs.n = 5;
  CHECK_THROWS_AS(eval_on_support(l, obs), std::invalid_argument);
}

TEST_CASE("residual: exact fit and decomposition identity") {
  const int n = 5;
  const LowRankFactors l = random_factors(n, 2, 21);
  ObservationSet obs = full_support(n, l.dense());
  const SparseValues r0 = residual(obs, l);
  for (double v : r0.vals) CHECK(std::abs(v) < 1e-14);

  const ObservationSet one = make_observation_set(3, 1.0, {0}, {0}, {5.0});
  LowRankFactors lr;
  lr.u = Eigen::MatrixXd::Zero(3, 1);
  lr.u(0, 0) = 1.0;
  lr.v = lr.u;
  lr.sigma = Eigen::VectorXd::Constant(1, 2.0);
  SparseValues s;
  s.vals = {3.0};
  const SparseValues r1 = residual(one, lr, &s);
  CHECK(r1.vals[0] == doctest::Approx(0.0));
}

TEST_CASE("residual: random instance matches dense oracle") {
  const int n = 6;
  const LowRankFactors l = random_factors(n, 2, 9);
  Rng rng(9);
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = rng.uniform(-1, 1);
  const ObservationSet obs = full_support(n, m);
  SparseValues s;
  for (std::size_t t = 0; t < obs.count(); ++t) s.vals.push_back(rng.uniform(-1, 1));

  const SparseValues r = residual(obs, l, &s);
  const Eigen::MatrixXd dense = l.dense();
  for (std::size_t t = 0; t < obs.count(); ++t) {
    const double expect =
        m(obs.rows[t], obs.cols[t]) - dense(obs.rows[t], obs.cols[t]) - s.vals[t];
    CHECK(r.vals[t] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("sparse_times_dense: zero values and single triplet") {
  const ObservationSet obs = random_support(10, 30, 5);
  SparseValues zeros;
  zeros.vals.assign(obs.count(), 0.0);
  const Eigen::MatrixXd x = gaussian_matrix(10, 3, 4);
  CHECK(sparse_times_dense(obs, zeros, x).cwiseAbs().maxCoeff() == 0.0);

  const ObservationSet single = make_observation_set(4, 1.0, {2}, {1}, {0.0});
  SparseValues c;
  c.vals = {3.5};
  const Eigen::MatrixXd e1 = Eigen::MatrixXd::Identity(4, 4).col(1);
  const Eigen::MatrixXd out = sparse_times_dense(single, c, e1);
  CHECK(out(2, 0) == doctest::Approx(3.5));
  CHECK(out.cwiseAbs().sum() == doctest::Approx(3.5));
}

TEST_CASE("sparse_times_dense: matches densified product, both directions") {
  const int n = 30;
  const ObservationSet obs = random_support(n, 100, 4);
  SparseValues sv;
  Rng rng(14);
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t t = 0; t < obs.count(); ++t) {
    sv.vals.push_back(rng.uniform(-1, 1));
    g(obs.rows[t], obs.cols[t]) = sv.vals.back();
  }
  const Eigen::MatrixXd x = gaussian_matrix(n, 3, 77);
  CHECK((sparse_times_dense(obs, sv, x) - g * x).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((sparse_times_dense(obs, sv, x, true) - g.transpose() * x).cwiseAbs().maxCoeff() <=
        1e-12);
}

TEST_CASE("sparse_times_dense: adjointness property") {
  const int n = 25;
  const ObservationSet obs = random_support(n, 120, 6);
  SparseValues sv;
  Rng rng(15);
  for (std::size_t t = 0; t < obs.count(); ++t) sv.vals.push_back(rng.uniform(-1, 1));
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd x = gaussian_matrix(n, 2, 100 + trial);
    const Eigen::MatrixXd y = gaussian_matrix(n, 2, 200 + trial);
    const double lhs = (sparse_times_dense(obs, sv, x).cwiseProduct(y)).sum();
    const double rhs = (x.cwiseProduct(sparse_times_dense(obs, sv, y, true))).sum();
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
  }
}

TEST_CASE("residual of own evaluation is exactly zero") {
  const int n = 8;
  const LowRankFactors l = random_factors(n, 3, 61);
  ObservationSet obs = random_support(n, 40, 62);
  const SparseValues lv = eval_on_support(l, obs);
  for (std::size_t t = 0; t < obs.count(); ++t) obs.vals[t] = lv.vals[t];
  SparseValues s = residual(obs, l);
  const SparseValues r = residual(obs, l, &s);
  for (double v : r.vals) CHECK(v == 0.0);
}

TEST_CASE("coo text round trip is exact") {
  const ObservationSet obs = random_support(12, 50, 33, 0.347);
  std::stringstream ss;
  write_coo(ss, obs);
  const ObservationSet back = read_coo(ss);
  CHECK(back.n == obs.n);
  CHECK(back.p == obs.p);
  CHECK(back.rows == obs.rows);
  CHECK(back.cols == obs.cols);
  CHECK(back.vals == obs.vals);  // bit-exact via shortest round-trip printing
}

TEST_CASE("coo parser: errors carry line numbers") {
  {
    std::stringstream ss("# n=4 p=0.5\n0,1,2.5\nbad line\n");
    CHECK_THROWS_WITH_AS(static_cast<void>(read_coo(ss)), doctest::Contains("line 3"),
                         ParseError);
  }
  {
    std::stringstream ss("# n=4 p=0.5\n0,9,2.5\n");
    CHECK_THROWS_WITH_AS(static_cast<void>(read_coo(ss)), doctest::Contains("line 2"),
                         ParseError);
  }
  {
    std::stringstream ss("0,1,2.5\n");
    CHECK_THROWS_AS(static_cast<void>(read_coo(ss)), ParseError);
  }
}

TEST_CASE("coo parser: p defaults to the empirical ratio when absent") {
  std::stringstream ss("# n=4\n0,1,2.5\n1,2,1.0\n");
  const ObservationSet obs = read_coo(ss);
  CHECK(obs.p == doctest::Approx(2.0 / 16.0));
}

TEST_CASE("format_double round-trips") {
  Rng rng(71);
  for (int i = 0; i < 200; ++i) {
    const double x = rng.uniform(-1e6, 1e6) * std::pow(10.0, int(rng.next_u64() % 13) - 6);
    const std::string s = format_double(x);
    CHECK(std::stod(s) == x);
  }
}
