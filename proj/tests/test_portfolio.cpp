#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <doctest.h>

#include "svito/portfolio.hpp"

using namespace svito;

TEST_SUITE_BEGIN("portfolio");

namespace {

Matrix random_cov(int p, std::mt19937_64& rng, double diag_boost = 0.2) {
  std::normal_distribution<double> nd;
  Matrix a(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) a(i, j) = nd(rng);
  return (a * a.transpose() / p + diag_boost * Matrix::Identity(p, p)).eval();
}

// Projection onto the simplex {w >= 0, sum w = 1} by sorting.
Vector simplex_project(const Vector& y) {
  const int p = static_cast<int>(y.size());
  std::vector<double> u(y.data(), y.data() + p);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double css = 0.0, tau = 0.0;
  for (int k = 0; k < p; ++k) {
    css += u[k];
    const double t = (css - 1.0) / (k + 1);
    if (u[k] - t > 0.0) tau = t;
  }
  return (y.array() - tau).max(0.0).matrix();
}

// Reference long-only minimum variance by plain projected gradient.
double simplex_min_variance(const Matrix& sigma, int iters = 200000) {
  const int p = static_cast<int>(sigma.rows());
  Vector w = Vector::Constant(p, 1.0 / p);
  const double step = 0.5 / spectral_norm(sigma);
  for (int it = 0; it < iters; ++it)
    w = simplex_project(w - step * (2.0 * (sigma * w)));
  return w.dot(sigma * w);
}

// Brute-force oracle: enumerate sign patterns, solve each pattern's
// equality-constrained problem, keep the best candidate whose signs and
// feasibility match the pattern.
double enumerate_min_variance(const Matrix& sigma, double c0) {
  const int p = static_cast<int>(sigma.rows());
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> s(p, 0);
  const int total = static_cast<int>(std::pow(3.0, p));
  for (int code = 0; code < total; ++code) {
    int c = code;
    int nnz = 0;
    for (int i = 0; i < p; ++i) {
      s[i] = c % 3 - 1;  // -1, 0, +1
      c /= 3;
      if (s[i] != 0) ++nnz;
    }
    if (nnz == 0) continue;
    std::vector<int> sup;
    for (int i = 0; i < p; ++i)
      if (s[i] != 0) sup.push_back(i);
    Matrix sf(nnz, nnz);
    for (int a = 0; a < nnz; ++a)
      for (int b = 0; b < nnz; ++b) sf(a, b) = sigma(sup[a], sup[b]);
    for (int ncon : {1, 2}) {
      Matrix kkt = Matrix::Zero(nnz + ncon, nnz + ncon);
      kkt.topLeftCorner(nnz, nnz) = 2.0 * sf;
      Vector rhs = Vector::Zero(nnz + ncon);
      for (int a = 0; a < nnz; ++a) kkt(nnz, a) = kkt(a, nnz) = 1.0;
      rhs[nnz] = 1.0;
      if (ncon == 2) {
        for (int a = 0; a < nnz; ++a)
          kkt(nnz + 1, a) = kkt(a, nnz + 1) = s[sup[a]];
        rhs[nnz + 1] = c0;
      }
      Eigen::FullPivLU<Matrix> lu(kkt);
      if (!lu.isInvertible()) continue;
      Vector sol = lu.solve(rhs);
      Vector w = Vector::Zero(p);
      bool ok = true;
      double l1 = 0.0;
      for (int a = 0; a < nnz; ++a) {
        w[sup[a]] = sol[a];
        if (sol[a] * s[sup[a]] < -1e-10) ok = false;
        l1 += std::abs(sol[a]);
      }
      if (!ok || l1 > c0 + 1e-8) continue;
      best = std::min(best, static_cast<double>(w.dot(sigma * w)));
    }
  }
  return best;
}

}  // namespace

TEST_CASE("identity covariance gives equal weights") {
  PortfolioProblem prob;
  prob.sigma = Matrix::Identity(10, 10);
  prob.c0 = 1.5;
  PortfolioResult res = min_variance(prob);
  CHECK(res.feasible);
  CHECK((res.weights - Vector::Constant(10, 0.1)).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(res.objective == doctest::Approx(0.1).epsilon(1e-6));
  CHECK(res.gross_exposure == doctest::Approx(1.0));
  CHECK_FALSE(res.constraint_active);
}

TEST_CASE("diagonal covariance matches the analytic solution") {
  Vector d(4);
  d << 0.01, 0.02, 0.04, 0.08;
  PortfolioProblem prob;
  prob.sigma = d.asDiagonal();
  prob.c0 = 3.0;
  prob.ridge = 0.0;
  PortfolioResult res = min_variance(prob);
  Vector inv = d.cwiseInverse();
  Vector expect = inv / inv.sum();
  CHECK((res.weights - expect).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(res.objective == doctest::Approx(1.0 / inv.sum()));
}

TEST_CASE("no-short-sale bound agrees with an independent simplex solver") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 5; ++trial) {
    PortfolioProblem prob;
    prob.sigma = random_cov(12, rng);
    prob.c0 = 1.0;
    prob.ridge = 0.0;
    PortfolioResult res = min_variance(prob);
    const double ref = simplex_min_variance(prob.sigma);
    CHECK(res.objective == doctest::Approx(ref).epsilon(1e-6));
    CHECK(res.weights.minCoeff() > -1e-9);
    CHECK(res.gross_exposure == doctest::Approx(1.0).epsilon(1e-8));
  }
}

TEST_CASE("six-asset problems match the enumeration oracle") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 8; ++trial) {
    Matrix sigma = random_cov(6, rng, 0.05);
    for (double c0 : {1.2, 1.6, 2.5}) {
      PortfolioProblem prob;
      prob.sigma = sigma;
      prob.c0 = c0;
      prob.ridge = 0.0;
      PortfolioResult res = min_variance(prob);
      const double oracle = enumerate_min_variance(sigma, c0);
      CHECK(res.objective == doctest::Approx(oracle).epsilon(1e-6));
      CHECK(res.weights.sum() == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(res.gross_exposure < c0 + 1e-8);
    }
  }
}

TEST_CASE("objective is non-increasing in the exposure bound") {
  std::mt19937_64 rng(23);
  Matrix sigma = random_cov(15, rng, 0.02);
  double prev = std::numeric_limits<double>::infinity();
  for (double c0 : {1.0, 1.2, 1.5, 2.0, 3.0, 6.0}) {
    PortfolioProblem prob;
    prob.sigma = sigma;
    prob.c0 = c0;
    prob.ridge = 0.0;
    PortfolioResult res = min_variance(prob);
    CHECK(res.objective <= prev + 1e-10);
    prev = res.objective;
  }
}

TEST_CASE("solution is permutation equivariant") {
  std::mt19937_64 rng(41);
  const int p = 9;
  Matrix sigma = random_cov(p, rng, 0.05);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(p);
  perm.setIdentity();
  std::vector<int> order(p);
  for (int i = 0; i < p; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  for (int i = 0; i < p; ++i) perm.indices()[i] = order[i];
  PortfolioProblem a;
  a.sigma = sigma;
  a.c0 = 1.3;
  a.ridge = 0.0;
  PortfolioProblem b = a;
  b.sigma = perm.transpose() * sigma * perm;
  PortfolioResult ra = min_variance(a);
  PortfolioResult rb = min_variance(b);
  Vector back = perm * rb.weights;
  CHECK((back - ra.weights).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("reported KKT residual is small") {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 4; ++trial) {
    PortfolioProblem prob;
    prob.sigma = random_cov(25, rng, 0.02);
    prob.c0 = trial % 2 == 0 ? 1.0 : 1.4;
    PortfolioResult res = min_variance(prob);
    CHECK(res.feasible);
    CHECK(res.kkt_residual <= 1e-8);
  }
}

TEST_CASE("oos_risk closed forms") {
  Vector e1 = Vector::Zero(3);
  e1[0] = 1.0;
  Matrix d = Eigen::Vector3d(0.04, 1.0, 1.0).asDiagonal();
  CHECK(oos_risk(e1, d) == doctest::Approx(std::sqrt(252.0 * 0.04)));
  const int p = 8;
  Vector eq = Vector::Constant(p, 1.0 / p);
  Matrix r = Matrix::Identity(p, p) / 252.0;
  CHECK(oos_risk(eq, r) == doctest::Approx(std::sqrt(1.0 / p)));
}

TEST_SUITE_END();
