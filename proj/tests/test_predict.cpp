#include <cmath>
#include <random>

#include <doctest.h>

#include "svito/predict.hpp"
#include "svito/sim.hpp"

using namespace svito;

TEST_SUITE_BEGIN("predict");

namespace {

Matrix random_psd(int p, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Matrix a(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) a(i, j) = nd(rng);
  return (a * a.transpose() / p).eval();
}

int support_size(const Matrix& m) {
  int count = 0;
  for (int j = 0; j < m.cols(); ++j)
    for (int i = j + 1; i < m.rows(); ++i)
      if (m(i, j) != 0.0) ++count;
  return count;
}

}  // namespace

TEST_CASE("default_threshold closed forms") {
  CHECK(default_threshold(100, 125, 390) ==
        doctest::Approx(std::sqrt(2.0 * std::log(100.0) /
                                  (125.0 * std::sqrt(390.0) + 390.0))));
  CHECK(default_threshold(50, 0, 390) ==
        doctest::Approx(std::sqrt(2.0 * std::log(50.0) / std::sqrt(390.0))));
}

TEST_CASE("a huge threshold leaves only the diagonal") {
  std::mt19937_64 rng(1);
  Matrix g = random_psd(8, rng);
  PoetConfig c;
  c.rank = 0;
  c.threshold_omega = 1e6;
  Matrix out = poet_idio(g, c);
  CHECK(support_size(out) == 0);
  for (int i = 0; i < 8; ++i) CHECK(out(i, i) == doctest::Approx(g(i, i)));
}

TEST_CASE("a zero threshold keeps everything") {
  std::mt19937_64 rng(2);
  Matrix g = random_psd(6, rng);
  PoetConfig c;
  c.rank = 0;
  c.threshold_omega = 0.0;
  Matrix out = poet_idio(g, c);
  CHECK((out - g).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("support shrinks monotonically in the threshold level") {
  std::mt19937_64 rng(3);
  Matrix g = random_psd(15, rng);
  PoetConfig c;
  c.rank = 0;
  int prev = 15 * 14 / 2 + 1;
  for (double omega : {0.0, 0.1, 0.3, 0.6, 1.0, 2.0}) {
    c.threshold_omega = omega;
    const int cur = support_size(poet_idio(g, c));
    CHECK(cur <= prev);
    prev = cur;
  }
}

TEST_CASE("singleton sectors reduce to a diagonal estimate") {
  std::mt19937_64 rng(4);
  Matrix g = random_psd(7, rng);
  PoetConfig c;
  c.rank = 1;
  c.mode = ThresholdMode::Sector;
  c.sector_map = {0, 1, 2, 3, 4, 5, 6};
  Matrix out = poet_idio(g, c);
  CHECK(support_size(out) == 0);
}

TEST_CASE("sector blocks are kept exactly") {
  std::mt19937_64 rng(5);
  Matrix g = random_psd(6, rng);
  PoetConfig c;
  c.rank = 0;
  c.mode = ThresholdMode::Sector;
  c.sector_map = {0, 0, 0, 1, 1, 1};
  Matrix out = poet_idio(g, c);
  CHECK(out(1, 0) == doctest::Approx(g(1, 0)));
  CHECK(out(5, 4) == doctest::Approx(g(5, 4)));
  CHECK(out(3, 0) == 0.0);
  CHECK(out(5, 2) == 0.0);
}

TEST_CASE("rank-r subtraction removes an exact factor component") {
  const int p = 30;
  Matrix l = default_loading(p);
  Matrix psi = Eigen::Vector3d(2.0, 1.0, 0.5).asDiagonal();
  Matrix idio = default_idio(p);
  Matrix gamma = l * psi * l.transpose() + idio;
  PoetConfig c;
  c.rank = 3;
  c.threshold_omega = 0.0;
  Matrix out = poet_idio(gamma, c);
  // the residual after removing three principal components is close to the
  // true idiosyncratic part, up to the finite-p leakage of the factors
  CHECK((out - idio).cwiseAbs().maxCoeff() < 0.05);
  Matrix full = poet_estimate(gamma, c);
  CHECK((full - gamma).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("sv_poet decomposition is exact and rank-limited") {
  std::mt19937_64 rng(6);
  const int p = 16;
  FactorState st;
  st.r = 3;
  st.loading = default_loading(p);
  st.psi_hat = {random_psd(3, rng), random_psd(3, rng)};
  SVParams theta;
  theta.r = 3;
  theta.q = 1;
  theta.beta0 = 0.1 * Vector::Ones(6);
  theta.betas = {0.5 * Matrix::Identity(6, 6)};
  Matrix idio = default_idio(p);
  PredictedVol pred = sv_poet(st, theta, idio, 9);
  CHECK(pred.day == 9);
  CHECK((pred.total - pred.factor_part - pred.idio_part).cwiseAbs().maxCoeff() <
        1e-14);
  Eigen::JacobiSVD<Matrix> svd(pred.factor_part);
  CHECK(svd.singularValues()[3] < 1e-10 * svd.singularValues()[0]);
  CHECK(pred.psd);
  CHECK(pred.min_eig > 0.0);
}

TEST_CASE("martingale coefficients reproduce yesterday's factor part") {
  std::mt19937_64 rng(7);
  const int p = 12;
  FactorState st;
  st.r = 3;
  st.loading = default_loading(p);
  st.psi_hat = {random_psd(3, rng), random_psd(3, rng), random_psd(3, rng)};
  SVParams theta;
  theta.r = 3;
  theta.q = 1;
  theta.beta0 = Vector::Zero(6);
  theta.betas = {Matrix::Identity(6, 6)};
  PredictedVol pred = sv_poet(st, theta, Matrix::Zero(p, p));
  Matrix expect = st.loading * st.psi_hat.back() * st.loading.transpose();
  CHECK((pred.total - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("sv_poet requires enough factor history") {
  FactorState st;
  st.r = 3;
  st.loading = default_loading(10);
  st.psi_hat = {Matrix::Identity(3, 3)};
  SVParams theta;
  theta.r = 3;
  theta.q = 2;
  theta.beta0 = Vector::Zero(6);
  theta.betas = {0.3 * Matrix::Identity(6, 6), 0.2 * Matrix::Identity(6, 6)};
  CHECK_THROWS(sv_poet(st, theta, Matrix::Zero(10, 10)));
}

TEST_CASE("matrix_errors closed form for 2I versus I") {
  const int p = 4;
  Matrix est = 2.0 * Matrix::Identity(p, p);
  Matrix tgt = Matrix::Identity(p, p);
  MatrixErrors e = matrix_errors(est, tgt);
  CHECK(e.spectral == doctest::Approx(1.0));
  CHECK(e.frobenius == doctest::Approx(2.0));
  CHECK(e.max_abs == doctest::Approx(1.0));
  CHECK(e.rel_spectral == doctest::Approx(1.0));
  CHECK(e.rel_frobenius == doctest::Approx(1.0));
  CHECK(e.rel_max == doctest::Approx(1.0));
  REQUIRE(e.weighted_valid);
  CHECK(e.weighted == doctest::Approx(1.0));
}

TEST_CASE("matrix_errors flags a singular target for the weighted norm") {
  Matrix est = Matrix::Identity(3, 3);
  Matrix tgt = Matrix::Zero(3, 3);
  MatrixErrors e = matrix_errors(est, tgt);
  CHECK_FALSE(e.weighted_valid);
  CHECK(e.rel_spectral == 0.0);
}

TEST_CASE("plug-in prediction with true inputs equals the oracle") {
  SimConfig c = default_sim_config();
  c.p = 15;
  c.n = 5;
  c.m = 30;
  c.substeps_per_obs = 2;
  c.burnin_days = 2;
  c.seed = 17;
  SimOutput out = simulate(c);
  SVParams theta = derive_beta(c.alpha0, c.alpha, c.nu);
  FactorState st;
  st.r = 3;
  st.loading = out.loading;
  st.psi_hat = out.true_psi;
  PredictedVol pred = sv_poet(st, theta, out.idio);
  CHECK((pred.total - conditional_oracle(out, theta)).cwiseAbs().maxCoeff() <
        1e-12);
}

TEST_SUITE_END();
