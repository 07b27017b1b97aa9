#include "svito/predict.hpp"

#include <cmath>
#include <stdexcept>

namespace svito {

double default_threshold(int p, int n, int m) {
  const double lp = std::log(static_cast<double>(p));
  const double denom = n > 0 ? n * std::sqrt(static_cast<double>(m)) + m
                             : std::sqrt(static_cast<double>(m));
  return std::sqrt(2.0 * lp / denom);
}

namespace {

Matrix threshold_residual(const Matrix& resid, const PoetConfig& config,
                          double omega) {
  const int p = static_cast<int>(resid.rows());
  Matrix out = Matrix::Zero(p, p);
  for (int i = 0; i < p; ++i) out(i, i) = std::max(resid(i, i), 0.0);

  if (config.mode == ThresholdMode::Sector) {
    if (static_cast<int>(config.sector_map.size()) != p)
      throw std::invalid_argument("poet: sector_map size mismatch");
    for (int j = 0; j < p; ++j)
      for (int i = j + 1; i < p; ++i)
        if (config.sector_map[i] == config.sector_map[j]) {
          const double v = (resid(i, j) + resid(j, i)) / 2.0;
          out(i, j) = v;
          out(j, i) = v;
        }
    return out;
  }

  for (int j = 0; j < p; ++j)
    for (int i = j + 1; i < p; ++i) {
      const double cut = omega * std::sqrt(std::max(resid(i, i), 0.0) *
                                           std::max(resid(j, j), 0.0));
      const double v = (resid(i, j) + resid(j, i)) / 2.0;
      if (std::abs(v) >= cut && v != 0.0) {
        out(i, j) = v;
        out(j, i) = v;
      }
    }
  return out;
}

double resolve_omega(const PoetConfig& config, int p) {
  return config.threshold_omega >= 0.0
             ? config.threshold_omega
             : default_threshold(p, config.n, config.m);
}

}  // namespace

Matrix poet_idio(const Matrix& gamma_bar, const PoetConfig& config) {
  const int p = static_cast<int>(gamma_bar.rows());
  if (config.rank < 0 || config.rank >= p)
    throw std::invalid_argument("poet_idio: rank out of range");
  SymEig e = sym_eig(gamma_bar);
  Matrix resid = gamma_bar;
  for (int j = 0; j < config.rank; ++j)
    resid.noalias() -=
        e.values[j] * e.vectors.col(j) * e.vectors.col(j).transpose();
  resid = ((resid + resid.transpose()) / 2.0).eval();
  return threshold_residual(resid, config, resolve_omega(config, p));
}

Matrix poet_estimate(const Matrix& gamma, const PoetConfig& config) {
  SymEig e = sym_eig(gamma);
  Matrix low = Matrix::Zero(gamma.rows(), gamma.cols());
  for (int j = 0; j < config.rank; ++j)
    low.noalias() +=
        e.values[j] * e.vectors.col(j) * e.vectors.col(j).transpose();
  low = ((low + low.transpose()) / 2.0).eval();
  return low + poet_idio(gamma, config);
}

PredictedVol sv_poet(const FactorState& state, const SVParams& theta,
                     const Matrix& idio, int day) {
  if (static_cast<int>(state.psi_hat.size()) < theta.q)
    throw std::invalid_argument("sv_poet: factor history shorter than q");

  std::vector<Matrix> hist;  // most-recent-first
  for (int j = 0; j < theta.q; ++j)
    hist.push_back(state.psi_hat[state.psi_hat.size() - 1 - j]);

  PredictedVol out;
  out.day = day;
  Matrix h = build_H(theta, hist);
  Matrix fp = state.loading * h * state.loading.transpose();
  out.factor_part = ((fp + fp.transpose()) / 2.0).eval();
  out.idio_part = idio;
  out.total = out.factor_part + out.idio_part;
  out.min_eig = min_eigenvalue(out.total);
  out.psd = out.min_eig >= -1e-10 * std::abs(out.total.trace());
  return out;
}

MatrixErrors matrix_errors(const Matrix& estimate, const Matrix& target) {
  Matrix diff = estimate - target;
  MatrixErrors e;
  e.spectral = spectral_norm(diff);
  e.frobenius = diff.norm();
  e.max_abs = diff.cwiseAbs().maxCoeff();
  const double ts = spectral_norm(target);
  const double tf = target.norm();
  const double tm = target.cwiseAbs().maxCoeff();
  e.rel_spectral = ts > 0.0 ? e.spectral / ts : 0.0;
  e.rel_frobenius = tf > 0.0 ? e.frobenius / tf : 0.0;
  e.rel_max = tm > 0.0 ? e.max_abs / tm : 0.0;
  try {
    Matrix wi = inv_sqrt_pd(target);
    e.weighted =
        (wi * diff * wi).norm() / std::sqrt(static_cast<double>(diff.rows()));
    e.weighted_valid = true;
  } catch (const std::exception&) {
    e.weighted_valid = false;
  }
  return e;
}

}  // namespace svito
