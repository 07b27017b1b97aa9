#pragma once

#include <span>
#include <vector>

#include "svito/linalg.hpp"

namespace svito {

/// Parameters of the vech-AR dynamics for the daily factor volatility:
/// vech(Psi_k) = beta0 + sum_j betas[j-1] * vech(Psi_{k-j}) + e_k.
struct SVParams {
  int r = 0;
  int q = 0;
  Vector beta0;                // length r(r+1)/2
  std::vector<Matrix> betas;   // q matrices, each d0 x d0

  int d0() const { return vech_dim(r); }
  int dim() const { return d0() + q * d0() * d0(); }

  /// Largest eigenvalue modulus of the VAR companion matrix.
  double companion_spectral_radius() const;
  bool stationary() const { return companion_spectral_radius() < 1.0; }

  /// theta = (beta0^T, vec(beta1)^T, ..., vec(betaq)^T)^T, vec column-major.
  Vector to_flat() const;
  static SVParams from_flat(const Vector& theta, int r, int q);

  /// Long-run mean unvech((I - sum betas)^-1 beta0); requires stationarity.
  Matrix stationary_mean() const;
};

struct FitReport {
  SVParams theta;
  double objective = 0.0;  // final quasi-likelihood (QMLE) or mean square loss (LSE)
  int iterations = 0;
  bool converged = false;
  int pd_repairs = 0;      // H_k eigenvalue-floor activations at the final theta
  std::vector<Vector> residuals;       // vech-space residuals, k = q+1..n
  std::vector<double> objective_path;  // accepted-step objectives (QMLE)
  double grad_norm = 0.0;
};

/// Conditional mean matrix: unvech(beta0 + sum_j betas[j-1] vech(history[j-1])).
/// History is ordered most-recent-first and must hold at least q matrices.
Matrix build_H(const SVParams& theta, std::span<const Matrix> psi_history);

/// Closed-form OLS fit of the vech-AR recursion on psi_series.
FitReport lse_fit(const std::vector<Matrix>& psi_series, int q);

struct QmleOptions {
  double floor = -1.0;       // <0: default 1e-8 * mean trace of the series
  int max_iter = 500;
  double grad_tol = 1e-7;
  double fd_step = 1e-6;     // central-difference step scale
};

/// Quasi-likelihood fit, quasi-Newton with numerically differentiated
/// gradients, initialized at `init` (conventionally the LSE).
FitReport qmle_fit(const std::vector<Matrix>& psi_series, int q,
                   const SVParams& init, const QmleOptions& opts = {});

/// Negative quasi-likelihood (the minimized objective), exposed for tests.
double qmle_objective(const std::vector<Matrix>& psi_series, int q,
                      const SVParams& theta, double floor, int* pd_repairs = nullptr);

struct OrderSelection {
  int q_aic = 0;
  int q_bic = 0;
  std::vector<double> aic;  // index j -> q = j+1
  std::vector<double> bic;
};

/// AIC/BIC scan over the AR order on LSE residuals, q = 1..q_max.
OrderSelection select_order(const std::vector<Matrix>& psi_series, int q_max = 3);

}  // namespace svito
