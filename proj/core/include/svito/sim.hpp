#pragma once

#include <cstdint>
#include <vector>

#include "svito/linalg.hpp"
#include "svito/panel.hpp"
#include "svito/svmodel.hpp"

namespace svito {

struct SimConfig {
  int p = 50;
  int r = 3;
  int q = 1;
  int n = 125;
  int m = 390;               // intraday observations per day
  int substeps_per_obs = 10; // Euler substeps between observations

  Matrix alpha0;             // r x r
  std::vector<Matrix> alpha; // q matrices, r x r
  Matrix nu;                 // r x r

  Matrix loading;            // p x r; empty -> default_loading(p, r)
  Matrix idio;               // p x p; empty -> default_idio(p)

  double noise_sd = 0.005;
  double drift = 0.0;        // per-asset drift, log-price units per day
  std::uint64_t seed = 0;
  int burnin_days = 50;

  bool poisson_thinning = false;  // non-synchronous ticks for exercising refresh-time sync
  double thinning_keep = 0.7;     // per-tick keep probability under thinning

  /// Throws std::invalid_argument on any violated invariant
  /// (dimensions, spectral norm of alpha1, loading orthogonality, stationarity).
  void validate() const;

  Matrix effective_loading() const;
  Matrix effective_idio() const;
};

struct SimOutput {
  TickPanel ticks;
  std::vector<Matrix> true_gamma;  // n matrices, p x p
  std::vector<Matrix> true_psi;    // n matrices, r x r
  Matrix true_sigma_end;           // instantaneous volatility at time n
  Matrix loading;
  Matrix idio;
  long clip_count = 0;             // PSD-floor activations during simulation
};

/// Factor loading with L^T L = p I_3: columns sqrt(2)cos(2 i pi/p),
/// sqrt(2)sin(2 i pi/p), 1 for i = 1..p. Only r = 3 is supported.
Matrix default_loading(int p, int r = 3);

/// Idiosyncratic matrix with entries 0.1 * 0.5^|i-j|.
Matrix default_idio(int p);

/// Baseline configuration: r = 3, q = 1, alpha0 = diag(0.5, 0.4, 0.3),
/// nu = 0.5 I, and a fixed stationary alpha1.
SimConfig default_sim_config();

/// Maps the instantaneous-volatility parameters to the vech-AR parameters.
/// Throws when alpha1 has spectral radius >= 1 or the implied AR is
/// non-stationary.
SVParams derive_beta(const Matrix& alpha0, const std::vector<Matrix>& alpha,
                     const Matrix& nu);

SimOutput simulate(const SimConfig& config);

/// Factor-volatility-only fast path: the exact daily Psi_k series without
/// asset prices. Used by long-horizon parameter-recovery runs.
std::vector<Matrix> simulate_psi_series(const SimConfig& config, int n_days,
                                        int substeps_per_day);

/// E(Gamma_{n+1} | F_n) from the true loading, Psi history, and idio matrix.
Matrix conditional_oracle(const SimOutput& sim, const SVParams& theta);

}  // namespace svito
