#pragma once

#include <vector>

#include "svito/factor.hpp"
#include "svito/linalg.hpp"
#include "svito/svmodel.hpp"

namespace svito {

enum class ThresholdMode { Adaptive, Sector };

struct PoetConfig {
  int rank = 3;
  double threshold_omega = -1.0;  // < 0: default_threshold(p, n, m)
  int n = 0;                      // daily matrices behind the input (0: single day)
  int m = 390;                    // intraday observations per day
  ThresholdMode mode = ThresholdMode::Adaptive;
  std::vector<int> sector_map;    // asset -> sector id, Sector mode only
};

/// sqrt(2 log p / (n sqrt(m) + m)); with n = 0 the single-matrix level
/// sqrt(2 log p / sqrt(m)).
double default_threshold(int p, int n, int m);

/// Idiosyncratic estimate: subtract the top-rank spectral component, then
/// hard-threshold off-diagonals (adaptive entrywise or sector blocks) and
/// floor diagonals at zero.
Matrix poet_idio(const Matrix& gamma_bar, const PoetConfig& config);

/// Single-matrix POET baseline: rank-k spectral part plus thresholded rest.
Matrix poet_estimate(const Matrix& gamma, const PoetConfig& config);

struct PredictedVol {
  Matrix factor_part;  // loading * H * loading'
  Matrix idio_part;
  Matrix total;        // exact sum of the two parts
  int day = 0;
  double min_eig = 0.0;
  bool psd = false;
};

/// One-day-ahead vast volatility matrix: L H(theta) L' from the most recent
/// q factor volatilities plus the supplied idiosyncratic matrix. No PSD
/// repair; min_eig and the psd flag report the spectrum.
PredictedVol sv_poet(const FactorState& state, const SVParams& theta,
                     const Matrix& idio, int day = 0);

struct MatrixErrors {
  double spectral = 0.0;
  double frobenius = 0.0;
  double max_abs = 0.0;
  double rel_spectral = 0.0;   // scaled by the same norm of the target
  double rel_frobenius = 0.0;
  double rel_max = 0.0;
  double weighted = 0.0;       // p^{-1/2} ||T^{-1/2} (A - T) T^{-1/2}||_F
  bool weighted_valid = false; // false when the target is not PD
};

MatrixErrors matrix_errors(const Matrix& estimate, const Matrix& target);

}  // namespace svito
