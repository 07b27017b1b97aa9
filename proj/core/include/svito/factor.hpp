#pragma once

#include <vector>

#include "svito/linalg.hpp"

namespace svito {

struct FactorState {
  int r = 0;
  Matrix loading;               // p x r, loading' * loading = p I_r
  std::vector<Matrix> psi_hat;  // daily r x r factor volatility estimates
  Matrix s_matrix;              // p x p dispersion matrix of the daily inputs
  Vector eigvals;               // first r eigenvalues of s_matrix
};

/// S = (n p)^{-1} sum_k (Gamma_k - mean)^2 over daily volatility matrices.
Matrix sample_var_matrix(const std::vector<Matrix>& gammas);

/// sqrt(p) times the leading r eigenvectors of s_matrix, with the
/// deterministic sign convention from sym_eig_signed. Warns on stderr when
/// eigenvalues r and r+1 coincide within 1e-12 (rank ambiguity).
Matrix estimate_loading(const Matrix& s_matrix, int rank);

/// Psi_k = p^{-2} L^T Gamma_k L for each day, symmetrized.
std::vector<Matrix> estimate_factor_vols(const Matrix& loading,
                                         const std::vector<Matrix>& gammas);

/// Full extraction: dispersion matrix, loading, and factor volatilities.
FactorState extract_factors(const std::vector<Matrix>& gammas, int rank);

struct RankSelection {
  int rank = 0;             // selected factor count (argmin - 1)
  int argmin = 0;
  bool flagged = false;     // argmin - 1 < 1: no-factor outcome, inconclusive
  Vector penalized;         // criterion value per candidate j = 1..r_max
};

/// Penalized eigenvalue scan over candidate ranks 1..r_max; m is the
/// intraday observation count behind each daily matrix. The reported rank
/// is argmin - 1.
RankSelection select_rank(const std::vector<Matrix>& gammas, int m,
                          int r_max = 30, double c1_scale = 0.02,
                          double c2 = 0.5);

}  // namespace svito
