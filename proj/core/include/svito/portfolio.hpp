#pragma once

#include "svito/linalg.hpp"

namespace svito {

struct PortfolioProblem {
  Matrix sigma;        // p x p, daily variance units; clipped to PSD internally
  double c0 = 1.5;     // gross exposure bound, >= 1
  double ridge = -1.0; // < 0: default 1e-8 * trace / p
  int max_iter = 50000;
  double kkt_tol = 1e-9;
};

struct PortfolioResult {
  Vector weights;
  double objective = 0.0;       // w' Sigma w after ridge
  double gross_exposure = 0.0;
  bool feasible = false;
  bool constraint_active = false;
  int iterations = 0;
  double kkt_residual = 0.0;
};

/// Minimum-variance weights under full investment (weights sum to 1) and
/// ||w||_1 <= c0, via projected gradient on the positive/negative split with
/// exact line search. Returns the unconstrained solution directly when it
/// already satisfies the bound.
PortfolioResult min_variance(const PortfolioProblem& problem);

/// Annualized out-of-sample risk sqrt(252 w' realized w).
double oos_risk(const Vector& weights, const Matrix& realized);

}  // namespace svito
