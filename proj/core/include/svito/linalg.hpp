#pragma once

#include <Eigen/Dense>

namespace svito {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline int vech_dim(int r) { return r * (r + 1) / 2; }

// Inverse of vech_dim; throws if d0 is not a triangular number.
int vech_rank(int d0);

/// Column-major lower-triangle stacking of a symmetric matrix.
/// Rejects inputs whose asymmetry exceeds sym_tol (relative to max entry).
Vector vech(const Matrix& m, double sym_tol = 1e-8);

Matrix unvech(const Vector& v);

/// phi_k(A) = sum_{j>=0} A^j / (j+k)!, evaluated by a truncated power
/// series so that singular A is handled (phi1(0)=I, phi2(0)=I/2, ...).
Matrix phi_series(const Matrix& a, int k, double rel_tol = 1e-14);

struct SymEig {
  Vector values;   // descending
  Matrix vectors;  // columns match values
};

SymEig sym_eig(const Matrix& m);

// Deterministic variant: each eigenvector's largest-magnitude entry is made
// positive, and near-equal eigenvalues (within 1e-12) are ordered by the
// first differing entry of the sign-normalized vectors.
SymEig sym_eig_signed(const Matrix& m);

/// Symmetrize and clip negative eigenvalues at zero.
Matrix psd_clip(const Matrix& m);
Matrix psd_clip(const Matrix& m, long& clip_count);

Matrix sqrt_psd(const Matrix& m);
Matrix inv_sqrt_pd(const Matrix& m);  // throws on non-PD input

double min_eigenvalue(const Matrix& m);

/// Largest singular value; equals max |eigenvalue| for symmetric input.
double spectral_norm(const Matrix& m);

}  // namespace svito
