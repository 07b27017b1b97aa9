#include "svito/linalg.hpp"

#include <cmath>
#include <stdexcept>

namespace svito {

int vech_rank(int d0) {
  int r = static_cast<int>(std::floor((std::sqrt(8.0 * d0 + 1.0) - 1.0) / 2.0));
  for (int cand = r - 1; cand <= r + 1; ++cand)
    if (cand >= 1 && vech_dim(cand) == d0) return cand;
  throw std::invalid_argument("vech_rank: length " + std::to_string(d0) +
                              " is not r(r+1)/2 for any integer r");
}

Vector vech(const Matrix& m, double sym_tol) {
  if (m.rows() != m.cols()) throw std::invalid_argument("vech: non-square input");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > sym_tol * scale)
    throw std::invalid_argument("vech: input not symmetric (relative asymmetry " +
                                std::to_string(asym / scale) + ")");
  const int r = static_cast<int>(m.rows());
  Vector v(vech_dim(r));
  int idx = 0;
  for (int c = 0; c < r; ++c)
    for (int a = c; a < r; ++a) v[idx++] = m(a, c);
  return v;
}

Matrix unvech(const Vector& v) {
  const int r = vech_rank(static_cast<int>(v.size()));
  Matrix m(r, r);
  int idx = 0;
  for (int c = 0; c < r; ++c)
    for (int a = c; a < r; ++a) {
      m(a, c) = v[idx];
      m(c, a) = v[idx];
      ++idx;
    }
  return m;
}

Matrix phi_series(const Matrix& a, int k, double rel_tol) {
  if (a.rows() != a.cols()) throw std::invalid_argument("phi_series: non-square input");
  const int n = static_cast<int>(a.rows());
  double fact = 1.0;
  for (int j = 2; j <= k; ++j) fact *= j;
  Matrix term = Matrix::Identity(n, n) / fact;  // A^0 / k!
  Matrix sum = term;
  for (int j = 1; j < 1000; ++j) {
    term = (a * term) / static_cast<double>(j + k);
    sum += term;
    if (term.norm() <= rel_tol * (sum.norm() + 1.0)) return sum;
  }
  throw std::runtime_error("phi_series: no convergence after 1000 terms");
}

SymEig sym_eig(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()));
  if (es.info() != Eigen::Success) throw std::runtime_error("sym_eig: solver failed");
  const int n = static_cast<int>(m.rows());
  SymEig out;
  out.values = es.eigenvalues().reverse();
  out.vectors = es.eigenvectors().rowwise().reverse();
  (void)n;
  return out;
}

SymEig sym_eig_signed(const Matrix& m) {
  SymEig e = sym_eig(m);
  const int n = static_cast<int>(e.values.size());
  for (int j = 0; j < n; ++j) {
    int imax = 0;
    e.vectors.col(j).cwiseAbs().maxCoeff(&imax);
    if (e.vectors(imax, j) < 0) e.vectors.col(j) *= -1.0;
  }
  // stable order within numerically tied eigenvalues
  for (int j = 0; j + 1 < n; ++j) {
    for (int l = j + 1; l < n && std::abs(e.values[j] - e.values[l]) <= 1e-12; ++l) {
      // lexicographic: first differing entry decides
      for (int i = 0; i < static_cast<int>(e.vectors.rows()); ++i) {
        const double d = e.vectors(i, j) - e.vectors(i, l);
        if (std::abs(d) > 1e-12) {
          if (d < 0) {
            e.vectors.col(j).swap(e.vectors.col(l));
            std::swap(e.values[j], e.values[l]);
          }
          break;
        }
      }
    }
  }
  return e;
}

Matrix psd_clip(const Matrix& m) {
  long dummy = 0;
  return psd_clip(m, dummy);
}

Matrix psd_clip(const Matrix& m, long& clip_count) {
  SymEig e = sym_eig(m);
  bool clipped = false;
  for (int i = 0; i < e.values.size(); ++i)
    if (e.values[i] < 0) {
      e.values[i] = 0;
      clipped = true;
    }
  if (clipped) ++clip_count;
  Matrix out = e.vectors * e.values.asDiagonal() * e.vectors.transpose();
  return 0.5 * (out + out.transpose());
}

Matrix sqrt_psd(const Matrix& m) {
  SymEig e = sym_eig(m);
  Vector s = e.values.cwiseMax(0.0).cwiseSqrt();
  return e.vectors * s.asDiagonal() * e.vectors.transpose();
}

Matrix inv_sqrt_pd(const Matrix& m) {
  SymEig e = sym_eig(m);
  if (e.values.minCoeff() <= 0)
    throw std::invalid_argument("inv_sqrt_pd: input not positive definite");
  Vector s = e.values.cwiseSqrt().cwiseInverse();
  return e.vectors * s.asDiagonal() * e.vectors.transpose();
}

double min_eigenvalue(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()),
                                           Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double spectral_norm(const Matrix& m) {
  if (m.rows() == 0 || m.cols() == 0) return 0.0;
  if (m.cols() == 1 || m.rows() == 1) return m.norm();
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()[0];
}

}  // namespace svito
