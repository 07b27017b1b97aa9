#include "svito/factor.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>

namespace svito {

Matrix sample_var_matrix(const std::vector<Matrix>& gammas) {
  if (gammas.size() < 2)
    throw std::invalid_argument("sample_var_matrix: need at least 2 matrices");
  const int p = static_cast<int>(gammas[0].rows());
  const int n = static_cast<int>(gammas.size());
  Matrix mean = Matrix::Zero(p, p);
  for (const auto& g : gammas) {
    if (g.rows() != p || g.cols() != p)
      throw std::invalid_argument("sample_var_matrix: inconsistent dimensions");
    mean += g;
  }
  mean /= n;
  Matrix s = Matrix::Zero(p, p);
  for (const auto& g : gammas) {
    Matrix c = g - mean;
    s.noalias() += c * c;
  }
  s /= static_cast<double>(n) * p;
  return ((s + s.transpose()) / 2.0).eval();
}

Matrix estimate_loading(const Matrix& s_matrix, int rank) {
  const int p = static_cast<int>(s_matrix.rows());
  if (rank < 1 || rank > p)
    throw std::invalid_argument("estimate_loading: rank out of range");
  SymEig e = sym_eig_signed(s_matrix);
  if (rank < p && e.values[rank - 1] - e.values[rank] < 1e-12)
    std::cerr << "estimate_loading: rank ambiguity, eigenvalues " << rank
              << " and " << rank + 1 << " coincide\n";
  return std::sqrt(static_cast<double>(p)) * e.vectors.leftCols(rank);
}

std::vector<Matrix> estimate_factor_vols(const Matrix& loading,
                                         const std::vector<Matrix>& gammas) {
  const double p = static_cast<double>(loading.rows());
  std::vector<Matrix> out;
  out.reserve(gammas.size());
  for (const auto& g : gammas) {
    Matrix psi = loading.transpose() * g * loading / (p * p);
    out.push_back(((psi + psi.transpose()) / 2.0).eval());
  }
  return out;
}

FactorState extract_factors(const std::vector<Matrix>& gammas, int rank) {
  FactorState st;
  st.r = rank;
  st.s_matrix = sample_var_matrix(gammas);
  st.loading = estimate_loading(st.s_matrix, rank);
  st.psi_hat = estimate_factor_vols(st.loading, gammas);
  st.eigvals = sym_eig(st.s_matrix).values.head(rank);
  return st;
}

RankSelection select_rank(const std::vector<Matrix>& gammas, int m, int r_max,
                          double c1_scale, double c2) {
  if (gammas.empty()) throw std::invalid_argument("select_rank: empty input");
  const int p = static_cast<int>(gammas[0].rows());
  if (r_max >= p) throw std::invalid_argument("select_rank: r_max must be < p");
  const double lp = std::log(static_cast<double>(p));
  const double pen_base =
      std::pow(std::sqrt(lp / std::sqrt(static_cast<double>(m))) + lp / p, c2);

  RankSelection sel;
  sel.penalized = Vector::Zero(r_max);
  for (const auto& g : gammas) {
    SymEig e = sym_eig(g);
    const double c1 = c1_scale * e.values[r_max - 1];
    for (int j = 1; j <= r_max; ++j)
      sel.penalized[j - 1] += e.values[j - 1] / p + j * c1 * pen_base;
  }
  int best = 1;
  for (int j = 2; j <= r_max; ++j)
    if (sel.penalized[j - 1] < sel.penalized[best - 1]) best = j;
  sel.argmin = best;
  sel.rank = best - 1;
  sel.flagged = sel.rank < 1;
  return sel;
}

}  // namespace svito
