#include "svito/svmodel.hpp"

#include <cmath>
#include <stdexcept>

namespace svito {

double SVParams::companion_spectral_radius() const {
  const int n0 = d0();
  Matrix comp = Matrix::Zero(q * n0, q * n0);
  for (int j = 0; j < q; ++j) comp.block(0, j * n0, n0, n0) = betas[j];
  if (q > 1)
    comp.block(n0, 0, (q - 1) * n0, (q - 1) * n0) =
        Matrix::Identity((q - 1) * n0, (q - 1) * n0);
  return comp.eigenvalues().cwiseAbs().maxCoeff();
}

Vector SVParams::to_flat() const {
  const int n0 = d0();
  Vector theta(dim());
  theta.head(n0) = beta0;
  for (int j = 0; j < q; ++j)
    theta.segment(n0 + j * n0 * n0, n0 * n0) =
        Eigen::Map<const Vector>(betas[j].data(), n0 * n0);
  return theta;
}

SVParams SVParams::from_flat(const Vector& theta, int r, int q) {
  SVParams p;
  p.r = r;
  p.q = q;
  const int n0 = p.d0();
  if (theta.size() != p.dim())
    throw std::invalid_argument("SVParams::from_flat: wrong length");
  p.beta0 = theta.head(n0);
  p.betas.resize(q);
  for (int j = 0; j < q; ++j)
    p.betas[j] = Eigen::Map<const Matrix>(theta.data() + n0 + j * n0 * n0, n0, n0);
  return p;
}

Matrix SVParams::stationary_mean() const {
  const int n0 = d0();
  Matrix s = Matrix::Identity(n0, n0);
  for (const auto& b : betas) s -= b;
  return unvech(s.fullPivLu().solve(beta0));
}

Matrix build_H(const SVParams& theta, std::span<const Matrix> psi_history) {
  if (static_cast<int>(psi_history.size()) < theta.q)
    throw std::invalid_argument("build_H: history shorter than AR order");
  Vector v = theta.beta0;
  for (int j = 0; j < theta.q; ++j)
    v += theta.betas[j] * vech(psi_history[j]);
  return unvech(v);
}

FitReport lse_fit(const std::vector<Matrix>& psi_series, int q) {
  const int n = static_cast<int>(psi_series.size());
  if (n == 0) throw std::invalid_argument("lse_fit: empty series");
  const int r = static_cast<int>(psi_series[0].rows());
  const int d0 = vech_dim(r);
  if (n < q + d0 + 1)
    throw std::invalid_argument("lse_fit: series too short for identifiability");

  std::vector<Vector> vechs(n);
  for (int k = 0; k < n; ++k) vechs[k] = vech(psi_series[k]);

  const int rows = n - q;
  const int cols = 1 + q * d0;
  Matrix design(rows, cols);
  Matrix response(rows, d0);
  for (int k = q; k < n; ++k) {
    design(k - q, 0) = 1.0;
    for (int j = 1; j <= q; ++j)
      design.row(k - q).segment(1 + (j - 1) * d0, d0) = vechs[k - j].transpose();
    response.row(k - q) = vechs[k].transpose();
  }

  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  if (qr.rank() < cols) {
    Eigen::JacobiSVD<Matrix> svd(design);
    const double cond = svd.singularValues()(0) /
                        svd.singularValues()(svd.singularValues().size() - 1);
    throw std::runtime_error("lse_fit: rank-deficient design matrix (rank " +
                             std::to_string(qr.rank()) + " of " + std::to_string(cols) +
                             ", condition number " + std::to_string(cond) + ")");
  }
  Matrix coef = qr.solve(response);  // cols x d0

  FitReport rep;
  rep.theta.r = r;
  rep.theta.q = q;
  rep.theta.beta0 = coef.row(0).transpose();
  rep.theta.betas.resize(q);
  for (int j = 0; j < q; ++j)
    rep.theta.betas[j] = coef.block(1 + j * d0, 0, d0, d0).transpose();

  Matrix resid = response - design * coef;
  rep.objective = resid.squaredNorm() / n;
  rep.residuals.reserve(rows);
  for (int i = 0; i < rows; ++i) rep.residuals.push_back(resid.row(i).transpose());
  rep.iterations = 1;
  const double normal_eq = (design.transpose() * resid).cwiseAbs().maxCoeff();
  rep.grad_norm = normal_eq;
  rep.converged = normal_eq <= 1e-8 * std::max(1.0, response.cwiseAbs().maxCoeff()) * rows;
  return rep;
}

double qmle_objective(const std::vector<Matrix>& psi_series, int q,
                      const SVParams& theta, double floor, int* pd_repairs) {
  const int n = static_cast<int>(psi_series.size());
  const int r = theta.r;
  double sum = 0.0;
  double deficit = 0.0;
  int repairs = 0;

  std::vector<Vector> vechs(n);
  for (int k = 0; k < n; ++k) vechs[k] = vech(psi_series[k]);

  Matrix h(r, r);
  for (int k = q; k < n; ++k) {
    Vector v = theta.beta0;
    for (int j = 1; j <= q; ++j) v += theta.betas[j - 1] * vechs[k - j];
    h = unvech(v);
    // fast path: Cholesky when H is safely PD
    Eigen::LLT<Matrix> llt(h);
    bool ok = llt.info() == Eigen::Success;
    if (ok) {
      const auto& l = llt.matrixLLT();
      double mindiag = l(0, 0);
      for (int i = 1; i < r; ++i) mindiag = std::min(mindiag, l(i, i));
      ok = mindiag * mindiag > floor;
    }
    if (ok) {
      const auto& l = llt.matrixLLT();
      double logdet = 0.0;
      for (int i = 0; i < r; ++i) logdet += std::log(l(i, i));
      logdet *= 2.0;
      sum += logdet + llt.solve(psi_series[k]).trace();
    } else {
      SymEig e = sym_eig(h);
      ++repairs;
      double logdet = 0.0;
      double tr = 0.0;
      for (int i = 0; i < r; ++i) {
        double lam = e.values[i];
        if (lam < floor) {
          deficit += floor - lam;
          lam = floor;
        }
        logdet += std::log(lam);
        tr += e.vectors.col(i).dot(psi_series[k] * e.vectors.col(i)) / lam;
      }
      sum += logdet + tr;
    }
  }
  if (pd_repairs) *pd_repairs = repairs;
  // soft barrier implementing the minimum-eigenvalue condition on H_k
  return sum / n + deficit / (n * floor);
}

namespace {

Vector qmle_gradient(const std::vector<Matrix>& psi, int q, const Vector& theta_flat,
                     int r, double floor, double step_scale) {
  const int d = static_cast<int>(theta_flat.size());
  Vector g(d);
  Vector t = theta_flat;
  for (int i = 0; i < d; ++i) {
    const double h = step_scale * (1.0 + std::abs(theta_flat[i]));
    const double orig = t[i];
    t[i] = orig + h;
    const double fp = qmle_objective(psi, q, SVParams::from_flat(t, r, q), floor);
    t[i] = orig - h;
    const double fm = qmle_objective(psi, q, SVParams::from_flat(t, r, q), floor);
    t[i] = orig;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

}  // namespace

FitReport qmle_fit(const std::vector<Matrix>& psi_series, int q,
                   const SVParams& init, const QmleOptions& opts) {
  const int n = static_cast<int>(psi_series.size());
  const int r = init.r;
  const int d = init.dim();

  double floor = opts.floor;
  if (floor < 0) {
    double mean_trace = 0.0;
    for (const auto& m : psi_series) mean_trace += m.trace();
    mean_trace /= std::max(1, n);
    floor = 1e-8 * std::max(mean_trace, 1e-300);
  }

  Vector theta = init.to_flat();
  double f = qmle_objective(psi_series, q, init, floor);
  if (!std::isfinite(f))
    throw std::runtime_error(
        "qmle_fit: objective non-finite at the initial value; supply a "
        "different init (e.g. the LSE)");

  FitReport rep;
  rep.objective_path.push_back(-f);

  Matrix hinv = Matrix::Identity(d, d);
  Vector g = qmle_gradient(psi_series, q, theta, r, floor, opts.fd_step);
  int iter = 0;
  bool converged = false;

  for (; iter < opts.max_iter; ++iter) {
    if (g.cwiseAbs().maxCoeff() < opts.grad_tol) {
      converged = true;
      break;
    }
    Vector dir = -(hinv * g);
    double slope = g.dot(dir);
    if (slope >= 0) {  // reset on loss of descent
      hinv.setIdentity();
      dir = -g;
      slope = g.dot(dir);
    }

    // backtracking Armijo line search
    double alpha = 1.0;
    double f_new = f;
    Vector theta_new = theta;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      theta_new = theta + alpha * dir;
      f_new = qmle_objective(psi_series, q, SVParams::from_flat(theta_new, r, q), floor);
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }

    if (!accepted) {
      // derivative-free fallback: coordinate search at a small step
      bool improved = false;
      for (int i = 0; i < d; ++i) {
        const double h = 1e-7 * (1.0 + std::abs(theta[i]));
        for (double s : {h, -h}) {
          Vector cand = theta;
          cand[i] += s;
          const double fc =
              qmle_objective(psi_series, q, SVParams::from_flat(cand, r, q), floor);
          if (fc < f) {
            theta = cand;
            f = fc;
            improved = true;
          }
        }
      }
      if (!improved) break;
      rep.objective_path.push_back(-f);
      g = qmle_gradient(psi_series, q, theta, r, floor, opts.fd_step);
      hinv.setIdentity();
      continue;
    }

    Vector g_new = qmle_gradient(psi_series, q, theta_new, r, floor, opts.fd_step);
    Vector s = theta_new - theta;
    Vector y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {  // BFGS update
      const double rho = 1.0 / sy;
      Matrix vmat = Matrix::Identity(d, d) - rho * s * y.transpose();
      hinv = vmat * hinv * vmat.transpose() + rho * s * s.transpose();
    }
    theta = theta_new;
    f = f_new;
    g = g_new;
    rep.objective_path.push_back(-f);
  }

  rep.theta = SVParams::from_flat(theta, r, q);
  rep.iterations = iter;
  rep.converged = converged;
  rep.grad_norm = g.cwiseAbs().maxCoeff();
  rep.objective = -qmle_objective(psi_series, q, rep.theta, floor, &rep.pd_repairs);

  std::vector<Vector> vechs(n);
  for (int k = 0; k < n; ++k) vechs[k] = vech(psi_series[k]);
  for (int k = q; k < n; ++k) {
    Vector v = rep.theta.beta0;
    for (int j = 1; j <= q; ++j) v += rep.theta.betas[j - 1] * vechs[k - j];
    rep.residuals.push_back(vechs[k] - v);
  }
  return rep;
}

OrderSelection select_order(const std::vector<Matrix>& psi_series, int q_max) {
  const int n = static_cast<int>(psi_series.size());
  if (n == 0) throw std::invalid_argument("select_order: empty series");
  const int r = static_cast<int>(psi_series[0].rows());
  const int d0 = vech_dim(r);

  OrderSelection sel;
  for (int q = 1; q <= q_max; ++q) {
    // common effective sample so criteria are comparable across q
    std::vector<Matrix> tail(psi_series.begin() + (q_max - q), psi_series.end());
    FitReport rep = lse_fit(tail, q);
    const int neff = n - q_max;
    Matrix cov = Matrix::Zero(d0, d0);
    const int skip = static_cast<int>(rep.residuals.size()) - neff;
    for (int i = skip; i < static_cast<int>(rep.residuals.size()); ++i)
      cov += rep.residuals[i] * rep.residuals[i].transpose();
    cov /= neff;
    const double logdet = std::log(std::max(cov.determinant(), 1e-300));
    const int kparams = d0 + q * d0 * d0;
    sel.aic.push_back(neff * logdet + 2.0 * kparams);
    sel.bic.push_back(neff * logdet + std::log(static_cast<double>(neff)) * kparams);
  }
  sel.q_aic = static_cast<int>(std::min_element(sel.aic.begin(), sel.aic.end()) -
                               sel.aic.begin()) + 1;
  sel.q_bic = static_cast<int>(std::min_element(sel.bic.begin(), sel.bic.end()) -
                               sel.bic.begin()) + 1;
  return sel;
}

}  // namespace svito
