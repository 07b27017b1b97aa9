#include "svito/portfolio.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace svito {

namespace {

// x = max(0, y + lambda a - mu b) with a = (1; -1), b = 1 on the (u; v) split.
Vector split_point(const Vector& y, double lambda, double mu, int p) {
  Vector x(2 * p);
  for (int i = 0; i < p; ++i) {
    x[i] = std::max(0.0, y[i] + lambda - mu);
    x[p + i] = std::max(0.0, y[p + i] - lambda - mu);
  }
  return x;
}

// Solve sum(u) - sum(v) = 1 for lambda at fixed mu. The left side is a
// nondecreasing piecewise-linear function of lambda with breakpoints where
// entries of u or v activate, so an event sweep finds the root exactly.
double solve_lambda(const Vector& y, double mu, int p) {
  // u_i active for lambda > -(y_i - mu); v_i active for lambda < y_{p+i} - mu
  std::vector<std::pair<double, int>> events;  // (lambda, +1 u on / -1 v off)
  events.reserve(2 * p);
  for (int i = 0; i < p; ++i) {
    events.emplace_back(-(y[i] - mu), +1);
    events.emplace_back(y[p + i] - mu, -1);
  }
  std::sort(events.begin(), events.end());

  // state just below the smallest event: all u inactive, all v active
  double su = 0.0, sv = 0.0;
  int nu = 0, nv = p;
  for (int i = 0; i < p; ++i) sv += y[p + i] - mu;
  double prev = -std::numeric_limits<double>::infinity();
  for (const auto& [lam, kind] : events) {
    // net(l) = (su - sv) + (nu + nv) l on [prev, lam]
    const int slope = nu + nv;
    if (slope > 0) {
      const double root = (1.0 - su + sv) / slope;
      if (root >= prev && root <= lam) return root;
    }
    prev = lam;
    if (kind > 0) {
      // u entry with breakpoint lam has value y_i - mu = -lam
      su += -lam;
      ++nu;
    } else {
      // v entry with breakpoint lam has value y_{p+i} - mu = lam
      sv -= lam;
      --nv;
    }
  }
  const int slope = nu + nv;
  return slope > 0 ? (1.0 - su + sv) / slope : prev + 1.0;
}

// Projection onto {x >= 0, sum(u) - sum(v) = 1, sum(u) + sum(v) <= c0}.
Vector project(const Vector& y, double c0, int p) {
  double lambda = solve_lambda(y, 0.0, p);
  Vector x = split_point(y, lambda, 0.0, p);
  if (x.sum() <= c0) return x;

  double lo = 0.0, hi = 1.0;
  while (true) {
    lambda = solve_lambda(y, hi, p);
    if (split_point(y, lambda, hi, p).sum() <= c0) break;
    lo = hi;
    hi *= 2.0;
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    lambda = solve_lambda(y, mid, p);
    if (split_point(y, lambda, mid, p).sum() > c0)
      lo = mid;
    else
      hi = mid;
  }
  lambda = solve_lambda(y, hi, p);
  return split_point(y, lambda, hi, p);
}

// Stationarity residual of the L1-bounded min-variance problem at w:
// for w_i != 0, 2(Sw)_i + lambda + mu sign(w_i) = 0; for w_i = 0,
// |2(Sw)_i + lambda| <= mu; mu >= 0 with mu = 0 when ||w||_1 < c0.
// Multipliers are fit by least squares over the support.
double kkt_residual(const Matrix& s, const Vector& w, double c0) {
  const int p = static_cast<int>(w.size());
  Vector g = 2.0 * (s * w);
  const double gross = w.cwiseAbs().sum();
  const bool active = gross >= c0 - 1e-10;
  const double scale = std::max(1.0, g.cwiseAbs().maxCoeff());

  double num_l = 0.0, num_m = 0.0, cross = 0.0;
  int cnt = 0;
  for (int i = 0; i < p; ++i)
    if (w[i] != 0.0) {
      const double si = w[i] > 0.0 ? 1.0 : -1.0;
      num_l += g[i];
      num_m += si * g[i];
      cross += si;
      ++cnt;
    }
  const bool uniform = std::abs(std::abs(cross) - cnt) < 0.5;  // one sign only
  double res = std::max(0.0, gross - c0 - 1e-12);
  res = std::max(res, std::abs(w.sum() - 1.0) * scale);

  if (active && cnt > 0 && uniform) {
    // constraints coincide on the support; the combined multiplier
    // c = lambda + mu*s must satisfy g_i + c = 0 on the support and
    // s*(g_i + c) >= 0 off it (mu >= 0 can absorb the rest)
    const double sgn = cross > 0 ? 1.0 : -1.0;
    const double c = -num_l / cnt;
    for (int i = 0; i < p; ++i) {
      if (w[i] != 0.0)
        res = std::max(res, std::abs(g[i] + c));
      else
        res = std::max(res, std::max(0.0, -sgn * (g[i] + c)));
    }
    return res;
  }

  double lambda, mu;
  if (active && cnt > 0) {
    // least squares for (lambda, mu) in lambda + mu s_i = -g_i over support
    const double a11 = cnt, a12 = cross, a22 = cnt;
    const double det = a11 * a22 - a12 * a12;
    lambda = (-num_l * a22 + num_m * a12) / det;
    mu = (-num_m * a11 + num_l * a12) / det;
  } else {
    lambda = cnt > 0 ? -num_l / cnt : 0.0;
    mu = 0.0;
  }

  res = std::max(res, std::max(0.0, -mu));
  for (int i = 0; i < p; ++i) {
    if (w[i] != 0.0) {
      const double si = w[i] > 0.0 ? 1.0 : -1.0;
      res = std::max(res, std::abs(g[i] + lambda + mu * si));
    } else {
      res = std::max(res, std::max(0.0, std::abs(g[i] + lambda) - mu));
    }
  }
  if (!active) res = std::max(res, mu * scale);
  return res;
}

// Exact solve on a fixed support/sign pattern; returns false when the
// pattern's KKT conditions fail.
bool polish(const Matrix& s, double c0, double tol, Vector& w, double& res) {
  const int p = static_cast<int>(w.size());
  std::vector<int> free_idx;
  for (int i = 0; i < p; ++i)
    if (w[i] != 0.0) free_idx.push_back(i);
  const int f = static_cast<int>(free_idx.size());
  if (f == 0) return false;
  const bool active = w.cwiseAbs().sum() >= c0 - 1e-8;
  bool uniform = true;
  for (int i : free_idx)
    if ((w[i] > 0.0) != (w[free_idx[0]] > 0.0)) uniform = false;

  // with a single sign the exposure constraint duplicates the budget one
  const int nc = (active && !uniform) ? 2 : 1;
  Matrix kkt = Matrix::Zero(f + nc, f + nc);
  Vector rhs = Vector::Zero(f + nc);
  for (int a = 0; a < f; ++a)
    for (int b = 0; b < f; ++b) kkt(a, b) = 2.0 * s(free_idx[a], free_idx[b]);
  for (int a = 0; a < f; ++a) {
    kkt(a, f) = 1.0;
    kkt(f, a) = 1.0;
    if (nc == 2) {
      const double si = w[free_idx[a]] > 0.0 ? 1.0 : -1.0;
      kkt(a, f + 1) = si;
      kkt(f + 1, a) = si;
    }
  }
  rhs[f] = 1.0;
  if (nc == 2) rhs[f + 1] = c0;

  Eigen::FullPivLU<Matrix> lu(kkt);
  if (!lu.isInvertible()) return false;
  Vector sol = lu.solve(rhs);

  Vector cand = Vector::Zero(p);
  for (int a = 0; a < f; ++a) {
    const double si = w[free_idx[a]] > 0.0 ? 1.0 : -1.0;
    if (sol[a] * si < 0.0) return false;  // sign pattern broke
    cand[free_idx[a]] = sol[a];
  }
  if (nc == 2 && sol[f + 1] < -tol) return false;  // exposure multiplier negative
  if (cand.cwiseAbs().sum() > c0 + 1e-10) return false;

  const double r = kkt_residual(s, cand, c0);
  if (r > res && r > tol) return false;
  w = cand;
  res = r;
  return true;
}

}  // namespace

PortfolioResult min_variance(const PortfolioProblem& problem) {
  const int p = static_cast<int>(problem.sigma.rows());
  if (problem.sigma.cols() != p)
    throw std::invalid_argument("min_variance: sigma not square");
  if (problem.c0 < 1.0)
    throw std::invalid_argument("min_variance: gross exposure bound below 1");

  Matrix s = psd_clip(problem.sigma);
  const double ridge = problem.ridge >= 0.0
                           ? problem.ridge
                           : 1e-8 * s.trace() / std::max(1, p);
  s.diagonal().array() += ridge;
  if (min_eigenvalue(s) <= 0.0)
    throw std::invalid_argument("min_variance: sigma not positive definite after ridge");

  const double c0 = problem.c0;
  PortfolioResult res;

  Eigen::LDLT<Matrix> ldlt(s);
  if (ldlt.info() == Eigen::Success) {
    Vector si = ldlt.solve(Vector::Ones(p));
    const double denom = si.sum();
    if (denom > 0.0) {
      Vector w = si / denom;
      if (w.cwiseAbs().sum() <= c0 + 1e-12) {
        res.weights = w;
        res.objective = w.dot(s * w);
        res.gross_exposure = w.cwiseAbs().sum();
        res.feasible = true;
        res.kkt_residual = kkt_residual(s, w, c0);
        return res;
      }
    }
  }

  // projected gradient on the split x = (u; v), w = u - v, from equal weights
  const double lip = 2.0 * std::max(spectral_norm(s), 1e-300);
  const double step = 1.0 / lip;

  Vector x = project(Vector::Zero(2 * p), c0, p);
  Vector best_w = x.head(p) - x.tail(p);
  double best_res = kkt_residual(s, best_w, c0);
  int it = 0;
  for (; it < problem.max_iter; ++it) {
    Vector w = x.head(p) - x.tail(p);
    Vector sw = s * w;
    Vector grad(2 * p);
    grad.head(p) = 2.0 * sw;
    grad.tail(p) = -2.0 * sw;

    Vector d = project(x - step * grad, c0, p) - x;
    const double dnorm = d.cwiseAbs().maxCoeff();

    if (it % 10 == 9 || dnorm <= step * problem.kkt_tol) {
      Vector wt = w;
      for (int i = 0; i < p; ++i)
        if (std::abs(wt[i]) < 1e-12) wt[i] = 0.0;
      double r = best_res;
      if (polish(s, c0, problem.kkt_tol, wt, r)) {
        best_w = wt;
        best_res = r;
        if (r <= problem.kkt_tol) break;
      }
      const double rr = kkt_residual(s, w, c0);
      if (rr < best_res) {
        best_res = rr;
        best_w = w;
      }
      if (best_res <= problem.kkt_tol) break;
    }
    if (dnorm == 0.0) break;

    Vector dw = d.head(p) - d.tail(p);
    const double curv = 2.0 * dw.dot(s * dw);
    double t = 1.0;
    if (curv > 0.0) t = std::min(1.0, std::max(0.0, -grad.dot(d) / curv));
    if (t <= 0.0) break;
    x += t * d;
  }

  res.weights = best_w;
  res.objective = best_w.dot(s * best_w);
  res.gross_exposure = best_w.cwiseAbs().sum();
  res.feasible = std::abs(best_w.sum() - 1.0) <= 1e-8 &&
                 res.gross_exposure <= c0 + 1e-8;
  res.constraint_active = res.gross_exposure >= c0 - 1e-8;
  res.iterations = it;
  res.kkt_residual = best_res;
  return res;
}

double oos_risk(const Vector& weights, const Matrix& realized) {
  return std::sqrt(std::max(0.0, 252.0 * weights.dot(realized * weights)));
}

}  // namespace svito
