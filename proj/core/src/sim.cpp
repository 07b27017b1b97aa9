#include "svito/sim.hpp"

#include <cmath>
#include <deque>
#include <random>
#include <stdexcept>

namespace svito {

namespace {

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Vector vec(const Matrix& m) {
  return Eigen::Map<const Vector>(m.data(), m.size());
}

Matrix unvec(const Vector& v, int r) {
  return Eigen::Map<const Matrix>(v.data(), r, r);
}

// Row of the vech-space coefficient from one row of a vec-space coefficient.
Vector vec_row_to_vech_row(const Vector& row, int r) {
  Matrix m = unvec(row, r);
  Matrix sym = m + m.transpose();
  sym.diagonal() = m.diagonal();
  return vech(sym, 1e308);  // any asymmetry already folded in
}

}  // namespace

Matrix default_loading(int p, int r) {
  if (r != 3)
    throw std::invalid_argument(
        "default_loading: only r = 3 is supported; supply a custom loading");
  if (p < 3) throw std::invalid_argument("default_loading: need p >= 3");
  Matrix l(p, 3);
  for (int i = 1; i <= p; ++i) {
    const double ang = 2.0 * i * M_PI / p;
    l(i - 1, 0) = std::sqrt(2.0) * std::cos(ang);
    l(i - 1, 1) = std::sqrt(2.0) * std::sin(ang);
    l(i - 1, 2) = 1.0;
  }
  return l;
}

Matrix default_idio(int p) {
  if (p < 1) throw std::invalid_argument("default_idio: need p >= 1");
  Matrix g(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) g(i, j) = 0.1 * std::pow(0.5, std::abs(i - j));
  return g;
}

SVParams derive_beta(const Matrix& alpha0, const std::vector<Matrix>& alpha,
                     const Matrix& nu) {
  if (alpha.empty()) throw std::invalid_argument("derive_beta: need q >= 1");
  const int r = static_cast<int>(alpha0.rows());
  const int q = static_cast<int>(alpha.size());
  if (alpha[0].eigenvalues().cwiseAbs().maxCoeff() >= 1.0)
    throw std::invalid_argument(
        "derive_beta: spectral radius of alpha1 must be < 1");

  std::vector<Matrix> big_a(q);
  for (int j = 0; j < q; ++j) big_a[j] = kron(alpha[j], alpha[j]);

  const Matrix rho1 = phi_series(big_a[0], 1);
  const Matrix rho2 = phi_series(big_a[0], 2);
  const Matrix rho3 = phi_series(big_a[0], 3);

  const Vector intercept = rho1 * vec(alpha0 * alpha0.transpose()) +
                           (rho2 - 2.0 * rho3) * vec(nu.transpose() * nu);

  std::vector<Matrix> coef(q);
  for (int j = 0; j < q; ++j) {
    coef[j] = (rho1 - rho2) * big_a[j];
    if (j + 1 < q) coef[j] += rho2 * big_a[j + 1];
  }

  SVParams out;
  out.r = r;
  out.q = q;
  const int d0 = vech_dim(r);
  out.beta0 = vech(0.5 * (unvec(intercept, r) + unvec(intercept, r).transpose()));
  out.betas.assign(q, Matrix(d0, d0));
  for (int j = 0; j < q; ++j) {
    int row = 0;
    for (int c = 0; c < r; ++c)
      for (int a = c; a < r; ++a) {
        const int vec_idx = c * r + a;  // column-major index of entry (a, c)
        out.betas[j].row(row++) =
            vec_row_to_vech_row(coef[j].row(vec_idx).transpose(), r).transpose();
      }
  }

  if (!out.stationary())
    throw std::runtime_error(
        "derive_beta: non-stationary (largest eigenvalue modulus of sum of "
        "beta_j is " + std::to_string(out.companion_spectral_radius()) + " >= 1)");
  return out;
}

SimConfig default_sim_config() {
  SimConfig c;
  c.alpha0 = Eigen::Vector3d(0.5, 0.4, 0.3).asDiagonal();
  Matrix a1(3, 3);
  a1 << 0.2, 0.5, 0.8,
        0.0, 0.5, -0.5,
        0.0, -0.2, 0.3;
  c.alpha = {a1};
  c.nu = 0.5 * Matrix::Identity(3, 3);
  return c;
}

Matrix SimConfig::effective_loading() const {
  return loading.size() ? loading : default_loading(p, r);
}

Matrix SimConfig::effective_idio() const {
  return idio.size() ? idio : default_idio(p);
}

void SimConfig::validate() const {
  if (!(p >= r && r >= 1)) throw std::invalid_argument("SimConfig: need p >= r >= 1");
  if (q < 1) throw std::invalid_argument("SimConfig: need q >= 1");
  if (n < q + 1) throw std::invalid_argument("SimConfig: need n >= q+1");
  if (m < 2) throw std::invalid_argument("SimConfig: need m >= 2");
  if (substeps_per_obs < 1)
    throw std::invalid_argument("SimConfig: need substeps_per_obs >= 1");
  if (alpha0.rows() != r || alpha0.cols() != r)
    throw std::invalid_argument("SimConfig: alpha0 must be r x r");
  if (static_cast<int>(alpha.size()) != q)
    throw std::invalid_argument("SimConfig: need q alpha matrices");
  for (const auto& a : alpha)
    if (a.rows() != r || a.cols() != r)
      throw std::invalid_argument("SimConfig: alpha_j must be r x r");
  if (nu.rows() != r || nu.cols() != r)
    throw std::invalid_argument("SimConfig: nu must be r x r");
  if (alpha[0].eigenvalues().cwiseAbs().maxCoeff() >= 1.0)
    throw std::invalid_argument("SimConfig: spectral radius of alpha1 must be < 1");
  {
    Eigen::JacobiSVD<Matrix> svd(alpha[0]);
    const double smin = svd.singularValues()(r - 1);
    if (smin <= 1e-12 * std::max(1.0, svd.singularValues()(0)))
      throw std::invalid_argument("SimConfig: alpha1 must be invertible");
  }
  derive_beta(alpha0, alpha, nu);  // throws if the implied AR is non-stationary

  const Matrix l = effective_loading();
  if (l.rows() != p || l.cols() != r)
    throw std::invalid_argument("SimConfig: loading must be p x r");
  if (!loading.size()) {
    const Matrix gram = l.transpose() * l - p * Matrix::Identity(r, r);
    if (gram.cwiseAbs().maxCoeff() > 1e-10 * p)
      throw std::invalid_argument("SimConfig: default loading lost orthogonality");
  }
  const Matrix gs = effective_idio();
  if (gs.rows() != p || gs.cols() != p)
    throw std::invalid_argument("SimConfig: idio must be p x p");
  if (noise_sd < 0) throw std::invalid_argument("SimConfig: noise_sd must be >= 0");
  if (burnin_days < 0) throw std::invalid_argument("SimConfig: burnin_days must be >= 0");
  if (poisson_thinning && !(thinning_keep > 0.0 && thinning_keep <= 1.0))
    throw std::invalid_argument("SimConfig: thinning_keep must be in (0, 1]");
}

namespace {

// Factor chol with PSD fallback; sigma is symmetric with eigenvalues >= 0.
Matrix chol_lower(const Matrix& sigma) {
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  return sqrt_psd(sigma);  // symmetric root works as well for generating increments
}

struct SimCore {
  const SimConfig& cfg;
  bool want_assets;
  std::mt19937_64 rng;
  std::normal_distribution<double> normal{0.0, 1.0};

  Matrix a00;                 // alpha0 alpha0^T
  SVParams beta;
  std::deque<Matrix> psi_hist;  // most recent first, q entries
  long clip_count = 0;

  Matrix l, gs, gs_chol;
  Vector x;  // current log prices

  explicit SimCore(const SimConfig& c, bool assets)
      : cfg(c), want_assets(assets), rng(c.seed) {
    a00 = cfg.alpha0 * cfg.alpha0.transpose();
    beta = derive_beta(cfg.alpha0, cfg.alpha, cfg.nu);
    const Matrix epsi = beta.stationary_mean();
    psi_hist.assign(cfg.q, epsi);
    if (want_assets) {
      l = cfg.effective_loading();
      gs = cfg.effective_idio();
      gs_chol = chol_lower(gs);
      x = Vector::Zero(cfg.p);
    }
  }

  Vector randn(int k) {
    Vector v(k);
    for (int i = 0; i < k; ++i) v[i] = normal(rng);
    return v;
  }

  Matrix sigma_at_day_start() const {
    Matrix s = a00;
    for (int j = 0; j < cfg.q; ++j)
      s += cfg.alpha[j] * psi_hist[j] * cfg.alpha[j].transpose();
    return s;
  }

  // Simulates one day on `substeps` grid points; returns Psi_k and, when
  // requested, fills x_obs (m rows) with the log prices at j/m, j = 1..m.
  Matrix run_day(int day_index, int substeps, Matrix* x_obs) {
    const int r = cfg.r;
    const double dt = 1.0 / substeps;
    const double sqdt = std::sqrt(dt);
    const int sub = want_assets ? substeps / cfg.m : 0;

    const Matrix sigma0 = sigma_at_day_start();
    Matrix interp = a00 - sigma0;
    for (int j = 1; j < cfg.q; ++j)
      interp += cfg.alpha[j] * psi_hist[j - 1] * cfg.alpha[j].transpose();

    Matrix integral = Matrix::Zero(r, r);
    Vector z = Vector::Zero(r);
    Vector df_acc = Vector::Zero(r);
    Matrix sigma(r, r);
    const Matrix nu_t = cfg.nu.transpose();

    for (int s = 0; s < substeps; ++s) {
      const double tf = s * dt;
      sigma = sigma0 + tf * interp +
              cfg.alpha[0] * integral * cfg.alpha[0].transpose() +
              (1.0 - tf) * z * z.transpose();
      sigma = 0.5 * (sigma + sigma.transpose()).eval();

      Eigen::LLT<Matrix> llt(sigma);
      if (llt.info() != Eigen::Success) {
        SymEig e = sym_eig(sigma);
        const double lam_min = e.values[r - 1];
        const double tr = std::max(sigma.trace(), 1e-12);
        if (lam_min < -0.5 * tr)
          throw std::runtime_error(
              "simulate: instantaneous volatility non-PSD beyond floor "
              "tolerance at day " + std::to_string(day_index) + ", substep " +
              std::to_string(s) + " (min eigenvalue " + std::to_string(lam_min) + ")");
        if (lam_min < 0) {
          ++clip_count;
          sigma = e.vectors * e.values.cwiseMax(0.0).asDiagonal() *
                  e.vectors.transpose();
          sigma = 0.5 * (sigma + sigma.transpose()).eval();
        }
      }

      integral += sigma * dt;
      if (want_assets) df_acc += chol_lower(sigma) * (sqdt * randn(r));
      z += nu_t * (sqdt * randn(r));

      if (want_assets && (s + 1) % sub == 0) {
        const int j = (s + 1) / sub - 1;
        x.array() += cfg.drift / cfg.m;
        x += l * df_acc +
             gs_chol * (randn(cfg.p) / std::sqrt(static_cast<double>(cfg.m)));
        if (x_obs) x_obs->row(j) = x.transpose();
        df_acc.setZero();
      }
    }

    psi_hist.push_front(integral);
    psi_hist.pop_back();
    return integral;
  }
};

}  // namespace

std::vector<Matrix> simulate_psi_series(const SimConfig& config, int n_days,
                                        int substeps_per_day) {
  SimCore core(config, /*want_assets=*/false);
  std::vector<Matrix> out;
  out.reserve(n_days);
  for (int d = 0; d < config.burnin_days; ++d)
    core.run_day(d - config.burnin_days, substeps_per_day, nullptr);
  for (int d = 0; d < n_days; ++d)
    out.push_back(core.run_day(d, substeps_per_day, nullptr));
  return out;
}

SimOutput simulate(const SimConfig& config) {
  config.validate();
  SimCore core(config, /*want_assets=*/true);
  const int substeps = config.m * config.substeps_per_obs;

  SimOutput out;
  out.loading = core.l;
  out.idio = core.gs;
  out.ticks.p = config.p;
  out.ticks.n_days = config.n;
  out.ticks.synchronous = !config.poisson_thinning;
  out.ticks.ticks.resize(config.n);

  for (int d = 0; d < config.burnin_days; ++d)
    core.run_day(d - config.burnin_days, substeps, nullptr);

  Matrix x_obs(config.m, config.p);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int d = 0; d < config.n; ++d) {
    Matrix psi = core.run_day(d, substeps, &x_obs);
    out.true_psi.push_back(psi);
    Matrix gamma = core.l * psi * core.l.transpose() + core.gs;
    out.true_gamma.push_back(0.5 * (gamma + gamma.transpose()));

    auto& day = out.ticks.ticks[d];
    day.resize(config.p);
    for (int i = 0; i < config.p; ++i) {
      auto& series = day[i];
      series.reserve(config.m);
      for (int j = 0; j < config.m; ++j) {
        if (config.poisson_thinning && unif(core.rng) > config.thinning_keep &&
            j != 0 && j != config.m - 1)
          continue;
        Tick t;
        t.time = d + static_cast<double>(j + 1) / config.m;
        t.log_price = x_obs(j, i) + config.noise_sd * core.normal(core.rng);
        series.push_back(t);
      }
    }
  }
  out.true_sigma_end = core.sigma_at_day_start();
  out.clip_count = core.clip_count;
  return out;
}

Matrix conditional_oracle(const SimOutput& sim, const SVParams& theta) {
  if (static_cast<int>(sim.true_psi.size()) < theta.q)
    throw std::invalid_argument("conditional_oracle: not enough Psi history");
  std::vector<Matrix> hist(theta.q);
  const int n = static_cast<int>(sim.true_psi.size());
  for (int j = 0; j < theta.q; ++j) hist[j] = sim.true_psi[n - 1 - j];
  const Matrix h = build_H(theta, hist);
  Matrix out = sim.loading * h * sim.loading.transpose() + sim.idio;
  return 0.5 * (out + out.transpose());
}

}  // namespace svito
