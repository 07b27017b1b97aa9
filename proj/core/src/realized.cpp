#include "svito/realized.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace svito {

namespace {

double g_weight(double x) { return std::min(x, 1.0 - x); }

// Core pre-averaging estimator on a synchronized price matrix
// (rows = ticks in time order, cols = assets). eta holds the per-asset
// noise-variance estimates from the assets' own tick series.
Matrix prvm_core(const Matrix& prices, const Vector& eta, double window_theta,
                 int day_label) {
  const int n_ticks = static_cast<int>(prices.rows());
  const int p = static_cast<int>(prices.cols());
  const int kn = static_cast<int>(std::ceil(window_theta * std::sqrt(n_ticks)));
  if (n_ticks < 2 * kn)
    throw std::runtime_error("prvm: window exceeds sample on day " +
                             std::to_string(day_label) + " (" +
                             std::to_string(n_ticks) + " ticks, k_n = " +
                             std::to_string(kn) + ")");

  const int n_incr = n_ticks - 1;
  Matrix dy = prices.bottomRows(n_incr) - prices.topRows(n_incr);

  Vector gv(kn - 1);
  double psi2 = 0.0;
  for (int h = 1; h < kn; ++h) {
    gv[h - 1] = g_weight(static_cast<double>(h) / kn);
    psi2 += gv[h - 1] * gv[h - 1];
  }
  psi2 /= kn;
  double psi1 = 0.0;
  for (int h = 1; h <= kn; ++h) {
    const double d = g_weight(static_cast<double>(h) / kn) -
                     g_weight(static_cast<double>(h - 1) / kn);
    psi1 += d * d;
  }
  psi1 *= kn;

  const int n_win = n_incr - (kn - 1) + 1;
  Matrix ybar = Matrix::Zero(n_win, p);
  for (int h = 0; h < kn - 1; ++h)
    ybar += gv[h] * dy.middleRows(h, n_win);

  Matrix gamma = Matrix::Zero(p, p);
  gamma.selfadjointView<Eigen::Lower>().rankUpdate(ybar.transpose(), 1.0);
  gamma = gamma.selfadjointView<Eigen::Lower>();
  gamma *= static_cast<double>(n_ticks) / (psi2 * kn * n_win);

  // noise-bias correction on the diagonal, floored at 0
  const double theta_sq = static_cast<double>(kn) * kn / n_ticks;
  for (int i = 0; i < p; ++i)
    gamma(i, i) = std::max(gamma(i, i) - psi1 / (theta_sq * psi2) * eta[i], 0.0);
  return gamma;
}

}  // namespace

Matrix refresh_time_sync(const std::vector<std::vector<Tick>>& day_ticks) {
  const int p = static_cast<int>(day_ticks.size());
  std::vector<std::size_t> pos(p, 0);

  // first refresh time: every asset has traded at least once
  double tau = -std::numeric_limits<double>::infinity();
  for (const auto& s : day_ticks) tau = std::max(tau, s.front().time);

  std::vector<Eigen::RowVectorXd> rows;
  for (;;) {
    Eigen::RowVectorXd row(p);
    bool exhausted = false;
    for (int i = 0; i < p; ++i) {
      const auto& s = day_ticks[i];
      while (pos[i] + 1 < s.size() && s[pos[i] + 1].time <= tau) ++pos[i];
      row[i] = s[pos[i]].log_price;
      if (pos[i] + 1 >= s.size()) exhausted = true;
    }
    rows.push_back(row);
    if (exhausted) break;
    double next_tau = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < p; ++i) {
      const auto& s = day_ticks[i];
      std::size_t j = pos[i];
      while (j < s.size() && s[j].time <= tau) ++j;
      if (j >= s.size()) { exhausted = true; break; }
      next_tau = std::max(next_tau, s[j].time);
    }
    if (exhausted) break;
    tau = next_tau;
  }

  Matrix out(static_cast<int>(rows.size()), p);
  for (int i = 0; i < out.rows(); ++i) out.row(i) = rows[i];
  return out;
}

Matrix prvm_day(const std::vector<std::vector<Tick>>& day_ticks, bool synchronous,
                double window_theta, int day_label) {
  const int p = static_cast<int>(day_ticks.size());
  Vector eta(p);
  for (int i = 0; i < p; ++i) {
    const auto& s = day_ticks[i];
    if (s.size() < 2)
      throw std::runtime_error("prvm: fewer than 2 ticks for asset " +
                               std::to_string(i) + " on day " +
                               std::to_string(day_label));
    double acc = 0.0;
    for (std::size_t l = 0; l + 1 < s.size(); ++l) {
      const double d = s[l + 1].log_price - s[l].log_price;
      if (!std::isfinite(s[l].log_price) || !std::isfinite(d))
        throw std::runtime_error("prvm: non-finite price for asset " +
                                 std::to_string(i) + " on day " +
                                 std::to_string(day_label));
      acc += d * d;
    }
    eta[i] = std::max(acc / (2.0 * (s.size() - 1)), 0.0);
  }

  Matrix prices;
  if (synchronous) {
    const int n_ticks = static_cast<int>(day_ticks[0].size());
    for (int i = 1; i < p; ++i)
      if (static_cast<int>(day_ticks[i].size()) != n_ticks)
        throw std::runtime_error("prvm: panel flagged synchronous but tick "
                                 "counts differ on day " + std::to_string(day_label));
    prices.resize(n_ticks, p);
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < n_ticks; ++j) prices(j, i) = day_ticks[i][j].log_price;
  } else {
    prices = refresh_time_sync(day_ticks);
  }
  return prvm_core(prices, eta, window_theta, day_label);
}

DailyVolMatrix prvm(const TickPanel& panel, int day, double window_theta) {
  if (day < 0 || day >= panel.n_days)
    throw std::out_of_range("prvm: day out of range");
  DailyVolMatrix out;
  out.day = day;
  out.matrix = prvm_day(panel.ticks[day], panel.synchronous, window_theta, day);
  return out;
}

DailyVolMatrix psd_project(const DailyVolMatrix& v) {
  DailyVolMatrix out;
  out.day = v.day;
  out.matrix = psd_clip(v.matrix);
  out.psd_projected = true;
  return out;
}

}  // namespace svito
