#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "svito/io.hpp"
#include "svito/realized.hpp"
#include "svito/sim.hpp"
#include "svito/study.hpp"
#include "svito/svmodel.hpp"

namespace fs = std::filesystem;
using namespace svito;

namespace {

int report(int crit, bool ok, const std::string& detail) {
  std::printf("criterion %d: %s (%s)\n", crit, ok ? "PASS" : "FAIL",
              detail.c_str());
  std::fflush(stdout);
  return ok ? 0 : 1;
}

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// criterion 1: closed-form beta mapping against frozen reference values

int criterion_1() {
  SimConfig c = default_sim_config();
  SVParams beta = derive_beta(c.alpha0, c.alpha, c.nu);
  Vector b0_ref(6);
  b0_ref << 0.367, 0.0, 0.005, 0.252, -0.024, 0.143;
  Matrix b1_ref(6, 6);
  b1_ref << 0.021, 0.105, 0.164, 0.138, 0.418, 0.328,
            0.0, 0.055, -0.056, 0.150, 0.063, -0.219,
            0.0, -0.022, 0.033, -0.062, 0.001, 0.129,
            0.0, 0.0, 0.0, 0.175, -0.365, 0.191,
            0.0, 0.0, 0.0, -0.073, 0.179, -0.106,
            0.0, 0.0, 0.0, 0.031, -0.085, 0.060;
  const double d0 = (beta.beta0 - b0_ref).cwiseAbs().maxCoeff();
  const double d1 = (beta.betas[0] - b1_ref).cwiseAbs().maxCoeff();
  const bool ok = d0 <= 5e-4 && d1 <= 5e-4;
  return report(1, ok,
                "max |beta0 - ref| = " + fmt(d0) +
                    ", max |beta1 - ref| = " + fmt(d1) + ", tolerance 5e-4");
}

// ---------------------------------------------------------------------------
// criteria 2 and 3 share a long exact factor-volatility series

std::vector<Matrix> long_psi_series() {
  SimConfig c = default_sim_config();
  c.seed = 20260824;
  c.burnin_days = 200;
  return simulate_psi_series(c, 20000, 2000);
}

int criterion_2() {
  const std::vector<Matrix> psi = long_psi_series();
  SimConfig c = default_sim_config();
  SVParams beta = derive_beta(c.alpha0, c.alpha, c.nu);
  const int n = static_cast<int>(psi.size());
  Vector sum = Vector::Zero(6), sumsq = Vector::Zero(6);
  for (int k = 1; k < n; ++k) {
    Vector res = vech(psi[k]) - beta.beta0 - beta.betas[0] * vech(psi[k - 1]);
    sum += res;
    sumsq += res.cwiseProduct(res);
  }
  const double cnt = n - 1;
  double worst = 0.0;
  for (int i = 0; i < 6; ++i) {
    const double mean = sum[i] / cnt;
    const double var = std::max(0.0, sumsq[i] / cnt - mean * mean);
    const double se = std::sqrt(var / cnt);
    worst = std::max(worst, std::abs(mean) / std::max(se, 1e-300));
  }
  return report(2, worst <= 3.0,
                "max |mean residual| = " + fmt(worst) +
                    " standard errors over 6 components, limit 3");
}

int criterion_3() {
  const std::vector<Matrix> psi = long_psi_series();
  SimConfig c = default_sim_config();
  SVParams truth = derive_beta(c.alpha0, c.alpha, c.nu);
  FitReport lse = lse_fit(psi, 1);
  const double lse_err =
      (lse.theta.to_flat() - truth.to_flat()).cwiseAbs().maxCoeff();
  FitReport qmle = qmle_fit(psi, 1, lse.theta);
  const double gap =
      (qmle.theta.to_flat() - lse.theta.to_flat()).cwiseAbs().maxCoeff();
  const bool ok = lse_err <= 0.05 && gap <= 0.01;
  return report(3, ok,
                "LSE max error " + fmt(lse_err) +
                    " (limit 0.05), QMLE-LSE gap " + fmt(gap) +
                    " (limit 0.01)");
}

// ---------------------------------------------------------------------------
// criteria 4, 5, and 7 share one checkpointed Monte Carlo study

StudyConfig desk_config() {
  StudyConfig c;
  c.sim = default_sim_config();
  c.grid = {GridCell{125, 390, 100}, GridCell{125, 780, 100},
            GridCell{250, 390, 100}, GridCell{250, 780, 100}};
  c.replications = 50;
  c.output_dir = "acceptance_cache";
  c.seed = 424242;
  return c;
}

struct Stat {
  double mean = 0.0;
  double se = 0.0;
  bool found = false;
};

struct TableIndex {
  std::map<std::string, Stat> stats;
  Stat get(int n, int m, const std::string& method,
           const std::string& metric) const {
    std::ostringstream key;
    key << n << '|' << m << '|' << method << '|' << metric;
    auto it = stats.find(key.str());
    return it == stats.end() ? Stat{} : it->second;
  }
};

TableIndex index_table(const ResultTable& table) {
  TableIndex idx;
  for (const auto& row : table.rows) {
    std::ostringstream key;
    key << row.n << '|' << row.m << '|' << row.method << '|' << row.metric;
    idx.stats[key.str()] = Stat{row.mean, row.se, true};
  }
  return idx;
}

double se_diff(const Stat& a, const Stat& b) {
  return std::sqrt(a.se * a.se + b.se * b.se);
}

int criterion_4() {
  TableIndex idx = index_table(run_sim_study(desk_config()));
  const std::vector<std::string> metrics{"b0_spectral", "b0_frobenius",
                                         "b0_max",      "b1_spectral",
                                         "b1_frobenius", "b1_max"};
  int checks = 0, violations = 0;
  std::string first_bad;
  auto fail = [&](const std::string& what) {
    ++violations;
    if (first_bad.empty()) first_bad = what;
  };
  for (const std::string est : {"lse", "qmle"}) {
    for (const auto& metric : metrics) {
      for (int m : {390, 780}) {  // error decreases in n, slack 1 SE
        Stat lo = idx.get(125, m, est, metric);
        Stat hi = idx.get(250, m, est, metric);
        ++checks;
        if (!lo.found || !hi.found || hi.mean > lo.mean + se_diff(lo, hi))
          fail(est + "|" + metric + " not decreasing in n at m=" +
               std::to_string(m));
      }
      for (int n : {125, 250}) {  // error decreases in m, slack 1 SE
        Stat lo = idx.get(n, 390, est, metric);
        Stat hi = idx.get(n, 780, est, metric);
        ++checks;
        if (!lo.found || !hi.found || hi.mean > lo.mean + se_diff(lo, hi))
          fail(est + "|" + metric + " not decreasing in m at n=" +
               std::to_string(n));
      }
    }
  }
  for (const auto& metric : metrics) {  // QMLE at least as accurate as LSE
    for (int n : {125, 250})
      for (int m : {390, 780}) {
        Stat l = idx.get(n, m, "lse", metric);
        Stat q = idx.get(n, m, "qmle", metric);
        ++checks;
        if (!l.found || !q.found || q.mean > l.mean + se_diff(l, q))
          fail("qmle above lse for " + metric + " at n=" + std::to_string(n) +
               ", m=" + std::to_string(m));
      }
  }
  std::string detail = std::to_string(checks - violations) + "/" +
                       std::to_string(checks) + " ordering checks hold";
  if (violations) detail += "; first violation: " + first_bad;
  return report(4, violations == 0, detail);
}

int criterion_5() {
  TableIndex idx = index_table(run_sim_study(desk_config()));
  int checks = 0, violations = 0;
  double worst_margin = 1e300;
  std::string first_bad;
  for (int n : {125, 250})
    for (int m : {390, 780})
      for (const std::string est : {"svpoet_lse", "svpoet_qmle"})
        for (const std::string base : {"poet_prev", "prvm_prev"}) {
          Stat a = idx.get(n, m, est, "rel_frobenius");
          Stat b = idx.get(n, m, base, "rel_frobenius");
          ++checks;
          const double margin =
              (b.mean - a.mean) / std::max(se_diff(a, b), 1e-300);
          worst_margin = std::min(worst_margin, margin);
          if (!a.found || !b.found || margin <= 2.0) {
            ++violations;
            if (first_bad.empty())
              first_bad = est + " vs " + base + " at n=" + std::to_string(n) +
                          ", m=" + std::to_string(m) + " (margin " +
                          fmt(margin) + " SE)";
          }
        }
  std::string detail = std::to_string(checks - violations) + "/" +
                       std::to_string(checks) +
                       " cells ordered, smallest margin " + fmt(worst_margin) +
                       " SE (limit 2)";
  if (violations) detail += "; first violation: " + first_bad;
  return report(5, violations == 0, detail);
}

int criterion_7() {
  TableIndex idx = index_table(run_sim_study(desk_config()));
  Stat hit = idx.get(125, 780, "rank", "hit");
  const bool ok = hit.found && hit.mean >= 0.9;
  return report(7, ok,
                "rank = 3 recovered in " + fmt(100.0 * hit.mean) +
                    "% of 50 replications at n=125, m=780, p=100 (limit 90%)");
}

// ---------------------------------------------------------------------------
// criterion 6: pre-averaging calibration on constant-volatility data

int criterion_6() {
  const double var = 0.04;
  const double noise_sd = 0.005;
  const int reps = 1000;
  std::mt19937_64 rng(8675309);
  std::normal_distribution<double> nd;
  auto run_scale = [&](int m) {
    double sum = 0.0, sumsq = 0.0;
    const double sq = std::sqrt(var / m);
    std::vector<std::vector<Tick>> day(1);
    for (int rep = 0; rep < reps; ++rep) {
      day[0].clear();
      double x = 0.0;
      for (int j = 0; j < m; ++j) {
        x += sq * nd(rng);
        day[0].push_back(
            Tick{static_cast<double>(j + 1) / m, x + noise_sd * nd(rng)});
      }
      const double est = prvm_day(day, true, 1.0, rep)(0, 0);
      sum += est;
      sumsq += (est - var) * (est - var);
    }
    return std::pair<double, double>(sum / reps, std::sqrt(sumsq / reps));
  };
  auto [mean390, rmse390] = run_scale(390);
  auto [mean2340, rmse2340] = run_scale(2340);
  const bool ok =
      std::abs(mean390 - var) <= 0.05 * var && rmse2340 < rmse390;
  return report(6, ok,
                "mean at m=390 is " + fmt(mean390) + " (target 0.04 +/- 5%), "
                    "RMSE " + fmt(rmse390) + " at m=390 vs " + fmt(rmse2340) +
                    " at m=2340");
}

// ---------------------------------------------------------------------------
// criterion 8: property suites, delegated to the unit test binary

int criterion_8() {
  const std::string cmd = std::string(SVITO_TESTS_PATH) +
                          " -ts=linalg,factor,predict,portfolio > /dev/null";
  const int rc = std::system(cmd.c_str());
  return report(8, rc == 0,
                std::string("property suites linalg, factor, predict, "
                            "portfolio ") +
                    (rc == 0 ? "all pass" : "returned a failure"));
}

// ---------------------------------------------------------------------------
// criterion 9: determinism and resume-safety of the study CLI

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return "<missing:" + p.string() + ">";
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int criterion_9() {
  const fs::path root = fs::temp_directory_path() / "svito_acceptance_9";
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path cfg_path = root / "config.json";
  {
    Json cfg;
    cfg["grid"] = Json::array({{{"n", 12}, {"m", 60}, {"p", 12}}});
    cfg["replications"] = 4;
    cfg["substeps_per_obs"] = 2;
    cfg["burnin_days"] = 3;
    cfg["seed"] = 20252026;
    write_json(cfg_path.string(), cfg);
  }
  auto run = [&](const std::string& out, const std::string& extra) {
    const std::string cmd = std::string(SVITO_CLI_PATH) +
                            " study-sim --config " + cfg_path.string() +
                            " --out " + (root / out).string() + extra +
                            " > /dev/null";
    return std::system(cmd.c_str());
  };
  bool ok = run("a", "") == 0 && run("b", "") == 0;
  ok = ok && run("c", " --stop-after 2") == 0;  // interrupted run
  ok = ok && !fs::exists(root / "c" / "sim_results.csv");
  ok = ok && run("c", "") == 0;  // resumes from the checkpoints
  std::string detail;
  if (ok) {
    const std::vector<std::string> files{"sim_results.csv", "table_beta0.csv",
                                         "table_beta1.csv",
                                         "table_prediction.csv"};
    for (const auto& f : files) {
      const std::string a = slurp(root / "a" / f);
      if (a != slurp(root / "b" / f)) {
        ok = false;
        detail = f + " differs between two identical runs";
        break;
      }
      if (a != slurp(root / "c" / f)) {
        ok = false;
        detail = f + " differs after kill-and-resume";
        break;
      }
    }
  } else {
    detail = "study-sim invocation or partial-run guard failed";
  }
  if (ok)
    detail = "4 result CSVs byte-identical across rerun and kill-and-resume";
  fs::remove_all(root);
  return report(9, ok, detail);
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: %s <criterion 1-9>\n", argv[0]);
    return 2;
  }
  const int crit = std::atoi(argv[1]);
  try {
    switch (crit) {
      case 1: return criterion_1();
      case 2: return criterion_2();
      case 3: return criterion_3();
      case 4: return criterion_4();
      case 5: return criterion_5();
      case 6: return criterion_6();
      case 7: return criterion_7();
      case 8: return criterion_8();
      case 9: return criterion_9();
      default:
        std::fprintf(stderr, "unknown criterion %d\n", crit);
        return 2;
    }
  } catch (const std::exception& e) {
    return report(crit, false, std::string("exception: ") + e.what());
  }
}
