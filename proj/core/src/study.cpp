#include "svito/study.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "svito/factor.hpp"
#include "svito/portfolio.hpp"
#include "svito/predict.hpp"
#include "svito/realized.hpp"

namespace svito {

namespace fs = std::filesystem;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (int i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

Matrix matrix_from_json(const Json& j, const std::string& path) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw std::runtime_error(path + ": expected an array of rows");
  const int nr = static_cast<int>(j.size());
  const int nc = static_cast<int>(j[0].size());
  Matrix m(nr, nc);
  for (int i = 0; i < nr; ++i) {
    if (static_cast<int>(j[i].size()) != nc)
      throw std::runtime_error(path + ": ragged rows");
    for (int k = 0; k < nc; ++k) {
      if (!j[i][k].is_number())
        throw std::runtime_error(path + "[" + std::to_string(i) + "][" +
                                 std::to_string(k) + "]: expected a number");
      m(i, k) = j[i][k].get<double>();
    }
  }
  return m;
}

template <typename T>
T get_field(const Json& j, const std::string& key, const T& fallback,
            const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw std::runtime_error(where + "." + key + ": wrong type");
  }
}

using Metrics = std::map<std::string, double>;

// One full pipeline pass on a simulated panel; keys are "method|metric".
Metrics sim_replication(const SimConfig& cfg, const StudyConfig& study) {
  Metrics out;
  SimOutput sim = simulate(cfg);

  std::vector<Matrix> gammas;
  gammas.reserve(cfg.n);
  for (int d = 0; d < cfg.n; ++d)
    gammas.push_back(psd_clip(prvm_day(sim.ticks.ticks[d],
                                       sim.ticks.synchronous, 1.0, d)));
  sim.ticks.ticks.clear();
  sim.ticks.ticks.shrink_to_fit();

  FactorState st = extract_factors(gammas, cfg.r);
  const SVParams truth = derive_beta(cfg.alpha0, cfg.alpha, cfg.nu);

  PoetConfig poet_cfg;
  poet_cfg.rank = cfg.r;
  poet_cfg.threshold_omega = study.threshold_omega;
  poet_cfg.n = cfg.n;
  poet_cfg.m = cfg.m;
  Matrix gamma_bar = Matrix::Zero(cfg.p, cfg.p);
  for (const auto& g : gammas) gamma_bar += g;
  gamma_bar /= cfg.n;
  Matrix idio = poet_idio(gamma_bar, poet_cfg);

  const Matrix oracle = conditional_oracle(sim, truth);

  auto record_pred = [&](const std::string& method, const Matrix& pred) {
    MatrixErrors e = matrix_errors(pred, oracle);
    out[method + "|spectral"] = e.spectral;
    out[method + "|frobenius"] = e.frobenius;
    out[method + "|max"] = e.max_abs;
    out[method + "|rel_spectral"] = e.rel_spectral;
    out[method + "|rel_frobenius"] = e.rel_frobenius;
    out[method + "|rel_max"] = e.rel_max;
    if (e.weighted_valid) out[method + "|weighted"] = e.weighted;
  };

  FitReport lse;
  bool have_lse = false;
  for (const auto& est : study.estimators) {
    FitReport fit;
    if (est == "lse") {
      fit = lse_fit(st.psi_hat, cfg.q);
      lse = fit;
      have_lse = true;
    } else if (est == "qmle") {
      if (!have_lse) {
        lse = lse_fit(st.psi_hat, cfg.q);
        have_lse = true;
      }
      fit = qmle_fit(st.psi_hat, cfg.q, lse.theta);
    } else {
      throw std::runtime_error("unknown estimator: " + est);
    }
    const Vector db0 = fit.theta.beta0 - truth.beta0;
    out[est + "|b0_spectral"] = db0.norm();
    out[est + "|b0_frobenius"] = db0.norm();
    out[est + "|b0_max"] = db0.cwiseAbs().maxCoeff();
    const Matrix db1 = fit.theta.betas[0] - truth.betas[0];
    out[est + "|b1_spectral"] = spectral_norm(db1);
    out[est + "|b1_frobenius"] = db1.norm();
    out[est + "|b1_max"] = db1.cwiseAbs().maxCoeff();
    out[est + "|converged"] = fit.converged ? 1.0 : 0.0;

    record_pred("svpoet_" + est, sv_poet(st, fit.theta, idio).total);
  }

  for (const auto& bl : study.baselines) {
    if (bl == "poet-prev") {
      PoetConfig day_cfg = poet_cfg;
      day_cfg.n = 0;  // single-day threshold level
      record_pred("poet_prev", poet_estimate(gammas.back(), day_cfg));
    } else if (bl == "prvm-prev") {
      record_pred("prvm_prev", gammas.back());
    } else {
      throw std::runtime_error("unknown baseline: " + bl);
    }
  }

  if (cfg.p > 4) {
    RankSelection sel = select_rank(gammas, cfg.m, std::min(30, cfg.p - 1));
    out["rank|selected"] = sel.rank;
    out["rank|hit"] = sel.rank == cfg.r ? 1.0 : 0.0;
  }
  return out;
}

struct Agg {
  double sum = 0.0, sumsq = 0.0;
  int count = 0;
  void add(double v) {
    sum += v;
    sumsq += v * v;
    ++count;
  }
};

void aggregate_cell(const GridCell& cell,
                    const std::vector<Metrics>& rep_metrics,
                    ResultTable& table) {
  std::map<std::string, Agg> agg;
  for (const auto& m : rep_metrics)
    for (const auto& [key, v] : m) agg[key].add(v);
  for (const auto& [key, a] : agg) {
    ResultRow row;
    row.n = cell.n;
    row.m = cell.m;
    row.p = cell.p;
    const auto bar = key.find('|');
    row.method = key.substr(0, bar);
    row.metric = key.substr(bar + 1);
    row.mean = a.sum / a.count;
    row.reps = a.count;
    if (a.count > 1) {
      const double var =
          std::max(0.0, (a.sumsq - a.sum * a.sum / a.count) / (a.count - 1));
      row.se = std::sqrt(var / a.count);
    }
    table.rows.push_back(row);
  }
}

}  // namespace

void StudyConfig::validate() const {
  if (replications < 1)
    throw std::runtime_error("config.replications: must be >= 1");
  if (grid.empty()) throw std::runtime_error("config.grid: must be non-empty");
  if (refit_every < 1)
    throw std::runtime_error("config.refit_every: must be >= 1");
  if (stop_after < 0)
    throw std::runtime_error("config.stop_after: must be >= 0");
  if (forecast_origin < 0)
    throw std::runtime_error("config.forecast_origin: must be >= 0");
  if (estimators.empty())
    throw std::runtime_error("config.estimators: must be non-empty");
  for (const auto& e : estimators)
    if (e != "lse" && e != "qmle")
      throw std::runtime_error("config.estimators: unknown estimator '" + e +
                               "' (expected lse or qmle)");
  for (const auto& b : baselines)
    if (b != "poet-prev" && b != "prvm-prev")
      throw std::runtime_error("config.baselines: unknown baseline '" + b +
                               "' (expected poet-prev or prvm-prev)");
  for (double c0 : portfolio_c0)
    if (c0 < 1.0)
      throw std::runtime_error("config.portfolio_c0: bounds must be >= 1");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    SimConfig c = sim;
    c.n = grid[i].n;
    c.m = grid[i].m;
    c.p = grid[i].p;
    try {
      c.validate();
    } catch (const std::exception& e) {
      throw std::runtime_error("config.grid[" + std::to_string(i) +
                               "]: " + e.what());
    }
  }
}

Json StudyConfig::to_json() const {
  Json j;
  j["alpha0"] = matrix_to_json(sim.alpha0);
  Json alphas = Json::array();
  for (const auto& a : sim.alpha) alphas.push_back(matrix_to_json(a));
  j["alpha"] = alphas;
  j["nu"] = matrix_to_json(sim.nu);
  j["r"] = sim.r;
  j["q"] = sim.q;
  j["substeps_per_obs"] = sim.substeps_per_obs;
  j["noise_sd"] = sim.noise_sd;
  j["burnin_days"] = sim.burnin_days;
  j["poisson_thinning"] = sim.poisson_thinning;
  j["thinning_keep"] = sim.thinning_keep;
  Json grid_j = Json::array();
  for (const auto& cell : grid)
    grid_j.push_back({{"n", cell.n}, {"m", cell.m}, {"p", cell.p}});
  j["grid"] = grid_j;
  j["replications"] = replications;
  j["estimators"] = estimators;
  j["baselines"] = baselines;
  j["threshold_omega"] = threshold_omega;
  j["portfolio_c0"] = portfolio_c0;
  j["forecast_origin"] = forecast_origin;
  j["refit_every"] = refit_every;
  j["seed"] = seed;
  return j;
}

StudyConfig StudyConfig::from_json(const Json& j) {
  if (!j.is_object()) throw std::runtime_error("config: expected a JSON object");
  StudyConfig c;
  c.sim = default_sim_config();
  if (j.contains("alpha0")) c.sim.alpha0 = matrix_from_json(j["alpha0"], "config.alpha0");
  if (j.contains("nu")) c.sim.nu = matrix_from_json(j["nu"], "config.nu");
  if (j.contains("alpha")) {
    if (!j["alpha"].is_array())
      throw std::runtime_error("config.alpha: expected an array of matrices");
    c.sim.alpha.clear();
    for (std::size_t i = 0; i < j["alpha"].size(); ++i)
      c.sim.alpha.push_back(matrix_from_json(
          j["alpha"][i], "config.alpha[" + std::to_string(i) + "]"));
  }
  c.sim.r = get_field(j, "r", c.sim.r, "config");
  c.sim.q = static_cast<int>(c.sim.alpha.size());
  c.sim.substeps_per_obs =
      get_field(j, "substeps_per_obs", c.sim.substeps_per_obs, "config");
  c.sim.noise_sd = get_field(j, "noise_sd", c.sim.noise_sd, "config");
  c.sim.burnin_days = get_field(j, "burnin_days", c.sim.burnin_days, "config");
  c.sim.poisson_thinning =
      get_field(j, "poisson_thinning", c.sim.poisson_thinning, "config");
  c.sim.thinning_keep =
      get_field(j, "thinning_keep", c.sim.thinning_keep, "config");

  if (j.contains("grid")) {
    if (!j["grid"].is_array())
      throw std::runtime_error("config.grid: expected an array");
    c.grid.clear();
    for (std::size_t i = 0; i < j["grid"].size(); ++i) {
      const auto& cell = j["grid"][i];
      const std::string where = "config.grid[" + std::to_string(i) + "]";
      if (!cell.is_object()) throw std::runtime_error(where + ": expected an object");
      GridCell g;
      g.n = get_field(cell, "n", g.n, where);
      g.m = get_field(cell, "m", g.m, where);
      g.p = get_field(cell, "p", g.p, where);
      c.grid.push_back(g);
    }
  } else {
    c.grid = {GridCell{}};
  }
  c.replications = get_field(j, "replications", c.replications, "config");
  c.estimators = get_field(j, "estimators", c.estimators, "config");
  c.baselines = get_field(j, "baselines", c.baselines, "config");
  c.threshold_omega =
      get_field(j, "threshold_omega", c.threshold_omega, "config");
  c.portfolio_c0 = get_field(j, "portfolio_c0", c.portfolio_c0, "config");
  c.forecast_origin = get_field(j, "forecast_origin", c.forecast_origin, "config");
  c.refit_every = get_field(j, "refit_every", c.refit_every, "config");
  c.output_dir = get_field<std::string>(j, "output_dir", c.output_dir, "config");
  c.seed = get_field<std::uint64_t>(j, "seed", c.seed, "config");
  c.stop_after = get_field(j, "stop_after", c.stop_after, "config");
  c.validate();
  return c;
}

ResultTable run_sim_study(const StudyConfig& config) {
  config.validate();
  const std::string chash = config.hash();
  const fs::path out_dir(config.output_dir);
  const fs::path ckpt_dir = out_dir / "checkpoints";
  fs::create_directories(ckpt_dir);

  ResultTable table;
  table.config_hash = chash;
  int attempted = 0, failed = 0, fresh = 0;
  bool stopped = false;

  for (std::size_t ci = 0; ci < config.grid.size() && !stopped; ++ci) {
    const GridCell& cell = config.grid[ci];
    std::vector<Metrics> cell_metrics;
    for (int rep = 0; rep < config.replications; ++rep) {
      const fs::path ckpt =
          ckpt_dir / ("cell" + std::to_string(ci) + "_rep" +
                      std::to_string(rep) + ".json");
      Metrics metrics;
      bool rep_failed = false;
      std::string reason;

      if (fs::exists(ckpt)) {
        Json j = read_json(ckpt.string());
        if (j.value("config_hash", "") != chash)
          throw std::runtime_error(
              "checkpoint " + ckpt.string() +
              " was written by a different configuration; clear " +
              ckpt_dir.string() + " to start over");
        if (j.contains("failed")) {
          rep_failed = true;
          reason = j["failed"].get<std::string>();
        } else {
          for (const auto& [k, v] : j.at("metrics").items())
            metrics[k] = v.get<double>();
        }
      } else {
        if (config.stop_after > 0 && fresh >= config.stop_after) {
          stopped = true;
          break;
        }
        SimConfig sc = config.sim;
        sc.n = cell.n;
        sc.m = cell.m;
        sc.p = cell.p;
        sc.seed = splitmix64(config.seed ^ (ci * 1000003ull + rep + 1));
        Json j;
        j["config_hash"] = chash;
        j["cell"] = {{"n", cell.n}, {"m", cell.m}, {"p", cell.p}};
        j["rep"] = rep;
        j["seed"] = sc.seed;
        try {
          metrics = sim_replication(sc, config);
          Json mj = Json::object();
          for (const auto& [k, v] : metrics) mj[k] = v;
          j["metrics"] = mj;
        } catch (const std::exception& e) {
          rep_failed = true;
          reason = e.what();
          j["failed"] = reason;
        }
        write_json(ckpt.string(), j);
        ++fresh;
      }

      ++attempted;
      if (rep_failed) {
        ++failed;
        std::cerr << "replication cell " << ci << " rep " << rep
                  << " failed: " << reason << "\n";
      } else {
        cell_metrics.push_back(std::move(metrics));
      }
    }
    if (!stopped) aggregate_cell(cell, cell_metrics, table);
  }

  table.failures = failed;
  if (attempted > 0 && failed * 10 > attempted)
    throw std::runtime_error("more than 10% of replications failed (" +
                             std::to_string(failed) + "/" +
                             std::to_string(attempted) + ")");
  if (stopped) return table;  // partial run, no aggregate files

  write_result_csv((out_dir / "sim_results.csv").string(), table);
  auto view = [&](const std::string& file, auto pred) {
    ResultTable sub;
    sub.config_hash = chash;
    for (const auto& row : table.rows)
      if (pred(row)) sub.rows.push_back(row);
    write_result_csv((out_dir / file).string(), sub);
  };
  view("table_beta0.csv", [](const ResultRow& r) {
    return r.metric.rfind("b0_", 0) == 0;
  });
  view("table_beta1.csv", [](const ResultRow& r) {
    return r.metric.rfind("b1_", 0) == 0;
  });
  view("table_prediction.csv", [](const ResultRow& r) {
    return r.method.rfind("svpoet", 0) == 0 || r.method == "poet_prev" ||
           r.method == "prvm_prev";
  });
  return table;
}

ResultTable run_oos_study(const StudyConfig& config) {
  config.validate();
  const GridCell cell = config.grid.front();
  SimConfig sc = config.sim;
  sc.n = cell.n;
  sc.m = cell.m;
  sc.p = cell.p;
  sc.seed = splitmix64(config.seed ^ 0x05afull);

  const int h = config.forecast_origin > 0 ? config.forecast_origin : cell.n / 2;
  if (h < sc.q + vech_dim(sc.r) + 2 || h >= cell.n)
    throw std::runtime_error(
        "config.forecast_origin: must leave enough fitting days and at least "
        "one evaluation day");

  SimOutput sim = simulate(sc);
  std::vector<Matrix> gammas;
  for (int d = 0; d < cell.n; ++d)
    gammas.push_back(psd_clip(prvm_day(sim.ticks.ticks[d],
                                       sim.ticks.synchronous, 1.0, d)));
  sim.ticks.ticks.clear();
  sim.ticks.ticks.shrink_to_fit();

  struct Fit {
    SVParams theta;
    bool valid = false;
  };
  std::map<std::string, Fit> fits;
  for (const auto& est : config.estimators) fits[est] = {};

  std::map<std::string, Agg> agg;
  int failed = 0, attempted = 0;

  for (int k = h; k < cell.n; ++k) {
    ++attempted;
    try {
      std::vector<Matrix> window(gammas.begin(), gammas.begin() + k);
      FactorState st = extract_factors(window, sc.r);

      PoetConfig poet_cfg;
      poet_cfg.rank = sc.r;
      poet_cfg.threshold_omega = config.threshold_omega;
      poet_cfg.n = k;
      poet_cfg.m = cell.m;
      Matrix gamma_bar = Matrix::Zero(cell.p, cell.p);
      for (const auto& g : window) gamma_bar += g;
      gamma_bar /= k;
      Matrix idio = poet_idio(gamma_bar, poet_cfg);

      const bool refit = (k - h) % config.refit_every == 0;
      FitReport lse;
      bool have_lse = false;
      std::map<std::string, Matrix> preds;
      for (const auto& est : config.estimators) {
        if (refit || !fits[est].valid) {
          if (!have_lse) {
            lse = lse_fit(st.psi_hat, sc.q);
            have_lse = true;
          }
          fits[est].theta =
              est == "qmle" ? qmle_fit(st.psi_hat, sc.q, lse.theta).theta
                            : lse.theta;
          fits[est].valid = true;
        }
        preds["svpoet_" + est] = sv_poet(st, fits[est].theta, idio).total;
      }
      for (const auto& bl : config.baselines) {
        if (bl == "poet-prev") {
          PoetConfig day_cfg = poet_cfg;
          day_cfg.n = 0;
          preds["poet_prev"] = poet_estimate(window.back(), day_cfg);
        } else if (bl == "prvm-prev") {
          preds["prvm_prev"] = window.back();
        }
      }

      const Matrix& target = gammas[k];
      for (const auto& [method, pred] : preds) {
        MatrixErrors e = matrix_errors(pred, target);
        agg[method + "|mpe_spectral"].add(e.rel_spectral);
        agg[method + "|mpe_frobenius"].add(e.rel_frobenius);
        agg[method + "|mpe_max"].add(e.rel_max);
        for (double c0 : config.portfolio_c0) {
          PortfolioProblem prob;
          prob.sigma = pred;
          prob.c0 = c0;
          PortfolioResult res = min_variance(prob);
          std::ostringstream key;
          key << method << "|risk_c0_" << c0;
          agg[key.str()].add(oos_risk(res.weights, target));
        }
      }
    } catch (const std::exception& e) {
      ++failed;
      std::cerr << "out-of-sample day " << k << " failed: " << e.what() << "\n";
    }
  }
  if (failed * 10 > attempted)
    throw std::runtime_error("more than 10% of evaluation days failed");

  ResultTable table;
  table.config_hash = config.hash();
  table.failures = failed;
  for (const auto& [key, a] : agg) {
    ResultRow row;
    row.n = cell.n;
    row.m = cell.m;
    row.p = cell.p;
    const auto bar = key.find('|');
    row.method = key.substr(0, bar);
    row.metric = key.substr(bar + 1);
    row.mean = a.sum / a.count;
    row.reps = a.count;
    if (a.count > 1) {
      const double var =
          std::max(0.0, (a.sumsq - a.sum * a.sum / a.count) / (a.count - 1));
      row.se = std::sqrt(var / a.count);
    }
    table.rows.push_back(row);
  }

  const fs::path out_dir(config.output_dir);
  fs::create_directories(out_dir);
  ResultTable mpe, risk;
  mpe.config_hash = risk.config_hash = table.config_hash;
  for (const auto& row : table.rows)
    (row.metric.rfind("mpe_", 0) == 0 ? mpe : risk).rows.push_back(row);
  write_result_csv((out_dir / "oos_mpe.csv").string(), mpe);
  write_result_csv((out_dir / "oos_portfolio.csv").string(), risk);
  return table;
}

void write_result_csv(const std::string& path, const ResultTable& table) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "n,m,p,method,metric,mean,se,reps,config_hash,version\n";
  for (const auto& row : table.rows)
    out << row.n << ',' << row.m << ',' << row.p << ',' << row.method << ','
        << row.metric << ',' << format_double(row.mean) << ','
        << format_double(row.se) << ',' << row.reps << ','
        << table.config_hash << ',' << SVITO_VERSION << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string render_markdown(const std::string& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw std::runtime_error("cannot open: " + csv_path);
  std::ostringstream md;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    std::ostringstream row;
    std::stringstream ss(line);
    std::string cell;
    int cols = 0;
    while (std::getline(ss, cell, ',')) {
      row << "| " << cell << ' ';
      ++cols;
    }
    row << "|\n";
    md << row.str();
    if (header) {
      for (int i = 0; i < cols; ++i) md << "| --- ";
      md << "|\n";
      header = false;
    }
  }
  return md.str();
}

}  // namespace svito
