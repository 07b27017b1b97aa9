#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "svito/factor.hpp"
#include "svito/io.hpp"
#include "svito/portfolio.hpp"
#include "svito/predict.hpp"
#include "svito/realized.hpp"
#include "svito/sim.hpp"
#include "svito/study.hpp"
#include "svito/svmodel.hpp"

namespace fs = std::filesystem;
using namespace svito;

namespace {

std::string numbered(const std::string& stem, int k) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%04d.csv", stem.c_str(), k);
  return buf;
}

std::vector<Matrix> read_matrix_series(const std::string& dir,
                                       const std::string& stem) {
  std::vector<Matrix> out;
  for (int k = 0;; ++k) {
    const fs::path p = fs::path(dir) / numbered(stem, k);
    if (!fs::exists(p)) break;
    out.push_back(read_matrix_csv(p.string()));
  }
  if (out.empty())
    throw std::runtime_error("no " + stem + "_NNNN.csv files found in " + dir);
  return out;
}

StudyConfig load_study_config(const std::string& config_path,
                              std::optional<std::uint64_t> seed,
                              const std::string& out_dir, bool paper_scale,
                              int stop_after) {
  StudyConfig cfg = config_path.empty()
                        ? StudyConfig::from_json(Json::object())
                        : StudyConfig::from_json(read_json(config_path));
  if (seed) cfg.seed = *seed;
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  if (stop_after > 0) cfg.stop_after = stop_after;
  if (paper_scale) {
    cfg.grid.clear();
    for (int n : {125, 250, 500})
      for (int m : {390, 780, 2340}) cfg.grid.push_back({n, m, 200});
    cfg.replications = 500;
  }
  return cfg;
}

SimConfig cell_sim_config(const StudyConfig& cfg) {
  SimConfig sc = cfg.sim;
  sc.n = cfg.grid.front().n;
  sc.m = cfg.grid.front().m;
  sc.p = cfg.grid.front().p;
  sc.seed = cfg.seed;
  return sc;
}

int run(int argc, char** argv) {
  CLI::App app{"Factor-based vast volatility modeling pipeline"};
  app.require_subcommand(1);

  std::string config_path, out_dir, in_dir;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  bool paper_scale = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON configuration file");
    sub->add_option("--seed", seed, "Master seed override");
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--threads", threads,
                    "Worker threads (current implementation is sequential)");
    sub->add_flag("--paper-scale", paper_scale,
                  "Full-scale study grid instead of the desk-scale default");
  };

  auto* sim_cmd = app.add_subcommand("simulate", "Simulate a tick panel with truth matrices");
  add_common(sim_cmd);

  auto* realized_cmd = app.add_subcommand(
      "realized", "Daily pre-averaged volatility matrices from a tick panel");
  double window_theta = 1.0;
  bool project = false;
  realized_cmd->add_option("--in", in_dir, "Tick CSV file")->required();
  realized_cmd->add_option("--window-theta", window_theta, "Pre-averaging window scale");
  realized_cmd->add_flag("--project", project, "Clip each matrix to the PSD cone");
  add_common(realized_cmd);

  auto* factor_cmd = app.add_subcommand(
      "factor", "Factor loading and daily factor volatilities from gamma matrices");
  int rank = 3;
  bool do_select = false;
  factor_cmd->add_option("--in", in_dir, "Directory with gamma_NNNN.csv")->required();
  factor_cmd->add_option("--rank", rank, "Number of factors");
  factor_cmd->add_flag("--select-rank", do_select, "Run the penalized rank scan");
  int rank_m = 390;
  factor_cmd->add_option("--rank-m", rank_m, "Intraday observation count for the scan penalty");
  add_common(factor_cmd);

  auto* fit_cmd = app.add_subcommand("fit", "Fit the vech-AR dynamics on psi matrices");
  std::string method = "qmle";
  int order = 1;
  bool scan_order = false;
  fit_cmd->add_option("--in", in_dir, "Directory with psi_NNNN.csv")->required();
  fit_cmd->add_option("--method", method, "lse or qmle")
      ->check(CLI::IsMember({"lse", "qmle"}));
  fit_cmd->add_option("--order", order, "AR order q");
  fit_cmd->add_flag("--select-order", scan_order, "AIC/BIC scan over q = 1..3");
  add_common(fit_cmd);

  auto* predict_cmd = app.add_subcommand(
      "predict", "One-day-ahead volatility matrix from a factor state and a fit");
  std::string theta_path;
  double threshold_omega = -1.0;
  int pred_m = 390;
  std::string gamma_dir;
  predict_cmd->add_option("--in", in_dir, "Directory with loading.csv and psi_NNNN.csv")
      ->required();
  predict_cmd->add_option("--gammas", gamma_dir,
                          "Directory with gamma_NNNN.csv (default: --in)");
  predict_cmd->add_option("--theta", theta_path, "Fit JSON from the fit subcommand")
      ->required();
  predict_cmd->add_option("--threshold-omega", threshold_omega,
                          "Idiosyncratic threshold level (default: rate-based)");
  predict_cmd->add_option("--m", pred_m, "Intraday observations behind each matrix");
  add_common(predict_cmd);

  auto* portfolio_cmd = app.add_subcommand(
      "portfolio", "Gross-exposure-constrained minimum-variance weights");
  std::string sigma_path, realized_path;
  std::vector<double> c0s{1.0, 1.2, 1.4, 1.6, 1.8, 2.0};
  portfolio_cmd->add_option("--sigma", sigma_path, "Covariance CSV")->required();
  portfolio_cmd->add_option("--c0", c0s, "Gross exposure bounds");
  portfolio_cmd->add_option("--realized", realized_path,
                            "Realized covariance CSV for out-of-sample risk");
  add_common(portfolio_cmd);

  auto* study_sim_cmd = app.add_subcommand(
      "study-sim", "Monte Carlo estimation and prediction study");
  int stop_after = 0;
  study_sim_cmd->add_option("--stop-after", stop_after,
                            "Stop after N fresh replications (resume later)");
  add_common(study_sim_cmd);

  auto* study_oos_cmd = app.add_subcommand(
      "study-oos", "Expanding-window out-of-sample prediction and portfolio study");
  add_common(study_oos_cmd);

  auto* report_cmd = app.add_subcommand("report", "Render a result CSV as Markdown");
  std::string report_in;
  report_cmd->add_option("--in", report_in, "Result CSV")->required();
  add_common(report_cmd);

  CLI11_PARSE(app, argc, argv);

  if (sim_cmd->parsed()) {
    StudyConfig cfg = load_study_config(config_path, seed, out_dir, false, 0);
    SimConfig sc = cell_sim_config(cfg);
    SimOutput sim = simulate(sc);
    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir / "truth");
    write_tick_panel_csv((dir / "ticks.csv").string(), sim.ticks);
    for (int k = 0; k < sc.n; ++k) {
      write_matrix_csv((dir / "truth" / numbered("gamma", k)).string(),
                       sim.true_gamma[k]);
      write_matrix_csv((dir / "truth" / numbered("psi", k)).string(),
                       sim.true_psi[k]);
    }
    write_matrix_csv((dir / "truth" / "sigma_end.csv").string(), sim.true_sigma_end);
    write_matrix_csv((dir / "truth" / "loading.csv").string(), sim.loading);
    write_matrix_csv((dir / "truth" / "idio.csv").string(), sim.idio);
    Json manifest;
    manifest["p"] = sc.p;
    manifest["n"] = sc.n;
    manifest["m"] = sc.m;
    manifest["seed"] = sc.seed;
    manifest["synchronous"] = sim.ticks.synchronous;
    manifest["clip_count"] = sim.clip_count;
    manifest["config"] = cfg.to_json();
    write_json((dir / "manifest.json").string(), manifest);
    std::cout << "wrote " << (dir / "ticks.csv").string() << " and truth matrices\n";
    return 0;
  }

  if (realized_cmd->parsed()) {
    TickPanel panel = read_tick_panel_csv(in_dir);
    const fs::path dir(out_dir.empty() ? "." : out_dir);
    fs::create_directories(dir);
    for (int d = 0; d < panel.n_days; ++d) {
      DailyVolMatrix v = prvm(panel, d, window_theta);
      if (project) v = psd_project(v);
      write_matrix_csv((dir / numbered("gamma", d)).string(), v.matrix);
    }
    std::cout << "wrote " << panel.n_days << " gamma matrices to " << dir.string() << "\n";
    return 0;
  }

  if (factor_cmd->parsed()) {
    std::vector<Matrix> gammas = read_matrix_series(in_dir, "gamma");
    if (do_select) {
      RankSelection sel = select_rank(
          gammas, rank_m, std::min<int>(30, static_cast<int>(gammas[0].rows()) - 1));
      std::cout << "selected rank " << sel.rank << " (argmin " << sel.argmin
                << (sel.flagged ? ", flagged: no-factor outcome" : "") << ")\n";
    }
    FactorState st = extract_factors(gammas, rank);
    const fs::path dir(out_dir.empty() ? "." : out_dir);
    fs::create_directories(dir);
    write_matrix_csv((dir / "loading.csv").string(), st.loading);
    write_matrix_csv((dir / "s_matrix.csv").string(), st.s_matrix);
    for (std::size_t k = 0; k < st.psi_hat.size(); ++k)
      write_matrix_csv((dir / numbered("psi", static_cast<int>(k))).string(),
                       st.psi_hat[k]);
    Json meta;
    meta["r"] = st.r;
    meta["sign_convention"] = "largest-magnitude entry positive, v1";
    meta["eigenvalues"] = std::vector<double>(
        st.eigvals.data(), st.eigvals.data() + st.eigvals.size());
    write_json((dir / "factor.json").string(), meta);
    std::cout << "wrote factor state to " << dir.string() << "\n";
    return 0;
  }

  if (fit_cmd->parsed()) {
    std::vector<Matrix> psis = read_matrix_series(in_dir, "psi");
    if (scan_order) {
      OrderSelection sel = select_order(psis);
      std::cout << "AIC order " << sel.q_aic << ", BIC order " << sel.q_bic << "\n";
    }
    FitReport lse = lse_fit(psis, order);
    FitReport fit = method == "qmle" ? qmle_fit(psis, order, lse.theta) : lse;
    const fs::path dir(out_dir.empty() ? "." : out_dir);
    fs::create_directories(dir);
    Json j = fit_report_to_json(fit);
    j["method"] = method;
    write_json((dir / ("fit_" + method + ".json")).string(), j);
    {
      std::ofstream res((dir / ("residuals_" + method + ".csv")).string());
      for (const auto& v : fit.residuals) {
        for (int i = 0; i < v.size(); ++i)
          res << (i ? "," : "") << format_double(v[i]);
        res << '\n';
      }
    }
    std::cout << "objective " << fit.objective << ", converged "
              << (fit.converged ? "yes" : "no") << "\n";
    return 0;
  }

  if (predict_cmd->parsed()) {
    std::vector<Matrix> gammas =
        read_matrix_series(gamma_dir.empty() ? in_dir : gamma_dir, "gamma");
    FactorState st;
    st.loading = read_matrix_csv((fs::path(in_dir) / "loading.csv").string());
    st.r = static_cast<int>(st.loading.cols());
    st.psi_hat = read_matrix_series(in_dir, "psi");
    st.s_matrix = sample_var_matrix(gammas);
    st.eigvals = sym_eig(st.s_matrix).values.head(st.r);

    Json fit_json = read_json(theta_path);
    SVParams theta = sv_params_from_json(fit_json.at("theta"));

    PoetConfig pc;
    pc.rank = st.r;
    pc.threshold_omega = threshold_omega;
    pc.n = static_cast<int>(gammas.size());
    pc.m = pred_m;
    Matrix gamma_bar = Matrix::Zero(gammas[0].rows(), gammas[0].cols());
    for (const auto& g : gammas) gamma_bar += g;
    gamma_bar /= static_cast<double>(gammas.size());
    Matrix idio = poet_idio(gamma_bar, pc);

    PredictedVol pred = sv_poet(st, theta, idio, static_cast<int>(gammas.size()));
    const fs::path dir(out_dir.empty() ? "." : out_dir);
    fs::create_directories(dir);
    write_matrix_csv((dir / "prediction.csv").string(), pred.total);
    write_matrix_csv((dir / "prediction_factor_part.csv").string(), pred.factor_part);
    write_matrix_csv((dir / "prediction_idio_part.csv").string(), pred.idio_part);
    Json meta;
    meta["day"] = pred.day;
    meta["min_eigenvalue"] = pred.min_eig;
    meta["psd"] = pred.psd;
    meta["theta_hash"] = json_hash(fit_json.at("theta"));
    write_json((dir / "prediction.json").string(), meta);
    std::cout << "wrote prediction (min eigenvalue " << pred.min_eig << ")\n";
    return 0;
  }

  if (portfolio_cmd->parsed()) {
    Matrix sigma = read_matrix_csv(sigma_path);
    Matrix realized;
    if (!realized_path.empty()) realized = read_matrix_csv(realized_path);
    const fs::path dir(out_dir.empty() ? "." : out_dir);
    fs::create_directories(dir);
    std::ofstream out((dir / "portfolio.csv").string());
    out << "c0,objective,gross_exposure,kkt_residual";
    if (realized.size()) out << ",annualized_risk";
    out << '\n';
    for (double c0 : c0s) {
      PortfolioProblem prob;
      prob.sigma = sigma;
      prob.c0 = c0;
      PortfolioResult res = min_variance(prob);
      out << format_double(c0) << ',' << format_double(res.objective) << ','
          << format_double(res.gross_exposure) << ','
          << format_double(res.kkt_residual);
      if (realized.size())
        out << ',' << format_double(oos_risk(res.weights, realized));
      out << '\n';
      std::ofstream w((dir / ("weights_c0_" + std::to_string(c0) + ".csv")).string());
      for (int i = 0; i < res.weights.size(); ++i)
        w << format_double(res.weights[i]) << '\n';
    }
    std::cout << "wrote portfolio results to " << dir.string() << "\n";
    return 0;
  }

  if (study_sim_cmd->parsed()) {
    StudyConfig cfg =
        load_study_config(config_path, seed, out_dir, paper_scale, stop_after);
    ResultTable table = run_sim_study(cfg);
    std::cout << "study complete: " << table.rows.size() << " result rows, "
              << table.failures << " failed replications, config "
              << table.config_hash << "\n";
    return 0;
  }

  if (study_oos_cmd->parsed()) {
    StudyConfig cfg = load_study_config(config_path, seed, out_dir, paper_scale, 0);
    if (cfg.portfolio_c0.empty()) cfg.portfolio_c0 = {1.0, 1.2, 1.4, 1.6, 1.8, 2.0};
    ResultTable table = run_oos_study(cfg);
    std::cout << "out-of-sample study complete: " << table.rows.size()
              << " result rows, config " << table.config_hash << "\n";
    return 0;
  }

  if (report_cmd->parsed()) {
    std::cout << render_markdown(report_in);
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
