#pragma once

#include <string>
#include <vector>

#include "svito/io.hpp"
#include "svito/sim.hpp"

namespace svito {

struct GridCell {
  int n = 125;
  int m = 390;
  int p = 100;
};

struct StudyConfig {
  SimConfig sim;  // template; n, m, p overridden per grid cell
  std::vector<GridCell> grid;
  int replications = 50;
  std::vector<std::string> estimators{"lse", "qmle"};
  std::vector<std::string> baselines{"poet-prev", "prvm-prev"};
  double threshold_omega = -1.0;   // < 0: default level per study
  std::vector<double> portfolio_c0;
  int forecast_origin = 0;         // h for the out-of-sample study; 0: n/2
  int refit_every = 1;
  std::string output_dir = "out";
  std::uint64_t seed = 1;
  int stop_after = 0;              // stop after this many fresh replications (resume testing)

  void validate() const;
  Json to_json() const;
  /// Throws std::runtime_error naming the offending JSON path.
  static StudyConfig from_json(const Json& j);

  /// Hash of the canonical JSON form, stamped onto every result row.
  std::string hash() const { return json_hash(to_json()); }
};

struct ResultRow {
  int n = 0, m = 0, p = 0;
  std::string method;
  std::string metric;
  double mean = 0.0;
  double se = 0.0;
  int reps = 0;
};

struct ResultTable {
  std::vector<ResultRow> rows;
  std::string config_hash;
  int failures = 0;
};

/// Monte Carlo study: per replication simulate, estimate daily volatility
/// matrices, extract factors, fit the vech-AR by LSE and QMLE, predict the
/// next-day matrix, and score against the conditional oracle. Checkpoints one
/// JSON file per replication under output_dir/checkpoints and resumes from
/// them. More than 10% failed replications aborts.
ResultTable run_sim_study(const StudyConfig& config);

/// Expanding-window out-of-sample study on one simulated panel: for each day
/// k past the forecast origin, fit on days 1..k-1, predict day k, and record
/// relative prediction errors plus gross-exposure-constrained portfolio risks.
ResultTable run_oos_study(const StudyConfig& config);

/// Serializes the aggregated rows; identical tables give identical bytes.
void write_result_csv(const std::string& path, const ResultTable& table);

/// Markdown rendering of a result CSV produced by write_result_csv.
std::string render_markdown(const std::string& csv_path);

}  // namespace svito
