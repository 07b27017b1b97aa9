#pragma once

#include <string>

#include <json.hpp>

#include "svito/linalg.hpp"
#include "svito/panel.hpp"
#include "svito/svmodel.hpp"

namespace svito {

using Json = nlohmann::json;

/// Matrices as plain CSV, one row per line, %.17g so that reading back is
/// bit-exact.
void write_matrix_csv(const std::string& path, const Matrix& m);
Matrix read_matrix_csv(const std::string& path);

std::string format_double(double v);  // %.17g

/// Columns: day, asset_index, tick_index, time, log_price.
void write_tick_panel_csv(const std::string& path, const TickPanel& panel);
TickPanel read_tick_panel_csv(const std::string& path);

Json sv_params_to_json(const SVParams& theta);
SVParams sv_params_from_json(const Json& j);

Json fit_report_to_json(const FitReport& report);

void write_json(const std::string& path, const Json& j);
Json read_json(const std::string& path);

/// FNV-1a hash of a canonical JSON dump, as fixed-width hex. Used to stamp
/// result rows with the configuration they came from.
std::string json_hash(const Json& j);

}  // namespace svito
