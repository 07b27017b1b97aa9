#include "svito/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace svito {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_matrix_csv(const std::string& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

Matrix read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
        row.push_back(v);
      } catch (const std::exception&) {
        throw std::runtime_error(path + ", line " + std::to_string(lineno) +
                                 ": cannot parse '" + cell + "' as a number");
      }
    }
    if (!rows.empty() && row.size() != rows[0].size())
      throw std::runtime_error(path + ", line " + std::to_string(lineno) +
                               ": ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("empty matrix file: " + path);
  Matrix m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
  return m;
}

void write_tick_panel_csv(const std::string& path, const TickPanel& panel) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "day,asset_index,tick_index,time,log_price\n";
  for (int d = 0; d < panel.n_days; ++d)
    for (int a = 0; a < panel.p; ++a) {
      const auto& s = panel.ticks[d][a];
      for (std::size_t t = 0; t < s.size(); ++t)
        out << d << ',' << a << ',' << t << ',' << format_double(s[t].time)
            << ',' << format_double(s[t].log_price) << '\n';
    }
  if (!out) throw std::runtime_error("write failed: " + path);
}

TickPanel read_tick_panel_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line) ||
      line != "day,asset_index,tick_index,time,log_price")
    throw std::runtime_error("unexpected tick CSV header in " + path);

  TickPanel panel;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 5)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected 5 columns");
    const int d = std::stoi(cells[0]);
    const int a = std::stoi(cells[1]);
    if (d < 0 || a < 0)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": negative index");
    if (d >= panel.n_days) {
      panel.n_days = d + 1;
      panel.ticks.resize(panel.n_days);
    }
    if (a >= panel.p) panel.p = a + 1;
    auto& day = panel.ticks[d];
    if (a >= static_cast<int>(day.size())) day.resize(a + 1);
    day[a].push_back({std::stod(cells[3]), std::stod(cells[4])});
  }
  for (auto& day : panel.ticks) day.resize(panel.p);
  std::size_t len = panel.n_days && panel.p ? panel.ticks[0][0].size() : 0;
  panel.synchronous = true;
  for (const auto& day : panel.ticks)
    for (const auto& s : day)
      if (s.size() != len) panel.synchronous = false;
  return panel;
}

Json sv_params_to_json(const SVParams& theta) {
  Json j;
  j["r"] = theta.r;
  j["q"] = theta.q;
  j["beta0"] = std::vector<double>(theta.beta0.data(),
                                   theta.beta0.data() + theta.beta0.size());
  Json betas = Json::array();
  for (const auto& b : theta.betas) {
    Json rows = Json::array();
    for (int i = 0; i < b.rows(); ++i) {
      Json row = Json::array();
      for (int k = 0; k < b.cols(); ++k) row.push_back(b(i, k));
      rows.push_back(row);
    }
    betas.push_back(rows);
  }
  j["betas"] = betas;
  j["stationary"] = theta.stationary();
  return j;
}

SVParams sv_params_from_json(const Json& j) {
  SVParams theta;
  theta.r = j.at("r").get<int>();
  theta.q = j.at("q").get<int>();
  const auto b0 = j.at("beta0").get<std::vector<double>>();
  theta.beta0 = Eigen::Map<const Vector>(b0.data(), b0.size());
  for (const auto& rows : j.at("betas")) {
    const int nr = static_cast<int>(rows.size());
    Matrix b(nr, nr);
    for (int i = 0; i < nr; ++i)
      for (int k = 0; k < nr; ++k) b(i, k) = rows.at(i).at(k).get<double>();
    theta.betas.push_back(b);
  }
  if (static_cast<int>(theta.beta0.size()) != theta.d0() ||
      static_cast<int>(theta.betas.size()) != theta.q)
    throw std::runtime_error("sv_params_from_json: inconsistent dimensions");
  return theta;
}

Json fit_report_to_json(const FitReport& report) {
  Json j;
  j["theta"] = sv_params_to_json(report.theta);
  j["objective"] = report.objective;
  j["iterations"] = report.iterations;
  j["converged"] = report.converged;
  j["pd_repairs"] = report.pd_repairs;
  j["grad_norm"] = report.grad_norm;
  j["objective_path"] = report.objective_path;
  return j;
}

void write_json(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

std::string json_hash(const Json& j) {
  const std::string s = j.dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace svito
