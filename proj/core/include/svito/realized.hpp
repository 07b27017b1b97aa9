#pragma once

#include <vector>

#include "svito/linalg.hpp"
#include "svito/panel.hpp"

namespace svito {

struct DailyVolMatrix {
  int day = 0;
  Matrix matrix;
  bool psd_projected = false;
};

/// Pre-averaging realized volatility matrix for one day, with diagonal
/// noise-bias correction. Non-synchronous panels are refresh-time
/// synchronized first. window_theta tunes the pre-averaging window
/// k_n = ceil(window_theta * sqrt(ticks)).
DailyVolMatrix prvm(const TickPanel& panel, int day, double window_theta = 1.0);

/// Same computation on one day's tick series (one vector per asset).
Matrix prvm_day(const std::vector<std::vector<Tick>>& day_ticks, bool synchronous,
                double window_theta, int day_label = 0);

/// Eigenvalue clipping onto the PSD cone; idempotent.
DailyVolMatrix psd_project(const DailyVolMatrix& v);

/// Refresh-time synchronization: returns a price matrix with one row per
/// refresh time and one column per asset (last observed price carried).
Matrix refresh_time_sync(const std::vector<std::vector<Tick>>& day_ticks);

}  // namespace svito
