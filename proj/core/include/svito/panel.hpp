#pragma once

#include <vector>

namespace svito {

struct Tick {
  double time = 0.0;       // absolute time, day k covers (k-1, k]
  double log_price = 0.0;
};

/// Noisy intraday log-price observations, indexed [day][asset].
struct TickPanel {
  int p = 0;
  int n_days = 0;
  bool synchronous = true;
  std::vector<std::vector<std::vector<Tick>>> ticks;

  const std::vector<Tick>& series(int day, int asset) const {
    return ticks[day][asset];
  }
};

}  // namespace svito
