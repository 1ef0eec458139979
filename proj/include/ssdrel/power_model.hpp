#pragma once

#include "ssdrel/units.hpp"

namespace ssdrel {

/// Supply voltage after a cut: linear from v_full to v_unavail over
/// t_unavail_us, then a capacitor-style tail reaching exactly 0 V at t_zero_us.
struct PowerModel {
  double v_full = 5.0;
  double v_unavail = 4.5;
  SimTime t_unavail_us = 5'000;
  SimTime t_zero_us = 1'900'000;
  double tail_shape = 5.0;  // larger values drop faster right after t_unavail

  void validate() const;
  /// Voltage `elapsed_us` after the cut; v_full for negative elapsed.
  double voltage(SimTime elapsed_us) const;
};

}  // namespace ssdrel
