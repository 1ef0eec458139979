#include "ssdrel/power_model.hpp"

#include <cmath>
#include <stdexcept>

namespace ssdrel {

void PowerModel::validate() const {
  if (!(0 < t_unavail_us && t_unavail_us < t_zero_us)) throw std::invalid_argument("need 0 < t_unavail < t_zero");
  if (!(v_full > v_unavail && v_unavail > 0)) throw std::invalid_argument("need v_full > v_unavail > 0");
  if (!(tail_shape > 0)) throw std::invalid_argument("tail_shape must be positive");
}

double PowerModel::voltage(SimTime elapsed_us) const {
  if (elapsed_us <= 0) return v_full;
  if (elapsed_us >= t_zero_us) return 0.0;
  if (elapsed_us <= t_unavail_us) {
    const double f = static_cast<double>(elapsed_us) / static_cast<double>(t_unavail_us);
    return v_full - (v_full - v_unavail) * f;
  }
  // Normalized exponential that hits 0 exactly at t_zero.
  const double x = static_cast<double>(elapsed_us - t_unavail_us) / static_cast<double>(t_zero_us - t_unavail_us);
  const double k = tail_shape;
  return v_unavail * (std::exp(-k * x) - std::exp(-k)) / (1.0 - std::exp(-k));
}

}  // namespace ssdrel
