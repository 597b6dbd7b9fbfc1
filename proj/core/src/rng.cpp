#include "ntklab/rng.hpp"

#include <cmath>

namespace ntklab {

double CounterRng::next_gaussian() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  double u1 = next_unit();
  double u2 = next_unit();
  double r = std::sqrt(-2.0 * std::log(u1));
  double a = 2.0 * 3.14159265358979323846 * u2;
  cached_ = r * std::sin(a);
  has_cached_ = true;
  return r * std::cos(a);
}

}  // namespace ntklab
