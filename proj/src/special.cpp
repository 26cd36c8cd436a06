#include "efex/special.hpp"

#include <cmath>
#include <stdexcept>

namespace efex {

double digamma(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) throw std::domain_error("digamma: argument must be positive and finite");
  double shift = 0.0;
  while (x < 10.0) {
    shift -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // Bernoulli-number coefficients B_2k / (2k).
  const double series =
      inv2 * (1.0 / 12 -
              inv2 * (1.0 / 120 -
                      inv2 * (1.0 / 252 -
                              inv2 * (1.0 / 240 - inv2 * (1.0 / 132 - inv2 * (691.0 / 32760 - inv2 / 12))))));
  return shift + std::log(x) - 0.5 * inv - series;
}

}  // namespace efex
