#pragma once

namespace efex {

// Digamma function psi(x) for x > 0. Upward recurrence to x >= 10, then the
// asymptotic series through the x^-14 term; ~1e-14 relative away from the root.
double digamma(double x);

}  // namespace efex
