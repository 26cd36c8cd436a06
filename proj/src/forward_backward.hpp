#pragma once

#include <span>

#include "efex/cscg.hpp"

namespace efex::detail {

// Scaled forward pass restricted to clone blocks, restarting at every
// episode. Returns the sum of log scale factors (the log-likelihood when `t`
// is stochastic) or -inf when some step has zero mass. When `counts` is set,
// runs the backward pass too and adds the expected transition counts.
// The trajectory must already be validated.
double forward_backward(const TransitionTensor& t, std::span<const double> initial, const CloneAllocation& allocation,
                        const Trajectory& trajectory, CountTensor* counts);

void validate_inputs(const CloneAllocation& allocation, int n_actions, const Trajectory& trajectory);

}  // namespace efex::detail
