#pragma once

#include <functional>
#include <vector>

#include "flowtwin/nn/tape.hpp"

namespace flowtwin::nn {

/// Builds a scalar-valued graph from leaves for the given parameter tensors.
using GraphBuilder = std::function<NodeId(Tape&, const std::vector<NodeId>&)>;

/// Compares tape gradients against central finite differences over every
/// parameter coordinate; returns the maximum relative error
/// |analytic - numeric| / max(1, |analytic|, |numeric|).
double grad_check(const GraphBuilder& f, const std::vector<Tensor>& params, double epsilon);

}  // namespace flowtwin::nn
