#include "flowtwin/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace flowtwin::nn {

namespace {

double evaluate(const GraphBuilder& f, const std::vector<Tensor>& params) {
  Tape tape;
  std::vector<NodeId> leaves;
  leaves.reserve(params.size());
  for (const Tensor& p : params) leaves.push_back(tape.leaf(p, false));
  return tape.value(f(tape, leaves)).item();
}

}  // namespace

double grad_check(const GraphBuilder& f, const std::vector<Tensor>& params, double epsilon) {
  // Analytic pass.
  Tape tape;
  std::vector<NodeId> leaves;
  leaves.reserve(params.size());
  for (const Tensor& p : params) leaves.push_back(tape.leaf(p, true));
  NodeId root = f(tape, leaves);
  tape.backward(root);
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (NodeId id : leaves) analytic.push_back(tape.grad(id));

  double max_rel = 0.0;
  std::vector<Tensor> work = params;
  for (size_t p = 0; p < params.size(); ++p) {
    for (size_t i = 0; i < params[p].size(); ++i) {
      const double orig = work[p].data()[i];
      work[p].data()[i] = orig + epsilon;
      const double fp = evaluate(f, work);
      work[p].data()[i] = orig - epsilon;
      const double fm = evaluate(f, work);
      work[p].data()[i] = orig;
      const double numeric = (fp - fm) / (2.0 * epsilon);
      const double a = analytic[p].data()[i];
      const double rel =
          std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace flowtwin::nn
