#pragma once

#include <map>
#include <string>

#include "flowtwin/nn/tape.hpp"
#include "flowtwin/rng.hpp"

namespace flowtwin::nn {

/// Named parameter tensors, ordered by name for deterministic iteration.
class ParamStore {
 public:
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) > 0; }
  void insert(const std::string& name, Tensor t);
  size_t size() const { return params_.size(); }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  /// New matrix initialized uniformly in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
  void init_matrix(const std::string& name, int rows, int cols, int fan_in, Rng& rng);
  void init_zeros(const std::string& name, int rows, int cols);

 private:
  std::map<std::string, Tensor> params_;
};

/// Tape handles for one GRU cell's nine parameter tensors.
struct GruCellRef {
  NodeId wz, uz, bz;
  NodeId wr, ur, br;
  NodeId wh, uh, bh;
};

/// Registers GRU parameters named <prefix>.{wz,uz,bz,...} sized for
/// input width k and hidden width d.
void gru_init(ParamStore& store, const std::string& prefix, int input_width,
              int hidden_width, Rng& rng);

/// Pushes the cell's parameters onto the tape as gradient leaves.
GruCellRef gru_bind(Tape& tape, const ParamStore& store, const std::string& prefix,
                    bool requires_grad = true);

/// One gated-recurrent-unit update over a batch of rows:
///   z = sigmoid(x Wz + h Uz + bz), r = sigmoid(x Wr + h Ur + br),
///   hcand = tanh(x Wh + (r*h) Uh + bh), h' = z*h + (1-z)*hcand.
/// The update gate gates the previous state, so a saturated z preserves it.
NodeId gru_step(Tape& tape, const GruCellRef& cell, NodeId state, NodeId input);

}  // namespace flowtwin::nn
