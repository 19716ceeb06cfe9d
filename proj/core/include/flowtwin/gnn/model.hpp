#pragma once

#include <map>
#include <string>

#include "flowtwin/gnn/features.hpp"
#include "flowtwin/gnn/incidence.hpp"
#include "flowtwin/nn/checkpoint.hpp"
#include "flowtwin/nn/gru.hpp"
#include "flowtwin/nn/tape.hpp"

namespace flowtwin::gnn {

/// Message-passing delay model. Both variants iterate path<->link updates;
/// the node-augmented variant adds link<->node exchanges and a node->path
/// aggregation before readout.
class GnnModel {
 public:
  explicit GnnModel(ModelConfig cfg) : cfg_(std::move(cfg)) {}

  void init_params(uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }
  EncoderStats& encoder_stats() { return stats_; }
  const EncoderStats& encoder_stats() const { return stats_; }

  /// Tape handles for every parameter, keyed by name.
  using Bound = std::map<std::string, nn::NodeId>;
  Bound bind(nn::Tape& tape, bool requires_grad) const;

  struct DropoutCtx {
    double rate = 0.0;
    Rng* rng = nullptr;  // mask source; training only
  };

  /// Raw readout output, one row per path. Under the log target transform
  /// this is log-delay; predictions() exponentiates it.
  nn::NodeId forward_raw(nn::Tape& tape, const Bound& bound, const IncidenceStructures& inc,
                         const EncodedSample& enc, const DropoutCtx* dropout = nullptr) const;

  /// Per-path delay predictions in linear space (strictly positive under the
  /// log transform).
  nn::NodeId predictions(nn::Tape& tape, nn::NodeId raw) const;

  /// Convenience: forward a sample end to end without gradients.
  std::vector<double> predict_sample(const Sample& sample, const Topology& topo) const;

  nn::Checkpoint to_checkpoint() const;
  static GnnModel from_checkpoint(const nn::Checkpoint& ckpt);

 private:
  ModelConfig cfg_;
  nn::ParamStore params_;
  EncoderStats stats_;
};

}  // namespace flowtwin::gnn
