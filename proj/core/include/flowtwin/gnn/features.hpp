#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flowtwin/dataset.hpp"
#include "flowtwin/gnn/incidence.hpp"
#include "flowtwin/nn/tensor.hpp"

namespace flowtwin::gnn {

enum class Variant { Baseline, NodeAugmented };
enum class PathUpdaterKind { Gru, StackedGru };
enum class LinkUpdaterKind { Gru, FeedForward };
enum class LossKind { Mape, Mse };
enum class TargetTransform { Identity, Log };
enum class ScalingMode { Standardize, MinMax };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

/// Model shape and training behavior. The width multipliers scale the base
/// state widths, mirroring the scaled-up configurations.
struct ModelConfig {
  Variant variant = Variant::NodeAugmented;
  int path_width = 64;
  int link_width = 64;
  int node_width = 64;
  int path_width_mult = 1;
  int link_width_mult = 1;
  int readout_width_mult = 1;
  int message_passing_iterations = 3;
  PathUpdaterKind path_updater = PathUpdaterKind::Gru;
  LinkUpdaterKind link_updater = LinkUpdaterKind::Gru;
  std::vector<int> readout_hidden = {128, 128};
  bool readout_residual = false;
  LossKind loss = LossKind::Mape;
  TargetTransform target_transform = TargetTransform::Log;
  double dropout = 0.0;  // rate on readout hidden layers; 0 disables
  double l2 = 0.0;
  ScalingMode scaling = ScalingMode::Standardize;

  int effective_path_width() const { return path_width * path_width_mult; }
  int effective_link_width() const { return link_width * link_width_mult; }
  int effective_node_width() const { return node_width; }
};

/// Canonical JSON form; hashing it identifies the configuration.
std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& json_text);
std::string model_config_hash(const ModelConfig& cfg);

// Raw feature layouts (column meanings are fixed):
//   path: [avg_rate, pkt_rate, avg_pkt_size, tos=0, tos=1, tos=2]
//   link: [capacity, SP, WFQ, DRR, w0, w1, w2]   (policy/weights of the
//         link's source node, i.e. the ingress port of the link)
//   node: [SP, WFQ, DRR, w0, w1, w2]
constexpr int kPathRawWidth = 6;
constexpr int kLinkRawWidth = 7;
constexpr int kNodeRawWidth = 6;

nn::Tensor raw_path_features(const Sample& sample);
nn::Tensor raw_link_features(const Sample& sample, const Topology& topo);
nn::Tensor raw_node_features(const Sample& sample, const Topology& topo);

/// Per-column affine transforms fitted on the training split. Categorical
/// (one-hot) columns pass through unchanged.
struct EncoderStats {
  ScalingMode mode = ScalingMode::Standardize;
  // center/scale per column: standardize -> (x-mean)/std, minmax -> (x-min)/range.
  std::vector<double> path_center, path_scale;
  std::vector<double> link_center, link_scale;
  std::vector<double> node_center, node_scale;
};

/// Fits stats over every sample of the training split.
EncoderStats compute_encoder_stats(const DatasetBundle& train, ScalingMode mode);

/// Encoded, zero-padded initial states for one sample. Raw features occupy
/// the leading columns; everything beyond stays exactly zero.
struct EncodedSample {
  nn::Tensor path_states;
  nn::Tensor link_states;
  nn::Tensor node_states;
};

EncodedSample encode_features(const Sample& sample, const Topology& topo,
                              const EncoderStats& stats, const ModelConfig& cfg);

}  // namespace flowtwin::gnn
