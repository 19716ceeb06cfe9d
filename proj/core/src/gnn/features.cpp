#include "flowtwin/gnn/features.hpp"

#include <cmath>
#include <sstream>

#include "flowtwin/textio.hpp"
#include "json.hpp"

namespace flowtwin::gnn {

namespace {

constexpr double kDegenerateScaleGuard = 1e-12;

// Numeric columns per entity; the rest are one-hot and pass through.
const std::vector<int> kPathNumericCols = {0, 1, 2};
const std::vector<int> kLinkNumericCols = {0, 4, 5, 6};
const std::vector<int> kNodeNumericCols = {3, 4, 5};

int policy_slot(SchedPolicy p) {
  switch (p) {
    case SchedPolicy::SP: return 0;
    case SchedPolicy::WFQ: return 1;
    case SchedPolicy::DRR: return 2;
  }
  throw std::invalid_argument("unknown-category: scheduling policy");
}

}  // namespace

std::string to_string(Variant v) {
  return v == Variant::Baseline ? "baseline" : "node-augmented";
}

Variant variant_from_string(const std::string& s) {
  if (s == "baseline") return Variant::Baseline;
  if (s == "node-augmented" || s == "node_augmented") return Variant::NodeAugmented;
  throw std::invalid_argument("unknown variant: " + s);
}

nn::Tensor raw_path_features(const Sample& sample) {
  nn::Tensor out(static_cast<int>(sample.traffic.flows.size()), kPathRawWidth);
  for (size_t i = 0; i < sample.traffic.flows.size(); ++i) {
    const FlowSpec& f = sample.traffic.flows[i];
    if (f.tos < 0 || f.tos >= kNumTosClasses)
      throw std::invalid_argument("unknown-category: tos " + std::to_string(f.tos));
    int r = static_cast<int>(i);
    out.at(r, 0) = f.avg_rate;
    out.at(r, 1) = f.pkt_rate;
    out.at(r, 2) = f.avg_pkt_size;
    out.at(r, 3 + f.tos) = 1.0;
  }
  return out;
}

nn::Tensor raw_link_features(const Sample& sample, const Topology& topo) {
  nn::Tensor out(static_cast<int>(topo.links.size()), kLinkRawWidth);
  for (size_t i = 0; i < topo.links.size(); ++i) {
    const Link& l = topo.links[i];
    auto it = sample.scheduling.per_node.find(l.src);
    if (it == sample.scheduling.per_node.end())
      throw std::invalid_argument("missing scheduling for node " + l.src);
    const NodeScheduling& ns = it->second;
    int r = static_cast<int>(i);
    out.at(r, 0) = l.capacity;
    out.at(r, 1 + policy_slot(ns.policy)) = 1.0;
    for (int q = 0; q < 3; ++q) out.at(r, 4 + q) = static_cast<double>(ns.weights[q]);
  }
  return out;
}

nn::Tensor raw_node_features(const Sample& sample, const Topology& topo) {
  nn::Tensor out(static_cast<int>(topo.nodes.size()), kNodeRawWidth);
  for (size_t i = 0; i < topo.nodes.size(); ++i) {
    auto it = sample.scheduling.per_node.find(topo.nodes[i]);
    if (it == sample.scheduling.per_node.end())
      throw std::invalid_argument("missing scheduling for node " + topo.nodes[i]);
    const NodeScheduling& ns = it->second;
    int r = static_cast<int>(i);
    out.at(r, policy_slot(ns.policy)) = 1.0;
    for (int q = 0; q < 3; ++q) out.at(r, 3 + q) = static_cast<double>(ns.weights[q]);
  }
  return out;
}

namespace {

struct ColumnAccumulator {
  std::vector<double> sum, sumsq, minv, maxv;
  int64_t count = 0;

  explicit ColumnAccumulator(int cols)
      : sum(cols, 0.0), sumsq(cols, 0.0),
        minv(cols, std::numeric_limits<double>::infinity()),
        maxv(cols, -std::numeric_limits<double>::infinity()) {}

  void add(const nn::Tensor& t) {
    for (int i = 0; i < t.rows(); ++i) {
      for (int j = 0; j < t.cols(); ++j) {
        double v = t.at(i, j);
        sum[j] += v;
        sumsq[j] += v * v;
        minv[j] = std::min(minv[j], v);
        maxv[j] = std::max(maxv[j], v);
      }
    }
    count += t.rows();
  }

  void finish(ScalingMode mode, const std::vector<int>& numeric_cols,
              std::vector<double>& center, std::vector<double>& scale) const {
    const int cols = static_cast<int>(sum.size());
    center.assign(cols, 0.0);
    scale.assign(cols, 1.0);
    for (int j : numeric_cols) {
      if (mode == ScalingMode::Standardize) {
        double mean = sum[j] / static_cast<double>(count);
        double var = sumsq[j] / static_cast<double>(count) - mean * mean;
        double sd = std::sqrt(std::max(var, 0.0));
        center[j] = mean;
        scale[j] = sd;
      } else {
        center[j] = minv[j];
        scale[j] = maxv[j] - minv[j];
      }
    }
  }
};

void apply_transform(nn::Tensor& t, const std::vector<double>& center,
                     const std::vector<double>& scale) {
  for (int i = 0; i < t.rows(); ++i) {
    for (int j = 0; j < t.cols(); ++j) {
      double s = scale[j];
      double c = center[j];
      if (c == 0.0 && s == 1.0) continue;  // pass-through column
      // degenerate columns map to 0 rather than exploding
      t.at(i, j) = s < kDegenerateScaleGuard ? 0.0 : (t.at(i, j) - c) / s;
    }
  }
}

}  // namespace

EncoderStats compute_encoder_stats(const DatasetBundle& train, ScalingMode mode) {
  if (train.samples.empty()) throw std::invalid_argument("empty training split");
  ColumnAccumulator path_acc(kPathRawWidth), link_acc(kLinkRawWidth), node_acc(kNodeRawWidth);
  for (const Sample& s : train.samples) {
    const Topology& topo = train.topologies.at(s.topology_id);
    path_acc.add(raw_path_features(s));
    link_acc.add(raw_link_features(s, topo));
    node_acc.add(raw_node_features(s, topo));
  }
  EncoderStats stats;
  stats.mode = mode;
  path_acc.finish(mode, kPathNumericCols, stats.path_center, stats.path_scale);
  link_acc.finish(mode, kLinkNumericCols, stats.link_center, stats.link_scale);
  node_acc.finish(mode, kNodeNumericCols, stats.node_center, stats.node_scale);
  return stats;
}

namespace {

nn::Tensor pad_to_width(const nn::Tensor& raw, int width, const char* what) {
  if (width < raw.cols())
    throw std::invalid_argument(std::string(what) + " state width below raw feature count");
  nn::Tensor out(raw.rows(), width);
  for (int i = 0; i < raw.rows(); ++i) {
    for (int j = 0; j < raw.cols(); ++j) out.at(i, j) = raw.at(i, j);
  }
  return out;
}

}  // namespace

EncodedSample encode_features(const Sample& sample, const Topology& topo,
                              const EncoderStats& stats, const ModelConfig& cfg) {
  nn::Tensor p = raw_path_features(sample);
  nn::Tensor l = raw_link_features(sample, topo);
  nn::Tensor n = raw_node_features(sample, topo);
  apply_transform(p, stats.path_center, stats.path_scale);
  apply_transform(l, stats.link_center, stats.link_scale);
  apply_transform(n, stats.node_center, stats.node_scale);
  EncodedSample enc;
  enc.path_states = pad_to_width(p, cfg.effective_path_width(), "path");
  enc.link_states = pad_to_width(l, cfg.effective_link_width(), "link");
  enc.node_states = pad_to_width(n, cfg.effective_node_width(), "node");
  return enc;
}

namespace {

std::string ints_to_json(const std::vector<int>& v) {
  std::ostringstream out;
  out << "[";
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out << ",";
    out << v[i];
  }
  out << "]";
  return out.str();
}

}  // namespace

std::string model_config_to_json(const ModelConfig& c) {
  std::ostringstream out;
  out << "{\"variant\":\"" << to_string(c.variant) << "\""
      << ",\"path_width\":" << c.path_width << ",\"link_width\":" << c.link_width
      << ",\"node_width\":" << c.node_width << ",\"path_width_mult\":" << c.path_width_mult
      << ",\"link_width_mult\":" << c.link_width_mult
      << ",\"readout_width_mult\":" << c.readout_width_mult
      << ",\"message_passing_iterations\":" << c.message_passing_iterations
      << ",\"path_updater\":\""
      << (c.path_updater == PathUpdaterKind::Gru ? "gru" : "stacked-gru") << "\""
      << ",\"link_updater\":\""
      << (c.link_updater == LinkUpdaterKind::Gru ? "gru" : "feedforward") << "\""
      << ",\"readout_hidden\":" << ints_to_json(c.readout_hidden)
      << ",\"readout_residual\":" << (c.readout_residual ? "true" : "false")
      << ",\"loss\":\"" << (c.loss == LossKind::Mape ? "mape" : "mse") << "\""
      << ",\"target_transform\":\""
      << (c.target_transform == TargetTransform::Log ? "log" : "identity") << "\""
      << ",\"dropout\":" << format_sig9(c.dropout) << ",\"l2\":" << format_sig9(c.l2)
      << ",\"scaling\":\""
      << (c.scaling == ScalingMode::Standardize ? "standardize" : "minmax") << "\"}";
  return out.str();
}

ModelConfig model_config_from_json(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model config: ") + e.what());
  }
  ModelConfig c;
  try {
    if (doc.contains("variant")) c.variant = variant_from_string(doc.at("variant"));
    auto geti = [&](const char* k, int& slot) {
      if (doc.contains(k)) slot = doc.at(k).get<int>();
    };
    geti("path_width", c.path_width);
    geti("link_width", c.link_width);
    geti("node_width", c.node_width);
    geti("path_width_mult", c.path_width_mult);
    geti("link_width_mult", c.link_width_mult);
    geti("readout_width_mult", c.readout_width_mult);
    geti("message_passing_iterations", c.message_passing_iterations);
    if (doc.contains("path_updater")) {
      std::string s = doc.at("path_updater");
      if (s == "gru") c.path_updater = PathUpdaterKind::Gru;
      else if (s == "stacked-gru" || s == "stacked_gru") c.path_updater = PathUpdaterKind::StackedGru;
      else throw ParseError("model config: unknown path_updater " + s);
    }
    if (doc.contains("link_updater")) {
      std::string s = doc.at("link_updater");
      if (s == "gru") c.link_updater = LinkUpdaterKind::Gru;
      else if (s == "feedforward" || s == "feed_forward") c.link_updater = LinkUpdaterKind::FeedForward;
      else throw ParseError("model config: unknown link_updater " + s);
    }
    if (doc.contains("readout_hidden")) {
      c.readout_hidden.clear();
      for (const auto& v : doc.at("readout_hidden")) c.readout_hidden.push_back(v.get<int>());
    }
    if (doc.contains("readout_residual")) c.readout_residual = doc.at("readout_residual").get<bool>();
    if (doc.contains("loss")) {
      std::string s = doc.at("loss");
      if (s == "mape") c.loss = LossKind::Mape;
      else if (s == "mse") c.loss = LossKind::Mse;
      else throw ParseError("model config: unknown loss " + s);
    }
    if (doc.contains("target_transform")) {
      std::string s = doc.at("target_transform");
      if (s == "log") c.target_transform = TargetTransform::Log;
      else if (s == "identity") c.target_transform = TargetTransform::Identity;
      else throw ParseError("model config: unknown target_transform " + s);
    }
    if (doc.contains("dropout")) c.dropout = doc.at("dropout").get<double>();
    if (doc.contains("l2")) c.l2 = doc.at("l2").get<double>();
    if (doc.contains("scaling")) {
      std::string s = doc.at("scaling");
      if (s == "standardize") c.scaling = ScalingMode::Standardize;
      else if (s == "minmax") c.scaling = ScalingMode::MinMax;
      else throw ParseError("model config: unknown scaling " + s);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model config: schema violation: ") + e.what());
  }
  if (c.message_passing_iterations < 1)
    throw ParseError("model config: message_passing_iterations must be >= 1");
  return c;
}

std::string model_config_hash(const ModelConfig& cfg) {
  // FNV-1a over the canonical JSON form.
  const std::string text = model_config_to_json(cfg);
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace flowtwin::gnn
