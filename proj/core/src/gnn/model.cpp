#include "flowtwin/gnn/model.hpp"

#include <cmath>

#include "flowtwin/textio.hpp"

namespace flowtwin::gnn {

using nn::NodeId;
using nn::ParamStore;
using nn::Tape;
using nn::Tensor;

namespace {

// Stats ride along in the checkpoint as reserved parameter entries.
constexpr const char* kStatsPrefix = "encoder.";

std::vector<int> scaled_hidden(const ModelConfig& cfg) {
  std::vector<int> h = cfg.readout_hidden;
  for (int& w : h) w *= cfg.readout_width_mult;
  return h;
}

}  // namespace

void GnnModel::init_params(uint64_t seed) {
  params_ = ParamStore();
  Rng rng(seed);
  const int pw = cfg_.effective_path_width();
  const int lw = cfg_.effective_link_width();
  const int nw = cfg_.effective_node_width();

  nn::gru_init(params_, "path_gru", lw, pw, rng);
  if (cfg_.path_updater == PathUpdaterKind::StackedGru) {
    nn::gru_init(params_, "path_gru2", pw, pw, rng);
  }
  if (cfg_.link_updater == LinkUpdaterKind::Gru) {
    nn::gru_init(params_, "link_gru", pw, lw, rng);
  } else {
    const int in = lw + pw;
    params_.init_matrix("link_ff.w1", in, lw, in, rng);
    params_.init_zeros("link_ff.b1", 1, lw);
    params_.init_matrix("link_ff.w2", lw, lw, lw, rng);
    params_.init_zeros("link_ff.b2", 1, lw);
    params_.init_matrix("link_ff.w3", lw, lw, lw, rng);
    params_.init_zeros("link_ff.b3", 1, lw);
  }
  if (cfg_.variant == Variant::NodeAugmented) {
    nn::gru_init(params_, "node_gru", lw, nw, rng);
    nn::gru_init(params_, "link_from_node_gru", 2 * nw, lw, rng);
  }

  int readout_in = cfg_.variant == Variant::NodeAugmented ? pw + nw : pw;
  int prev = readout_in;
  const std::vector<int> hidden = scaled_hidden(cfg_);
  for (size_t i = 0; i < hidden.size(); ++i) {
    params_.init_matrix("readout.w" + std::to_string(i), prev, hidden[i], prev, rng);
    params_.init_zeros("readout.b" + std::to_string(i), 1, hidden[i]);
    prev = hidden[i];
  }
  const int out_in = cfg_.readout_residual ? prev + readout_in : prev;
  params_.init_matrix("readout.out_w", out_in, 1, out_in, rng);
  params_.init_zeros("readout.out_b", 1, 1);
}

GnnModel::Bound GnnModel::bind(Tape& tape, bool requires_grad) const {
  Bound bound;
  for (const auto& [name, tensor] : params_) {
    bound[name] = tape.leaf(tensor, requires_grad);
  }
  return bound;
}

namespace {

nn::GruCellRef cell_from(const GnnModel::Bound& bound, const std::string& prefix) {
  auto get = [&](const std::string& s) { return bound.at(prefix + s); };
  return {get(".wz"), get(".uz"), get(".bz"), get(".wr"), get(".ur"),
          get(".br"), get(".wh"), get(".uh"), get(".bh")};
}

// One batched sweep of the path updater along every path. Returns the final
// hidden states; per-position hidden rows double as messages to the links at
// that position and are accumulated into link aggregates when wanted.
struct SweepResult {
  NodeId final_states;
  NodeId link_aggregate;  // invalid when not requested
};

SweepResult path_sweep(Tape& t, const ModelConfig& cfg, const GnnModel::Bound& bound,
                       const IncidenceStructures& inc, NodeId path_states,
                       NodeId link_states, bool want_link_aggregate) {
  nn::GruCellRef cell1 = cell_from(bound, "path_gru");
  const bool stacked = cfg.path_updater == PathUpdaterKind::StackedGru;
  nn::GruCellRef cell2 = stacked ? cell_from(bound, "path_gru2") : cell1;

  NodeId h1 = path_states;
  NodeId h2 = path_states;  // top of the stack; equals h1 when not stacked
  NodeId agg;
  if (want_link_aggregate) {
    agg = t.constant(Tensor(inc.n_links, t.value(path_states).cols()));
  }
  for (int k = 0; k < inc.max_path_len; ++k) {
    const std::vector<int>& rows = inc.paths_at[k];
    const std::vector<int>& links = inc.links_at[k];
    NodeId x = t.gather_rows(link_states, links);
    NodeId h1k = t.gather_rows(h1, rows);
    NodeId h1k_new = nn::gru_step(t, cell1, h1k, x);
    h1 = t.scatter_rows(h1, rows, h1k_new);
    NodeId top = h1k_new;
    if (stacked) {
      NodeId h2k = t.gather_rows(h2, rows);
      NodeId h2k_new = nn::gru_step(t, cell2, h2k, h1k_new);
      h2 = t.scatter_rows(h2, rows, h2k_new);
      top = h2k_new;
    }
    if (want_link_aggregate) {
      agg = t.add(agg, t.segment_sum(top, links, inc.n_links));
    }
  }
  return {stacked ? h2 : h1, agg};
}

NodeId link_update(Tape& t, const ModelConfig& cfg, const GnnModel::Bound& bound,
                   NodeId link_states, NodeId aggregate) {
  if (cfg.link_updater == LinkUpdaterKind::Gru) {
    return nn::gru_step(t, cell_from(bound, "link_gru"), link_states, aggregate);
  }
  NodeId x = t.concat_cols(link_states, aggregate);
  NodeId h1 = t.relu(t.add_rowvec(t.matmul(x, bound.at("link_ff.w1")), bound.at("link_ff.b1")));
  NodeId h2 = t.relu(t.add_rowvec(t.matmul(h1, bound.at("link_ff.w2")), bound.at("link_ff.b2")));
  return t.add_rowvec(t.matmul(h2, bound.at("link_ff.w3")), bound.at("link_ff.b3"));
}

NodeId apply_dropout(Tape& t, NodeId h, const GnnModel::DropoutCtx* ctx) {
  if (!ctx || ctx->rate <= 0.0 || !ctx->rng) return h;
  const Tensor& hv = t.value(h);
  Tensor mask(hv.rows(), hv.cols());
  const double keep = 1.0 - ctx->rate;
  for (double& v : mask.values()) {
    v = ctx->rng->uniform01() < keep ? 1.0 / keep : 0.0;
  }
  return t.mul(h, t.constant(std::move(mask)));
}

}  // namespace

NodeId GnnModel::forward_raw(Tape& t, const Bound& bound, const IncidenceStructures& inc,
                             const EncodedSample& enc, const DropoutCtx* dropout) const {
  if (inc.n_paths == 0) throw std::invalid_argument("forward on a sample with no paths");
  NodeId paths = t.constant(enc.path_states);
  NodeId links = t.constant(enc.link_states);
  NodeId nodes;
  const bool augmented = cfg_.variant == Variant::NodeAugmented;
  if (augmented) nodes = t.constant(enc.node_states);

  // Split G_ln into source and destination id lists for segment sums.
  std::vector<int> src_ids(inc.n_links), dst_ids(inc.n_links);
  for (int l = 0; l < inc.n_links; ++l) {
    src_ids[l] = inc.link_nodes[l][0];
    dst_ids[l] = inc.link_nodes[l][1];
  }

  for (int iter = 0; iter < cfg_.message_passing_iterations; ++iter) {
    if (!augmented) {
      // paths sweep the link sequence; links absorb the summed messages
      SweepResult sweep = path_sweep(t, cfg_, bound, inc, paths, links, true);
      paths = sweep.final_states;
      links = link_update(t, cfg_, bound, links, sweep.link_aggregate);
    } else {
      // (2) path -> link
      SweepResult msg_sweep = path_sweep(t, cfg_, bound, inc, paths, links, true);
      links = link_update(t, cfg_, bound, links, msg_sweep.link_aggregate);
      // (3) link -> node: each link reports to both endpoints
      NodeId node_agg = t.add(t.segment_sum(links, src_ids, inc.n_nodes),
                              t.segment_sum(links, dst_ids, inc.n_nodes));
      nodes = nn::gru_step(t, cell_from(bound, "node_gru"), nodes, node_agg);
      // (4) node -> link
      NodeId endpoint_states =
          t.concat_cols(t.gather_rows(nodes, src_ids), t.gather_rows(nodes, dst_ids));
      links = nn::gru_step(t, cell_from(bound, "link_from_node_gru"), links, endpoint_states);
      // (5) link -> path
      SweepResult update_sweep = path_sweep(t, cfg_, bound, inc, paths, links, false);
      paths = update_sweep.final_states;
    }
  }

  NodeId readout_in = paths;
  if (augmented) {
    // (6) node -> path over G_pn
    std::vector<int> flat_nodes, flat_paths;
    for (int p = 0; p < inc.n_paths; ++p) {
      for (int n : inc.path_nodes[p]) {
        flat_nodes.push_back(n);
        flat_paths.push_back(p);
      }
    }
    NodeId path_node_agg =
        t.segment_sum(t.gather_rows(nodes, flat_nodes), flat_paths, inc.n_paths);
    readout_in = t.concat_cols(paths, path_node_agg);
  }

  // (7) readout
  NodeId h = readout_in;
  const std::vector<int> hidden = scaled_hidden(cfg_);
  for (size_t i = 0; i < hidden.size(); ++i) {
    h = t.relu(t.add_rowvec(t.matmul(h, bound.at("readout.w" + std::to_string(i))),
                            bound.at("readout.b" + std::to_string(i))));
    h = apply_dropout(t, h, dropout);
  }
  if (cfg_.readout_residual) h = t.concat_cols(h, readout_in);
  return t.add_rowvec(t.matmul(h, bound.at("readout.out_w")), bound.at("readout.out_b"));
}

NodeId GnnModel::predictions(Tape& t, NodeId raw) const {
  return cfg_.target_transform == TargetTransform::Log ? t.exp_(raw) : raw;
}

std::vector<double> GnnModel::predict_sample(const Sample& sample, const Topology& topo) const {
  IncidenceStructures inc = build_incidence(sample, topo);
  EncodedSample enc = encode_features(sample, topo, stats_, cfg_);
  Tape tape;
  Bound bound = bind(tape, false);
  NodeId preds = predictions(tape, forward_raw(tape, bound, inc, enc));
  const Tensor& v = tape.value(preds);
  std::vector<double> out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = v.data()[i];
  return out;
}

nn::Checkpoint GnnModel::to_checkpoint() const {
  nn::Checkpoint ckpt;
  ckpt.header["variant"] = to_string(cfg_.variant);
  ckpt.header["config_hash"] = model_config_hash(cfg_);
  ckpt.header["config"] = model_config_to_json(cfg_);
  ckpt.header["scaling"] = stats_.mode == ScalingMode::Standardize ? "standardize" : "minmax";
  for (const auto& [name, tensor] : params_) ckpt.params.insert(name, tensor);
  auto put_stats = [&](const std::string& name, const std::vector<double>& v) {
    ckpt.params.insert(kStatsPrefix + name,
                       Tensor::from_values(1, static_cast<int>(v.size()), v));
  };
  put_stats("path.center", stats_.path_center);
  put_stats("path.scale", stats_.path_scale);
  put_stats("link.center", stats_.link_center);
  put_stats("link.scale", stats_.link_scale);
  put_stats("node.center", stats_.node_center);
  put_stats("node.scale", stats_.node_scale);
  return ckpt;
}

GnnModel GnnModel::from_checkpoint(const nn::Checkpoint& ckpt) {
  auto cfg_it = ckpt.header.find("config");
  if (cfg_it == ckpt.header.end())
    throw ParseError("checkpoint header missing embedded config");
  GnnModel model(model_config_from_json(cfg_it->second));
  if (model_config_hash(model.cfg_) != ckpt.header.at("config_hash"))
    throw ParseError("checkpoint config hash does not match its config");
  model.stats_.mode = ckpt.header.at("scaling") == "minmax" ? ScalingMode::MinMax
                                                            : ScalingMode::Standardize;
  auto take_stats = [&](const std::string& name, std::vector<double>& into) {
    const Tensor& t = ckpt.params.at(kStatsPrefix + name);
    into.assign(t.values().begin(), t.values().end());
  };
  take_stats("path.center", model.stats_.path_center);
  take_stats("path.scale", model.stats_.path_scale);
  take_stats("link.center", model.stats_.link_center);
  take_stats("link.scale", model.stats_.link_scale);
  take_stats("node.center", model.stats_.node_center);
  take_stats("node.scale", model.stats_.node_scale);
  for (const auto& [name, tensor] : ckpt.params) {
    if (name.rfind(kStatsPrefix, 0) == 0) continue;
    model.params_.insert(name, tensor);
  }
  return model;
}

}  // namespace flowtwin::gnn
