#include "flowtwin/gnn/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "flowtwin/textio.hpp"

namespace flowtwin::gnn {

using nn::NodeId;
using nn::Tape;
using nn::Tensor;

std::vector<PreparedSample> prepare_samples(const DatasetBundle& bundle,
                                            const EncoderStats& stats,
                                            const ModelConfig& cfg) {
  std::vector<PreparedSample> out;
  out.reserve(bundle.samples.size());
  for (const Sample& s : bundle.samples) {
    const Topology& topo = bundle.topologies.at(s.topology_id);
    PreparedSample ps;
    ps.sample_id = s.sample_id;
    ps.inc = build_incidence(s, topo);
    ps.enc = encode_features(s, topo, stats, cfg);
    if (s.labels) {
      std::vector<double> targets;
      for (size_t i = 0; i < s.labels->size(); ++i) {
        const FlowStats& fs = (*s.labels)[i];
        if (fs.delivered > 0 && fs.mean_delay > 0.0) {
          ps.labeled_rows.push_back(static_cast<int>(i));
          targets.push_back(fs.mean_delay);
        }
      }
      ps.targets = Tensor::from_values(static_cast<int>(targets.size()), 1, targets);
    }
    out.push_back(std::move(ps));
  }
  return out;
}

double evaluate_mape(const GnnModel& model, const std::vector<PreparedSample>& samples) {
  double acc = 0.0;
  int64_t n = 0;
  for (const PreparedSample& ps : samples) {
    if (ps.labeled_rows.empty()) continue;
    Tape tape;
    GnnModel::Bound bound = model.bind(tape, false);
    NodeId preds = model.predictions(tape, model.forward_raw(tape, bound, ps.inc, ps.enc));
    const Tensor& pv = tape.value(preds);
    for (size_t i = 0; i < ps.labeled_rows.size(); ++i) {
      double y = ps.targets.at(static_cast<int>(i), 0);
      double yhat = pv.at(ps.labeled_rows[i], 0);
      acc += std::abs((yhat - y) / y);
      ++n;
    }
  }
  if (n == 0) throw std::invalid_argument("evaluate_mape: no labeled flows");
  return 100.0 * acc / static_cast<double>(n);
}

namespace {

bool is_weight_matrix(const std::string& name) {
  // weight matrices (gru w*/u*, dense w*) regularize; biases do not
  auto dot = name.rfind('.');
  if (dot == std::string::npos) return false;
  char c = name[dot + 1];
  return c == 'w' || c == 'u' || name.substr(dot + 1) == "out_w";
}

}  // namespace

TrainResult train_model(const ModelConfig& cfg, const DatasetBundle& train,
                        const DatasetBundle& val, const TrainConfig& tcfg) {
  if (train.samples.empty() || val.samples.empty())
    throw std::invalid_argument("train/val splits must be nonempty");

  GnnModel model(cfg);
  model.encoder_stats() = compute_encoder_stats(train, cfg.scaling);
  model.init_params(seed_stream(tcfg.seed, 0, 0xA1));

  std::vector<PreparedSample> train_ps = prepare_samples(train, model.encoder_stats(), cfg);
  std::vector<PreparedSample> val_ps = prepare_samples(val, model.encoder_stats(), cfg);

  std::vector<const PreparedSample*> trainable;
  for (const PreparedSample& ps : train_ps) {
    if (!ps.labeled_rows.empty()) trainable.push_back(&ps);
  }
  if (trainable.empty()) throw std::invalid_argument("no labeled training flows");

  nn::AdamOptimizer opt(tcfg.lr);
  Rng pick_rng = Rng::stream(tcfg.seed, 1, 0xB2);
  Rng dropout_rng = Rng::stream(tcfg.seed, 2, 0xC3);

  TrainResult result{GnnModel(cfg), {}, 0.0, false};
  nn::ParamStore best_params = model.params();
  double best_val = std::numeric_limits<double>::infinity();
  int64_t intervals_since_improve = 0;

  for (int64_t step = 1; step <= tcfg.max_steps; ++step) {
    const PreparedSample& ps =
        *trainable[pick_rng.uniform_int(0, static_cast<int64_t>(trainable.size()) - 1)];
    try {
      Tape tape;
      GnnModel::Bound bound = model.bind(tape, true);
      GnnModel::DropoutCtx dropout{cfg.dropout, &dropout_rng};
      NodeId raw = model.forward_raw(tape, bound, ps.inc, ps.enc,
                                     cfg.dropout > 0.0 ? &dropout : nullptr);
      NodeId preds = model.predictions(tape, raw);
      NodeId picked = tape.gather_rows(preds, ps.labeled_rows);
      NodeId target = tape.constant(ps.targets);
      NodeId loss = cfg.loss == LossKind::Mape ? nn::mape_loss(tape, picked, target)
                                               : nn::mse_loss(tape, picked, target);
      if (cfg.l2 > 0.0) {
        NodeId reg;
        for (const auto& [name, id] : bound) {
          if (!is_weight_matrix(name)) continue;
          NodeId sq = tape.sum(tape.mul(id, id));
          reg = reg.valid() ? tape.add(reg, sq) : sq;
        }
        if (reg.valid()) loss = tape.add(loss, tape.affine(reg, cfg.l2, 0.0));
      }
      tape.backward(loss);
      std::map<std::string, Tensor> grads;
      for (const auto& [name, id] : bound) grads.emplace(name, tape.grad(id));
      opt.step(model.params(), grads);
    } catch (const nn::NumericError&) {
      result.diverged = true;
      break;
    }

    if (step % tcfg.eval_interval == 0 || step == tcfg.max_steps) {
      double train_mape = evaluate_mape(model, train_ps);
      double val_mape = evaluate_mape(model, val_ps);
      result.history.push_back({step, train_mape, val_mape, opt.last_lr()});
      if (tcfg.verbose) {
        std::fprintf(stderr, "step %lld train MAPE %.3f%% val MAPE %.3f%% lr %.2e\n",
                     static_cast<long long>(step), train_mape, val_mape, opt.last_lr());
      }
      if (val_mape < best_val) {
        best_val = val_mape;
        best_params = model.params();
        intervals_since_improve = 0;
      } else if (++intervals_since_improve >= tcfg.patience) {
        break;
      }
    }
  }

  result.model = GnnModel(cfg);
  result.model.encoder_stats() = model.encoder_stats();
  for (const auto& [name, tensor] : best_params) result.model.params().insert(name, tensor);
  result.best_val_mape = best_val;
  return result;
}

PredictionTable predict_dataset(const GnnModel& model, const DatasetBundle& bundle) {
  PredictionTable table;
  for (const Sample& s : bundle.samples) {
    const Topology& topo = bundle.topologies.at(s.topology_id);
    std::vector<double> preds = model.predict_sample(s, topo);
    if (preds.size() != s.traffic.flows.size())
      throw std::runtime_error("prediction count does not match flow count");
    for (size_t i = 0; i < preds.size(); ++i) {
      const FlowSpec& f = s.traffic.flows[i];
      table.rows.push_back({s.sample_id, f.src, f.dst, preds[i]});
    }
  }
  return table;
}

void write_prediction_csv(const std::filesystem::path& path, const PredictionTable& table) {
  std::ostringstream out;
  out << "sample_id,src,dst,delay\n";
  for (const PredRow& r : table.rows) {
    out << r.sample_id << "," << r.src << "," << r.dst << "," << format_sig9(r.delay) << "\n";
  }
  write_text_file(path, out.str());
}

PredictionTable read_prediction_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open prediction table: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "sample_id,src,dst,delay")
    throw ParseError("prediction table " + path.string() +
                     ": bad header, expected sample_id,src,dst,delay");
  PredictionTable table;
  int64_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string id_s, src, dst, delay_s;
    if (!std::getline(row, id_s, ',') || !std::getline(row, src, ',') ||
        !std::getline(row, dst, ',') || !std::getline(row, delay_s)) {
      throw ParseError("prediction table " + path.string() + ": malformed line " +
                       std::to_string(lineno));
    }
    try {
      size_t pos = 0;
      int64_t id = std::stoll(id_s, &pos);
      if (pos != id_s.size()) throw std::invalid_argument("trailing chars");
      pos = 0;
      double delay = std::stod(delay_s, &pos);
      if (pos != delay_s.size()) throw std::invalid_argument("trailing chars");
      table.rows.push_back({id, src, dst, delay});
    } catch (const std::exception&) {
      throw ParseError("prediction table " + path.string() + ": bad value on line " +
                       std::to_string(lineno));
    }
  }
  return table;
}

namespace {

bool row_key_less(const PredRow& a, const PredRow& b) {
  return std::tie(a.sample_id, a.src, a.dst) < std::tie(b.sample_id, b.src, b.dst);
}

bool same_key(const PredRow& a, const PredRow& b) {
  return a.sample_id == b.sample_id && a.src == b.src && a.dst == b.dst;
}

}  // namespace

PredictionTable ensemble_average(const std::vector<PredictionTable>& members) {
  if (members.empty()) throw std::invalid_argument("ensemble of zero members");
  std::vector<PredictionTable> sorted = members;
  for (PredictionTable& t : sorted) {
    std::sort(t.rows.begin(), t.rows.end(), row_key_less);
  }
  const size_t n = sorted[0].rows.size();
  for (const PredictionTable& t : sorted) {
    if (t.rows.size() != n)
      throw std::invalid_argument("ensemble members have different row counts");
  }
  PredictionTable out;
  out.rows.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    const PredRow& first = sorted[0].rows[i];
    double sum = 0.0;
    for (const PredictionTable& t : sorted) {
      if (!same_key(t.rows[i], first))
        throw std::invalid_argument("ensemble members disagree on prediction keys");
      sum += t.rows[i].delay;
    }
    out.rows.push_back(
        {first.sample_id, first.src, first.dst, sum / static_cast<double>(sorted.size())});
  }
  return out;
}

}  // namespace flowtwin::gnn
