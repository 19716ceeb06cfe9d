#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "flowtwin/gnn/model.hpp"
#include "flowtwin/nn/optim.hpp"

namespace flowtwin::gnn {

struct TrainConfig {
  int64_t max_steps = 4000;
  int64_t eval_interval = 250;
  int64_t patience = 12;  // evaluation intervals without val improvement
  nn::CyclicLr lr{1e-4, 2e-3, 500};
  uint64_t seed = 1;
  bool verbose = false;
};

struct HistoryEntry {
  int64_t step;
  double train_mape;
  double val_mape;
  double lr;
};

struct TrainResult {
  GnnModel model;  // best-validation parameters
  std::vector<HistoryEntry> history;
  double best_val_mape = 0.0;
  bool diverged = false;
};

/// Incidence + encoded states + labeled targets, computed once per sample.
struct PreparedSample {
  int64_t sample_id = 0;
  IncidenceStructures inc;
  EncodedSample enc;
  std::vector<int> labeled_rows;  // flows with delivered > 0
  nn::Tensor targets;             // (labeled x 1) mean delays
};

std::vector<PreparedSample> prepare_samples(const DatasetBundle& bundle,
                                            const EncoderStats& stats,
                                            const ModelConfig& cfg);

/// Pooled linear-space MAPE of the model over prepared samples, in percent.
double evaluate_mape(const GnnModel& model, const std::vector<PreparedSample>& samples);

/// Mini-batch = one sample's full flow set; Adam with the cyclic schedule;
/// keeps the best-validation snapshot. Non-finite losses abort the loop and
/// return the last good snapshot with `diverged` set.
TrainResult train_model(const ModelConfig& cfg, const DatasetBundle& train,
                        const DatasetBundle& val, const TrainConfig& tcfg);

struct PredRow {
  int64_t sample_id;
  std::string src;
  std::string dst;
  double delay;
};

/// Rows ordered by (sample_id, src, dst); one per flow.
struct PredictionTable {
  std::vector<PredRow> rows;
};

PredictionTable predict_dataset(const GnnModel& model, const DatasetBundle& bundle);

/// CSV with header sample_id,src,dst,delay and 9-significant-digit delays.
void write_prediction_csv(const std::filesystem::path& path, const PredictionTable& table);
PredictionTable read_prediction_csv(const std::filesystem::path& path);

/// Per-key arithmetic mean across member tables. Throws std::invalid_argument
/// when key sets differ.
PredictionTable ensemble_average(const std::vector<PredictionTable>& members);

}  // namespace flowtwin::gnn
