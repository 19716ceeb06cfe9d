#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "flowtwin/dataset.hpp"
#include "flowtwin/gnn/train.hpp"

namespace flowtwin {

/// Submission/key mismatch or non-finite prediction; the message names up to
/// ten offending keys.
struct MalformedSubmission : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DegenerateTruth : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using FlowKey = std::tuple<int64_t, std::string, std::string>;  // (sample_id, src, dst)

/// One delay per flow of every labeled sample. Throws DegenerateTruth when a
/// label is non-positive (undelivered flows cannot be scored).
std::map<FlowKey, double> ground_truth_delays(const DatasetBundle& labeled);

/// Pooled mean absolute percentage error over all flows, in percent.
/// Prediction keys must exactly match the ground-truth keys.
double score_submission(const gnn::PredictionTable& submission,
                        const std::map<FlowKey, double>& truth);

struct LeaderboardRow {
  int rank;
  std::string team;
  double mape;
};

struct UnrankedEntry {
  std::string team;
  std::string reason;
};

/// Ascending by MAPE; ties share a rank and the following rank skips.
struct Leaderboard {
  std::vector<LeaderboardRow> rows;
  std::vector<UnrankedEntry> unranked;
};

/// Competition ranking over already-scored teams.
Leaderboard make_leaderboard(std::vector<std::pair<std::string, double>> scores);

struct Submission {
  std::string team;
  gnn::PredictionTable table;
};

/// Scores every submission; malformed ones are isolated, not fatal.
Leaderboard rank_submissions(const std::vector<Submission>& submissions,
                             const std::map<FlowKey, double>& truth);

}  // namespace flowtwin
