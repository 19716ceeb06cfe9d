#include "flowtwin/eval.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace flowtwin {

std::map<FlowKey, double> ground_truth_delays(const DatasetBundle& labeled) {
  std::map<FlowKey, double> truth;
  for (const Sample& s : labeled.samples) {
    if (!s.labels)
      throw DegenerateTruth("sample " + std::to_string(s.sample_id) + " carries no labels");
    for (size_t i = 0; i < s.labels->size(); ++i) {
      const FlowSpec& f = s.traffic.flows[i];
      const FlowStats& fs = (*s.labels)[i];
      if (fs.delivered <= 0 || fs.mean_delay <= 0.0) {
        throw DegenerateTruth("flow " + f.src + "->" + f.dst + " of sample " +
                              std::to_string(s.sample_id) +
                              " has no positive delay label");
      }
      truth[{s.sample_id, f.src, f.dst}] = fs.mean_delay;
    }
  }
  return truth;
}

namespace {

std::string key_to_string(const FlowKey& k) {
  std::ostringstream out;
  out << "(" << std::get<0>(k) << "," << std::get<1>(k) << "," << std::get<2>(k) << ")";
  return out.str();
}

[[noreturn]] void throw_offenders(const std::string& what,
                                  const std::vector<FlowKey>& offenders) {
  std::ostringstream msg;
  msg << what << ":";
  const size_t shown = std::min<size_t>(offenders.size(), 10);
  for (size_t i = 0; i < shown; ++i) msg << " " << key_to_string(offenders[i]);
  if (offenders.size() > shown) msg << " ... (" << offenders.size() << " total)";
  throw MalformedSubmission(msg.str());
}

}  // namespace

double score_submission(const gnn::PredictionTable& submission,
                        const std::map<FlowKey, double>& truth) {
  std::map<FlowKey, double> preds;
  std::vector<FlowKey> duplicate;
  for (const gnn::PredRow& r : submission.rows) {
    FlowKey k{r.sample_id, r.src, r.dst};
    if (!preds.emplace(k, r.delay).second) duplicate.push_back(k);
  }
  if (!duplicate.empty()) throw_offenders("duplicate prediction keys", duplicate);

  std::vector<FlowKey> missing, extra, non_finite;
  for (const auto& [k, y] : truth) {
    if (!preds.count(k)) missing.push_back(k);
  }
  for (const auto& [k, yhat] : preds) {
    if (!truth.count(k)) extra.push_back(k);
    if (!std::isfinite(yhat)) non_finite.push_back(k);
  }
  if (!missing.empty()) throw_offenders("missing prediction keys", missing);
  if (!extra.empty()) throw_offenders("unexpected prediction keys", extra);
  if (!non_finite.empty()) throw_offenders("non-finite predictions", non_finite);

  for (const auto& [k, y] : truth) {
    if (y <= 0.0) throw DegenerateTruth("non-positive truth delay for " + key_to_string(k));
  }
  double acc = 0.0;
  for (const auto& [k, y] : truth) {
    acc += std::abs((preds.at(k) - y) / y);
  }
  return 100.0 * acc / static_cast<double>(truth.size());
}

Leaderboard make_leaderboard(std::vector<std::pair<std::string, double>> scores) {
  std::sort(scores.begin(), scores.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second < b.second;
    return a.first < b.first;
  });
  Leaderboard board;
  for (size_t i = 0; i < scores.size(); ++i) {
    int rank;
    if (i > 0 && scores[i].second == scores[i - 1].second) {
      rank = board.rows.back().rank;  // tie shares the rank
    } else {
      rank = static_cast<int>(i) + 1;  // next distinct score skips past the tie
    }
    board.rows.push_back({rank, scores[i].first, scores[i].second});
  }
  return board;
}

Leaderboard rank_submissions(const std::vector<Submission>& submissions,
                             const std::map<FlowKey, double>& truth) {
  if (submissions.empty()) throw std::invalid_argument("no submissions to rank");
  std::vector<std::pair<std::string, double>> scores;
  std::vector<UnrankedEntry> unranked;
  for (const Submission& s : submissions) {
    try {
      scores.emplace_back(s.team, score_submission(s.table, truth));
    } catch (const MalformedSubmission& e) {
      unranked.push_back({s.team, e.what()});
    }
  }
  Leaderboard board = make_leaderboard(std::move(scores));
  board.unranked = std::move(unranked);
  return board;
}

}  // namespace flowtwin
