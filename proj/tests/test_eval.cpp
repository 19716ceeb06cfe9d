#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "flowtwin/eval.hpp"

using namespace flowtwin;
using gnn::PredictionTable;
using gnn::PredRow;

namespace {

std::map<FlowKey, double> small_truth() {
  return {{{0, "a", "b"}, 2.0}, {{0, "b", "a"}, 4.0}, {{1, "a", "b"}, 1.0}};
}

PredictionTable table_for(const std::map<FlowKey, double>& truth, double factor) {
  PredictionTable t;
  for (const auto& [k, y] : truth) {
    t.rows.push_back({std::get<0>(k), std::get<1>(k), std::get<2>(k), y * factor});
  }
  return t;
}

}  // namespace

TEST_CASE("perfect submission scores 0") {
  auto truth = small_truth();
  CHECK(score_submission(table_for(truth, 1.0), truth) == 0.0);
}

TEST_CASE("uniform 2x overestimate scores 100") {
  auto truth = small_truth();
  CHECK(score_submission(table_for(truth, 2.0), truth) ==
        doctest::Approx(100.0).epsilon(1e-12));
}

TEST_CASE("six-flow hand-computed value") {
  // spreadsheet arithmetic: errors 0.1, 0.25, 0.5, 0, 0.2, 0.05 -> mean 18.333...%
  std::map<FlowKey, double> truth{
      {{0, "a", "b"}, 1.0}, {{0, "a", "c"}, 2.0}, {{0, "b", "a"}, 4.0},
      {{1, "a", "b"}, 5.0}, {{1, "a", "c"}, 2.5}, {{1, "b", "a"}, 2.0}};
  PredictionTable preds;
  preds.rows = {{0, "a", "b", 1.1},  {0, "a", "c", 1.5}, {0, "b", "a", 6.0},
                {1, "a", "b", 5.0},  {1, "a", "c", 3.0}, {1, "b", "a", 1.9}};
  double expected = 100.0 * (0.1 + 0.25 + 0.5 + 0.0 + 0.2 + 0.05) / 6.0;
  CHECK(score_submission(preds, truth) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("MAPE is invariant under common rescaling") {
  auto truth = small_truth();
  PredictionTable preds = table_for(truth, 1.3);
  double base = score_submission(preds, truth);
  std::map<FlowKey, double> scaled_truth;
  for (auto [k, y] : truth) scaled_truth[k] = y * 7.5;
  PredictionTable scaled_preds = preds;
  for (auto& r : scaled_preds.rows) r.delay *= 7.5;
  CHECK(score_submission(scaled_preds, scaled_truth) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("missing and extra keys are malformed with offender lists") {
  auto truth = small_truth();
  PredictionTable missing = table_for(truth, 1.0);
  missing.rows.pop_back();
  CHECK_THROWS_WITH_AS(score_submission(missing, truth), doctest::Contains("missing"),
                       MalformedSubmission);
  PredictionTable extra = table_for(truth, 1.0);
  extra.rows.push_back({9, "z", "q", 1.0});
  CHECK_THROWS_WITH_AS(score_submission(extra, truth), doctest::Contains("unexpected"),
                       MalformedSubmission);
  PredictionTable nan_table = table_for(truth, 1.0);
  nan_table.rows[0].delay = std::nan("");
  CHECK_THROWS_AS(score_submission(nan_table, truth), MalformedSubmission);
}

TEST_CASE("offender list is capped at ten") {
  std::map<FlowKey, double> truth;
  for (int i = 0; i < 25; ++i) truth[{i, "a", "b"}] = 1.0;
  PredictionTable empty;
  try {
    score_submission(empty, truth);
    FAIL("expected MalformedSubmission");
  } catch (const MalformedSubmission& e) {
    std::string msg = e.what();
    int count = 0;
    for (size_t pos = 0; (pos = msg.find('(', pos)) != std::string::npos; ++pos) ++count;
    CHECK(count <= 11);  // 10 keys plus the "(25 total)" note
    CHECK(msg.find("25 total") != std::string::npos);
  }
}

TEST_CASE("degenerate truth is rejected") {
  std::map<FlowKey, double> truth{{{0, "a", "b"}, 0.0}};
  PredictionTable preds;
  preds.rows = {{0, "a", "b", 1.0}};
  CHECK_THROWS_AS(score_submission(preds, truth), DegenerateTruth);
}

TEST_CASE("leaderboard reproduces the published challenge ordering") {
  Leaderboard board = make_leaderboard(
      {{"Gradient Ascent", 5.42}, {"Steredeg", 1.53}, {"Salzburg Research", 1.95}});
  REQUIRE(board.rows.size() == 3);
  CHECK(board.rows[0].team == "Steredeg");
  CHECK(board.rows[0].rank == 1);
  CHECK(board.rows[1].team == "Salzburg Research");
  CHECK(board.rows[1].rank == 2);
  CHECK(board.rows[2].team == "Gradient Ascent");
  CHECK(board.rows[2].rank == 3);
}

TEST_CASE("single submission ranks first; ties share rank and skip") {
  Leaderboard single = make_leaderboard({{"only", 3.0}});
  REQUIRE(single.rows.size() == 1);
  CHECK(single.rows[0].rank == 1);

  Leaderboard tied = make_leaderboard({{"a", 2.0}, {"b", 2.0}, {"c", 5.0}});
  CHECK(tied.rows[0].rank == 1);
  CHECK(tied.rows[1].rank == 1);
  CHECK(tied.rows[2].rank == 3);
}

TEST_CASE("rank ordering ignores submission input order") {
  auto truth = small_truth();
  std::vector<Submission> subs{{"worse", table_for(truth, 1.5)},
                               {"better", table_for(truth, 1.1)}};
  Leaderboard a = rank_submissions(subs, truth);
  std::swap(subs[0], subs[1]);
  Leaderboard b = rank_submissions(subs, truth);
  REQUIRE(a.rows.size() == 2);
  CHECK(a.rows[0].team == b.rows[0].team);
  CHECK(a.rows[0].team == "better");
}

TEST_CASE("malformed submissions are isolated, not fatal") {
  auto truth = small_truth();
  PredictionTable bad = table_for(truth, 1.0);
  bad.rows.pop_back();
  std::vector<Submission> subs{{"ok", table_for(truth, 1.2)}, {"broken", bad}};
  Leaderboard board = rank_submissions(subs, truth);
  REQUIRE(board.rows.size() == 1);
  CHECK(board.rows[0].team == "ok");
  REQUIRE(board.unranked.size() == 1);
  CHECK(board.unranked[0].team == "broken");
}
