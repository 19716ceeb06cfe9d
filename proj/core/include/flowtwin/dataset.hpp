#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "flowtwin/simcore.hpp"
#include "flowtwin/topology.hpp"
#include "flowtwin/traffic.hpp"

namespace flowtwin {

/// One dataset record: a simulated network scenario, labeled unless the
/// split emulates a test set.
struct Sample {
  int64_t sample_id = 0;
  std::string topology_id;
  RoutingConfig routing;
  SchedulingConfig scheduling;
  TrafficMatrix traffic;
  std::optional<std::vector<FlowStats>> labels;  // aligned with traffic.flows
};

struct DatasetManifest {
  std::string split;
  std::vector<std::string> topology_ids;
  int64_t sample_count = 0;
  std::vector<double> tier_proportions;  // four difficulty tiers
  uint64_t master_seed = 0;
  std::string generator_version;
};

struct DatasetGenConfig {
  std::string split = "train";
  int64_t n_samples = 0;
  uint64_t master_seed = 0;
  SimConfig sim;
  bool with_labels = true;
};

/// Scheduling weight triples drawn for the variable-weight tiers.
constexpr std::array<std::array<int, 3>, 4> kWeightPool = {{
    {10, 30, 60}, {33, 33, 34}, {60, 30, 10}, {20, 20, 60}}};

/// Difficulty tier of sample `i`: four 25% blocks, remainder going to the
/// lowest tiers first.
int tier_of_sample(int64_t i, int64_t n_samples);

/// Runs the full generation pipeline and writes `manifest`, `samples`, and
/// `topologies/<id>.json` under out_dir. Deterministic per
/// (topologies, n_samples, master_seed, sim config). An `INCOMPLETE` marker
/// exists while generation is in progress and on aborted runs.
DatasetManifest generate_dataset(const std::vector<std::pair<std::string, Topology>>& topologies,
                                 const DatasetGenConfig& cfg,
                                 const std::filesystem::path& out_dir);

DatasetManifest read_manifest(const std::filesystem::path& dataset_dir);

/// Samples in sample_id order; with_labels=false strips labels (test-set
/// emulation). Throws ParseError naming the record and field on schema
/// violations.
std::vector<Sample> read_samples(const std::filesystem::path& dataset_dir, bool with_labels);

struct DatasetBundle {
  DatasetManifest manifest;
  std::vector<Sample> samples;
  std::map<std::string, Topology> topologies;
};

DatasetBundle load_dataset(const std::filesystem::path& dataset_dir, bool with_labels);

struct SplitViolation {
  std::string split_a;
  std::string split_b;
  std::string topology_id;
};

struct SplitReport {
  std::vector<SplitViolation> violations;
  bool ok() const { return violations.empty(); }
};

/// Empty report iff the manifests' topology id sets are pairwise disjoint.
SplitReport check_split_disjointness(const std::vector<DatasetManifest>& manifests);

/// Serializes one sample to its canonical single-line JSON form.
std::string sample_to_json_line(const Sample& s);
Sample sample_from_json_line(const std::string& line, bool with_labels, int64_t record_index);

}  // namespace flowtwin
