#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace flowtwin {

enum class SchedPolicy { SP, WFQ, DRR };

std::string to_string(SchedPolicy p);
SchedPolicy sched_policy_from_string(const std::string& s);

constexpr int kNumQueues = 3;

struct NodeScheduling {
  SchedPolicy policy = SchedPolicy::WFQ;
  std::array<int, kNumQueues> weights = {10, 30, 60};  // must sum to 100
};

/// Per-node queue scheduling configuration.
struct SchedulingConfig {
  std::map<std::string, NodeScheduling> per_node;
};

struct Link {
  std::string src;
  std::string dst;
  double capacity = 0.0;  // bits per time unit
  int buffer_size = 32;   // packets per queue
};

/// Directed network graph. Node ids are opaque strings; ordering throughout
/// the pipeline is lexicographic on ids.
struct Topology {
  std::vector<std::string> nodes;
  std::vector<Link> links;

  int node_index(const std::string& id) const;
  /// Index of the directed link src->dst, or -1.
  int link_index(const std::string& src, const std::string& dst) const;
};

using NodePair = std::pair<std::string, std::string>;

/// One loop-free path per ordered (src,dst) pair. std::map keeps pairs in
/// lexicographic order, which is the canonical flow order everywhere.
struct RoutingConfig {
  std::map<NodePair, std::vector<std::string>> paths;

  std::string serialize() const;  // canonical text form, used for determinism checks
};

struct Violation {
  NodePair pair;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

enum class TopologyKind { Line, Ring, RandomConnected };

TopologyKind topology_kind_from_string(const std::string& s);

/// Throws std::invalid_argument if any Topology invariant is broken
/// (positive capacities, buffer >= 1, no self loops, no duplicate directed
/// links, strong connectivity).
void validate_topology(const Topology& topo);

void validate_scheduling(const Topology& topo, const SchedulingConfig& sched);

Topology make_synthetic_topology(TopologyKind kind, int n,
                                 std::pair<double, double> capacity_range,
                                 uint64_t seed, int buffer_size = 32);

/// Minimum-weight paths for all ordered pairs; ties broken by the
/// lexicographically smallest node sequence. `link_weights` is parallel to
/// topo.links and must be positive.
RoutingConfig shortest_path_routing(const Topology& topo,
                                    const std::vector<double>& link_weights);

/// Shortest-path routing after perturbing every link weight uniformly in
/// [1,2]; deterministic per seed.
RoutingConfig generate_routing_variation(const Topology& topo, uint64_t seed);

ValidationReport validate_routing(const Topology& topo, const RoutingConfig& routing);

/// Topology file format: {"nodes": [...], "links": [{src,dst,capacity,
/// buffer_size}...], "scheduling": {node: {policy, weights}}} with scheduling
/// optional. Unknown top-level fields are rejected.
struct TopologyFile {
  Topology topology;
  std::optional<SchedulingConfig> scheduling;
};

TopologyFile read_topology_file(const std::filesystem::path& path);
void write_topology_file(const std::filesystem::path& path, const Topology& topo,
                         const SchedulingConfig* sched = nullptr);

}  // namespace flowtwin
