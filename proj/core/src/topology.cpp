#include "flowtwin/topology.hpp"

#include <algorithm>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>
#include <stdexcept>

#include "flowtwin/rng.hpp"
#include "flowtwin/textio.hpp"
#include "json.hpp"

namespace flowtwin {

std::string to_string(SchedPolicy p) {
  switch (p) {
    case SchedPolicy::SP: return "SP";
    case SchedPolicy::WFQ: return "WFQ";
    case SchedPolicy::DRR: return "DRR";
  }
  throw std::invalid_argument("bad SchedPolicy");
}

SchedPolicy sched_policy_from_string(const std::string& s) {
  if (s == "SP") return SchedPolicy::SP;
  if (s == "WFQ") return SchedPolicy::WFQ;
  if (s == "DRR") return SchedPolicy::DRR;
  throw std::invalid_argument("unknown scheduling policy: " + s);
}

TopologyKind topology_kind_from_string(const std::string& s) {
  if (s == "line") return TopologyKind::Line;
  if (s == "ring") return TopologyKind::Ring;
  if (s == "random-connected") return TopologyKind::RandomConnected;
  throw std::invalid_argument("unknown topology kind: " + s);
}

int Topology::node_index(const std::string& id) const {
  auto it = std::find(nodes.begin(), nodes.end(), id);
  return it == nodes.end() ? -1 : static_cast<int>(it - nodes.begin());
}

int Topology::link_index(const std::string& src, const std::string& dst) const {
  for (size_t i = 0; i < links.size(); ++i) {
    if (links[i].src == src && links[i].dst == dst) return static_cast<int>(i);
  }
  return -1;
}

namespace {

// Adjacency as link indices per source node index.
std::vector<std::vector<int>> out_links(const Topology& topo) {
  std::vector<std::vector<int>> adj(topo.nodes.size());
  for (size_t li = 0; li < topo.links.size(); ++li) {
    adj[topo.node_index(topo.links[li].src)].push_back(static_cast<int>(li));
  }
  return adj;
}

bool reaches_all(const Topology& topo, const std::vector<std::vector<int>>& adj, int start,
                 bool reversed) {
  std::vector<char> seen(topo.nodes.size(), 0);
  std::queue<int> q;
  q.push(start);
  seen[start] = 1;
  size_t count = 1;
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    for (int li : adj[u]) {
      const Link& l = topo.links[li];
      int v = topo.node_index(reversed ? l.src : l.dst);
      int from = topo.node_index(reversed ? l.dst : l.src);
      if (from != u) continue;
      if (!seen[v]) {
        seen[v] = 1;
        ++count;
        q.push(v);
      }
    }
  }
  return count == topo.nodes.size();
}

}  // namespace

void validate_topology(const Topology& topo) {
  if (topo.nodes.size() < 2) throw std::invalid_argument("topology needs at least 2 nodes");
  std::set<std::string> ids(topo.nodes.begin(), topo.nodes.end());
  if (ids.size() != topo.nodes.size())
    throw std::invalid_argument("duplicate node ids in topology");
  std::set<std::pair<std::string, std::string>> seen;
  for (const Link& l : topo.links) {
    if (l.capacity <= 0.0)
      throw std::invalid_argument("link " + l.src + "->" + l.dst + " has non-positive capacity");
    if (l.buffer_size < 1)
      throw std::invalid_argument("link " + l.src + "->" + l.dst + " has buffer_size < 1");
    if (l.src == l.dst) throw std::invalid_argument("self-loop at node " + l.src);
    if (!ids.count(l.src) || !ids.count(l.dst))
      throw std::invalid_argument("link references unknown node: " + l.src + "->" + l.dst);
    if (!seen.insert({l.src, l.dst}).second)
      throw std::invalid_argument("duplicate directed link " + l.src + "->" + l.dst);
  }
  // Strong connectivity: every node reachable from node 0, and node 0
  // reachable from every node (via the reversed graph).
  auto adj = out_links(topo);
  std::vector<std::vector<int>> radj(topo.nodes.size());
  for (size_t li = 0; li < topo.links.size(); ++li) {
    radj[topo.node_index(topo.links[li].dst)].push_back(static_cast<int>(li));
  }
  if (!reaches_all(topo, adj, 0, false) || !reaches_all(topo, radj, 0, true))
    throw std::invalid_argument("topology is not strongly connected");
}

void validate_scheduling(const Topology& topo, const SchedulingConfig& sched) {
  for (const std::string& id : topo.nodes) {
    auto it = sched.per_node.find(id);
    if (it == sched.per_node.end())
      throw std::invalid_argument("missing scheduling config for node " + id);
    const NodeScheduling& ns = it->second;
    int sum = ns.weights[0] + ns.weights[1] + ns.weights[2];
    if (sum != 100) throw std::invalid_argument("queue weights must sum to 100 at node " + id);
    if (ns.policy != SchedPolicy::SP) {
      for (int w : ns.weights) {
        if (w <= 0)
          throw std::invalid_argument("WFQ/DRR weights must be positive at node " + id);
      }
    }
  }
  for (const auto& [id, _] : sched.per_node) {
    if (topo.node_index(id) < 0)
      throw std::invalid_argument("scheduling config references unknown node " + id);
  }
}

Topology make_synthetic_topology(TopologyKind kind, int n,
                                 std::pair<double, double> capacity_range, uint64_t seed,
                                 int buffer_size) {
  if (n < 2) throw std::invalid_argument("synthetic topology needs n >= 2");
  if (capacity_range.first <= 0.0 || capacity_range.second < capacity_range.first)
    throw std::invalid_argument("capacity range must be positive and ordered");
  Rng rng(seed);
  Topology topo;
  topo.nodes.reserve(n);
  for (int i = 0; i < n; ++i) topo.nodes.push_back("n" + std::to_string(i));

  auto add_pair = [&](int a, int b) {
    const std::string& u = topo.nodes[a];
    const std::string& v = topo.nodes[b];
    if (topo.link_index(u, v) >= 0) return;
    topo.links.push_back({u, v, rng.uniform(capacity_range.first, capacity_range.second),
                          buffer_size});
    topo.links.push_back({v, u, rng.uniform(capacity_range.first, capacity_range.second),
                          buffer_size});
  };

  switch (kind) {
    case TopologyKind::Line:
      for (int i = 0; i + 1 < n; ++i) add_pair(i, i + 1);
      break;
    case TopologyKind::Ring:
      for (int i = 0; i < n; ++i) add_pair(i, (i + 1) % n);
      break;
    case TopologyKind::RandomConnected: {
      // Random spanning tree keeps the graph strongly connected (links are
      // added in both directions), then a few random chords.
      std::vector<int> order(n);
      std::iota(order.begin(), order.end(), 0);
      for (int i = n - 1; i > 0; --i) {
        std::swap(order[i], order[rng.uniform_int(0, i)]);
      }
      for (int i = 1; i < n; ++i) {
        add_pair(order[i], order[rng.uniform_int(0, i - 1)]);
      }
      int extra = n;
      for (int k = 0; k < extra; ++k) {
        int a = static_cast<int>(rng.uniform_int(0, n - 1));
        int b = static_cast<int>(rng.uniform_int(0, n - 1));
        if (a != b) add_pair(a, b);
      }
      break;
    }
  }
  validate_topology(topo);
  return topo;
}

namespace {

// Dijkstra keyed on (distance, node sequence): the first time a node is
// finalized it holds the minimum-weight, lexicographically-smallest path.
// Desk-scale graphs make the path copies in the heap a non-issue.
struct Label {
  double dist;
  std::vector<std::string> path;

  bool operator>(const Label& o) const {
    if (dist != o.dist) return dist > o.dist;
    return path > o.path;
  }
};

}  // namespace

RoutingConfig shortest_path_routing(const Topology& topo,
                                    const std::vector<double>& link_weights) {
  if (link_weights.size() != topo.links.size())
    throw std::invalid_argument("need one weight per link");
  for (double w : link_weights) {
    if (w <= 0.0) throw std::invalid_argument("link weights must be positive");
  }
  auto adj = out_links(topo);
  RoutingConfig routing;
  for (const std::string& src : topo.nodes) {
    using Entry = std::pair<Label, int>;
    auto cmp = [](const Entry& a, const Entry& b) {
      if (a.first.dist != b.first.dist) return a.first.dist > b.first.dist;
      return a.first.path > b.first.path;
    };
    std::priority_queue<Entry, std::vector<Entry>, decltype(cmp)> pq(cmp);
    std::vector<char> done(topo.nodes.size(), 0);
    pq.push({{0.0, {src}}, topo.node_index(src)});
    size_t finalized = 0;
    while (!pq.empty() && finalized < topo.nodes.size()) {
      auto [label, u] = pq.top();
      pq.pop();
      if (done[u]) continue;
      done[u] = 1;
      ++finalized;
      if (topo.nodes[u] != src) routing.paths[{src, topo.nodes[u]}] = label.path;
      for (int li : adj[u]) {
        const Link& l = topo.links[li];
        int v = topo.node_index(l.dst);
        if (done[v]) continue;
        Label next{label.dist + link_weights[li], label.path};
        next.path.push_back(l.dst);
        pq.push({std::move(next), v});
      }
    }
    if (finalized != topo.nodes.size()) {
      throw std::runtime_error("unreachable destination from " + src);
    }
  }
  return routing;
}

RoutingConfig generate_routing_variation(const Topology& topo, uint64_t seed) {
  Rng rng(seed);
  std::vector<double> weights(topo.links.size());
  for (double& w : weights) w = rng.uniform(1.0, 2.0);
  return shortest_path_routing(topo, weights);
}

ValidationReport validate_routing(const Topology& topo, const RoutingConfig& routing) {
  ValidationReport report;
  auto violation = [&](const NodePair& pair, const std::string& msg) {
    report.violations.push_back({pair, msg});
  };
  for (const std::string& src : topo.nodes) {
    for (const std::string& dst : topo.nodes) {
      if (src == dst) continue;
      NodePair pair{src, dst};
      auto it = routing.paths.find(pair);
      if (it == routing.paths.end()) {
        violation(pair, "missing path");
        continue;
      }
      const auto& path = it->second;
      if (path.size() < 2 || path.front() != src || path.back() != dst) {
        violation(pair, "path endpoints do not match pair");
        continue;
      }
      std::set<std::string> visited;
      bool loop = false;
      for (const auto& node : path) {
        if (!visited.insert(node).second) loop = true;
      }
      if (loop) violation(pair, "loop: repeated node in path");
      for (size_t i = 0; i + 1 < path.size(); ++i) {
        if (topo.link_index(path[i], path[i + 1]) < 0) {
          violation(pair, "nonexistent link " + path[i] + "->" + path[i + 1]);
        }
      }
    }
  }
  for (const auto& [pair, path] : routing.paths) {
    if (topo.node_index(pair.first) < 0 || topo.node_index(pair.second) < 0) {
      violation(pair, "pair references unknown node");
    }
  }
  return report;
}

std::string RoutingConfig::serialize() const {
  std::ostringstream out;
  for (const auto& [pair, path] : paths) {
    out << pair.first << ">" << pair.second << ":";
    for (size_t i = 0; i < path.size(); ++i) {
      if (i) out << ",";
      out << path[i];
    }
    out << "\n";
  }
  return out.str();
}

TopologyFile read_topology_file(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("topology file " + path.string() + ": " + e.what());
  }
  if (!doc.is_object()) throw ParseError("topology file must be a JSON object");
  for (const auto& [key, _] : doc.items()) {
    if (key != "nodes" && key != "links" && key != "scheduling")
      throw ParseError("topology file: unknown top-level field '" + key + "'");
  }
  TopologyFile tf;
  try {
    for (const auto& n : doc.at("nodes")) tf.topology.nodes.push_back(n.get<std::string>());
    for (const auto& l : doc.at("links")) {
      Link link;
      link.src = l.at("src").get<std::string>();
      link.dst = l.at("dst").get<std::string>();
      link.capacity = l.at("capacity").get<double>();
      link.buffer_size = l.at("buffer_size").get<int>();
      tf.topology.links.push_back(std::move(link));
    }
    if (doc.contains("scheduling")) {
      SchedulingConfig sched;
      for (const auto& [node, cfg] : doc.at("scheduling").items()) {
        NodeScheduling ns;
        ns.policy = sched_policy_from_string(cfg.at("policy").get<std::string>());
        auto w = cfg.at("weights");
        if (w.size() != kNumQueues) throw ParseError("scheduling weights must have 3 entries");
        for (int i = 0; i < kNumQueues; ++i) ns.weights[i] = w[i].get<int>();
        sched.per_node[node] = ns;
      }
      tf.scheduling = std::move(sched);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("topology file " + path.string() + ": " + e.what());
  }
  validate_topology(tf.topology);
  if (tf.scheduling) validate_scheduling(tf.topology, *tf.scheduling);
  return tf;
}

void write_topology_file(const std::filesystem::path& path, const Topology& topo,
                         const SchedulingConfig* sched) {
  std::ostringstream out;
  out << "{\"nodes\":[";
  for (size_t i = 0; i < topo.nodes.size(); ++i) {
    if (i) out << ",";
    out << "\"" << json_escape(topo.nodes[i]) << "\"";
  }
  out << "],\"links\":[";
  for (size_t i = 0; i < topo.links.size(); ++i) {
    const Link& l = topo.links[i];
    if (i) out << ",";
    out << "{\"src\":\"" << json_escape(l.src) << "\",\"dst\":\"" << json_escape(l.dst)
        << "\",\"capacity\":" << format_sig9(l.capacity)
        << ",\"buffer_size\":" << l.buffer_size << "}";
  }
  out << "]";
  if (sched) {
    out << ",\"scheduling\":{";
    bool first = true;
    for (const auto& [node, ns] : sched->per_node) {
      if (!first) out << ",";
      first = false;
      out << "\"" << json_escape(node) << "\":{\"policy\":\"" << to_string(ns.policy)
          << "\",\"weights\":[" << ns.weights[0] << "," << ns.weights[1] << ","
          << ns.weights[2] << "]}";
    }
    out << "}";
  }
  out << "}\n";
  write_text_file(path, out.str());
}

}  // namespace flowtwin
