#include "flowtwin/gnn/incidence.hpp"

#include <stdexcept>

namespace flowtwin::gnn {

IncidenceStructures build_incidence(const Sample& sample, const Topology& topo) {
  IncidenceStructures inc;
  inc.n_paths = static_cast<int>(sample.traffic.flows.size());
  inc.n_links = static_cast<int>(topo.links.size());
  inc.n_nodes = static_cast<int>(topo.nodes.size());

  inc.link_nodes.reserve(topo.links.size());
  for (const Link& l : topo.links) {
    int s = topo.node_index(l.src);
    int d = topo.node_index(l.dst);
    if (s < 0 || d < 0) throw std::invalid_argument("link endpoint missing from topology");
    inc.link_nodes.push_back({s, d});
  }

  inc.path_links.resize(inc.n_paths);
  inc.path_nodes.resize(inc.n_paths);
  for (int p = 0; p < inc.n_paths; ++p) {
    const FlowSpec& flow = sample.traffic.flows[p];
    auto it = sample.routing.paths.find({flow.src, flow.dst});
    if (it == sample.routing.paths.end())
      throw std::invalid_argument("no routed path for flow " + flow.src + "->" + flow.dst);
    const auto& nodes = it->second;
    if (nodes.size() < 2 || nodes.front() != flow.src || nodes.back() != flow.dst)
      throw std::invalid_argument("routed path endpoints do not match flow " + flow.src +
                                  "->" + flow.dst);
    for (const std::string& n : nodes) {
      int idx = topo.node_index(n);
      if (idx < 0) throw std::invalid_argument("routed path visits unknown node " + n);
      inc.path_nodes[p].push_back(idx);
    }
    for (size_t i = 0; i + 1 < nodes.size(); ++i) {
      int li = topo.link_index(nodes[i], nodes[i + 1]);
      if (li < 0)
        throw std::invalid_argument("routed path uses nonexistent link " + nodes[i] + "->" +
                                    nodes[i + 1]);
      inc.path_links[p].push_back(li);
    }
    inc.max_path_len = std::max(inc.max_path_len, static_cast<int>(inc.path_links[p].size()));
  }

  inc.paths_at.resize(inc.max_path_len);
  inc.links_at.resize(inc.max_path_len);
  for (int p = 0; p < inc.n_paths; ++p) {
    for (size_t k = 0; k < inc.path_links[p].size(); ++k) {
      inc.paths_at[k].push_back(p);
      inc.links_at[k].push_back(inc.path_links[p][k]);
    }
  }
  return inc;
}

}  // namespace flowtwin::gnn
