#pragma once

#include <array>
#include <vector>

#include "flowtwin/dataset.hpp"
#include "flowtwin/topology.hpp"

namespace flowtwin::gnn {

/// Bipartite incidences between paths, links, and nodes for one sample.
/// Path order follows the sample's flow order; link and node order follow the
/// topology. The per-position views drive the batched path sweeps.
struct IncidenceStructures {
  int n_paths = 0;
  int n_links = 0;
  int n_nodes = 0;
  int max_path_len = 0;  // in links

  std::vector<std::vector<int>> path_links;        // ordered links per path
  std::vector<std::vector<int>> path_nodes;        // ordered nodes per path
  std::vector<std::array<int, 2>> link_nodes;      // (source, destination) per link

  // paths_at[k] lists the paths whose k-th hop exists; links_at[k] the link
  // each of those paths traverses at position k.
  std::vector<std::vector<int>> paths_at;
  std::vector<std::vector<int>> links_at;
};

/// Throws std::invalid_argument when the sample's routing is inconsistent
/// with the topology (missing links, bad endpoints).
IncidenceStructures build_incidence(const Sample& sample, const Topology& topo);

}  // namespace flowtwin::gnn
