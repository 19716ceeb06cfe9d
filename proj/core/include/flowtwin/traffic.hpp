#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowtwin/rng.hpp"
#include "flowtwin/topology.hpp"

namespace flowtwin {

// Traffic model constants. Packet sizes are a two-point mixture with mean
// 1000 bits; per-flow rates are uniform fractions of a per-sample maximum
// intensity drawn from [400, 2000].
constexpr double kSmallPacketBits = 300.0;
constexpr double kLargePacketBits = 1700.0;
constexpr double kMeanPacketBits = 1000.0;
constexpr double kTiMaxLow = 400.0;
constexpr double kTiMaxHigh = 2000.0;
constexpr double kRateFractionLow = 0.1;
constexpr double kRateFractionHigh = 1.0;
constexpr int kNumTosClasses = 3;

struct FlowSpec {
  std::string src;
  std::string dst;
  int tos = 0;                            // in {0,1,2}; selects the queue at each hop
  double avg_rate = 0.0;                  // bits per time unit
  double avg_pkt_size = kMeanPacketBits;  // bits
  double pkt_rate = 0.0;                  // packets per time unit
};

/// One FlowSpec per ordered (src,dst) pair, sorted lexicographically.
struct TrafficMatrix {
  std::vector<FlowSpec> flows;
  double ti_max = 0.0;

  std::string serialize() const;
};

void validate_flow(const FlowSpec& flow);
void validate_traffic(const Topology& topo, const TrafficMatrix& tm);

/// ti_max ~ U[400,2000]; per pair (lexicographic order): avg_rate = u*ti_max
/// with u ~ U[0.1,1], then tos ~ U{0,1,2}. Draw order is part of the format.
template <class R>
TrafficMatrix sample_traffic_matrix(const Topology& topo, R& rng) {
  TrafficMatrix tm;
  tm.ti_max = kTiMaxLow + rng.uniform01() * (kTiMaxHigh - kTiMaxLow);
  std::vector<std::string> sorted_nodes = topo.nodes;
  std::sort(sorted_nodes.begin(), sorted_nodes.end());
  for (const std::string& src : sorted_nodes) {
    for (const std::string& dst : sorted_nodes) {
      if (src == dst) continue;
      FlowSpec flow;
      flow.src = src;
      flow.dst = dst;
      double u = kRateFractionLow + rng.uniform01() * (kRateFractionHigh - kRateFractionLow);
      flow.avg_rate = u * tm.ti_max;
      flow.tos = std::min(kNumTosClasses - 1,
                          static_cast<int>(rng.uniform01() * kNumTosClasses));
      flow.avg_pkt_size = kMeanPacketBits;
      flow.pkt_rate = flow.avg_rate / flow.avg_pkt_size;
      validate_flow(flow);
      tm.flows.push_back(std::move(flow));
    }
  }
  return tm;
}

/// Exponential inter-packet gap with mean 1/pkt_rate; strictly positive.
template <class R>
double next_interarrival(const FlowSpec& flow, R& rng) {
  return exponential_draw(rng, flow.pkt_rate);
}

/// 300 bits or 1700 bits with equal probability.
template <class R>
double sample_packet_size(R& rng) {
  return rng.uniform01() < 0.5 ? kSmallPacketBits : kLargePacketBits;
}

}  // namespace flowtwin
