#include "flowtwin/traffic.hpp"

#include <algorithm>
#include <sstream>

#include "flowtwin/textio.hpp"

namespace flowtwin {

void validate_flow(const FlowSpec& flow) {
  if (flow.avg_rate <= 0.0) throw std::invalid_argument("flow avg_rate must be positive");
  if (flow.tos < 0 || flow.tos >= kNumTosClasses)
    throw std::invalid_argument("flow tos out of range");
  if (flow.avg_pkt_size <= 0.0 || flow.pkt_rate <= 0.0)
    throw std::invalid_argument("flow packet size/rate must be positive");
  double rel = std::abs(flow.pkt_rate * flow.avg_pkt_size - flow.avg_rate) / flow.avg_rate;
  if (rel > 1e-9)
    throw std::invalid_argument("flow pkt_rate * avg_pkt_size inconsistent with avg_rate");
  if (flow.src == flow.dst) throw std::invalid_argument("flow src == dst");
}

void validate_traffic(const Topology& topo, const TrafficMatrix& tm) {
  const size_t n = topo.nodes.size();
  if (tm.flows.size() != n * (n - 1))
    throw std::invalid_argument("traffic matrix must have one flow per ordered pair");
  if (tm.ti_max < kTiMaxLow || tm.ti_max > kTiMaxHigh)
    throw std::invalid_argument("ti_max out of range");
  for (size_t i = 0; i < tm.flows.size(); ++i) {
    const FlowSpec& f = tm.flows[i];
    validate_flow(f);
    if (topo.node_index(f.src) < 0 || topo.node_index(f.dst) < 0)
      throw std::invalid_argument("flow references unknown node");
    if (f.avg_rate < kRateFractionLow * tm.ti_max - 1e-9 ||
        f.avg_rate > kRateFractionHigh * tm.ti_max + 1e-9)
      throw std::invalid_argument("flow rate outside [0.1, 1] * ti_max");
    if (i > 0) {
      const FlowSpec& p = tm.flows[i - 1];
      if (std::make_pair(p.src, p.dst) >= std::make_pair(f.src, f.dst))
        throw std::invalid_argument("flows not in lexicographic (src,dst) order");
    }
  }
}

std::string TrafficMatrix::serialize() const {
  std::ostringstream out;
  out << "ti_max=" << format_sig9(ti_max) << "\n";
  for (const FlowSpec& f : flows) {
    out << f.src << ">" << f.dst << " tos=" << f.tos << " rate=" << format_sig9(f.avg_rate)
        << " pkt_size=" << format_sig9(f.avg_pkt_size)
        << " pkt_rate=" << format_sig9(f.pkt_rate) << "\n";
  }
  return out.str();
}

}  // namespace flowtwin
