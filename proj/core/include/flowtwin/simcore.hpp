#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flowtwin/topology.hpp"
#include "flowtwin/traffic.hpp"

namespace flowtwin {

/// Per-flow labels emitted by the simulator. Statistics cover packets created
/// after the warmup window; dropped packets count in `drops` only.
struct FlowStats {
  double mean_delay = 0.0;
  double jitter = 0.0;  // delay variance
  double p10 = 0.0, p20 = 0.0, p50 = 0.0, p80 = 0.0, p90 = 0.0;
  int64_t drops = 0;
  int64_t delivered = 0;
  // Bookkeeping beyond the label set, used by conservation checks.
  int64_t created = 0;
  int64_t in_flight_at_end = 0;
  double delivered_bits = 0.0;
};

enum class PacketSizeModel {
  Bimodal,          // 300/1700 bits, the dataset model
  ExponentialMean,  // exponential with mean avg_pkt_size; M/M/1 validation mode
};

struct SimConfig {
  double warmup = 0.0;    // time units discarded from statistics
  double duration = 0.0;  // measured time units
  uint64_t seed = 0;
  double propagation_delay = 0.0;  // per hop
  PacketSizeModel size_model = PacketSizeModel::Bimodal;
};

struct TraceEvent {
  double time;
  std::string kind;
  std::string node;
  int queue;
};
using TraceSink = std::function<void(const TraceEvent&)>;

/// Nearest-rank percentile: element at index ceil(p/100*n)-1 of the sorted
/// sample. Throws std::invalid_argument on an empty sample or p outside (0,100).
double percentile(std::span<const double> sorted, double p);

/// Multi-queue output port scheduler. One instance per directed link; the
/// simulator drives it with enqueue/dequeue and owns the buffer-size check.
class PortScheduler {
 public:
  PortScheduler(SchedPolicy policy, std::array<int, kNumQueues> weights, double capacity);

  struct Item {
    uint64_t packet = 0;    // opaque payload id
    double size_bits = 0.0;
    double finish_tag = 0.0;  // WFQ virtual finish time
  };

  void enqueue(int queue, uint64_t packet, double size_bits);
  /// Next packet under the configured policy, or nullopt when all queues are
  /// empty. The returned queue index is the observable scheduling decision.
  struct Choice {
    int queue;
    uint64_t packet;
    double size_bits;
  };
  std::optional<Choice> dequeue();

  bool empty() const;
  size_t queue_len(int queue) const { return queues_[queue].size(); }

 private:
  std::optional<Choice> sp_dequeue();
  std::optional<Choice> wfq_dequeue();
  std::optional<Choice> drr_dequeue();

  SchedPolicy policy_;
  std::array<int, kNumQueues> weights_;
  double capacity_;
  std::array<std::deque<Item>, kNumQueues> queues_;
  // WFQ (self-clocked fair queueing) bookkeeping.
  double virtual_time_ = 0.0;
  std::array<double, kNumQueues> last_finish_{};
  // DRR bookkeeping.
  std::array<double, kNumQueues> deficit_{};
  int drr_current_ = 0;
  bool drr_has_turn_ = false;
};

/// DRR base quantum in bits; quantum_i = weight_i * kDrrQuantumBase. Sized so
/// the smallest supported weight (10) still covers one max-size packet.
constexpr double kDrrQuantumBase = 170.0;

/// Event-driven store-and-forward simulation over the routed paths. Packets
/// enter queue `tos` at each output port; transmission time is size/capacity;
/// a full queue drops the packet. Deterministic for a fixed config.
/// Returns one FlowStats per traffic flow, in flow order.
std::vector<FlowStats> run_simulation(const Topology& topo, const RoutingConfig& routing,
                                      const SchedulingConfig& sched,
                                      const TrafficMatrix& traffic, const SimConfig& cfg,
                                      const TraceSink& trace = nullptr);

}  // namespace flowtwin
