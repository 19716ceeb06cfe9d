#include "flowtwin/simcore.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>

#include "flowtwin/rng.hpp"

namespace flowtwin {

double percentile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("percentile of empty sample is undefined");
  if (p <= 0.0 || p >= 100.0) throw std::invalid_argument("percentile p must be in (0,100)");
  size_t rank = static_cast<size_t>(std::ceil(p / 100.0 * static_cast<double>(sorted.size())));
  if (rank == 0) rank = 1;
  return sorted[rank - 1];
}

PortScheduler::PortScheduler(SchedPolicy policy, std::array<int, kNumQueues> weights,
                             double capacity)
    : policy_(policy), weights_(weights), capacity_(capacity) {}

bool PortScheduler::empty() const {
  for (const auto& q : queues_) {
    if (!q.empty()) return false;
  }
  return true;
}

void PortScheduler::enqueue(int queue, uint64_t packet, double size_bits) {
  Item item{packet, size_bits, 0.0};
  if (policy_ == SchedPolicy::WFQ) {
    // Finish tags assigned at enqueue against the queue's weighted rate share.
    double share = static_cast<double>(weights_[queue]) / 100.0 * capacity_;
    double start = std::max(virtual_time_, last_finish_[queue]);
    item.finish_tag = start + size_bits / share;
    last_finish_[queue] = item.finish_tag;
  }
  queues_[queue].push_back(item);
}

std::optional<PortScheduler::Choice> PortScheduler::dequeue() {
  switch (policy_) {
    case SchedPolicy::SP: return sp_dequeue();
    case SchedPolicy::WFQ: return wfq_dequeue();
    case SchedPolicy::DRR: return drr_dequeue();
  }
  return std::nullopt;
}

std::optional<PortScheduler::Choice> PortScheduler::sp_dequeue() {
  // Queue 0 is the highest priority.
  for (int q = 0; q < kNumQueues; ++q) {
    if (!queues_[q].empty()) {
      Item item = queues_[q].front();
      queues_[q].pop_front();
      return Choice{q, item.packet, item.size_bits};
    }
  }
  return std::nullopt;
}

std::optional<PortScheduler::Choice> PortScheduler::wfq_dequeue() {
  int best = -1;
  for (int q = 0; q < kNumQueues; ++q) {
    if (queues_[q].empty()) continue;
    if (best < 0 || queues_[q].front().finish_tag < queues_[best].front().finish_tag) {
      best = q;
    }
  }
  if (best < 0) return std::nullopt;
  Item item = queues_[best].front();
  queues_[best].pop_front();
  virtual_time_ = item.finish_tag;  // self-clocked virtual time
  return Choice{best, item.packet, item.size_bits};
}

std::optional<PortScheduler::Choice> PortScheduler::drr_dequeue() {
  if (empty()) return std::nullopt;
  // Deficit round robin: each visit grants quantum_i = weight_i * base; serve
  // while the head fits in the accumulated deficit. Deficits persist across
  // rounds for a backlogged queue, so the loop always terminates.
  while (true) {
    std::deque<Item>& q = queues_[drr_current_];
    if (q.empty()) {
      deficit_[drr_current_] = 0.0;
      drr_has_turn_ = false;
      drr_current_ = (drr_current_ + 1) % kNumQueues;
      continue;
    }
    if (!drr_has_turn_) {
      deficit_[drr_current_] += static_cast<double>(weights_[drr_current_]) * kDrrQuantumBase;
      drr_has_turn_ = true;
    }
    if (q.front().size_bits <= deficit_[drr_current_]) {
      Item item = q.front();
      q.pop_front();
      deficit_[drr_current_] -= item.size_bits;
      int served = drr_current_;
      if (q.empty()) {
        deficit_[drr_current_] = 0.0;
        drr_has_turn_ = false;
        drr_current_ = (drr_current_ + 1) % kNumQueues;
      }
      return Choice{served, item.packet, item.size_bits};
    }
    drr_has_turn_ = false;
    drr_current_ = (drr_current_ + 1) % kNumQueues;
  }
}

namespace {

struct Packet {
  int flow;
  int tos;
  double size_bits;
  double t_created;
  int hop;  // index into the flow's link path
  bool measured;
};

enum class EvKind { FlowArrival, HopArrival, TxComplete };

struct Event {
  double time;
  uint64_t ordinal;
  EvKind kind;
  int subject;        // flow index or link index
  uint64_t packet;    // for HopArrival

  bool operator>(const Event& o) const {
    if (time != o.time) return time > o.time;
    return ordinal > o.ordinal;
  }
};

struct PortState {
  PortScheduler sched;
  bool busy = false;
  uint64_t in_service = 0;
};

}  // namespace

std::vector<FlowStats> run_simulation(const Topology& topo, const RoutingConfig& routing,
                                      const SchedulingConfig& sched,
                                      const TrafficMatrix& traffic, const SimConfig& cfg,
                                      const TraceSink& trace) {
  if (cfg.warmup < 0.0 || cfg.duration <= 0.0)
    throw std::invalid_argument("sim config needs warmup >= 0 and duration > 0");
  validate_topology(topo);
  validate_scheduling(topo, sched);
  if (!validate_routing(topo, routing).ok())
    throw std::invalid_argument("routing fails validation");

  const double t_end = cfg.warmup + cfg.duration;
  const size_t n_flows = traffic.flows.size();
  std::vector<FlowStats> stats(n_flows);
  if (n_flows == 0) return stats;  // no packets, no stats rows

  // Flows may be a subset of the full mesh (validation scenarios); each one
  // must still be well-formed, known to the topology, and in order.
  for (size_t i = 0; i < n_flows; ++i) {
    const FlowSpec& f = traffic.flows[i];
    validate_flow(f);
    if (topo.node_index(f.src) < 0 || topo.node_index(f.dst) < 0)
      throw std::invalid_argument("flow references unknown node");
    if (i > 0) {
      const FlowSpec& p = traffic.flows[i - 1];
      if (std::make_pair(p.src, p.dst) >= std::make_pair(f.src, f.dst))
        throw std::invalid_argument("flows not in lexicographic (src,dst) order");
    }
  }

  // Resolve each flow's path to link indices once.
  std::vector<std::vector<int>> flow_links(n_flows);
  for (size_t f = 0; f < n_flows; ++f) {
    const FlowSpec& spec = traffic.flows[f];
    const auto& path = routing.paths.at({spec.src, spec.dst});
    for (size_t i = 0; i + 1 < path.size(); ++i) {
      flow_links[f].push_back(topo.link_index(path[i], path[i + 1]));
    }
  }

  std::vector<PortState> ports;
  ports.reserve(topo.links.size());
  for (const Link& l : topo.links) {
    const NodeScheduling& ns = sched.per_node.at(l.src);
    ports.push_back({PortScheduler(ns.policy, ns.weights, l.capacity), false, 0});
  }

  // Independent stream per flow: packet interarrivals and sizes do not depend
  // on event interleaving.
  std::vector<Rng> flow_rng;
  flow_rng.reserve(n_flows);
  for (size_t f = 0; f < n_flows; ++f) {
    flow_rng.push_back(Rng::stream(cfg.seed, static_cast<uint64_t>(f), 0x51u));
  }

  std::vector<Packet> packets;
  std::vector<std::vector<double>> delays(n_flows);

  std::priority_queue<Event, std::vector<Event>, std::greater<Event>> events;
  uint64_t next_ordinal = 0;
  auto push_event = [&](double time, EvKind kind, int subject, uint64_t packet = 0) {
    events.push({time, next_ordinal++, kind, subject, packet});
  };

  auto emit_trace = [&](double t, const char* kind, const std::string& node, int queue) {
    if (trace) trace({t, kind, node, queue});
  };

  auto sample_size = [&](int flow) {
    if (cfg.size_model == PacketSizeModel::ExponentialMean) {
      return exponential_draw(flow_rng[flow], 1.0 / traffic.flows[flow].avg_pkt_size);
    }
    return sample_packet_size(flow_rng[flow]);
  };

  auto start_transmission = [&](int link, double now) {
    PortState& port = ports[link];
    auto choice = port.sched.dequeue();
    if (!choice) {
      port.busy = false;
      return;
    }
    port.busy = true;
    port.in_service = choice->packet;
    double tx = choice->size_bits / topo.links[link].capacity;
    emit_trace(now, "tx-start", topo.links[link].src, choice->queue);
    push_event(now + tx, EvKind::TxComplete, link, choice->packet);
  };

  auto enqueue_at_link = [&](int link, uint64_t pkt_id, double now) {
    Packet& pkt = packets[pkt_id];
    PortState& port = ports[link];
    if (port.sched.queue_len(pkt.tos) >= static_cast<size_t>(topo.links[link].buffer_size)) {
      if (pkt.measured) stats[pkt.flow].drops += 1;
      emit_trace(now, "drop", topo.links[link].src, pkt.tos);
      return;
    }
    port.sched.enqueue(pkt.tos, pkt_id, pkt.size_bits);
    emit_trace(now, "enqueue", topo.links[link].src, pkt.tos);
    if (!port.busy) start_transmission(link, now);
  };

  auto deliver = [&](uint64_t pkt_id, double now) {
    Packet& pkt = packets[pkt_id];
    if (pkt.measured) {
      FlowStats& fs = stats[pkt.flow];
      fs.delivered += 1;
      fs.delivered_bits += pkt.size_bits;
      delays[pkt.flow].push_back(now - pkt.t_created);
    }
  };

  // Seed first arrivals in flow order.
  for (size_t f = 0; f < n_flows; ++f) {
    double t0 = next_interarrival(traffic.flows[f], flow_rng[f]);
    if (t0 <= t_end) push_event(t0, EvKind::FlowArrival, static_cast<int>(f));
  }

  while (!events.empty()) {
    Event ev = events.top();
    events.pop();
    const double now = ev.time;
    switch (ev.kind) {
      case EvKind::FlowArrival: {
        const int f = ev.subject;
        const FlowSpec& spec = traffic.flows[f];
        const bool measured = now >= cfg.warmup;
        Packet pkt{f, spec.tos, sample_size(f), now, 0, measured};
        uint64_t pkt_id = packets.size();
        packets.push_back(pkt);
        if (measured) stats[f].created += 1;
        emit_trace(now, "arrival", spec.src, spec.tos);
        enqueue_at_link(flow_links[f][0], pkt_id, now);
        double t_next = now + next_interarrival(spec, flow_rng[f]);
        if (t_next <= t_end) push_event(t_next, EvKind::FlowArrival, f);
        break;
      }
      case EvKind::TxComplete: {
        const int link = ev.subject;
        const uint64_t pkt_id = ev.packet;
        Packet& pkt = packets[pkt_id];
        emit_trace(now, "tx-complete", topo.links[link].dst, pkt.tos);
        pkt.hop += 1;
        const auto& path_links = flow_links[pkt.flow];
        if (pkt.hop >= static_cast<int>(path_links.size())) {
          if (cfg.propagation_delay > 0.0) {
            push_event(now + cfg.propagation_delay, EvKind::HopArrival, -1, pkt_id);
          } else {
            deliver(pkt_id, now);
          }
        } else {
          int next_link = path_links[pkt.hop];
          if (cfg.propagation_delay > 0.0) {
            push_event(now + cfg.propagation_delay, EvKind::HopArrival, next_link, pkt_id);
          } else {
            enqueue_at_link(next_link, pkt_id, now);
          }
        }
        start_transmission(link, now);
        break;
      }
      case EvKind::HopArrival: {
        if (ev.subject < 0) {
          deliver(ev.packet, now);
        } else {
          enqueue_at_link(ev.subject, ev.packet, now);
        }
        break;
      }
    }
  }

  for (size_t f = 0; f < n_flows; ++f) {
    FlowStats& fs = stats[f];
    fs.in_flight_at_end = fs.created - fs.delivered - fs.drops;
    auto& d = delays[f];
    if (d.empty()) continue;
    std::sort(d.begin(), d.end());
    double sum = 0.0;
    for (double v : d) sum += v;
    fs.mean_delay = sum / static_cast<double>(d.size());
    double var = 0.0;
    for (double v : d) var += (v - fs.mean_delay) * (v - fs.mean_delay);
    fs.jitter = var / static_cast<double>(d.size());
    fs.p10 = percentile(d, 10.0);
    fs.p20 = percentile(d, 20.0);
    fs.p50 = percentile(d, 50.0);
    fs.p80 = percentile(d, 80.0);
    fs.p90 = percentile(d, 90.0);
  }
  return stats;
}

}  // namespace flowtwin
