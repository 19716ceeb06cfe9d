#include "flowtwin/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "flowtwin/rng.hpp"
#include "flowtwin/textio.hpp"
#include "json.hpp"

namespace flowtwin {

namespace {

constexpr const char* kGeneratorVersion = "flowtwin-0.1.0";
constexpr const char* kManifestName = "manifest";
constexpr const char* kSamplesName = "samples";
constexpr const char* kIncompleteMarker = "INCOMPLETE";

// Per-sample derived stream salts.
enum : uint64_t { kSaltRouting = 1, kSaltScheduling = 2, kSaltTraffic = 3, kSaltSim = 4 };

SchedulingConfig tier_scheduling(int tier, const Topology& topo, Rng& rng) {
  SchedulingConfig sched;
  for (const std::string& node : topo.nodes) {
    NodeScheduling ns;
    switch (tier) {
      case 1:  // all WFQ, one weight profile
        ns.policy = SchedPolicy::WFQ;
        ns.weights = {10, 30, 60};
        break;
      case 2:  // all WFQ, per-node weights from the pool
        ns.policy = SchedPolicy::WFQ;
        ns.weights = kWeightPool[rng.uniform_int(0, 3)];
        break;
      case 3:  // per-node policy, fixed weights
        ns.policy = static_cast<SchedPolicy>(rng.uniform_int(0, 2));
        ns.weights = {10, 30, 60};
        break;
      default:  // tier 4: policy and weights both variable
        ns.policy = static_cast<SchedPolicy>(rng.uniform_int(0, 2));
        ns.weights = kWeightPool[rng.uniform_int(0, 3)];
        break;
    }
    sched.per_node[node] = ns;
  }
  return sched;
}

}  // namespace

int tier_of_sample(int64_t i, int64_t n_samples) {
  int64_t base = n_samples / 4;
  int64_t rem = n_samples % 4;
  int64_t offset = 0;
  for (int tier = 1; tier <= 4; ++tier) {
    int64_t count = base + (tier <= rem ? 1 : 0);
    if (i < offset + count) return tier;
    offset += count;
  }
  throw std::invalid_argument("sample index out of range");
}

std::string sample_to_json_line(const Sample& s) {
  std::ostringstream out;
  out << "{\"sample_id\":" << s.sample_id << ",\"topology_id\":\""
      << json_escape(s.topology_id) << "\",\"routing\":[";
  bool first = true;
  for (const auto& [pair, path] : s.routing.paths) {
    if (!first) out << ",";
    first = false;
    out << "[";
    for (size_t i = 0; i < path.size(); ++i) {
      if (i) out << ",";
      out << "\"" << json_escape(path[i]) << "\"";
    }
    out << "]";
  }
  out << "],\"scheduling\":{";
  first = true;
  for (const auto& [node, ns] : s.scheduling.per_node) {
    if (!first) out << ",";
    first = false;
    out << "\"" << json_escape(node) << "\":{\"policy\":\"" << to_string(ns.policy)
        << "\",\"weights\":[" << ns.weights[0] << "," << ns.weights[1] << ","
        << ns.weights[2] << "]}";
  }
  out << "},\"flows\":[";
  for (size_t i = 0; i < s.traffic.flows.size(); ++i) {
    const FlowSpec& f = s.traffic.flows[i];
    if (i) out << ",";
    out << "{\"src\":\"" << json_escape(f.src) << "\",\"dst\":\"" << json_escape(f.dst)
        << "\",\"tos\":" << f.tos << ",\"avg_rate\":" << format_sig9(f.avg_rate)
        << ",\"avg_pkt_size\":" << format_sig9(f.avg_pkt_size)
        << ",\"pkt_rate\":" << format_sig9(f.pkt_rate) << "}";
  }
  out << "]";
  if (s.labels) {
    out << ",\"labels\":[";
    for (size_t i = 0; i < s.labels->size(); ++i) {
      const FlowStats& fs = (*s.labels)[i];
      const FlowSpec& f = s.traffic.flows[i];
      if (i) out << ",";
      out << "{\"src\":\"" << json_escape(f.src) << "\",\"dst\":\"" << json_escape(f.dst)
          << "\",\"delay_mean\":" << format_sig9(fs.mean_delay)
          << ",\"jitter\":" << format_sig9(fs.jitter) << ",\"p10\":" << format_sig9(fs.p10)
          << ",\"p20\":" << format_sig9(fs.p20) << ",\"p50\":" << format_sig9(fs.p50)
          << ",\"p80\":" << format_sig9(fs.p80) << ",\"p90\":" << format_sig9(fs.p90)
          << ",\"drops\":" << fs.drops << ",\"delivered\":" << fs.delivered << "}";
    }
    out << "]";
  }
  out << "}";
  return out.str();
}

Sample sample_from_json_line(const std::string& line, bool with_labels,
                             int64_t record_index) {
  auto fail = [&](const std::string& what) -> ParseError {
    return ParseError("samples record " + std::to_string(record_index) + ": " + what);
  };
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw fail(std::string("invalid JSON: ") + e.what());
  }
  Sample s;
  try {
    s.sample_id = doc.at("sample_id").get<int64_t>();
    s.topology_id = doc.at("topology_id").get<std::string>();
    for (const auto& arr : doc.at("routing")) {
      std::vector<std::string> path;
      for (const auto& n : arr) path.push_back(n.get<std::string>());
      if (path.size() < 2) throw fail("routing path with fewer than 2 nodes");
      s.routing.paths[{path.front(), path.back()}] = path;
    }
    for (const auto& [node, cfg] : doc.at("scheduling").items()) {
      NodeScheduling ns;
      ns.policy = sched_policy_from_string(cfg.at("policy").get<std::string>());
      const auto& w = cfg.at("weights");
      if (w.size() != 3) throw fail("scheduling weights must have 3 entries");
      for (int i = 0; i < 3; ++i) ns.weights[i] = w[i].get<int>();
      s.scheduling.per_node[node] = ns;
    }
    for (const auto& fj : doc.at("flows")) {
      FlowSpec f;
      f.src = fj.at("src").get<std::string>();
      f.dst = fj.at("dst").get<std::string>();
      f.tos = fj.at("tos").get<int>();
      f.avg_rate = fj.at("avg_rate").get<double>();
      f.avg_pkt_size = fj.at("avg_pkt_size").get<double>();
      f.pkt_rate = fj.at("pkt_rate").get<double>();
      validate_flow(f);
      s.traffic.flows.push_back(std::move(f));
    }
    // ti_max is not part of the record; keep the serialized rate bound loose.
    for (const FlowSpec& f : s.traffic.flows) {
      s.traffic.ti_max = std::max(s.traffic.ti_max, f.avg_rate);
    }
    if (with_labels && doc.contains("labels")) {
      std::vector<FlowStats> labels;
      size_t idx = 0;
      for (const auto& lj : doc.at("labels")) {
        if (idx >= s.traffic.flows.size()) throw fail("more label rows than flows");
        const FlowSpec& f = s.traffic.flows[idx];
        if (lj.at("src").get<std::string>() != f.src ||
            lj.at("dst").get<std::string>() != f.dst)
          throw fail("label key mismatch at row " + std::to_string(idx));
        FlowStats fs;
        fs.mean_delay = lj.at("delay_mean").get<double>();
        fs.jitter = lj.at("jitter").get<double>();
        fs.p10 = lj.at("p10").get<double>();
        fs.p20 = lj.at("p20").get<double>();
        fs.p50 = lj.at("p50").get<double>();
        fs.p80 = lj.at("p80").get<double>();
        fs.p90 = lj.at("p90").get<double>();
        fs.drops = lj.at("drops").get<int64_t>();
        fs.delivered = lj.at("delivered").get<int64_t>();
        labels.push_back(fs);
        ++idx;
      }
      if (idx != s.traffic.flows.size()) throw fail("fewer label rows than flows");
      s.labels = std::move(labels);
    }
  } catch (const nlohmann::json::exception& e) {
    throw fail(std::string("schema violation: ") + e.what());
  }
  for (size_t i = 1; i < s.traffic.flows.size(); ++i) {
    const FlowSpec& a = s.traffic.flows[i - 1];
    const FlowSpec& b = s.traffic.flows[i];
    if (std::make_pair(a.src, a.dst) >= std::make_pair(b.src, b.dst))
      throw fail("flows out of lexicographic order");
  }
  return s;
}

DatasetManifest generate_dataset(
    const std::vector<std::pair<std::string, Topology>>& topologies,
    const DatasetGenConfig& cfg, const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  if (topologies.empty()) throw std::invalid_argument("need at least one topology");
  if (cfg.n_samples < 4)
    throw std::invalid_argument("need at least 4 samples (one per difficulty tier)");
  for (const auto& [id, topo] : topologies) validate_topology(topo);

  fs::create_directories(out_dir);
  fs::create_directories(out_dir / "topologies");
  write_text_file(out_dir / kIncompleteMarker, "generation in progress\n");

  DatasetManifest manifest;
  manifest.split = cfg.split;
  for (const auto& [id, _] : topologies) manifest.topology_ids.push_back(id);
  manifest.sample_count = cfg.n_samples;
  manifest.tier_proportions = {0.25, 0.25, 0.25, 0.25};
  manifest.master_seed = cfg.master_seed;
  manifest.generator_version = kGeneratorVersion;

  for (const auto& [id, topo] : topologies) {
    write_topology_file(out_dir / "topologies" / (id + ".json"), topo);
  }

  std::ofstream samples_out(out_dir / kSamplesName, std::ios::binary | std::ios::trunc);
  if (!samples_out) throw std::runtime_error("cannot open samples file for writing");

  for (int64_t i = 0; i < cfg.n_samples; ++i) {
    const auto& [topo_id, topo] = topologies[i % topologies.size()];
    Sample s;
    s.sample_id = i;
    s.topology_id = topo_id;
    s.routing = generate_routing_variation(topo, seed_stream(cfg.master_seed, i, kSaltRouting));
    Rng sched_rng = Rng::stream(cfg.master_seed, i, kSaltScheduling);
    s.scheduling = tier_scheduling(tier_of_sample(i, cfg.n_samples), topo, sched_rng);
    Rng traffic_rng = Rng::stream(cfg.master_seed, i, kSaltTraffic);
    s.traffic = sample_traffic_matrix(topo, traffic_rng);
    if (cfg.with_labels) {
      SimConfig sim = cfg.sim;
      sim.seed = seed_stream(cfg.master_seed, i, kSaltSim);
      s.labels = run_simulation(topo, s.routing, s.scheduling, s.traffic, sim);
    }
    samples_out << sample_to_json_line(s) << "\n";
    if (!samples_out) throw std::runtime_error("write failed for samples file");
  }
  samples_out.flush();
  if (!samples_out) throw std::runtime_error("write failed for samples file");
  samples_out.close();

  // The manifest documents the fixed generator conventions: SP treats queue 0
  // as highest priority, and tiers 3-4 extrapolate the tier axis by varying
  // per-node policies.
  std::ostringstream m;
  m << "{\"split\":\"" << json_escape(manifest.split) << "\",\"topology_ids\":[";
  for (size_t i = 0; i < manifest.topology_ids.size(); ++i) {
    if (i) m << ",";
    m << "\"" << json_escape(manifest.topology_ids[i]) << "\"";
  }
  m << "],\"sample_count\":" << manifest.sample_count << ",\"tier_proportions\":[";
  for (size_t i = 0; i < manifest.tier_proportions.size(); ++i) {
    if (i) m << ",";
    m << format_sig9(manifest.tier_proportions[i]);
  }
  m << "],\"master_seed\":" << manifest.master_seed << ",\"generator_version\":\""
    << kGeneratorVersion << "\""
    << ",\"sp_priority\":\"queue0-highest\""
    << ",\"tier_definitions\":["
    << "\"tier1: all WFQ, weights (10,30,60)\","
    << "\"tier2: all WFQ, per-node weights from a fixed pool\","
    << "\"tier3: per-node policy in {SP,WFQ,DRR}, weights (10,30,60)\","
    << "\"tier4: per-node policy and weights both variable (tiers 3-4 extrapolated)\"]"
    << "}\n";
  write_text_file(out_dir / kManifestName, m.str());

  fs::remove(out_dir / kIncompleteMarker);
  return manifest;
}

DatasetManifest read_manifest(const std::filesystem::path& dataset_dir) {
  namespace fs = std::filesystem;
  if (fs::exists(dataset_dir / kIncompleteMarker))
    throw ParseError("dataset at " + dataset_dir.string() + " is marked INCOMPLETE");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(dataset_dir / kManifestName));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("manifest: " + std::string(e.what()));
  }
  DatasetManifest m;
  try {
    m.split = doc.at("split").get<std::string>();
    for (const auto& id : doc.at("topology_ids")) m.topology_ids.push_back(id.get<std::string>());
    m.sample_count = doc.at("sample_count").get<int64_t>();
    for (const auto& p : doc.at("tier_proportions")) m.tier_proportions.push_back(p.get<double>());
    m.master_seed = doc.at("master_seed").get<uint64_t>();
    m.generator_version = doc.at("generator_version").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("manifest: schema violation: " + std::string(e.what()));
  }
  double sum = 0.0;
  for (double p : m.tier_proportions) sum += p;
  if (std::abs(sum - 1.0) > 1e-9) throw ParseError("manifest: tier proportions must sum to 1");
  return m;
}

std::vector<Sample> read_samples(const std::filesystem::path& dataset_dir, bool with_labels) {
  read_manifest(dataset_dir);  // validates presence and completeness
  std::ifstream in(dataset_dir / kSamplesName, std::ios::binary);
  if (!in) throw ParseError("cannot open samples file in " + dataset_dir.string());
  std::vector<Sample> samples;
  std::string line;
  int64_t index = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    samples.push_back(sample_from_json_line(line, with_labels, index));
    ++index;
  }
  std::sort(samples.begin(), samples.end(),
            [](const Sample& a, const Sample& b) { return a.sample_id < b.sample_id; });
  return samples;
}

DatasetBundle load_dataset(const std::filesystem::path& dataset_dir, bool with_labels) {
  DatasetBundle bundle;
  bundle.manifest = read_manifest(dataset_dir);
  bundle.samples = read_samples(dataset_dir, with_labels);
  for (const std::string& id : bundle.manifest.topology_ids) {
    TopologyFile tf = read_topology_file(dataset_dir / "topologies" / (id + ".json"));
    bundle.topologies[id] = std::move(tf.topology);
  }
  for (const Sample& s : bundle.samples) {
    if (!bundle.topologies.count(s.topology_id))
      throw ParseError("sample " + std::to_string(s.sample_id) +
                       " references unknown topology " + s.topology_id);
  }
  return bundle;
}

SplitReport check_split_disjointness(const std::vector<DatasetManifest>& manifests) {
  if (manifests.size() < 2)
    throw std::invalid_argument("need at least two manifests to compare");
  SplitReport report;
  for (size_t a = 0; a < manifests.size(); ++a) {
    std::set<std::string> ids_a(manifests[a].topology_ids.begin(),
                                manifests[a].topology_ids.end());
    for (size_t b = a + 1; b < manifests.size(); ++b) {
      for (const std::string& id : manifests[b].topology_ids) {
        if (ids_a.count(id)) {
          report.violations.push_back({manifests[a].split, manifests[b].split, id});
        }
      }
    }
  }
  return report;
}

}  // namespace flowtwin
