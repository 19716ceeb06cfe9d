#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <set>

#include "flowtwin/dataset.hpp"
#include "flowtwin/textio.hpp"

using namespace flowtwin;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::vector<std::pair<std::string, Topology>> one_topology() {
  return {{"t5", make_synthetic_topology(TopologyKind::RandomConnected, 5, {3000, 9000}, 7)}};
}

DatasetGenConfig quick_config(int64_t n, uint64_t seed) {
  DatasetGenConfig cfg;
  cfg.split = "train";
  cfg.n_samples = n;
  cfg.master_seed = seed;
  cfg.sim.warmup = 10.0;
  cfg.sim.duration = 60.0;
  return cfg;
}

std::string file_bytes(const fs::path& p) { return read_text_file(p); }

}  // namespace

TEST_CASE("four samples give exactly one per tier") {
  CHECK(tier_of_sample(0, 4) == 1);
  CHECK(tier_of_sample(1, 4) == 2);
  CHECK(tier_of_sample(2, 4) == 3);
  CHECK(tier_of_sample(3, 4) == 4);
  // remainder assigned to lowest tiers first
  CHECK(tier_of_sample(1, 6) == 1);
  CHECK(tier_of_sample(2, 6) == 2);
  CHECK(tier_of_sample(3, 6) == 2);
  CHECK(tier_of_sample(5, 6) == 4);
}

TEST_CASE("generated dataset matches tier structure and is readable") {
  TempDir dir("flowtwin_ds_a");
  auto manifest = generate_dataset(one_topology(), quick_config(8, 11), dir.path);
  CHECK(manifest.sample_count == 8);
  auto samples = read_samples(dir.path, true);
  REQUIRE(samples.size() == 8);
  // tier 1 means every node runs WFQ (10,30,60)
  for (int i = 0; i < 2; ++i) {
    for (const auto& [node, ns] : samples[i].scheduling.per_node) {
      CHECK(ns.policy == SchedPolicy::WFQ);
      CHECK(ns.weights == std::array<int, 3>{10, 30, 60});
    }
  }
  for (const Sample& s : samples) {
    REQUIRE(s.labels.has_value());
    CHECK(s.labels->size() == 20);  // 5*(5-1) flows
    CHECK(s.traffic.flows.size() == 20);
    for (size_t i = 0; i < s.labels->size(); ++i) {
      const FlowStats& fs = (*s.labels)[i];
      if (fs.delivered > 0) {
        CHECK(fs.mean_delay > 0.0);
        CHECK(fs.p10 <= fs.p90);
      }
    }
  }
}

TEST_CASE("same inputs give byte-identical dataset directories") {
  TempDir a("flowtwin_ds_b1"), b("flowtwin_ds_b2");
  generate_dataset(one_topology(), quick_config(6, 99), a.path);
  generate_dataset(one_topology(), quick_config(6, 99), b.path);
  CHECK(file_bytes(a.path / "manifest") == file_bytes(b.path / "manifest"));
  CHECK(file_bytes(a.path / "samples") == file_bytes(b.path / "samples"));
  CHECK(file_bytes(a.path / "topologies" / "t5.json") ==
        file_bytes(b.path / "topologies" / "t5.json"));
}

TEST_CASE("different seeds change the samples") {
  TempDir a("flowtwin_ds_c1"), b("flowtwin_ds_c2");
  generate_dataset(one_topology(), quick_config(6, 1), a.path);
  generate_dataset(one_topology(), quick_config(6, 2), b.path);
  CHECK(file_bytes(a.path / "samples") != file_bytes(b.path / "samples"));
}

TEST_CASE("round trip preserves structure; with_labels=false strips labels") {
  TempDir dir("flowtwin_ds_d");
  generate_dataset(one_topology(), quick_config(5, 3), dir.path);
  auto with = read_samples(dir.path, true);
  auto without = read_samples(dir.path, false);
  REQUIRE(with.size() == without.size());
  for (size_t i = 0; i < with.size(); ++i) {
    CHECK(with[i].labels.has_value());
    CHECK(!without[i].labels.has_value());
    CHECK(with[i].sample_id == without[i].sample_id);
    CHECK(with[i].traffic.serialize() == without[i].traffic.serialize());
    CHECK(with[i].routing.serialize() == without[i].routing.serialize());
  }
  // serialize -> parse -> serialize is the identity on the line format
  for (const Sample& s : with) {
    std::string line = sample_to_json_line(s);
    Sample back = sample_from_json_line(line, true, s.sample_id);
    CHECK(sample_to_json_line(back) == line);
  }
}

TEST_CASE("truncated record reports its index") {
  TempDir dir("flowtwin_ds_e");
  generate_dataset(one_topology(), quick_config(4, 5), dir.path);
  std::string samples = file_bytes(dir.path / "samples");
  size_t second_line = samples.find('\n') + 1;
  std::string truncated = samples.substr(0, second_line + 40);
  write_text_file(dir.path / "samples", truncated + "\n");
  try {
    read_samples(dir.path, true);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("record 1") != std::string::npos);
  }
}

TEST_CASE("incomplete marker blocks reads") {
  TempDir dir("flowtwin_ds_f");
  generate_dataset(one_topology(), quick_config(4, 6), dir.path);
  write_text_file(dir.path / "INCOMPLETE", "x\n");
  CHECK_THROWS_AS(read_samples(dir.path, true), ParseError);
}

TEST_CASE("load_dataset resolves topologies") {
  TempDir dir("flowtwin_ds_g");
  generate_dataset(one_topology(), quick_config(4, 8), dir.path);
  DatasetBundle bundle = load_dataset(dir.path, true);
  CHECK(bundle.manifest.split == "train");
  CHECK(bundle.topologies.count("t5") == 1);
  CHECK(bundle.samples.size() == 4);
}

TEST_CASE("split disjointness report") {
  DatasetManifest train, val, test;
  train.split = "train";
  train.topology_ids = {"A", "B"};
  val.split = "val";
  val.topology_ids = {"C"};
  test.split = "test";
  test.topology_ids = {"D"};
  CHECK(check_split_disjointness({train, val, test}).ok());

  DatasetManifest clash;
  clash.split = "test2";
  clash.topology_ids = {"A"};
  auto report = check_split_disjointness({train, clash});
  REQUIRE(report.violations.size() == 1);
  CHECK(report.violations[0].topology_id == "A");

  // the challenge's own split layout
  DatasetManifest ch_train, ch_val, ch_test;
  ch_train.split = "train";
  ch_train.topology_ids = {"NSFNet", "Geant2"};
  ch_val.split = "validation";
  ch_val.topology_ids = {"GBN"};
  ch_test.split = "test";
  ch_test.topology_ids = {"RedIRIS"};
  CHECK(check_split_disjointness({ch_train, ch_val, ch_test}).ok());
}
