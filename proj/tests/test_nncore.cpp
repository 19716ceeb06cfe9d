#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>

#include "flowtwin/nn/checkpoint.hpp"
#include "flowtwin/nn/gradcheck.hpp"
#include "flowtwin/nn/gru.hpp"
#include "flowtwin/nn/optim.hpp"
#include "flowtwin/nn/tape.hpp"
#include "flowtwin/rng.hpp"

using namespace flowtwin;
using namespace flowtwin::nn;

namespace {

Tensor random_tensor(int rows, int cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(rows, cols);
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// Avoids the relu/abs kink: values in [-1,-0.1] U [0.1,1].
Tensor random_off_kink(int rows, int cols, Rng& rng) {
  Tensor t(rows, cols);
  for (double& v : t.values()) {
    double m = rng.uniform(0.1, 1.0);
    v = rng.uniform01() < 0.5 ? -m : m;
  }
  return t;
}

constexpr double kEps = 1e-6;
constexpr double kTol = 1e-4;

}  // namespace

TEST_CASE("segment_sum sums rows into their segments") {
  Tape t;
  NodeId a = t.leaf(Tensor::from_values(3, 1, {1, 2, 3}));
  NodeId s = t.segment_sum(a, {0, 0, 1}, 2);
  CHECK(t.value(s).at(0, 0) == 3.0);
  CHECK(t.value(s).at(1, 0) == 3.0);
}

TEST_CASE("segment_sum is permutation-invariant within segments") {
  Rng rng(8);
  Tensor m = random_tensor(6, 3, rng);
  std::vector<int> ids{1, 0, 2, 1, 0, 2};
  Tape t1;
  Tensor out1 = t1.value(t1.segment_sum(t1.leaf(m), ids, 3));
  // shuffle rows together with their ids
  std::vector<int> perm{4, 2, 0, 5, 1, 3};
  Tensor shuffled(6, 3);
  std::vector<int> ids2(6);
  for (int i = 0; i < 6; ++i) {
    ids2[i] = ids[perm[i]];
    for (int j = 0; j < 3; ++j) shuffled.at(i, j) = m.at(perm[i], j);
  }
  Tape t2;
  Tensor out2 = t2.value(t2.segment_sum(t2.leaf(shuffled), ids2, 3));
  for (size_t i = 0; i < out1.size(); ++i) {
    CHECK(out1.data()[i] == doctest::Approx(out2.data()[i]).epsilon(1e-12));
  }
}

TEST_CASE("gather with identity indices is the identity") {
  Rng rng(3);
  Tensor m = random_tensor(4, 5, rng);
  Tape t;
  Tensor out = t.value(t.gather_rows(t.leaf(m), {0, 1, 2, 3}));
  for (size_t i = 0; i < m.size(); ++i) CHECK(out.data()[i] == m.data()[i]);
}

TEST_CASE("matmul by the identity preserves the input") {
  Rng rng(5);
  Tensor a = random_tensor(3, 4, rng);
  Tensor eye(4, 4);
  for (int i = 0; i < 4; ++i) eye.at(i, i) = 1.0;
  Tape t;
  Tensor out = t.value(t.matmul(t.leaf(a), t.leaf(eye)));
  for (size_t i = 0; i < a.size(); ++i) CHECK(out.data()[i] == doctest::Approx(a.data()[i]));
}

TEST_CASE("shape mismatches and bad indices are rejected") {
  Tape t;
  NodeId a = t.leaf(Tensor(2, 3));
  NodeId b = t.leaf(Tensor(3, 2));
  CHECK_THROWS_AS(t.add(a, b), std::invalid_argument);
  CHECK_THROWS_AS(t.matmul(a, a), std::invalid_argument);
  CHECK_THROWS_AS(t.gather_rows(a, {2}), std::invalid_argument);
  CHECK_THROWS_AS(t.segment_sum(a, {0, 2}, 2), std::invalid_argument);
  CHECK_THROWS_AS(t.segment_sum(a, {0}, 2), std::invalid_argument);
}

TEST_CASE("non-finite forward values raise NumericError") {
  Tape t;
  NodeId big = t.leaf(Tensor::from_values(1, 1, {1000.0}));
  CHECK_THROWS_AS(t.exp_(big), NumericError);
  NodeId zero = t.leaf(Tensor::from_values(1, 1, {0.0}));
  CHECK_THROWS_AS(t.log_(zero), NumericError);
}

TEST_CASE("every primitive passes the finite-difference gradient check") {
  Rng rng(17);

  SUBCASE("matmul") {
    std::vector<Tensor> params{random_tensor(3, 4, rng), random_tensor(4, 2, rng)};
    auto f = [](Tape& t, const std::vector<NodeId>& p) {
      return t.sum(t.matmul(p[0], p[1]));
    };
    CHECK(grad_check(f, params, kEps) < kTol);
  }
  SUBCASE("add/sub/mul/div chain") {
    std::vector<Tensor> params{random_tensor(3, 3, rng), random_tensor(3, 3, rng, 0.5, 2.0)};
    auto f = [](Tape& t, const std::vector<NodeId>& p) {
      NodeId x = t.add(p[0], p[1]);
      NodeId y = t.mul(t.sub(x, p[1]), p[0]);
      return t.sum(t.div(y, p[1]));
    };
    CHECK(grad_check(f, params, kEps) < kTol);
  }
  SUBCASE("add_rowvec") {
    std::vector<Tensor> params{random_tensor(4, 3, rng), random_tensor(1, 3, rng)};
    auto f = [](Tape& t, const std::vector<NodeId>& p) {
      return t.sum(t.add_rowvec(p[0], p[1]));
    };
    CHECK(grad_check(f, params, kEps) < kTol);
  }
  SUBCASE("concat and slice") {
    std::vector<Tensor> params{random_tensor(3, 2, rng), random_tensor(3, 4, rng)};
    auto f = [](Tape& t, const std::vector<NodeId>& p) {
      NodeId c = t.concat_cols(p[0], p[1]);
      return t.sum(t.mul(t.slice_cols(c, 1, 5), t.slice_cols(c, 0, 4)));
    };
    CHECK(grad_check(f, params, kEps) < kTol);
  }
  SUBCASE("gather and scatter") {
    std::vector<Tensor> params{random_tensor(5, 3, rng), random_tensor(2, 3, rng)};
    auto f = [](Tape& t, const std::vector<NodeId>& p) {
      NodeId g = t.gather_rows(p[0], {4, 0, 2, 2});
      NodeId s = t.scatter_rows(p[0], {1, 3}, p[1]);
      return t.add(t.sum(t.mul(g, g)), t.sum(t.mul(s, s)));
    };
    CHECK(grad_check(f, params, kEps) < kTol);
  }
  SUBCASE("segment_sum") {
    std::vector<Tensor> params{random_tensor(6, 2, rng)};
    auto f = [](Tape& t, const std::vector<NodeId>& p) {
      NodeId s = t.segment_sum(p[0], {2, 0, 1, 1, 2, 0}, 3);
      return t.sum(t.mul(s, s));
    };
    CHECK(grad_check(f, params, kEps) < kTol);
  }
  SUBCASE("sigmoid tanh exp") {
    std::vector<Tensor> params{random_tensor(3, 3, rng)};
    auto f = [](Tape& t, const std::vector<NodeId>& p) {
      return t.sum(t.add(t.sigmoid(p[0]), t.add(t.tanh_(p[0]), t.exp_(p[0]))));
    };
    CHECK(grad_check(f, params, kEps) < kTol);
  }
  SUBCASE("log on positive inputs") {
    std::vector<Tensor> params{random_tensor(3, 3, rng, 0.5, 2.0)};
    auto f = [](Tape& t, const std::vector<NodeId>& p) { return t.sum(t.log_(p[0])); };
    CHECK(grad_check(f, params, kEps) < kTol);
  }
  SUBCASE("relu and abs away from the kink") {
    std::vector<Tensor> params{random_off_kink(4, 4, rng)};
    auto f = [](Tape& t, const std::vector<NodeId>& p) {
      return t.add(t.sum(t.relu(p[0])), t.sum(t.abs_(p[0])));
    };
    CHECK(grad_check(f, params, kEps) < kTol);
  }
  SUBCASE("affine mean") {
    std::vector<Tensor> params{random_tensor(3, 5, rng)};
    auto f = [](Tape& t, const std::vector<NodeId>& p) {
      return t.mean(t.affine(p[0], 2.5, -0.75));
    };
    CHECK(grad_check(f, params, kEps) < kTol);
  }
  SUBCASE("losses") {
    std::vector<Tensor> params{random_tensor(5, 1, rng, 0.5, 2.0),
                               random_tensor(5, 1, rng, 0.5, 2.0)};
    auto f_mape = [](Tape& t, const std::vector<NodeId>& p) {
      return mape_loss(t, p[0], p[1]);
    };
    auto f_mse = [](Tape& t, const std::vector<NodeId>& p) {
      return mse_loss(t, p[0], p[1]);
    };
    CHECK(grad_check(f_mape, params, kEps) < kTol);
    CHECK(grad_check(f_mse, params, kEps) < kTol);
  }
}

TEST_CASE("gru: saturated update gate preserves the state") {
  Rng rng(21);
  ParamStore store;
  gru_init(store, "cell", 3, 4, rng);
  // push the update gate to 1
  for (double& v : store.at("cell.bz").values()) v = 50.0;
  Tape t;
  GruCellRef cell = gru_bind(t, store, "cell");
  Tensor h0 = random_tensor(2, 4, rng);
  NodeId h = t.leaf(h0);
  NodeId x = t.leaf(random_tensor(2, 3, rng));
  Tensor h1 = t.value(gru_step(t, cell, h, x));
  for (size_t i = 0; i < h0.size(); ++i) {
    CHECK(h1.data()[i] == doctest::Approx(h0.data()[i]).epsilon(1e-9));
  }
}

TEST_CASE("gru: all-zero parameters halve the state") {
  ParamStore store;
  Rng rng(2);
  gru_init(store, "cell", 3, 4, rng);
  for (auto& [name, tensor] : store) {
    for (double& v : tensor.values()) v = 0.0;
  }
  Tape t;
  GruCellRef cell = gru_bind(t, store, "cell");
  Tensor h0 = random_tensor(2, 4, rng);
  NodeId h = t.leaf(h0);
  NodeId x = t.leaf(random_tensor(2, 3, rng));
  Tensor h1 = t.value(gru_step(t, cell, h, x));
  for (size_t i = 0; i < h0.size(); ++i) {
    CHECK(h1.data()[i] == doctest::Approx(0.5 * h0.data()[i]).epsilon(1e-12));
  }
}

TEST_CASE("gru gradients match finite differences") {
  Rng rng(31);
  ParamStore store;
  gru_init(store, "cell", 3, 4, rng);
  std::vector<std::string> names;
  std::vector<Tensor> params;
  for (const auto& [name, tensor] : store) {
    names.push_back(name);
    params.push_back(tensor);
  }
  Tensor h0 = random_tensor(2, 4, rng);
  Tensor x0 = random_tensor(2, 3, rng);
  auto f = [&](Tape& t, const std::vector<NodeId>& p) {
    GruCellRef cell;
    // names sorted: bh,br,bz,uh,ur,uz,wh,wr,wz
    cell.bh = p[0];
    cell.br = p[1];
    cell.bz = p[2];
    cell.uh = p[3];
    cell.ur = p[4];
    cell.uz = p[5];
    cell.wh = p[6];
    cell.wr = p[7];
    cell.wz = p[8];
    NodeId h = t.leaf(h0);
    NodeId x = t.leaf(x0);
    NodeId h1 = gru_step(t, cell, h, x);
    NodeId h2 = gru_step(t, cell, h1, x);
    return t.sum(t.mul(h2, h2));
  };
  CHECK(grad_check(f, params, kEps) < kTol);
}

TEST_CASE("mape matches hand-computed values") {
  Tape t;
  SUBCASE("identical") {
    NodeId p = t.leaf(Tensor::from_values(3, 1, {1, 2, 3}));
    NodeId y = t.leaf(Tensor::from_values(3, 1, {1, 2, 3}));
    CHECK(t.value(mape_loss(t, p, y)).item() == 0.0);
  }
  SUBCASE("double") {
    NodeId p = t.leaf(Tensor::from_values(1, 1, {2}));
    NodeId y = t.leaf(Tensor::from_values(1, 1, {1}));
    CHECK(t.value(mape_loss(t, p, y)).item() == doctest::Approx(100.0).epsilon(1e-12));
  }
  SUBCASE("tabulated") {
    NodeId p = t.leaf(Tensor::from_values(3, 1, {1, 2, 4}));
    NodeId y = t.leaf(Tensor::from_values(3, 1, {1, 2, 2}));
    CHECK(t.value(mape_loss(t, p, y)).item() ==
          doctest::Approx(100.0 / 3.0).epsilon(1e-12));
  }
  SUBCASE("zero target") {
    NodeId p = t.leaf(Tensor::from_values(1, 1, {1}));
    NodeId y = t.leaf(Tensor::from_values(1, 1, {0}));
    CHECK_THROWS_AS(mape_loss(t, p, y), std::invalid_argument);
  }
  SUBCASE("subgradient at the kink is zero") {
    NodeId p = t.leaf(Tensor::from_values(1, 1, {2}), true);
    NodeId y = t.leaf(Tensor::from_values(1, 1, {2}));
    NodeId loss = mape_loss(t, p, y);
    t.backward(loss);
    CHECK(t.grad(p).item() == 0.0);
  }
}

TEST_CASE("mse is the mean of squared differences") {
  Tape t;
  NodeId p = t.leaf(Tensor::from_values(2, 1, {1, 3}));
  NodeId y = t.leaf(Tensor::from_values(2, 1, {0, 1}));
  CHECK(t.value(mse_loss(t, p, y)).item() == doctest::Approx(2.5));
}

TEST_CASE("adam with zero gradients leaves parameters unchanged") {
  ParamStore store;
  Rng rng(4);
  store.init_matrix("w", 2, 2, 2, rng);
  Tensor before = store.at("w");
  AdamOptimizer opt({1e-3, 1e-2, 100});
  std::map<std::string, Tensor> grads;
  grads.emplace("w", Tensor(2, 2));
  opt.step(store, grads);
  for (size_t i = 0; i < before.size(); ++i) {
    CHECK(store.at("w").data()[i] == before.data()[i]);
  }
}

TEST_CASE("adam converges on the quadratic bowl") {
  ParamStore store;
  store.insert("x", Tensor::from_values(1, 1, {1.0}));
  AdamOptimizer opt({1e-4, 0.05, 100});
  for (int step = 0; step < 500; ++step) {
    double x = store.at("x").item();
    std::map<std::string, Tensor> grads;
    grads.emplace("x", Tensor::from_values(1, 1, {2.0 * x}));
    opt.step(store, grads);
  }
  CHECK(std::abs(store.at("x").item()) < 1e-3);
}

TEST_CASE("cyclic schedule peaks at half cycle and floors at the ends") {
  CyclicLr lr{1e-4, 1e-2, 200};
  CHECK(lr.at(100) == doctest::Approx(1e-2));
  CHECK(lr.at(0) == doctest::Approx(1e-4));
  CHECK(lr.at(200) == doctest::Approx(1e-4));
  for (int s = 0; s < 400; ++s) {
    CHECK(lr.at(s) >= 1e-4 - 1e-15);
    CHECK(lr.at(s) <= 1e-2 + 1e-15);
  }
}

TEST_CASE("adam rejects non-finite gradients") {
  ParamStore store;
  store.insert("x", Tensor::from_values(1, 1, {1.0}));
  AdamOptimizer opt({1e-4, 1e-3, 10});
  std::map<std::string, Tensor> grads;
  grads.emplace("x", Tensor::from_values(1, 1, {std::nan("")}));
  CHECK_THROWS_AS(opt.step(store, grads), TrainingDivergence);
}

TEST_CASE("grad_check is exact for linear functions") {
  Rng rng(19);
  std::vector<Tensor> params{random_tensor(3, 3, rng)};
  auto f = [](Tape& t, const std::vector<NodeId>& p) {
    return t.sum(t.affine(p[0], 3.0, 1.0));
  };
  CHECK(grad_check(f, params, kEps) < 1e-9);
}

TEST_CASE("grad_check flags a corrupted backward rule") {
  Rng rng(23);
  std::vector<Tensor> params{random_tensor(2, 2, rng)};
  auto f = [](Tape& t, const std::vector<NodeId>& p) {
    // forward doubles the input; backward deliberately claims gradient 3
    const Tensor& in = t.value(p[0]);
    Tensor out = in;
    for (double& v : out.values()) v *= 2.0;
    NodeId bad = t.push_custom(std::move(out), {p[0]}, [a = p[0]](Tape& t, NodeId self) {
      const Tensor& g = t.grad(self);
      Tensor& ga = t.grad_buffer(a);
      for (size_t i = 0; i < g.size(); ++i) ga.data()[i] += 3.0 * g.data()[i];
    });
    return t.sum(bad);
  };
  CHECK(grad_check(f, params, kEps) > 1e-2);
}

TEST_CASE("checkpoint round trip is exact") {
  namespace fs = std::filesystem;
  Rng rng(6);
  Checkpoint ckpt;
  ckpt.header["variant"] = "baseline";
  ckpt.header["config_hash"] = "abc123";
  ckpt.params.init_matrix("layer.w", 7, 5, 7, rng);
  ckpt.params.init_matrix("layer.b", 1, 5, 5, rng);
  fs::path path = fs::temp_directory_path() / "flowtwin_ckpt_test.json";
  save_checkpoint(path, ckpt);
  Checkpoint back = load_checkpoint(path);
  CHECK(back.header.at("variant") == "baseline");
  REQUIRE(back.params.contains("layer.w"));
  const Tensor& w0 = ckpt.params.at("layer.w");
  const Tensor& w1 = back.params.at("layer.w");
  REQUIRE(w1.same_shape(w0));
  for (size_t i = 0; i < w0.size(); ++i) CHECK(w0.data()[i] == w1.data()[i]);
  fs::remove(path);
}
