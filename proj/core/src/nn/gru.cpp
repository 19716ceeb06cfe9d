#include "flowtwin/nn/gru.hpp"

#include <cmath>
#include <stdexcept>

namespace flowtwin::nn {

Tensor& ParamStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::invalid_argument("unknown parameter: " + name);
  return it->second;
}

const Tensor& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::invalid_argument("unknown parameter: " + name);
  return it->second;
}

void ParamStore::insert(const std::string& name, Tensor t) {
  if (!params_.emplace(name, std::move(t)).second)
    throw std::invalid_argument("duplicate parameter: " + name);
}

void ParamStore::init_matrix(const std::string& name, int rows, int cols, int fan_in,
                             Rng& rng) {
  Tensor t(rows, cols);
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : t.values()) v = rng.uniform(-bound, bound);
  insert(name, std::move(t));
}

void ParamStore::init_zeros(const std::string& name, int rows, int cols) {
  insert(name, Tensor(rows, cols));
}

void gru_init(ParamStore& store, const std::string& prefix, int input_width,
              int hidden_width, Rng& rng) {
  for (const char* gate : {"z", "r", "h"}) {
    store.init_matrix(prefix + ".w" + gate, input_width, hidden_width, input_width, rng);
    store.init_matrix(prefix + ".u" + gate, hidden_width, hidden_width, hidden_width, rng);
    store.init_zeros(prefix + ".b" + gate, 1, hidden_width);
  }
}

GruCellRef gru_bind(Tape& tape, const ParamStore& store, const std::string& prefix,
                    bool requires_grad) {
  auto bind = [&](const std::string& suffix) {
    return tape.leaf(store.at(prefix + suffix), requires_grad);
  };
  GruCellRef cell;
  cell.wz = bind(".wz");
  cell.uz = bind(".uz");
  cell.bz = bind(".bz");
  cell.wr = bind(".wr");
  cell.ur = bind(".ur");
  cell.br = bind(".br");
  cell.wh = bind(".wh");
  cell.uh = bind(".uh");
  cell.bh = bind(".bh");
  return cell;
}

NodeId gru_step(Tape& t, const GruCellRef& cell, NodeId state, NodeId input) {
  const Tensor& h = t.value(state);
  const Tensor& x = t.value(input);
  if (h.rows() != x.rows()) throw std::invalid_argument("gru_step: batch sizes differ");
  if (t.value(cell.wz).rows() != x.cols() || t.value(cell.uz).rows() != h.cols())
    throw std::invalid_argument("gru_step: parameter widths do not match inputs");

  NodeId z = t.sigmoid(t.add_rowvec(
      t.add(t.matmul(input, cell.wz), t.matmul(state, cell.uz)), cell.bz));
  NodeId r = t.sigmoid(t.add_rowvec(
      t.add(t.matmul(input, cell.wr), t.matmul(state, cell.ur)), cell.br));
  NodeId cand = t.tanh_(t.add_rowvec(
      t.add(t.matmul(input, cell.wh), t.matmul(t.mul(r, state), cell.uh)), cell.bh));
  NodeId keep = t.mul(z, state);
  NodeId blend = t.mul(t.affine(z, -1.0, 1.0), cand);
  return t.add(keep, blend);
}

}  // namespace flowtwin::nn
