#include "flowtwin/nn/tape.hpp"

#include <cmath>
#include <string>

namespace flowtwin::nn {

void Tape::check_finite(const Tensor& t, const char* op) const {
  if (!t.all_finite())
    throw NumericError(std::string("non-finite value produced by ") + op);
}

NodeId Tape::push(Tensor value, bool requires_grad,
                  std::function<void(Tape&, NodeId)> backward) {
  nodes_.push_back(Node{std::move(value), Tensor(), requires_grad, false, std::move(backward)});
  return NodeId{static_cast<int32_t>(nodes_.size() - 1)};
}

NodeId Tape::leaf(Tensor value, bool requires_grad) {
  check_finite(value, "leaf");
  return push(std::move(value), requires_grad, nullptr);
}

Tensor& Tape::grad_buffer(NodeId id) {
  Node& n = nodes_[id.index];
  if (!n.grad_alloc) {
    n.grad = Tensor(n.value.rows(), n.value.cols());
    n.grad_alloc = true;
  }
  return n.grad;
}

const Tensor& Tape::grad(NodeId id) { return grad_buffer(id); }

void Tape::backward(NodeId root) {
  const Tensor& rv = nodes_[root.index].value;
  if (rv.size() != 1) throw std::invalid_argument("backward root must be scalar");
  for (Node& n : nodes_) {
    n.grad = Tensor();
    n.grad_alloc = false;
  }
  grad_buffer(root).at(0, 0) = 1.0;
  for (int32_t i = root.index; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.backward || !n.grad_alloc) continue;
    n.backward(*this, NodeId{i});
  }
}

NodeId Tape::push_custom(Tensor value, std::vector<NodeId> parents,
                         std::function<void(Tape&, NodeId)> backward) {
  check_finite(value, "custom");
  bool req = false;
  for (NodeId p : parents) req = req || nodes_[p.index].requires_grad;
  return push(std::move(value), req, req ? std::move(backward) : nullptr);
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (av.cols() != bv.rows()) throw std::invalid_argument("matmul: shape mismatch");
  Tensor out(av.rows(), bv.cols());
  matmul_into(av, bv, out, false);
  check_finite(out, "matmul");
  bool req = requires_grad(a) || requires_grad(b);
  return push(std::move(out), req, [a, b](Tape& t, NodeId self) {
    const Tensor& g = t.grad(self);
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    if (t.requires_grad(a)) {
      // dA += g * B^T
      Tensor& ga = t.grad_buffer(a);
      for (int i = 0; i < av.rows(); ++i) {
        for (int k = 0; k < av.cols(); ++k) {
          double acc = 0.0;
          for (int j = 0; j < bv.cols(); ++j) acc += g.at(i, j) * bv.at(k, j);
          ga.at(i, k) += acc;
        }
      }
    }
    if (t.requires_grad(b)) {
      // dB += A^T * g
      Tensor& gb = t.grad_buffer(b);
      for (int k = 0; k < bv.rows(); ++k) {
        for (int i = 0; i < av.rows(); ++i) {
          const double aik = av.at(i, k);
          if (aik == 0.0) continue;
          for (int j = 0; j < bv.cols(); ++j) gb.at(k, j) += aik * g.at(i, j);
        }
      }
    }
  });
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace

NodeId Tape::add(NodeId a, NodeId b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  require_same_shape(av, bv, "add");
  Tensor out = av;
  for (size_t i = 0; i < out.size(); ++i) out.data()[i] += bv.data()[i];
  check_finite(out, "add");
  bool req = requires_grad(a) || requires_grad(b);
  return push(std::move(out), req, [a, b](Tape& t, NodeId self) {
    const Tensor& g = t.grad(self);
    for (NodeId p : {a, b}) {
      if (!t.requires_grad(p)) continue;
      Tensor& gp = t.grad_buffer(p);
      for (size_t i = 0; i < g.size(); ++i) gp.data()[i] += g.data()[i];
    }
  });
}

NodeId Tape::sub(NodeId a, NodeId b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  require_same_shape(av, bv, "sub");
  Tensor out = av;
  for (size_t i = 0; i < out.size(); ++i) out.data()[i] -= bv.data()[i];
  check_finite(out, "sub");
  bool req = requires_grad(a) || requires_grad(b);
  return push(std::move(out), req, [a, b](Tape& t, NodeId self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(a)) {
      Tensor& ga = t.grad_buffer(a);
      for (size_t i = 0; i < g.size(); ++i) ga.data()[i] += g.data()[i];
    }
    if (t.requires_grad(b)) {
      Tensor& gb = t.grad_buffer(b);
      for (size_t i = 0; i < g.size(); ++i) gb.data()[i] -= g.data()[i];
    }
  });
}

NodeId Tape::mul(NodeId a, NodeId b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  require_same_shape(av, bv, "mul");
  Tensor out = av;
  for (size_t i = 0; i < out.size(); ++i) out.data()[i] *= bv.data()[i];
  check_finite(out, "mul");
  bool req = requires_grad(a) || requires_grad(b);
  return push(std::move(out), req, [a, b](Tape& t, NodeId self) {
    const Tensor& g = t.grad(self);
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    if (t.requires_grad(a)) {
      Tensor& ga = t.grad_buffer(a);
      for (size_t i = 0; i < g.size(); ++i) ga.data()[i] += g.data()[i] * bv.data()[i];
    }
    if (t.requires_grad(b)) {
      Tensor& gb = t.grad_buffer(b);
      for (size_t i = 0; i < g.size(); ++i) gb.data()[i] += g.data()[i] * av.data()[i];
    }
  });
}

NodeId Tape::div(NodeId a, NodeId b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  require_same_shape(av, bv, "div");
  Tensor out = av;
  for (size_t i = 0; i < out.size(); ++i) out.data()[i] /= bv.data()[i];
  check_finite(out, "div");
  bool req = requires_grad(a) || requires_grad(b);
  return push(std::move(out), req, [a, b](Tape& t, NodeId self) {
    const Tensor& g = t.grad(self);
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    if (t.requires_grad(a)) {
      Tensor& ga = t.grad_buffer(a);
      for (size_t i = 0; i < g.size(); ++i) ga.data()[i] += g.data()[i] / bv.data()[i];
    }
    if (t.requires_grad(b)) {
      Tensor& gb = t.grad_buffer(b);
      for (size_t i = 0; i < g.size(); ++i) {
        const double bj = bv.data()[i];
        gb.data()[i] -= g.data()[i] * av.data()[i] / (bj * bj);
      }
    }
  });
}

NodeId Tape::add_rowvec(NodeId m, NodeId row) {
  const Tensor& mv = value(m);
  const Tensor& rv = value(row);
  if (rv.rows() != 1 || rv.cols() != mv.cols())
    throw std::invalid_argument("add_rowvec: row must be 1 x cols(m)");
  Tensor out = mv;
  for (int i = 0; i < mv.rows(); ++i) {
    for (int j = 0; j < mv.cols(); ++j) out.at(i, j) += rv.at(0, j);
  }
  check_finite(out, "add_rowvec");
  bool req = requires_grad(m) || requires_grad(row);
  return push(std::move(out), req, [m, row](Tape& t, NodeId self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(m)) {
      Tensor& gm = t.grad_buffer(m);
      for (size_t i = 0; i < g.size(); ++i) gm.data()[i] += g.data()[i];
    }
    if (t.requires_grad(row)) {
      Tensor& gr = t.grad_buffer(row);
      for (int i = 0; i < g.rows(); ++i) {
        for (int j = 0; j < g.cols(); ++j) gr.at(0, j) += g.at(i, j);
      }
    }
  });
}

NodeId Tape::affine(NodeId a, double scale, double shift) {
  const Tensor& av = value(a);
  Tensor out = av;
  for (size_t i = 0; i < out.size(); ++i) out.data()[i] = out.data()[i] * scale + shift;
  check_finite(out, "affine");
  return push(std::move(out), requires_grad(a), [a, scale](Tape& t, NodeId self) {
    if (!t.requires_grad(a)) return;
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad_buffer(a);
    for (size_t i = 0; i < g.size(); ++i) ga.data()[i] += g.data()[i] * scale;
  });
}

NodeId Tape::concat_cols(NodeId a, NodeId b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (av.rows() != bv.rows()) throw std::invalid_argument("concat_cols: row counts differ");
  Tensor out(av.rows(), av.cols() + bv.cols());
  for (int i = 0; i < av.rows(); ++i) {
    for (int j = 0; j < av.cols(); ++j) out.at(i, j) = av.at(i, j);
    for (int j = 0; j < bv.cols(); ++j) out.at(i, av.cols() + j) = bv.at(i, j);
  }
  bool req = requires_grad(a) || requires_grad(b);
  return push(std::move(out), req, [a, b](Tape& t, NodeId self) {
    const Tensor& g = t.grad(self);
    const int ac = t.value(a).cols();
    if (t.requires_grad(a)) {
      Tensor& ga = t.grad_buffer(a);
      for (int i = 0; i < ga.rows(); ++i) {
        for (int j = 0; j < ga.cols(); ++j) ga.at(i, j) += g.at(i, j);
      }
    }
    if (t.requires_grad(b)) {
      Tensor& gb = t.grad_buffer(b);
      for (int i = 0; i < gb.rows(); ++i) {
        for (int j = 0; j < gb.cols(); ++j) gb.at(i, j) += g.at(i, ac + j);
      }
    }
  });
}

NodeId Tape::slice_cols(NodeId a, int begin, int end) {
  const Tensor& av = value(a);
  if (begin < 0 || end > av.cols() || begin >= end)
    throw std::invalid_argument("slice_cols: bad range");
  Tensor out(av.rows(), end - begin);
  for (int i = 0; i < av.rows(); ++i) {
    for (int j = begin; j < end; ++j) out.at(i, j - begin) = av.at(i, j);
  }
  return push(std::move(out), requires_grad(a), [a, begin](Tape& t, NodeId self) {
    if (!t.requires_grad(a)) return;
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad_buffer(a);
    for (int i = 0; i < g.rows(); ++i) {
      for (int j = 0; j < g.cols(); ++j) ga.at(i, begin + j) += g.at(i, j);
    }
  });
}

NodeId Tape::gather_rows(NodeId a, std::vector<int> indices) {
  const Tensor& av = value(a);
  for (int idx : indices) {
    if (idx < 0 || idx >= av.rows()) throw std::invalid_argument("gather_rows: index out of range");
  }
  Tensor out(static_cast<int>(indices.size()), av.cols());
  for (size_t i = 0; i < indices.size(); ++i) {
    for (int j = 0; j < av.cols(); ++j) out.at(static_cast<int>(i), j) = av.at(indices[i], j);
  }
  return push(std::move(out), requires_grad(a),
              [a, idx = std::move(indices)](Tape& t, NodeId self) {
                if (!t.requires_grad(a)) return;
                const Tensor& g = t.grad(self);
                Tensor& ga = t.grad_buffer(a);
                for (size_t i = 0; i < idx.size(); ++i) {
                  for (int j = 0; j < g.cols(); ++j)
                    ga.at(idx[i], j) += g.at(static_cast<int>(i), j);
                }
              });
}

NodeId Tape::scatter_rows(NodeId base, std::vector<int> indices, NodeId rows) {
  const Tensor& bv = value(base);
  const Tensor& rv = value(rows);
  if (rv.rows() != static_cast<int>(indices.size()) || rv.cols() != bv.cols())
    throw std::invalid_argument("scatter_rows: shape mismatch");
  std::vector<char> hit(bv.rows(), 0);
  for (int idx : indices) {
    if (idx < 0 || idx >= bv.rows())
      throw std::invalid_argument("scatter_rows: index out of range");
    if (hit[idx]) throw std::invalid_argument("scatter_rows: duplicate index");
    hit[idx] = 1;
  }
  Tensor out = bv;
  for (size_t i = 0; i < indices.size(); ++i) {
    for (int j = 0; j < bv.cols(); ++j) out.at(indices[i], j) = rv.at(static_cast<int>(i), j);
  }
  bool req = requires_grad(base) || requires_grad(rows);
  return push(std::move(out), req,
              [base, rows, idx = std::move(indices)](Tape& t, NodeId self) {
                const Tensor& g = t.grad(self);
                if (t.requires_grad(base)) {
                  Tensor& gb = t.grad_buffer(base);
                  std::vector<char> replaced(gb.rows(), 0);
                  for (int i : idx) replaced[i] = 1;
                  for (int i = 0; i < gb.rows(); ++i) {
                    if (replaced[i]) continue;
                    for (int j = 0; j < gb.cols(); ++j) gb.at(i, j) += g.at(i, j);
                  }
                }
                if (t.requires_grad(rows)) {
                  Tensor& gr = t.grad_buffer(rows);
                  for (size_t i = 0; i < idx.size(); ++i) {
                    for (int j = 0; j < gr.cols(); ++j)
                      gr.at(static_cast<int>(i), j) += g.at(idx[i], j);
                  }
                }
              });
}

NodeId Tape::segment_sum(NodeId a, std::vector<int> segment_ids, int n_segments) {
  const Tensor& av = value(a);
  if (static_cast<int>(segment_ids.size()) != av.rows())
    throw std::invalid_argument("segment_sum: need one segment id per row");
  for (int s : segment_ids) {
    if (s < 0 || s >= n_segments)
      throw std::invalid_argument("segment_sum: segment id out of range");
  }
  Tensor out(n_segments, av.cols());
  for (int i = 0; i < av.rows(); ++i) {
    for (int j = 0; j < av.cols(); ++j) out.at(segment_ids[i], j) += av.at(i, j);
  }
  check_finite(out, "segment_sum");
  return push(std::move(out), requires_grad(a),
              [a, ids = std::move(segment_ids)](Tape& t, NodeId self) {
                if (!t.requires_grad(a)) return;
                const Tensor& g = t.grad(self);
                Tensor& ga = t.grad_buffer(a);
                for (int i = 0; i < ga.rows(); ++i) {
                  for (int j = 0; j < ga.cols(); ++j) ga.at(i, j) += g.at(ids[i], j);
                }
              });
}

namespace {

template <class F, class DF>
NodeId unary_op(Tape& t, NodeId a, const char* name, F f, DF df_from_in_out) {
  const Tensor& av = t.value(a);
  Tensor out = av;
  for (size_t i = 0; i < out.size(); ++i) out.data()[i] = f(out.data()[i]);
  if (!out.all_finite()) throw NumericError(std::string("non-finite value produced by ") + name);
  return t.push_custom(std::move(out), {a}, [a, df_from_in_out](Tape& t, NodeId self) {
    if (!t.requires_grad(a)) return;
    const Tensor& g = t.grad(self);
    const Tensor& in = t.value(a);
    const Tensor& out = t.value(self);
    Tensor& ga = t.grad_buffer(a);
    for (size_t i = 0; i < g.size(); ++i) {
      ga.data()[i] += g.data()[i] * df_from_in_out(in.data()[i], out.data()[i]);
    }
  });
}

}  // namespace

NodeId Tape::sigmoid(NodeId a) {
  return unary_op(
      *this, a, "sigmoid", [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

NodeId Tape::tanh_(NodeId a) {
  return unary_op(
      *this, a, "tanh", [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

NodeId Tape::relu(NodeId a) {
  return unary_op(
      *this, a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

NodeId Tape::exp_(NodeId a) {
  return unary_op(
      *this, a, "exp", [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

NodeId Tape::log_(NodeId a) {
  return unary_op(
      *this, a, "log", [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

NodeId Tape::abs_(NodeId a) {
  return unary_op(
      *this, a, "abs", [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

NodeId Tape::sum(NodeId a) {
  const Tensor& av = value(a);
  double s = 0.0;
  for (double v : av.values()) s += v;
  Tensor out = Tensor::scalar(s);
  check_finite(out, "sum");
  return push(std::move(out), requires_grad(a), [a](Tape& t, NodeId self) {
    if (!t.requires_grad(a)) return;
    const double g = t.grad(self).item();
    Tensor& ga = t.grad_buffer(a);
    for (size_t i = 0; i < ga.size(); ++i) ga.data()[i] += g;
  });
}

NodeId Tape::mean(NodeId a) {
  const Tensor& av = value(a);
  if (av.size() == 0) throw std::invalid_argument("mean of empty tensor");
  return affine(sum(a), 1.0 / static_cast<double>(av.size()), 0.0);
}

NodeId mape_loss(Tape& tape, NodeId pred, NodeId target) {
  const Tensor& pv = tape.value(pred);
  const Tensor& tv = tape.value(target);
  if (!pv.same_shape(tv)) throw std::invalid_argument("mape_loss: shape mismatch");
  if (pv.size() == 0) throw std::invalid_argument("mape_loss: empty inputs");
  for (double v : tv.values()) {
    if (v == 0.0) throw std::invalid_argument("mape_loss: zero target is degenerate");
  }
  NodeId rel = tape.div(tape.sub(pred, target), target);
  return tape.affine(tape.mean(tape.abs_(rel)), 100.0, 0.0);
}

NodeId mse_loss(Tape& tape, NodeId pred, NodeId target) {
  const Tensor& pv = tape.value(pred);
  if (!pv.same_shape(tape.value(target))) throw std::invalid_argument("mse_loss: shape mismatch");
  if (pv.size() == 0) throw std::invalid_argument("mse_loss: empty inputs");
  NodeId d = tape.sub(pred, target);
  return tape.mean(tape.mul(d, d));
}

}  // namespace flowtwin::nn
