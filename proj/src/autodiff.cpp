#include "isac/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>
#include <utility>

namespace isac::ad {

namespace {

std::string shape_of(const Grid& g) {
  std::ostringstream os;
  os << g.rows() << "x" << g.cols();
  return os.str();
}

[[noreturn]] void shape_error(const char* op, const char* lhs, const Grid& a, const char* rhs,
                              const Grid& b) {
  std::ostringstream os;
  os << op << ": " << lhs << " is " << shape_of(a) << ", " << rhs << " is " << shape_of(b);
  throw DimensionError(os.str());
}

void require_same(const char* op, const NodePtr& a, const NodePtr& b) {
  if (a->value.rows() != b->value.rows() || a->value.cols() != b->value.cols())
    shape_error(op, "lhs", a->value, "rhs", b->value);
}

NodePtr make(Grid value, Op op, std::vector<NodePtr> parents, std::function<void(Node&)> bw) {
  auto n = std::make_shared<Node>();
  n->grad = Grid::Zero(value.rows(), value.cols());
  n->value = std::move(value);
  n->op = op;
  n->parents = std::move(parents);
  n->backward = std::move(bw);
  return n;
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

NodePtr leaf(Grid value, std::string name) {
  auto n = make(std::move(value), Op::Leaf, {}, {});
  n->name = std::move(name);
  return n;
}

NodePtr constant(Grid value) { return leaf(std::move(value)); }

NodePtr linear(const NodePtr& W, const NodePtr& b, const NodePtr& x) {
  if (W->cols() != x->rows()) shape_error("linear", "W", W->value, "x", x->value);
  if (b->rows() != W->rows() || b->cols() != 1) shape_error("linear", "W", W->value, "b", b->value);
  Grid out = W->value * x->value;
  out.colwise() += b->value.col(0);
  return make(std::move(out), Op::Linear, {W, b, x}, [](Node& self) {
    auto& W = *self.parents[0];
    auto& b = *self.parents[1];
    auto& x = *self.parents[2];
    W.grad.noalias() += self.grad * x.value.transpose();
    b.grad.col(0) += self.grad.rowwise().sum();
    x.grad.noalias() += W.value.transpose() * self.grad;
  });
}

NodePtr matmul(const NodePtr& a, const NodePtr& b) {
  if (a->cols() != b->rows()) shape_error("matmul", "lhs", a->value, "rhs", b->value);
  return make(a->value * b->value, Op::MatMul, {a, b}, [](Node& self) {
    auto& a = *self.parents[0];
    auto& b = *self.parents[1];
    a.grad.noalias() += self.grad * b.value.transpose();
    b.grad.noalias() += a.value.transpose() * self.grad;
  });
}

NodePtr add(const NodePtr& a, const NodePtr& b) {
  require_same("add", a, b);
  return make(a->value + b->value, Op::Add, {a, b}, [](Node& self) {
    self.parents[0]->grad += self.grad;
    self.parents[1]->grad += self.grad;
  });
}

NodePtr sub(const NodePtr& a, const NodePtr& b) {
  require_same("sub", a, b);
  return make(a->value - b->value, Op::Sub, {a, b}, [](Node& self) {
    self.parents[0]->grad += self.grad;
    self.parents[1]->grad -= self.grad;
  });
}

NodePtr mul(const NodePtr& a, const NodePtr& b) {
  require_same("mul", a, b);
  return make(a->value.cwiseProduct(b->value), Op::Mul, {a, b}, [](Node& self) {
    auto& a = *self.parents[0];
    auto& b = *self.parents[1];
    a.grad += self.grad.cwiseProduct(b.value);
    b.grad += self.grad.cwiseProduct(a.value);
  });
}

NodePtr mul_const(const NodePtr& x, const Grid& k) {
  if (x->rows() != k.rows() || x->cols() != k.cols())
    shape_error("mul_const", "x", x->value, "k", k);
  return make(x->value.cwiseProduct(k), Op::MulConst, {x},
              [k](Node& self) { self.parents[0]->grad += self.grad.cwiseProduct(k); });
}

NodePtr mul_row_broadcast(const Grid& k, const NodePtr& s) {
  if (s->rows() != 1 || s->cols() != k.cols())
    shape_error("mul_row_broadcast", "k", k, "s", s->value);
  Grid out = k * s->value.row(0).asDiagonal();
  return make(std::move(out), Op::MulRowBroadcast, {s}, [k](Node& self) {
    self.parents[0]->grad.row(0) += k.cwiseProduct(self.grad).colwise().sum();
  });
}

NodePtr add_const(const NodePtr& x, const Grid& k) {
  if (x->rows() != k.rows() || x->cols() != k.cols())
    shape_error("add_const", "x", x->value, "k", k);
  return make(x->value + k, Op::AddConst, {x},
              [](Node& self) { self.parents[0]->grad += self.grad; });
}

NodePtr scale(const NodePtr& x, double factor) {
  return make(x->value * factor, Op::Scale, {x},
              [factor](Node& self) { self.parents[0]->grad += factor * self.grad; });
}

NodePtr scalar_mul(const NodePtr& x, const NodePtr& s) {
  if (s->rows() != 1 || s->cols() != 1) shape_error("scalar_mul", "x", x->value, "s", s->value);
  return make(x->value * s->value(0, 0), Op::ScalarMul, {x, s}, [](Node& self) {
    auto& x = *self.parents[0];
    auto& s = *self.parents[1];
    x.grad += s.value(0, 0) * self.grad;
    s.grad(0, 0) += self.grad.cwiseProduct(x.value).sum();
  });
}

NodePtr inv_sqrt(const NodePtr& x, double k) {
  Grid out = x->value.unaryExpr([k](double v) { return std::sqrt(k / v); });
  return make(std::move(out), Op::InvSqrt, {x}, [](Node& self) {
    auto& x = *self.parents[0];
    // d/dx sqrt(k/x) = -0.5 * sqrt(k/x) / x
    x.grad += (-0.5 * self.grad.cwiseProduct(self.value)).cwiseQuotient(x.value);
  });
}

NodePtr activation(Activation kind, const NodePtr& x) {
  switch (kind) {
    case Activation::Linear:
      return x;
    case Activation::Relu:
      return make(x->value.cwiseMax(0.0), Op::Activation, {x}, [](Node& self) {
        auto& x = *self.parents[0];
        x.grad += self.grad.cwiseProduct(
            x.value.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; }));
      });
    case Activation::Sigmoid:
      return make(x->value.unaryExpr(&sigmoid), Op::Activation, {x}, [](Node& self) {
        const auto& y = self.value;
        self.parents[0]->grad += self.grad.cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix()));
      });
    case Activation::Tanh:
      return make(x->value.array().tanh().matrix(), Op::Activation, {x}, [](Node& self) {
        const auto& y = self.value;
        self.parents[0]->grad += self.grad.cwiseProduct((1.0 - y.array().square()).matrix());
      });
    case Activation::SoftmaxCols: {
      if (x->cols() < 1) throw DimensionError("softmax-cols: empty input");
      Grid y = x->value;
      for (Index c = 0; c < y.cols(); ++c) {
        const double mx = y.col(c).maxCoeff();
        y.col(c) = (y.col(c).array() - mx).exp().matrix();
        y.col(c) /= y.col(c).sum();
      }
      return make(std::move(y), Op::Activation, {x}, [](Node& self) {
        const auto& y = self.value;
        const Eigen::RowVectorXd dots = self.grad.cwiseProduct(y).colwise().sum();
        Grid g = self.grad;
        g.rowwise() -= dots;
        self.parents[0]->grad += y.cwiseProduct(g);
      });
    }
  }
  throw std::logic_error("activation: unknown kind");
}

NodePtr log_softmax_cols(const NodePtr& x) {
  Grid y = x->value;
  for (Index c = 0; c < y.cols(); ++c) {
    const double mx = y.col(c).maxCoeff();
    const double lse = mx + std::log((y.col(c).array() - mx).exp().sum());
    y.col(c).array() -= lse;
  }
  return make(std::move(y), Op::LogSoftmaxCols, {x}, [](Node& self) {
    const Grid p = self.value.array().exp().matrix();
    const Eigen::RowVectorXd gsum = self.grad.colwise().sum();
    Grid g = self.grad;
    g -= p * gsum.asDiagonal();
    self.parents[0]->grad += g;
  });
}

NodePtr col_sum(const NodePtr& x) {
  return make(x->value.colwise().sum(), Op::ColSum, {x}, [](Node& self) {
    self.parents[0]->grad.rowwise() += self.grad.row(0);
  });
}

NodePtr sum(const NodePtr& x) {
  Grid out(1, 1);
  out(0, 0) = x->value.sum();
  return make(std::move(out), Op::Sum, {x},
              [](Node& self) { self.parents[0]->grad.array() += self.grad(0, 0); });
}

NodePtr gather(const NodePtr& x, Index rows, Index cols, std::vector<Index> src) {
  if (static_cast<Index>(src.size()) != rows * cols)
    throw DimensionError("gather: index list length " + std::to_string(src.size()) +
                         " does not match " + std::to_string(rows) + "x" + std::to_string(cols));
  const Index n = x->value.size();
  Grid out(rows, cols);
  const double* in = x->value.data();
  double* o = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i] < 0 || src[i] >= n)
      throw DimensionError("gather: source index " + std::to_string(src[i]) + " outside " +
                           shape_of(x->value));
    o[i] = in[src[i]];
  }
  return make(std::move(out), Op::Gather, {x}, [src = std::move(src)](Node& self) {
    double* g = self.parents[0]->grad.data();
    const double* og = self.grad.data();
    for (std::size_t i = 0; i < src.size(); ++i) g[src[i]] += og[i];
  });
}

NodePtr concat_rows(std::span<const NodePtr> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const Index cols = parts.front()->cols();
  Index rows = 0;
  for (const auto& p : parts) {
    if (p->cols() != cols) shape_error("concat_rows", "first", parts.front()->value, "part", p->value);
    rows += p->rows();
  }
  Grid out(rows, cols);
  Index r = 0;
  for (const auto& p : parts) {
    out.middleRows(r, p->rows()) = p->value;
    r += p->rows();
  }
  return make(std::move(out), Op::ConcatRows, {parts.begin(), parts.end()}, [](Node& self) {
    Index r = 0;
    for (auto& p : self.parents) {
      p->grad += self.grad.middleRows(r, p->rows());
      r += p->rows();
    }
  });
}

NodePtr slice_rows(const NodePtr& x, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > x->rows())
    throw DimensionError("slice_rows: rows [" + std::to_string(start) + ", " +
                         std::to_string(start + count) + ") outside " + shape_of(x->value));
  return make(x->value.middleRows(start, count), Op::SliceRows, {x}, [start, count](Node& self) {
    self.parents[0]->grad.middleRows(start, count) += self.grad;
  });
}

NodePtr bce(const NodePtr& q, const Grid& t) {
  if (q->rows() != 1 || t.rows() != 1 || q->cols() != t.cols())
    shape_error("bce", "q", q->value, "t", t);
  const Index B = q->cols();
  double acc = 0.0;
  for (Index b = 0; b < B; ++b) {
    const double qc = std::clamp(q->value(0, b), kProbClamp, 1.0 - kProbClamp);
    acc += t(0, b) * std::log(qc) + (1.0 - t(0, b)) * std::log(1.0 - qc);
  }
  Grid out(1, 1);
  out(0, 0) = -acc / static_cast<double>(B);
  return make(std::move(out), Op::Bce, {q}, [t](Node& self) {
    auto& q = *self.parents[0];
    const Index B = q.cols();
    const double g = self.grad(0, 0) / static_cast<double>(B);
    for (Index b = 0; b < B; ++b) {
      const double v = q.value(0, b);
      if (v < kProbClamp || v > 1.0 - kProbClamp) continue;  // clamped: flat
      q.grad(0, b) += -g * (t(0, b) / v - (1.0 - t(0, b)) / (1.0 - v));
    }
  });
}

NodePtr masked_mse(const NodePtr& pred, const Grid& target, const Grid& mask) {
  if (pred->rows() != 1 || target.rows() != 1 || mask.rows() != 1 || pred->cols() != target.cols() ||
      pred->cols() != mask.cols())
    shape_error("masked_mse", "pred", pred->value, "target", target);
  double count = 0.0;
  double acc = 0.0;
  for (Index b = 0; b < pred->cols(); ++b) {
    if (mask(0, b) == 0.0) continue;
    const double e = pred->value(0, b) - target(0, b);
    acc += e * e;
    count += 1.0;
  }
  Grid out(1, 1);
  out(0, 0) = count > 0 ? acc / count : 0.0;
  return make(std::move(out), Op::MaskedMse, {pred}, [target, mask, count](Node& self) {
    if (count == 0.0) return;
    auto& p = *self.parents[0];
    const double g = self.grad(0, 0) * 2.0 / count;
    for (Index b = 0; b < p.cols(); ++b)
      if (mask(0, b) != 0.0) p.grad(0, b) += g * (p.value(0, b) - target(0, b));
  });
}

NodePtr nll(const NodePtr& logp, std::span<const int> labels) {
  if (static_cast<Index>(labels.size()) != logp->cols())
    throw DimensionError("nll: " + std::to_string(labels.size()) + " labels for " +
                         shape_of(logp->value));
  const double floor = std::log(kProbClamp);
  std::vector<int> lab(labels.begin(), labels.end());
  double acc = 0.0;
  for (Index c = 0; c < logp->cols(); ++c) {
    if (lab[c] < 0 || lab[c] >= logp->rows())
      throw DimensionError("nll: label " + std::to_string(lab[c]) + " outside " +
                           std::to_string(logp->rows()) + " classes");
    acc += std::max(logp->value(lab[c], c), floor);
  }
  Grid out(1, 1);
  out(0, 0) = -acc / static_cast<double>(logp->cols());
  return make(std::move(out), Op::Nll, {logp}, [lab = std::move(lab), floor](Node& self) {
    auto& lp = *self.parents[0];
    const double g = self.grad(0, 0) / static_cast<double>(lp.cols());
    for (Index c = 0; c < lp.cols(); ++c)
      if (lp.value(lab[c], c) > floor) lp.grad(lab[c], c) -= g;
  });
}

std::vector<Node*> topo_order(const NodePtr& root) {
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  // iterative post-order; parents visited in declaration order
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

void backward(const NodePtr& root) {
  if (root->rows() != 1 || root->cols() != 1)
    throw DimensionError("backward: root must be 1x1, got " + shape_of(root->value));
  const auto order = topo_order(root);
  for (Node* n : order)
    if (!n->is_leaf()) n->grad.setZero();
  root->grad(0, 0) += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backward) (*it)->backward(**it);
}

void zero_grad(std::span<const NodePtr> params) {
  for (const auto& p : params) p->grad.setZero();
}

AdamState AdamState::for_shape(Index rows, Index cols) {
  AdamState s;
  s.m = Grid::Zero(rows, cols);
  s.v = Grid::Zero(rows, cols);
  return s;
}

namespace {

void check_finite(const Node& param) {
  if (!param.grad.allFinite())
    throw NumericalError("adam: non-finite gradient in parameter '" +
                         (param.name.empty() ? std::string("<unnamed>") : param.name) + "'");
}

void apply_adam(Node& param, AdamState& s, double lr) {
  s.t += 1;
  s.m = s.beta1 * s.m + (1.0 - s.beta1) * param.grad;
  s.v = s.beta2 * s.v + (1.0 - s.beta2) * param.grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
  param.value.array() -=
      lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + s.eps);
}

}  // namespace

void adam_step(Node& param, AdamState& state, double lr) {
  if (state.m.rows() != param.rows() || state.m.cols() != param.cols() ||
      state.v.rows() != param.rows() || state.v.cols() != param.cols())
    shape_error("adam_step", "param", param.value, "state", state.m);
  check_finite(param);
  apply_adam(param, state, lr);
}

Adam::Adam(std::vector<NodePtr> params, double lr) : params_(std::move(params)), lr_(lr) {
  states_.reserve(params_.size());
  for (const auto& p : params_) states_.push_back(AdamState::for_shape(p->rows(), p->cols()));
}

void Adam::step() {
  for (const auto& p : params_) check_finite(*p);
  for (std::size_t i = 0; i < params_.size(); ++i) apply_adam(*params_[i], states_[i], lr_);
}

void Adam::zero_grad() { ad::zero_grad(params_); }

}  // namespace isac::ad
