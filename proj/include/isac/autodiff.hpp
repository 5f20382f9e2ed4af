/**
 * @file    isac/autodiff.hpp
 * @brief   Dense real tensors with define-by-run reverse-mode differentiation and Adam.
 *
 * Every value is a 2-D column-major grid of doubles. Batches run along columns:
 * a layer input of width n for B samples is an n x B grid.
 */
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace isac {

using Grid = Eigen::MatrixXd;
using Index = Eigen::Index;

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace ad {

enum class Op : std::uint8_t {
  Leaf,
  Linear,
  MatMul,
  Add,
  Sub,
  Mul,
  MulConst,
  MulRowBroadcast,
  AddConst,
  Scale,
  ScalarMul,
  InvSqrt,
  Activation,
  LogSoftmaxCols,
  ColSum,
  Sum,
  Gather,
  ConcatRows,
  SliceRows,
  Bce,
  MaskedMse,
  Nll,
};

enum class Activation : std::uint8_t { Relu, Sigmoid, Tanh, SoftmaxCols, Linear };

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
  Grid value;
  Grid grad;  // same shape as value; zero on creation
  Op op = Op::Leaf;
  std::vector<NodePtr> parents;
  // Reads this->grad and accumulates into parents' grads.
  std::function<void(Node&)> backward;
  std::string name;

  bool is_leaf() const { return parents.empty(); }
  Index rows() const { return value.rows(); }
  Index cols() const { return value.cols(); }
};

/// Trainable or constant leaf.
NodePtr leaf(Grid value, std::string name = {});
NodePtr constant(Grid value);

// -- differentiable operations ------------------------------------------------

/// W (m x n) * x (n x B) + b (m x 1) broadcast over columns.
NodePtr linear(const NodePtr& W, const NodePtr& b, const NodePtr& x);
NodePtr matmul(const NodePtr& a, const NodePtr& b);
NodePtr add(const NodePtr& a, const NodePtr& b);
NodePtr sub(const NodePtr& a, const NodePtr& b);
NodePtr mul(const NodePtr& a, const NodePtr& b);
/// Elementwise product with a constant grid of the same shape.
NodePtr mul_const(const NodePtr& x, const Grid& k);
/// out(i, c) = k(i, c) * s(0, c) for a 1 x C row node s.
NodePtr mul_row_broadcast(const Grid& k, const NodePtr& s);
NodePtr add_const(const NodePtr& x, const Grid& k);
NodePtr scale(const NodePtr& x, double factor);
/// x scaled by the 1x1 node s.
NodePtr scalar_mul(const NodePtr& x, const NodePtr& s);
/// Elementwise sqrt(k / x); x must be positive.
NodePtr inv_sqrt(const NodePtr& x, double k);
NodePtr activation(Activation kind, const NodePtr& x);
NodePtr log_softmax_cols(const NodePtr& x);
/// Column sums, 1 x C.
NodePtr col_sum(const NodePtr& x);
NodePtr sum(const NodePtr& x);
/// out(r, c) = x.value.data()[src[r + c * rows]] (column-major flat indices into x).
NodePtr gather(const NodePtr& x, Index rows, Index cols, std::vector<Index> src);
NodePtr concat_rows(std::span<const NodePtr> parts);
NodePtr slice_rows(const NodePtr& x, Index start, Index count);

// -- losses (1x1 outputs) -----------------------------------------------------

inline constexpr double kProbClamp = 1e-12;

/// -mean[t log q + (1-t) log(1-q)] with q clamped to [1e-12, 1-1e-12]. q and t are 1 x B.
NodePtr bce(const NodePtr& q, const Grid& t);
/// Mean over columns with mask != 0 of (pred - target)^2; zero (and no gradient) if the mask is empty.
NodePtr masked_mse(const NodePtr& pred, const Grid& target, const Grid& mask);
/// -mean over columns of max(logp(label_c, c), log 1e-12).
NodePtr nll(const NodePtr& logp, std::span<const int> labels);

// -- reverse sweep ---------------------------------------------------------------

/// Topological order of everything reachable from root, parents before children.
std::vector<Node*> topo_order(const NodePtr& root);

/// Seeds d(root)/d(root) = 1 and sweeps backwards. Leaf gradients accumulate across calls;
/// interior gradients are reset at the start of each call.
void backward(const NodePtr& root);

void zero_grad(std::span<const NodePtr> params);

// -- optimizer -----------------------------------------------------------------

struct AdamState {
  Grid m;
  Grid v;
  std::int64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_shape(Index rows, Index cols);
};

/// One bias-corrected Adam update. Throws NumericalError naming the parameter if its
/// gradient holds a non-finite entry; nothing is modified in that case.
void adam_step(Node& param, AdamState& state, double lr);

/// Adam over a fixed parameter list. A step is all-or-nothing: every gradient is checked
/// before any parameter moves.
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<NodePtr> params, double lr);

  void step();
  void zero_grad();
  double lr() const { return lr_; }
  const std::vector<NodePtr>& params() const { return params_; }
  const std::vector<AdamState>& states() const { return states_; }

 private:
  std::vector<NodePtr> params_;
  std::vector<AdamState> states_;
  double lr_ = 1e-3;
};

}  // namespace ad
}  // namespace isac
