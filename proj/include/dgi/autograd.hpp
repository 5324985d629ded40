#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dgi/tensor.hpp"

namespace dgi {

/// Learning-rate group a parameter belongs to.
enum class ParamGroup { kBackbone, kQuantizer };

/// A trainable tensor with a persistent gradient accumulator.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  ParamGroup group = ParamGroup::kBackbone;

  void zero_grad() { grad = Tensor(value.shape(), 0.0); }
};

/// Owns parameters with stable addresses, in creation order.
class ParameterStore {
 public:
  Parameter& add(std::string name, Tensor value, ParamGroup group);
  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;

  std::size_t size() const noexcept { return params_.size(); }
  Parameter& at(std::size_t i) { return *params_[i]; }
  const Parameter& at(std::size_t i) const { return *params_[i]; }

  void zero_grad();
  std::size_t scalar_count() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

class Graph;

/// Handle to a node in a Graph.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

/// Define-by-run reverse-mode tape. Nodes are appended in evaluation order,
/// so parents always precede children and the node index is a topological
/// order.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t self)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Leaf bound to a parameter. Repeated calls return the same node.
  Var param(Parameter& p);
  /// Leaf that never receives gradient.
  Var constant(Tensor value);

  Var record(Tensor value, std::vector<std::size_t> parents, BackwardFn backward);

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  const std::vector<std::size_t>& parents(std::size_t id) const { return nodes_[id].parents; }

  /// Upstream gradient of a node during backward (allocated lazily).
  const Tensor& grad(std::size_t id) const { return nodes_[id].grad; }
  bool has_grad(std::size_t id) const { return !nodes_[id].grad.empty(); }
  /// Accumulation target for a parent's gradient; allocates on first use.
  Tensor& grad_slot(std::size_t id);

  /// Reverse pass from a 1x1 loss; accumulates into Parameter::grad.
  void backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }
  /// Number of node visits performed by the most recent backward pass.
  std::size_t last_backward_visits() const noexcept { return last_visits_; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
  std::size_t last_visits_ = 0;
};

/// Weighted sparse row pooling: out[b] = sum_(i,w) w * table[i].
using PoolSegments = std::vector<std::vector<std::pair<std::size_t, double>>>;

// Primitive operations. Shapes are (rows x cols); "row" vectors are 1 x n.
Var matmul(Var a, Var b);                  // (r x n)(n x m)
Var matmul_nt(Var a, Var b);               // (r x n)(m x n)^T
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var add_row(Var a, Var row);               // broadcast 1 x m over rows
Var scale(Var a, double factor);
Var scale_by(Var a, Var scalar);           // scalar is 1 x 1
Var exp(Var a);
Var log_eps(Var a, double eps);            // log(a + eps)
Var tanh(Var a);
Var square(Var a);
Var normalize_rows(Var a);                 // throws DegenerateVectorError
/// Rows with norm < 1e-12 become zero rows (zero gradient) and are flagged.
Var normalize_rows_masked(Var a, std::vector<bool>& degenerate);
Var softmax_rows(Var a);
Var log_softmax_rows(Var a);
Var gather_rows(Var table, std::vector<std::size_t> indices);
Var pool_rows(Var table, PoolSegments segments);
Var concat_cols(const std::vector<Var>& parts);
Var sum(Var a);                            // 1 x 1
Var mean(Var a);                           // 1 x 1
Var sum_cols(Var a);                       // r x 1, sums each row
Var mean_rows(Var a);                      // 1 x c, averages over rows
Var row_dot(Var a, Var b);                 // r x 1
Var pick(Var a, std::vector<std::size_t> cols);  // r x 1, a[r, cols[r]]
Var diag(Var a);                           // r x 1 of a square matrix
Var detach(Var a);
/// Forward value `hard`; backward passes the gradient to `soft` unchanged.
Var straight_through(Var soft, Tensor hard);

/// Threshold below which a norm is treated as degenerate.
inline constexpr double kDegenerateNorm = 1e-12;

}  // namespace dgi
