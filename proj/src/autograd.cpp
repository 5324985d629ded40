#include "dgi/autograd.hpp"

#include <algorithm>
#include <cmath>

#include "dgi/errors.hpp"

namespace dgi {

// ---------------------------------------------------------------------------
// ParameterStore

Parameter& ParameterStore::add(std::string name, Tensor value, ParamGroup group) {
  if (find(name) != nullptr) throw PreconditionError("duplicate parameter name: " + name);
  auto p = std::make_unique<Parameter>();
  p->name = std::move(name);
  p->value = std::move(value);
  p->group = group;
  p->zero_grad();
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter* ParameterStore::find(const std::string& name) {
  for (auto& p : params_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

const Parameter* ParameterStore::find(const std::string& name) const {
  for (const auto& p : params_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

// ---------------------------------------------------------------------------
// Graph

const Tensor& Var::value() const { return graph->value(*this); }

Var Graph::param(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var{this, it->second};
  Node n;
  n.value = p.value;
  n.param = &p;
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  param_nodes_.emplace(&p, nodes_.size() - 1);
  return Var{this, nodes_.size() - 1};
}

Var Graph::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Graph::record(Tensor value, std::vector<std::size_t> parents, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = std::any_of(parents.begin(), parents.end(),
                                [this](std::size_t p) { return nodes_[p].requires_grad; });
  n.parents = std::move(parents);
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Tensor& Graph::grad_slot(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor(n.value.shape(), 0.0);
  return n.grad;
}

void Graph::backward(Var loss) {
  if (loss.graph != this) throw PreconditionError("loss belongs to a different graph");
  if (nodes_[loss.id].value.size() != 1) {
    throw PreconditionError("backward requires a scalar loss");
  }
  for (auto& n : nodes_) n.grad = Tensor();
  last_visits_ = 0;
  if (!nodes_[loss.id].requires_grad) return;
  grad_slot(loss.id)[0] = 1.0;
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.empty()) continue;
    ++last_visits_;
    if (n.backward) n.backward(*this, id);
    if (n.param != nullptr) {
      Tensor& target = n.param->grad;
      if (!target.same_shape(n.grad)) target = Tensor(n.param->value.shape(), 0.0);
      for (std::size_t i = 0; i < target.size(); ++i) target[i] += n.grad[i];
    }
  }
}

// ---------------------------------------------------------------------------
// Kernels

namespace {

// Four partial sums; the accumulation order depends only on n, so results do
// not change with the number of rows in a batch.
inline double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    s0 += a[k] * b[k];
    s1 += a[k + 1] * b[k + 1];
    s2 += a[k + 2] * b[k + 2];
    s3 += a[k + 3] * b[k + 3];
  }
  for (; k < n; ++k) s0 += a[k] * b[k];
  return (s0 + s1) + (s2 + s3);
}

inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) y[k] += alpha * x[k];
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) throw PreconditionError(std::string(op) + ": shape mismatch");
}

Graph& graph_of(Var a) {
  if (a.graph == nullptr) throw PreconditionError("variable is not bound to a graph");
  return *a.graph;
}

template <typename Fn>
Var unary(Var a, Tensor out, Fn local_grad) {
  Graph& g = graph_of(a);
  return g.record(std::move(out), {a.id}, [a_id = a.id, local_grad](Graph& gr, std::size_t self) {
    if (!gr.requires_grad(a_id)) return;
    const Tensor& up = gr.grad(self);
    const Tensor& x = gr.value(a_id);
    const Tensor& y = gr.value(self);
    Tensor& ga = gr.grad_slot(a_id);
    for (std::size_t i = 0; i < up.size(); ++i) ga[i] += up[i] * local_grad(x[i], y[i]);
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  Graph& g = graph_of(a);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  const std::size_t r = A.rows(), n = A.cols(), m = B.cols();
  if (B.rows() != n) throw PreconditionError("matmul: inner dimension mismatch");
  Tensor C(r, m);
  for (std::size_t i = 0; i < r; ++i) {
    double* c = C.data() + i * m;
    for (std::size_t k = 0; k < n; ++k) axpy(A(i, k), B.data() + k * m, c, m);
  }
  return g.record(std::move(C), {a.id, b.id}, [a_id = a.id, b_id = b.id](Graph& gr, std::size_t self) {
    const Tensor& up = gr.grad(self);
    const Tensor& A = gr.value(a_id);
    const Tensor& B = gr.value(b_id);
    const std::size_t r = A.rows(), n = A.cols(), m = B.cols();
    if (gr.requires_grad(a_id)) {
      Tensor& ga = gr.grad_slot(a_id);
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t k = 0; k < n; ++k) {
          ga(i, k) += dot(up.data() + i * m, B.data() + k * m, m);
        }
      }
    }
    if (gr.requires_grad(b_id)) {
      Tensor& gb = gr.grad_slot(b_id);
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t k = 0; k < n; ++k) axpy(A(i, k), up.data() + i * m, gb.data() + k * m, m);
      }
    }
  });
}

Var matmul_nt(Var a, Var b) {
  Graph& g = graph_of(a);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  const std::size_t r = A.rows(), n = A.cols(), m = B.rows();
  if (B.cols() != n) throw PreconditionError("matmul_nt: inner dimension mismatch");
  Tensor C(r, m);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < m; ++j) C(i, j) = dot(A.data() + i * n, B.data() + j * n, n);
  }
  return g.record(std::move(C), {a.id, b.id}, [a_id = a.id, b_id = b.id](Graph& gr, std::size_t self) {
    const Tensor& up = gr.grad(self);
    const Tensor& A = gr.value(a_id);
    const Tensor& B = gr.value(b_id);
    const std::size_t r = A.rows(), n = A.cols(), m = B.rows();
    if (gr.requires_grad(a_id)) {
      Tensor& ga = gr.grad_slot(a_id);
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < m; ++j) axpy(up(i, j), B.data() + j * n, ga.data() + i * n, n);
      }
    }
    if (gr.requires_grad(b_id)) {
      Tensor& gb = gr.grad_slot(b_id);
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < m; ++j) axpy(up(i, j), A.data() + i * n, gb.data() + j * n, n);
      }
    }
  });
}

Var add(Var a, Var b) {
  Graph& g = graph_of(a);
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return g.record(std::move(out), {a.id, b.id}, [a_id = a.id, b_id = b.id](Graph& gr, std::size_t self) {
    const Tensor& up = gr.grad(self);
    for (std::size_t p : {a_id, b_id}) {
      if (!gr.requires_grad(p)) continue;
      Tensor& gp = gr.grad_slot(p);
      for (std::size_t i = 0; i < up.size(); ++i) gp[i] += up[i];
    }
  });
}

Var sub(Var a, Var b) {
  Graph& g = graph_of(a);
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return g.record(std::move(out), {a.id, b.id}, [a_id = a.id, b_id = b.id](Graph& gr, std::size_t self) {
    const Tensor& up = gr.grad(self);
    if (gr.requires_grad(a_id)) {
      Tensor& ga = gr.grad_slot(a_id);
      for (std::size_t i = 0; i < up.size(); ++i) ga[i] += up[i];
    }
    if (gr.requires_grad(b_id)) {
      Tensor& gb = gr.grad_slot(b_id);
      for (std::size_t i = 0; i < up.size(); ++i) gb[i] -= up[i];
    }
  });
}

Var mul(Var a, Var b) {
  Graph& g = graph_of(a);
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return g.record(std::move(out), {a.id, b.id}, [a_id = a.id, b_id = b.id](Graph& gr, std::size_t self) {
    const Tensor& up = gr.grad(self);
    const Tensor& A = gr.value(a_id);
    const Tensor& B = gr.value(b_id);
    if (gr.requires_grad(a_id)) {
      Tensor& ga = gr.grad_slot(a_id);
      for (std::size_t i = 0; i < up.size(); ++i) ga[i] += up[i] * B[i];
    }
    if (gr.requires_grad(b_id)) {
      Tensor& gb = gr.grad_slot(b_id);
      for (std::size_t i = 0; i < up.size(); ++i) gb[i] += up[i] * A[i];
    }
  });
}

Var add_row(Var a, Var row) {
  Graph& g = graph_of(a);
  const Tensor& A = a.value();
  const Tensor& R = row.value();
  if (R.size() != A.cols()) throw PreconditionError("add_row: width mismatch");
  Tensor out = A;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += R[j];
  }
  return g.record(std::move(out), {a.id, row.id}, [a_id = a.id, r_id = row.id](Graph& gr, std::size_t self) {
    const Tensor& up = gr.grad(self);
    if (gr.requires_grad(a_id)) {
      Tensor& ga = gr.grad_slot(a_id);
      for (std::size_t i = 0; i < up.size(); ++i) ga[i] += up[i];
    }
    if (gr.requires_grad(r_id)) {
      Tensor& gr_row = gr.grad_slot(r_id);
      const std::size_t c = up.cols();
      for (std::size_t i = 0; i < up.rows(); ++i) {
        for (std::size_t j = 0; j < c; ++j) gr_row[j] += up(i, j);
      }
    }
  });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (double& v : out.values()) v *= factor;
  return unary(a, std::move(out), [factor](double, double) { return factor; });
}

Var scale_by(Var a, Var scalar) {
  Graph& g = graph_of(a);
  if (scalar.value().size() != 1) throw PreconditionError("scale_by: factor must be 1x1");
  const double s = scalar.value()[0];
  Tensor out = a.value();
  for (double& v : out.values()) v *= s;
  return g.record(std::move(out), {a.id, scalar.id}, [a_id = a.id, s_id = scalar.id](Graph& gr, std::size_t self) {
    const Tensor& up = gr.grad(self);
    const Tensor& A = gr.value(a_id);
    const double s = gr.value(s_id)[0];
    if (gr.requires_grad(a_id)) {
      Tensor& ga = gr.grad_slot(a_id);
      for (std::size_t i = 0; i < up.size(); ++i) ga[i] += up[i] * s;
    }
    if (gr.requires_grad(s_id)) {
      double acc = 0.0;
      for (std::size_t i = 0; i < up.size(); ++i) acc += up[i] * A[i];
      gr.grad_slot(s_id)[0] += acc;
    }
  });
}

Var exp(Var a) {
  Tensor out = a.value();
  for (double& v : out.values()) v = std::exp(v);
  return unary(a, std::move(out), [](double, double y) { return y; });
}

Var log_eps(Var a, double eps) {
  Tensor out = a.value();
  for (double& v : out.values()) v = std::log(v + eps);
  return unary(a, std::move(out), [eps](double x, double) { return 1.0 / (x + eps); });
}

Var tanh(Var a) {
  Tensor out = a.value();
  for (double& v : out.values()) v = std::tanh(v);
  return unary(a, std::move(out), [](double, double y) { return 1.0 - y * y; });
}

Var square(Var a) {
  Tensor out = a.value();
  for (double& v : out.values()) v = v * v;
  return unary(a, std::move(out), [](double x, double) { return 2.0 * x; });
}

namespace {

Var normalize_rows_impl(Var a, std::vector<bool>* degenerate) {
  Graph& g = graph_of(a);
  const Tensor& A = a.value();
  const std::size_t r = A.rows(), c = A.cols();
  Tensor out(A.shape(), 0.0);
  std::vector<double> inv_norm(r, 0.0);
  if (degenerate != nullptr) degenerate->assign(r, false);
  for (std::size_t i = 0; i < r; ++i) {
    const double norm = std::sqrt(dot(A.data() + i * c, A.data() + i * c, c));
    if (!(norm >= kDegenerateNorm)) {
      if (degenerate == nullptr) {
        throw DegenerateVectorError("normalize_rows: row " + std::to_string(i) + " has norm below 1e-12");
      }
      (*degenerate)[i] = true;
      continue;
    }
    inv_norm[i] = 1.0 / norm;
    for (std::size_t j = 0; j < c; ++j) out(i, j) = A(i, j) / norm;
  }
  return g.record(std::move(out), {a.id}, [a_id = a.id, inv_norm = std::move(inv_norm)](Graph& gr, std::size_t self) {
    if (!gr.requires_grad(a_id)) return;
    const Tensor& up = gr.grad(self);
    const Tensor& Y = gr.value(self);
    Tensor& ga = gr.grad_slot(a_id);
    const std::size_t c = Y.cols();
    for (std::size_t i = 0; i < Y.rows(); ++i) {
      if (inv_norm[i] == 0.0) continue;
      const double* y = Y.data() + i * c;
      const double* u = up.data() + i * c;
      const double radial = dot(y, u, c);
      double* out = ga.data() + i * c;
      for (std::size_t j = 0; j < c; ++j) out[j] += (u[j] - radial * y[j]) * inv_norm[i];
    }
  });
}

}  // namespace

Var normalize_rows(Var a) { return normalize_rows_impl(a, nullptr); }

Var normalize_rows_masked(Var a, std::vector<bool>& degenerate) {
  return normalize_rows_impl(a, &degenerate);
}

Var softmax_rows(Var a) {
  Graph& g = graph_of(a);
  const Tensor& A = a.value();
  const std::size_t c = A.cols();
  Tensor out(A.shape(), 0.0);
  for (std::size_t i = 0; i < A.rows(); ++i) {
    const auto row = A.row(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += (out(i, j) = std::exp(row[j] - mx));
    for (std::size_t j = 0; j < c; ++j) out(i, j) /= z;
  }
  return g.record(std::move(out), {a.id}, [a_id = a.id](Graph& gr, std::size_t self) {
    if (!gr.requires_grad(a_id)) return;
    const Tensor& up = gr.grad(self);
    const Tensor& Y = gr.value(self);
    Tensor& ga = gr.grad_slot(a_id);
    const std::size_t c = Y.cols();
    for (std::size_t i = 0; i < Y.rows(); ++i) {
      const double s = dot(up.data() + i * c, Y.data() + i * c, c);
      for (std::size_t j = 0; j < c; ++j) ga(i, j) += Y(i, j) * (up(i, j) - s);
    }
  });
}

Var log_softmax_rows(Var a) {
  Graph& g = graph_of(a);
  const Tensor& A = a.value();
  const std::size_t c = A.cols();
  Tensor out(A.shape(), 0.0);
  for (std::size_t i = 0; i < A.rows(); ++i) {
    const auto row = A.row(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < c; ++j) out(i, j) = row[j] - lse;
  }
  return g.record(std::move(out), {a.id}, [a_id = a.id](Graph& gr, std::size_t self) {
    if (!gr.requires_grad(a_id)) return;
    const Tensor& up = gr.grad(self);
    const Tensor& Y = gr.value(self);
    Tensor& ga = gr.grad_slot(a_id);
    const std::size_t c = Y.cols();
    for (std::size_t i = 0; i < Y.rows(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < c; ++j) s += up(i, j);
      for (std::size_t j = 0; j < c; ++j) ga(i, j) += up(i, j) - std::exp(Y(i, j)) * s;
    }
  });
}

Var gather_rows(Var table, std::vector<std::size_t> indices) {
  Graph& g = graph_of(table);
  const Tensor& T = table.value();
  const std::size_t c = T.cols();
  Tensor out(indices.size(), c);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= T.rows()) throw PreconditionError("gather_rows: index out of range");
    std::copy_n(T.data() + indices[i] * c, c, out.data() + i * c);
  }
  return g.record(std::move(out), {table.id}, [t_id = table.id, idx = std::move(indices)](Graph& gr, std::size_t self) {
    if (!gr.requires_grad(t_id)) return;
    const Tensor& up = gr.grad(self);
    Tensor& gt = gr.grad_slot(t_id);
    const std::size_t c = up.cols();
    for (std::size_t i = 0; i < idx.size(); ++i) axpy(1.0, up.data() + i * c, gt.data() + idx[i] * c, c);
  });
}

Var pool_rows(Var table, PoolSegments segments) {
  Graph& g = graph_of(table);
  const Tensor& T = table.value();
  const std::size_t c = T.cols();
  Tensor out(segments.size(), c);
  for (std::size_t i = 0; i < segments.size(); ++i) {
    for (const auto& [row, w] : segments[i]) {
      if (row >= T.rows()) throw PreconditionError("pool_rows: index out of range");
      axpy(w, T.data() + row * c, out.data() + i * c, c);
    }
  }
  return g.record(std::move(out), {table.id}, [t_id = table.id, seg = std::move(segments)](Graph& gr, std::size_t self) {
    if (!gr.requires_grad(t_id)) return;
    const Tensor& up = gr.grad(self);
    Tensor& gt = gr.grad_slot(t_id);
    const std::size_t c = up.cols();
    for (std::size_t i = 0; i < seg.size(); ++i) {
      for (const auto& [row, w] : seg[i]) axpy(w, up.data() + i * c, gt.data() + row * c, c);
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw PreconditionError("concat_cols: no inputs");
  Graph& g = graph_of(parts.front());
  const std::size_t r = parts.front().rows();
  std::size_t total = 0;
  std::vector<std::size_t> ids, offsets;
  for (const Var& p : parts) {
    if (p.rows() != r) throw PreconditionError("concat_cols: row mismatch");
    ids.push_back(p.id);
    offsets.push_back(total);
    total += p.cols();
  }
  Tensor out(r, total);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& P = parts[k].value();
    for (std::size_t i = 0; i < r; ++i) std::copy_n(P.data() + i * P.cols(), P.cols(), out.data() + i * total + offsets[k]);
  }
  return g.record(std::move(out), ids, [ids, offsets](Graph& gr, std::size_t self) {
    const Tensor& up = gr.grad(self);
    const std::size_t total = up.cols();
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!gr.requires_grad(ids[k])) continue;
      Tensor& gp = gr.grad_slot(ids[k]);
      const std::size_t c = gp.cols();
      for (std::size_t i = 0; i < up.rows(); ++i) axpy(1.0, up.data() + i * total + offsets[k], gp.data() + i * c, c);
    }
  });
}

Var sum(Var a) {
  Graph& g = graph_of(a);
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return g.record(Tensor::scalar(s), {a.id}, [a_id = a.id](Graph& gr, std::size_t self) {
    if (!gr.requires_grad(a_id)) return;
    const double up = gr.grad(self)[0];
    Tensor& ga = gr.grad_slot(a_id);
    for (double& v : ga.values()) v += up;
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw PreconditionError("mean of empty tensor");
  return scale(sum(a), 1.0 / n);
}

Var sum_cols(Var a) {
  Graph& g = graph_of(a);
  const Tensor& A = a.value();
  Tensor out(A.rows(), 1);
  for (std::size_t i = 0; i < A.rows(); ++i) {
    double s = 0.0;
    for (double v : A.row(i)) s += v;
    out[i] = s;
  }
  return g.record(std::move(out), {a.id}, [a_id = a.id](Graph& gr, std::size_t self) {
    if (!gr.requires_grad(a_id)) return;
    const Tensor& up = gr.grad(self);
    Tensor& ga = gr.grad_slot(a_id);
    for (std::size_t i = 0; i < ga.rows(); ++i) {
      for (double& v : ga.row(i)) v += up[i];
    }
  });
}

Var mean_rows(Var a) {
  Graph& g = graph_of(a);
  const Tensor& A = a.value();
  const std::size_t r = A.rows(), c = A.cols();
  if (r == 0) throw PreconditionError("mean_rows of empty tensor");
  Tensor out(1, c);
  for (std::size_t i = 0; i < r; ++i) axpy(1.0, A.data() + i * c, out.data(), c);
  for (double& v : out.values()) v /= static_cast<double>(r);
  return g.record(std::move(out), {a.id}, [a_id = a.id](Graph& gr, std::size_t self) {
    if (!gr.requires_grad(a_id)) return;
    const Tensor& up = gr.grad(self);
    Tensor& ga = gr.grad_slot(a_id);
    const std::size_t r = ga.rows(), c = ga.cols();
    const double w = 1.0 / static_cast<double>(r);
    for (std::size_t i = 0; i < r; ++i) axpy(w, up.data(), ga.data() + i * c, c);
  });
}

Var row_dot(Var a, Var b) {
  Graph& g = graph_of(a);
  require_same_shape(a.value(), b.value(), "row_dot");
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  const std::size_t c = A.cols();
  Tensor out(A.rows(), 1);
  for (std::size_t i = 0; i < A.rows(); ++i) out[i] = dot(A.data() + i * c, B.data() + i * c, c);
  return g.record(std::move(out), {a.id, b.id}, [a_id = a.id, b_id = b.id](Graph& gr, std::size_t self) {
    const Tensor& up = gr.grad(self);
    const Tensor& A = gr.value(a_id);
    const Tensor& B = gr.value(b_id);
    const std::size_t c = A.cols();
    if (gr.requires_grad(a_id)) {
      Tensor& ga = gr.grad_slot(a_id);
      for (std::size_t i = 0; i < A.rows(); ++i) axpy(up[i], B.data() + i * c, ga.data() + i * c, c);
    }
    if (gr.requires_grad(b_id)) {
      Tensor& gb = gr.grad_slot(b_id);
      for (std::size_t i = 0; i < A.rows(); ++i) axpy(up[i], A.data() + i * c, gb.data() + i * c, c);
    }
  });
}

Var pick(Var a, std::vector<std::size_t> cols) {
  Graph& g = graph_of(a);
  const Tensor& A = a.value();
  if (cols.size() != A.rows()) throw PreconditionError("pick: one column per row required");
  Tensor out(A.rows(), 1);
  for (std::size_t i = 0; i < A.rows(); ++i) {
    if (cols[i] >= A.cols()) throw PreconditionError("pick: column out of range");
    out[i] = A(i, cols[i]);
  }
  return g.record(std::move(out), {a.id}, [a_id = a.id, cols = std::move(cols)](Graph& gr, std::size_t self) {
    if (!gr.requires_grad(a_id)) return;
    const Tensor& up = gr.grad(self);
    Tensor& ga = gr.grad_slot(a_id);
    for (std::size_t i = 0; i < cols.size(); ++i) ga(i, cols[i]) += up[i];
  });
}

Var diag(Var a) {
  const std::size_t r = a.rows();
  if (a.cols() != r) throw PreconditionError("diag: matrix must be square");
  std::vector<std::size_t> cols(r);
  for (std::size_t i = 0; i < r; ++i) cols[i] = i;
  return pick(a, std::move(cols));
}

Var detach(Var a) { return graph_of(a).constant(a.value()); }

Var straight_through(Var soft, Tensor hard) {
  Graph& g = graph_of(soft);
  require_same_shape(soft.value(), hard, "straight_through");
  return g.record(std::move(hard), {soft.id}, [s_id = soft.id](Graph& gr, std::size_t self) {
    if (!gr.requires_grad(s_id)) return;
    const Tensor& up = gr.grad(self);
    Tensor& gs = gr.grad_slot(s_id);
    for (std::size_t i = 0; i < up.size(); ++i) gs[i] += up[i];
  });
}

}  // namespace dgi
