#include "dgi/finite_diff.hpp"

#include <algorithm>
#include <cmath>

#include "dgi/errors.hpp"

namespace dgi {

std::vector<double> finite_diff_grad(const ScalarFn& f, const std::vector<double>& x, double h) {
  if (!(h > 0.0)) throw PreconditionError("finite_diff_grad: step must be positive");
  std::vector<double> probe = x;
  std::vector<double> grad(x.size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = f(probe);
    probe[i] = x[i] - h;
    const double down = f(probe);
    probe[i] = x[i];
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

std::vector<double> finite_diff_params(const std::function<double()>& loss,
                                       const std::vector<Parameter*>& params, double h) {
  if (!(h > 0.0)) throw PreconditionError("finite_diff_params: step must be positive");
  std::vector<double> grad;
  for (Parameter* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + h;
      const double up = loss();
      p->value[i] = saved - h;
      const double down = loss();
      p->value[i] = saved;
      grad.push_back((up - down) / (2.0 * h));
    }
  }
  return grad;
}

std::vector<double> flatten_grads(const std::vector<Parameter*>& params) {
  std::vector<double> out;
  for (const Parameter* p : params) {
    if (p->grad.size() != p->value.size()) {
      out.insert(out.end(), p->value.size(), 0.0);
    } else {
      out.insert(out.end(), p->grad.values().begin(), p->grad.values().end());
    }
  }
  return out;
}

double relative_error(const std::vector<double>& a, const std::vector<double>& b, double floor) {
  if (a.size() != b.size()) throw PreconditionError("relative_error: size mismatch");
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

}  // namespace dgi
