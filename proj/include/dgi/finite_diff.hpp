#pragma once

#include <functional>
#include <vector>

#include "dgi/autograd.hpp"

namespace dgi {

using ScalarFn = std::function<double(const std::vector<double>&)>;

/// Central-difference gradient (f(x + h e_i) - f(x - h e_i)) / 2h per coordinate.
std::vector<double> finite_diff_grad(const ScalarFn& f, const std::vector<double>& x, double h);

/// Central differences of `loss` with respect to every scalar of `params`,
/// perturbing the parameter values in place (restored afterwards). The result
/// is flattened in the order of `params`.
std::vector<double> finite_diff_params(const std::function<double()>& loss,
                                       const std::vector<Parameter*>& params, double h);

/// Concatenated Parameter::grad of `params`.
std::vector<double> flatten_grads(const std::vector<Parameter*>& params);

/// |a - b| / max(|a|, |b|, floor) in the Euclidean norm.
double relative_error(const std::vector<double>& a, const std::vector<double>& b,
                      double floor = 1e-12);

}  // namespace dgi
