#include "dgi/sphere.hpp"

#include <algorithm>
#include <cmath>

#include "dgi/autograd.hpp"
#include "dgi/errors.hpp"

namespace dgi {

namespace {

constexpr double kUnitTolerance = 1e-8;

void require_unit(std::span<const double> x, const char* op) {
  if (std::abs(norm(x) - 1.0) > kUnitTolerance) {
    throw PreconditionError(std::string(op) + ": base point is not on the unit sphere");
  }
}

void require_same_size(std::span<const double> a, std::span<const double> b, const char* op) {
  if (a.size() != b.size()) throw PreconditionError(std::string(op) + ": dimension mismatch");
}

}  // namespace

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

std::vector<double> l2_normalize(std::span<const double> v) {
  if (v.empty()) throw PreconditionError("l2_normalize: empty vector");
  const double n = norm(v);
  if (!(n >= kDegenerateNorm)) throw DegenerateVectorError("l2_normalize: norm below 1e-12");
  std::vector<double> out(v.begin(), v.end());
  for (double& x : out) x /= n;
  return out;
}

std::vector<double> tangent_project(std::span<const double> x, std::span<const double> g) {
  require_same_size(x, g, "tangent_project");
  require_unit(x, "tangent_project");
  const double radial = dot(x, g);
  std::vector<double> out(g.begin(), g.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= radial * x[i];
  return out;
}

std::vector<double> retract(std::span<const double> x, std::span<const double> v) {
  require_same_size(x, v, "retract");
  require_unit(x, "retract");
  if (std::abs(dot(x, v)) > kUnitTolerance) {
    throw PreconditionError("retract: step is not tangent at the base point");
  }
  std::vector<double> out(x.begin(), x.end());
  // A zero step returns the base point bit-for-bit.
  if (std::all_of(v.begin(), v.end(), [](double e) { return e == 0.0; })) return out;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += v[i];
  const double n = norm(out);
  if (!(n >= kDegenerateNorm)) throw DegenerateVectorError("retract: x + v is degenerate");
  for (double& y : out) y /= n;
  return out;
}

}  // namespace dgi
