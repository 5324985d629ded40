#pragma once

#include <span>
#include <vector>

namespace dgi {

/// Projects onto the unit hypersphere. Throws DegenerateVectorError when the
/// norm is below 1e-12 and PreconditionError on an empty input.
std::vector<double> l2_normalize(std::span<const double> v);

/// Removes the radial component of g at the unit point x: g - (x.g) x.
/// Throws PreconditionError unless |x| = 1 within 1e-8.
std::vector<double> tangent_project(std::span<const double> x, std::span<const double> g);

/// Normalization retraction (x + v) / |x + v|. x must be unit and v tangent
/// at x (both within 1e-8).
std::vector<double> retract(std::span<const double> x, std::span<const double> v);

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> v);

}  // namespace dgi
