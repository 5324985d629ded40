#include "dgi/variants.hpp"

#include "dgi/errors.hpp"

namespace dgi {

std::string to_string(Geometry g) { return g == Geometry::kCosine ? "cosine" : "dot"; }

std::string to_string(GradientPath p) {
  switch (p) {
    case GradientPath::kSoft: return "soft";
    case GradientPath::kSte: return "ste";
    case GradientPath::kDetached: return "detached";
  }
  return "soft";
}

std::string to_string(WeightSharing w) { return w == WeightSharing::kShared ? "shared" : "separate"; }

Geometry parse_geometry(std::string_view s) {
  if (s == "cosine") return Geometry::kCosine;
  if (s == "dot") return Geometry::kDot;
  throw ConfigError("unknown geometry: " + std::string(s));
}

GradientPath parse_gradient_path(std::string_view s) {
  if (s == "soft") return GradientPath::kSoft;
  if (s == "ste") return GradientPath::kSte;
  if (s == "detached") return GradientPath::kDetached;
  throw ConfigError("unknown gradient path: " + std::string(s));
}

WeightSharing parse_weight_sharing(std::string_view s) {
  if (s == "shared") return WeightSharing::kShared;
  if (s == "separate") return WeightSharing::kSeparate;
  throw ConfigError("unknown weight sharing mode: " + std::string(s));
}

}  // namespace dgi
