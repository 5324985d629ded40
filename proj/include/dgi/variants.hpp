#pragma once

#include <string>
#include <string_view>

namespace dgi {

/// Similarity used by quantizer logits, decoder heads and contrastive scores.
enum class Geometry { kCosine, kDot };

/// How the quantizer output reaches the decoder and the item encoder.
enum class GradientPath { kSoft, kSte, kDetached };

/// Whether decoder heads are the codebooks themselves or independent copies.
enum class WeightSharing { kShared, kSeparate };

std::string to_string(Geometry g);
std::string to_string(GradientPath p);
std::string to_string(WeightSharing w);

// Parsers throw ConfigError on unknown names.
Geometry parse_geometry(std::string_view s);
GradientPath parse_gradient_path(std::string_view s);
WeightSharing parse_weight_sharing(std::string_view s);

}  // namespace dgi
