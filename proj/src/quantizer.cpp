#include "dgi/quantizer.hpp"

#include <algorithm>
#include <cmath>

#include "dgi/errors.hpp"
#include "dgi/sphere.hpp"

namespace dgi {

std::string SemanticId::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (i > 0) out += '-';
    out += std::to_string(codes[i]);
  }
  return out;
}

GumbelNoise draw_gumbel_noise(Rng& rng, std::size_t rows, std::span<const std::size_t> level_sizes) {
  GumbelNoise noise;
  noise.reserve(level_sizes.size());
  for (std::size_t k : level_sizes) {
    Tensor t(rows, k);
    for (double& v : t.values()) v = -std::log(-std::log(uniform_open01(rng)));
    noise.push_back(std::move(t));
  }
  return noise;
}

GumbelNoise zero_gumbel_noise(std::size_t rows, std::span<const std::size_t> level_sizes) {
  GumbelNoise noise;
  for (std::size_t k : level_sizes) noise.emplace_back(rows, k, 0.0);
  return noise;
}

Var cosine_logits(Var residuals, Var codebook, Var gamma) {
  return scale_by(matmul_nt(normalize_rows(residuals), normalize_rows(codebook)), gamma);
}

Var cosine_logits_masked(Var residuals, Var codebook, Var gamma, std::vector<bool>& degenerate) {
  return scale_by(matmul_nt(normalize_rows_masked(residuals, degenerate), normalize_rows(codebook)), gamma);
}

Var dot_logits(Var residuals, Var codebook) { return matmul_nt(residuals, codebook); }

Var gumbel_softmax(Var logits, double tau, const Tensor& noise) {
  if (!(tau > 0.0)) throw ConfigError("gumbel_softmax: temperature must be positive");
  if (!logits.value().same_shape(noise)) throw PreconditionError("gumbel_softmax: noise shape mismatch");
  Graph& g = *logits.graph;
  return softmax_rows(scale(add(logits, g.constant(noise)), 1.0 / tau));
}

std::size_t nearest_code(std::span<const double> r, const Tensor& codebook, Geometry geometry, bool* degenerate) {
  if (degenerate != nullptr) *degenerate = false;
  double r_norm = 1.0;
  if (geometry == Geometry::kCosine) {
    r_norm = norm(r);
    if (!(r_norm >= kDegenerateNorm)) {
      if (degenerate != nullptr) *degenerate = true;
      return 0;
    }
  }
  std::size_t best = 0;
  double best_score = -INFINITY;
  for (std::size_t k = 0; k < codebook.rows(); ++k) {
    const auto e = codebook.row(k);
    double score = dot(r, e);
    if (geometry == Geometry::kCosine) {
      const double e_norm = norm(e);
      if (!(e_norm >= kDegenerateNorm)) throw DegenerateVectorError("codebook row has zero norm");
      score /= r_norm * e_norm;
    }
    if (score > best_score) {
      best_score = score;
      best = k;
    }
  }
  return best;
}

namespace {

std::size_t row_argmax(std::span<const double> row) {
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

}  // namespace

Quantizer::Quantizer(std::vector<Parameter*> codebooks, Parameter* log_gamma, Geometry geometry)
    : codebooks_(std::move(codebooks)), log_gamma_(log_gamma), geometry_(geometry) {
  if (codebooks_.empty()) throw PreconditionError("quantizer needs at least one level");
  for (const Parameter* c : codebooks_) {
    if (c->value.rows() < 2) throw PreconditionError("codebook levels need at least 2 codes");
  }
}

std::vector<std::size_t> Quantizer::level_sizes() const {
  std::vector<std::size_t> out;
  for (const Parameter* c : codebooks_) out.push_back(c->value.rows());
  return out;
}

Var Quantizer::gamma(Graph& g) const { return exp(g.param(*log_gamma_)); }

Var Quantizer::logits(Graph& g, Var residuals, std::size_t level, std::vector<bool>& degenerate) const {
  Var codebook = g.param(*codebooks_.at(level));
  if (geometry_ == Geometry::kDot) {
    degenerate.assign(residuals.rows(), false);
    return dot_logits(residuals, codebook);
  }
  return cosine_logits_masked(residuals, codebook, gamma(g), degenerate);
}

QuantizeResult Quantizer::quantize(Graph& g, Var z_base, const GumbelNoise& noise, double tau,
                                   Relaxation relaxation) const {
  if (noise.size() != levels()) throw PreconditionError("quantize: one noise tensor per level required");
  const std::size_t rows = z_base.rows();
  QuantizeResult out;
  out.sids = hard_assign(z_base.value());
  Var r = z_base;
  out.residuals.push_back(r);
  for (std::size_t j = 0; j < levels(); ++j) {
    std::vector<bool> degenerate;
    Var s = logits(g, r, j, degenerate);
    Tensor level_noise = noise[j];
    for (std::size_t i = 0; i < rows; ++i) {
      if (!degenerate[i]) continue;
      ++out.degenerate_count;
      for (double& v : level_noise.row(i)) v = 0.0;  // zero logits + zero noise = uniform
    }
    Var p = gumbel_softmax(s, tau, level_noise);
    Var codebook = g.param(*codebooks_[j]);
    Var z;
    if (relaxation == Relaxation::kGumbelSoftmax) {
      z = matmul(p, codebook);
    } else {
      Tensor one_hot(rows, level_size(j), 0.0);
      for (std::size_t i = 0; i < rows; ++i) {
        std::vector<double> noisy(s.value().row(i).begin(), s.value().row(i).end());
        for (std::size_t k = 0; k < noisy.size(); ++k) noisy[k] += level_noise(i, k);
        one_hot(i, row_argmax(noisy)) = 1.0;
      }
      z = matmul(straight_through(p, std::move(one_hot)), codebook);
    }
    std::vector<std::size_t> sel(rows);
    for (std::size_t i = 0; i < rows; ++i) sel[i] = row_argmax(s.value().row(i));
    out.selected.push_back(std::move(sel));
    out.logits.push_back(s);
    out.probs.push_back(p);
    out.soft_vectors.push_back(z);
    r = sub(r, z);
    out.residuals.push_back(r);
  }
  return out;
}

std::vector<SemanticId> Quantizer::hard_assign(const Tensor& z_base, std::size_t* degenerate) const {
  std::vector<SemanticId> sids(z_base.rows());
  std::vector<double> r;
  for (std::size_t i = 0; i < z_base.rows(); ++i) {
    r.assign(z_base.row(i).begin(), z_base.row(i).end());
    sids[i].codes.resize(levels());
    for (std::size_t j = 0; j < levels(); ++j) {
      bool deg = false;
      const Tensor& E = codebooks_[j]->value;
      const std::size_t code = nearest_code(r, E, geometry_, &deg);
      if (deg && degenerate != nullptr) ++*degenerate;
      sids[i].codes[j] = static_cast<std::uint32_t>(code);
      const auto e = E.row(code);
      for (std::size_t c = 0; c < r.size(); ++c) r[c] -= e[c];
    }
  }
  return sids;
}

}  // namespace dgi
