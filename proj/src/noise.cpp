#include "sgcap/noise.hpp"

#include <cmath>
#include <string>

#include "sgcap/error.hpp"
#include "sgcap/rng.hpp"

namespace sgcap {

NoiseMode parse_noise_mode(std::string_view name) {
  if (name == "none") return NoiseMode::kNone;
  if (name == "standard" || name == "standard_gaussian") return NoiseMode::kStandardGaussian;
  if (name == "scalar" || name == "scalar_sigma") return NoiseMode::kScalarSigma;
  if (name == "element" || name == "element_wise") return NoiseMode::kElementWise;
  throw ConfigError("unknown noise mode '" + std::string(name) +
                    "' (expected none|standard|scalar|element_wise)");
}

std::string_view to_string(NoiseMode mode) {
  switch (mode) {
    case NoiseMode::kNone: return "none";
    case NoiseMode::kStandardGaussian: return "standard";
    case NoiseMode::kScalarSigma: return "scalar";
    case NoiseMode::kElementWise: return "element_wise";
  }
  return "?";
}

std::vector<double> perturb(std::span<const double> embedding, NoiseMode mode,
                            const BankStats* stats, std::uint64_t seed) {
  std::vector<double> out(embedding.begin(), embedding.end());
  if (mode == NoiseMode::kNone) return out;
  if (mode != NoiseMode::kStandardGaussian) {
    if (stats == nullptr) throw ConfigError("noise mode '" + std::string(to_string(mode)) +
                                            "' requires bank statistics");
    if (stats->dim() != embedding.size())
      throw ConfigError("noise: bank statistics dimension does not match embedding");
  }

  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double scalar = mode == NoiseMode::kScalarSigma ? stats->mean_stddev() : 1.0;
  for (std::size_t j = 0; j < out.size(); ++j) {
    double scale = 1.0;
    if (mode == NoiseMode::kScalarSigma) scale = scalar;
    if (mode == NoiseMode::kElementWise) scale = std::sqrt(stats->variance[j]);
    // Draw unconditionally so the stream position does not depend on the scale.
    const double z = normal(rng);
    out[j] += scale * z;
  }
  return out;
}

SemanticGroup perturb_group(SemanticGroup group, NoiseMode mode, const BankStats* stats,
                            std::uint64_t seed) {
  for (std::size_t i = 0; i < group.members.size(); ++i) {
    auto& m = group.members[i];
    m.embedding = perturb(m.embedding, mode, stats, derive_seed(seed, {i}));
  }
  return group;
}

}  // namespace sgcap
