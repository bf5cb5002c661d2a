#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "sgcap/bank.hpp"
#include "sgcap/similarity.hpp"

namespace sgcap {

enum class NoiseMode {
  kNone,              // identity
  kStandardGaussian,  // N(0, I)
  kScalarSigma,       // N(0, s^2 I), s = mean per-dimension standard deviation of the bank
  kElementWise,       // N(0, diag(per-dimension bank variance))
};

NoiseMode parse_noise_mode(std::string_view name);
std::string_view to_string(NoiseMode mode);

// Additive Gaussian noise, deterministic for a given seed. `stats` may be null
// only for kNone and kStandardGaussian; otherwise ConfigError.
std::vector<double> perturb(std::span<const double> embedding, NoiseMode mode,
                            const BankStats* stats, std::uint64_t seed);

// Perturbs every member with an independent stream derived from (seed, slot).
// Indices and scores are left untouched.
SemanticGroup perturb_group(SemanticGroup group, NoiseMode mode, const BankStats* stats,
                            std::uint64_t seed);

}  // namespace sgcap
