#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pmp/rng.hpp"

namespace pmp {

/// Euler-Mascheroni constant; Gumbel(-c, 1) has zero mean.
inline constexpr double kEulerGamma = 0.57721566490153286061;

/// Inverse CDF of Gumbel(-c, 1): -c - log(-log u).
double gumbel_inverse_cdf(double u);
double gumbel_cdf(double x);
double normal_cdf(double z);

/// Maps a standard normal value to a Gumbel(-c, 1) value through the two CDFs.
/// The normal CDF is clipped to [1e-300, 1 - 1e-16].
double gumbel_from_normal(double z);

void draw_gumbel_into(std::span<double> out, Rng& rng);
/// count i.i.d. Gumbel(-c, 1) draws.
std::vector<double> draw_gumbel(std::size_t count, Rng& rng);

/// Elementwise unaries + eps.
std::vector<double> perturb(std::span<const double> unaries, std::span<const double> eps);

/// Correlated Gaussian chain whose Gumbel transform gives perturbations with
/// exact Gumbel marginals: gamma <- sqrt(rho) gamma + sqrt(1 - rho) delta.
struct PersistentPerturbationState {
  std::vector<double> gamma;
  double rho = 0.0;

  /// gamma drawn from N(0, 1); throws ParameterError when rho is outside [0, 1].
  static PersistentPerturbationState init(std::size_t count, double rho, Rng& rng);
};

/// Advances the chain and returns the new perturbation vector.
std::vector<double> persistent_step(PersistentPerturbationState& state, Rng& rng);

}  // namespace pmp
