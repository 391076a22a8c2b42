#pragma once

// Closed-form max-product updates for binary models, in the scalar log-odds
// convention n = log m(1) - log m(0).

#include <cstddef>
#include <span>
#include <vector>

namespace pmp {

/// n x n message matrix with values[i * n + j] = n_{i->j} and a zero diagonal.
struct IsingMessageMatrix {
  std::size_t n = 0;
  std::vector<double> values;

  static IsingMessageMatrix zeros(std::size_t n) { return {n, std::vector<double>(n * n, 0.0)}; }
  double operator()(std::size_t i, std::size_t j) const { return values[i * n + j]; }
};

/// Throws StructuralError unless W is an n x n symmetric matrix with zero diagonal.
void check_ising_weights(std::span<const double> W, std::size_t n);

/// One undamped parallel update for the {0,1} Ising energy
/// E(x) = -1/2 x^T W x - b^T x:
///   P = N^T 1 1^T - N^T + b 1^T,  N' = max(0, P + W) - max(0, P).
/// b must already include the perturbation difference eps_i(1) - eps_i(0).
/// Entries of b beyond kInfiniteThreshold mark clamped variables, whose
/// outgoing messages are exactly W_ij (clamped on) or 0 (clamped off).
IsingMessageMatrix ising_sweep_matrix(const IsingMessageMatrix& N, std::span<const double> W, std::span<const double> b);

/// Unchecked form of ising_sweep_matrix writing into out (n x n). P is scratch.
void ising_sweep_into(std::size_t n, const double* N, const double* W, const double* b, double* out,
                      std::vector<double>& column_sums);

/// x_i = 1 iff b_i + sum_k n_{k->i} > 0.
std::vector<int> ising_decode(const IsingMessageMatrix& N, std::span<const double> b);

/// Messages of a binary RBM with energy -h^T W v - b^T h - c^T v, W hidden x visible.
/// hidden_to_visible[i * n_visible + j] = n^{HV}_{i->j},
/// visible_to_hidden[i * n_visible + j] = n^{VH}_{j->i}.
struct RbmMessages {
  std::size_t n_hidden = 0;
  std::size_t n_visible = 0;
  std::vector<double> hidden_to_visible;
  std::vector<double> visible_to_hidden;

  static RbmMessages zeros(std::size_t m, std::size_t n) {
    return {m, n, std::vector<double>(m * n, 0.0), std::vector<double>(m * n, 0.0)};
  }
};

/// One undamped parallel update of both message directions from the previous
/// snapshot. b and c include the perturbation differences; entries beyond
/// kInfiniteThreshold mark clamped units.
RbmMessages rbm_sweep(const RbmMessages& messages, std::span<const double> W, std::span<const double> b,
                      std::span<const double> c);

/// Unchecked form of rbm_sweep writing into out (already sized). totals is scratch.
void rbm_sweep_into(const RbmMessages& messages, const double* W, const double* b, const double* c, RbmMessages& out,
                    std::vector<double>& totals);

struct LogicalMessages {
  std::vector<double> to_tops;
  double to_bottom = 0.0;
};

/// Messages out of bottom = OR(tops) given incoming log-odds from each top and
/// from the bottom. The top with the largest incoming message (lowest index on
/// ties) is treated separately; every other top sees it as the best alternative.
LogicalMessages or_factor_messages(std::span<const double> from_tops, double from_bottom);

/// Messages out of bottom = AND(top1, top2).
LogicalMessages and_factor_messages(std::span<const double> from_tops, double from_bottom);

}  // namespace pmp
