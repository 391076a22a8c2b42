#pragma once

// Dense binary models with dedicated samplers: the fully connected Ising model
// and the RBM, both over {0,1} variables.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pmp/factor_graph.hpp"
#include "pmp/rng.hpp"
#include "pmp/samplers.hpp"
#include "pmp/specialized.hpp"

namespace pmp {

/// E(x) = -1/2 x^T W x - b^T x with W symmetric and zero on the diagonal.
///
/// Flat parameter layout: the upper triangle W_ij (i < j) row by row, then b.
/// The matching statistics are x_i x_j and x_i.
struct IsingModel {
  std::size_t n = 0;
  std::vector<double> W;
  std::vector<double> b;

  static IsingModel zeros(std::size_t n);
  /// Converts E(s) = -sum_{i<j} J_ij s_i s_j - sum_i h_i s_i over spins
  /// s = 2x - 1. J is n x n symmetric; the energies agree up to a constant.
  static IsingModel from_spins(std::span<const double> J, std::span<const double> h);

  void validate() const;
  double log_score(std::span<const std::int32_t> x) const;
  /// Pairwise DenseTable factors (0, 0, 0, W_ij) for i < j with W_ij != 0 or
  /// keep_zero_edges, unaries (0, b_i).
  FactorGraph to_factor_graph(bool keep_zero_edges = true) const;

  std::size_t num_parameters() const noexcept { return n * (n - 1) / 2 + n; }
  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> theta);
  /// Adds the statistics of x (scaled by weight) into out.
  template <class Int>
  void accumulate_stats(std::span<const Int> x, double weight, std::span<double> out) const {
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!x[i]) {
        k += n - 1 - i;
        continue;
      }
      for (std::size_t j = i + 1; j < n; ++j, ++k)
        if (x[j]) out[k] += weight;
    }
    for (std::size_t i = 0; i < n; ++i)
      if (x[i]) out[k + i] += weight;
  }
};

/// Perturb-and-max-product for IsingModel using the matrix-form update.
/// Reuses its buffers across calls; not safe to share between threads.
class IsingPmpSampler {
 public:
  /// eps holds (eps_i(0), eps_i(1)) pairs. clamp, when non-empty, gives -1 for
  /// free variables and the observed state otherwise.
  std::vector<std::int32_t> sample(const IsingModel& model, std::span<const double> eps, const PmpOptions& options,
                                   std::span<const std::int32_t> clamp = {});
  std::vector<std::int32_t> sample(const IsingModel& model, const PmpOptions& options, Rng& rng,
                                   std::span<const std::int32_t> clamp = {});

 private:
  std::vector<double> bias_, N_, fresh_, scratch_;
};

/// In-place single-site Gibbs sweep in ascending order.
void ising_gibbs_sweep(const IsingModel& model, std::span<std::int32_t> x, Rng& rng);

/// E(v, h) = -h^T W v - b^T h - c^T v, W hidden x visible.
///
/// Flat parameter layout: W row-major, then b, then c; statistics h_i v_j, h_i, v_j.
struct RbmModel {
  std::size_t n_hidden = 0;
  std::size_t n_visible = 0;
  std::vector<double> W;
  std::vector<double> b;
  std::vector<double> c;

  static RbmModel zeros(std::size_t n_hidden, std::size_t n_visible);
  void validate() const;
  double log_score(std::span<const std::int32_t> h, std::span<const std::int32_t> v) const;
  /// Hidden variables first, one RbmBlock factor, unaries (0, b_i) and (0, c_j).
  FactorGraph to_factor_graph() const;
  /// log sum_h exp(-E(v, h)).
  double free_log_score(std::span<const std::int32_t> v) const;

  std::size_t num_parameters() const noexcept { return n_hidden * n_visible + n_hidden + n_visible; }
  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> theta);
  template <class IntH, class IntV>
  void accumulate_stats(std::span<const IntH> h, std::span<const IntV> v, double weight, std::span<double> out) const {
    const std::size_t m = n_hidden;
    const std::size_t n = n_visible;
    for (std::size_t i = 0; i < m; ++i) {
      if (!h[i]) continue;
      double* row = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j)
        if (v[j]) row[j] += weight;
      out[m * n + i] += weight;
    }
    for (std::size_t j = 0; j < n; ++j)
      if (v[j]) out[m * n + m + j] += weight;
  }
};

struct RbmState {
  std::vector<std::int32_t> h;
  std::vector<std::int32_t> v;
};

/// Perturb-and-max-product for RbmModel with the bipartite closed-form update.
class RbmPmpSampler {
 public:
  /// eps_h / eps_v hold (eps(0), eps(1)) pairs. When clamp_visible is
  /// non-empty the visible layer is fixed to it.
  RbmState sample(const RbmModel& model, std::span<const double> eps_h, std::span<const double> eps_v,
                  const PmpOptions& options, std::span<const std::int32_t> clamp_visible = {});
  RbmState sample(const RbmModel& model, const PmpOptions& options, Rng& rng,
                  std::span<const std::int32_t> clamp_visible = {});

 private:
  std::vector<double> bh_, cv_, totals_;
  RbmMessages messages_, fresh_;
};

/// Probability that h_i = 1 given v (and v_j = 1 given h) under the RBM.
double logistic(double z);

/// h ~ p(h | v), then v ~ p(v | h).
void block_gibbs_rbm_sweep(const RbmModel& model, RbmState& state, Rng& rng);
/// h ~ p(h | v) only.
void sample_hidden(const RbmModel& model, std::span<const std::int32_t> v, std::span<std::int32_t> h, Rng& rng);
void sample_visible(const RbmModel& model, std::span<const std::int32_t> h, std::span<std::int32_t> v, Rng& rng);

/// The {0,1} Ising model with the same energies (up to a constant) as a graph
/// of binary variables and pairwise factors. Throws StructuralError otherwise.
IsingModel ising_from_graph(const FactorGraph& g);
/// Inverse of RbmModel::to_factor_graph for graphs made of one RbmBlock.
RbmModel rbm_from_graph(const FactorGraph& g);

}  // namespace pmp
