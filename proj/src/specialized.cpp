#include "pmp/specialized.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pmp/errors.hpp"
#include "pmp/factor_graph.hpp"

namespace pmp {

namespace {

// max(0, p + w) - max(0, p), exact when p encodes a clamped variable.
inline double pair_message(double p, double w) {
  if (p >= kInfiniteThreshold) return w;
  if (p <= -kInfiniteThreshold) return 0.0;
  return std::max(0.0, p + w) - std::max(0.0, p);
}

}  // namespace

void check_ising_weights(std::span<const double> W, std::size_t n) {
  if (W.size() != n * n) throw StructuralError("Ising weight matrix must be n x n");
  for (std::size_t i = 0; i < n; ++i) {
    if (W[i * n + i] != 0.0) throw StructuralError("Ising weight matrix must have a zero diagonal");
    for (std::size_t j = i + 1; j < n; ++j)
      if (W[i * n + j] != W[j * n + i]) throw StructuralError("Ising weight matrix must be symmetric");
  }
}

void ising_sweep_into(std::size_t n, const double* N, const double* W, const double* b, double* out,
                      std::vector<double>& column_sums) {
  // column_sums[i] = sum_k N_ki, so P_ij = b_i + column_sums[i] - N_ji.
  column_sums.assign(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const double* row = N + k * n;
    for (std::size_t i = 0; i < n; ++i) column_sums[i] += row[i];
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double base = b[i] + column_sums[i];
    const double* w = W + i * n;
    double* o = out + i * n;
    for (std::size_t j = 0; j < n; ++j) o[j] = pair_message(base - N[j * n + i], w[j]);
    o[i] = 0.0;
  }
}

IsingMessageMatrix ising_sweep_matrix(const IsingMessageMatrix& N, std::span<const double> W, std::span<const double> b) {
  const std::size_t n = N.n;
  check_ising_weights(W, n);
  if (b.size() != n || N.values.size() != n * n) throw StructuralError("Ising message shapes do not match");
  IsingMessageMatrix out{n, std::vector<double>(n * n)};
  std::vector<double> scratch;
  ising_sweep_into(n, N.values.data(), W.data(), b.data(), out.values.data(), scratch);
  return out;
}

std::vector<int> ising_decode(const IsingMessageMatrix& N, std::span<const double> b) {
  const std::size_t n = N.n;
  if (b.size() != n) throw StructuralError("bias length does not match message matrix");
  std::vector<int> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < n; ++k) s += N.values[k * n + i];
    x[i] = s > 0.0 ? 1 : 0;
  }
  return x;
}

RbmMessages rbm_sweep(const RbmMessages& messages, std::span<const double> W, std::span<const double> b,
                      std::span<const double> c) {
  const std::size_t m = messages.n_hidden;
  const std::size_t n = messages.n_visible;
  if (W.size() != m * n || b.size() != m || c.size() != n || messages.hidden_to_visible.size() != m * n ||
      messages.visible_to_hidden.size() != m * n)
    throw StructuralError("RBM message shapes do not match");
  RbmMessages out = RbmMessages::zeros(m, n);
  std::vector<double> totals;
  rbm_sweep_into(messages, W.data(), b.data(), c.data(), out, totals);
  return out;
}

void rbm_sweep_into(const RbmMessages& messages, const double* W, const double* b, const double* c, RbmMessages& out,
                    std::vector<double>& totals) {
  const std::size_t m = messages.n_hidden;
  const std::size_t n = messages.n_visible;
  const double* vh = messages.visible_to_hidden.data();
  const double* hv = messages.hidden_to_visible.data();
  double* out_hv = out.hidden_to_visible.data();
  double* out_vh = out.visible_to_hidden.data();
  // Hidden i -> visible j: b_i + sum_{k != j} n^{VH}_{k->i}.
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = vh + i * n;
    double total = b[i];
    for (std::size_t k = 0; k < n; ++k) total += row[k];
    const double* w = W + i * n;
    double* o = out_hv + i * n;
    for (std::size_t j = 0; j < n; ++j) o[j] = pair_message(total - row[j], w[j]);
  }
  // Visible j -> hidden i: c_j + sum_{k != i} n^{HV}_{k->j}.
  totals.assign(c, c + n);
  for (std::size_t k = 0; k < m; ++k) {
    const double* row = hv + k * n;
    for (std::size_t j = 0; j < n; ++j) totals[j] += row[j];
  }
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = hv + i * n;
    const double* w = W + i * n;
    double* o = out_vh + i * n;
    for (std::size_t j = 0; j < n; ++j) o[j] = pair_message(totals[j] - row[j], w[j]);
  }
}

LogicalMessages or_factor_messages(std::span<const double> from_tops, double from_bottom) {
  const std::size_t n = from_tops.size();
  if (n < 1) throw StructuralError("OR factor needs at least one top variable");
  std::size_t first = 0;
  for (std::size_t j = 1; j < n; ++j)
    if (from_tops[j] > from_tops[first]) first = j;
  double positive_sum = 0.0;
  for (double v : from_tops) positive_sum += std::max(0.0, v);

  LogicalMessages out;
  out.to_tops.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    // Best competing top: the overall argmax, or the runner-up for the argmax itself.
    std::size_t rival = first;
    if (i == first) {
      rival = n;
      for (std::size_t j = 0; j < n; ++j)
        if (j != first && (rival == n || from_tops[j] > from_tops[rival])) rival = j;
    }
    const double via_bottom = from_bottom + positive_sum - std::max(0.0, from_tops[i]);
    if (rival == n) {
      out.to_tops[i] = via_bottom;  // single top: OR reduces to equality
    } else {
      const double t = from_tops[rival];
      out.to_tops[i] = std::min(via_bottom, std::max(0.0, t) - t);
    }
  }
  out.to_bottom = from_tops[first] + positive_sum - std::max(0.0, from_tops[first]);
  return out;
}

LogicalMessages and_factor_messages(std::span<const double> from_tops, double from_bottom) {
  if (from_tops.size() != 2) throw StructuralError("AND factor needs exactly two top variables");
  const double t1 = from_tops[0];
  const double t2 = from_tops[1];
  LogicalMessages out;
  out.to_tops = {std::max(from_bottom + t2, 0.0) - std::max(t2, 0.0),
                 std::max(from_bottom + t1, 0.0) - std::max(t1, 0.0)};
  out.to_bottom = std::min({t1 + t2, t1, t2});
  return out;
}

}  // namespace pmp
