#pragma once

// Linear-programming relaxations of MAP for binary Ising models and RBMs,
// and a writer/reader for the CPLEX LP text format.

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pmp {

enum class Sense { Le, Eq, Ge };

struct LpRow {
  std::string name;
  std::vector<std::pair<std::size_t, double>> coeffs;
  Sense sense = Sense::Le;
  double rhs = 0.0;
};

inline constexpr double kLpInfinity = std::numeric_limits<double>::infinity();

struct LinearProgram {
  bool maximize = true;
  std::vector<std::string> names;
  std::vector<double> objective;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<LpRow> rows;

  std::size_t num_variables() const noexcept { return names.size(); }
  std::size_t num_constraints() const noexcept { return rows.size(); }
  std::size_t add_variable(std::string name, double cost, double lo = -kLpInfinity, double hi = kLpInfinity);
  void add_row(std::string name, std::vector<std::pair<std::size_t, double>> coeffs, Sense sense, double rhs);

  double objective_value(std::span<const double> x) const;
  /// Index of the first violated row, rows.size() + k for a violated bound
  /// of variable k, or -1 when x is feasible within tol.
  long first_violation(std::span<const double> x, double tol = 1e-9) const;
  /// Throws ValidationError naming the first violated constraint.
  void check_feasible(std::span<const double> x, double tol = 1e-9) const;
  /// Throws StructuralError on inconsistent sizes, bad indices or duplicate names.
  void validate() const;
};

/// Reduced relaxation over p_i (i < n) and q_ij for ordered pairs i != j, in
/// that order (q row-major, diagonal skipped). Objective
/// sum_{i != j} w_ij q_ij + sum_i b_i p_i, so each weight is counted twice.
/// Rows: q_ij <= p_i, q_ij <= p_j, p_i + p_j - q_ij <= 1 per pair, then
/// p_i <= 1, then q_ij >= 0. All variables are declared free.
///
/// With halved set, only pairs i < j are kept and carry 2 w_ij, which gives the
/// same objective at every point with q_ij = q_ji.
LinearProgram reduced_lp_ising(std::span<const double> W, std::span<const double> b, bool halved = false);

/// Reduced relaxation over h_i, v_j and z_ij (i-major), objective
/// sum w_ij z_ij + b^T h + c^T v. Rows: z <= h_i, z <= v_j, h_i + v_j - z <= 1
/// per pair, then h <= 1, v <= 1, z >= 0.
LinearProgram reduced_lp_rbm(std::span<const double> W, std::span<const double> b, std::span<const double> c);

/// Local-polytope relaxation with p_i(0), p_i(1) per variable followed by
/// q_ij(00, 01, 10, 11) per ordered pair i != j; normalization and
/// marginalization equalities, non-negativity bounds. Objective
/// sum b_i p_i(1) + sum_{i != j} w_ij q_ij(1, 1).
LinearProgram standard_lp_ising(std::span<const double> W, std::span<const double> b);

/// Same construction for an RBM: p for hidden units, then visible units, then
/// q_ij(00, 01, 10, 11) per (hidden i, visible j).
LinearProgram standard_lp_rbm(std::span<const double> W, std::span<const double> b, std::span<const double> c);

/// Maps a feasible reduced Ising point (layout of reduced_lp_ising, not halved)
/// to the standard LP point. Throws ValidationError for infeasible input.
std::vector<double> map_reduced_to_full(std::span<const double> reduced, std::size_t n);

/// RBM version of map_reduced_to_full.
std::vector<double> map_reduced_to_full_rbm(std::span<const double> reduced, std::size_t n_hidden,
                                            std::size_t n_visible);

/// CPLEX LP text with Maximize/Minimize, Subject To, Bounds and End sections.
std::string serialize_lp(const LinearProgram& lp);

/// Reads the subset of the LP format produced by serialize_lp. Throws ParseError.
LinearProgram parse_lp(std::string_view text);

}  // namespace pmp
