#pragma once

// JSON form of a factor graph:
//
//   {"format": "pmp-factor-graph", "version": 1,
//    "variables": [{"cardinality": 2, "unary": [0.0, 0.7]}, ...],
//    "factors": [{"kind": "dense", "vars": [0, 1], "log_potentials": [...]},
//                {"kind": "ising", "vars": [0, 1], "weight": 0.5},
//                {"kind": "rbm", "vars": [...], "n_hidden": 2, "n_visible": 3, "weights": [...]},
//                {"kind": "or", "vars": [tops..., bottom]},
//                {"kind": "and", "vars": [top1, top2, bottom]}]}

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pmp/factor_graph.hpp"

namespace pmp {

std::string graph_to_json(const FactorGraph& g);
/// Throws ParseError for malformed documents and StructuralError for invalid graphs.
FactorGraph graph_from_json(const std::string& text);

/// Raw little-endian f64 array.
std::vector<std::uint8_t> encode_f64(std::span<const double> values);
std::vector<double> decode_f64(std::span<const std::uint8_t> bytes);

/// Writes <stem>.json (graph with current parameters) and <stem>.f64 (parameter vector).
void save_checkpoint(const std::filesystem::path& stem, const FactorGraph& g);
/// Reads the graph and overwrites its parameters with the blob.
FactorGraph load_checkpoint(const std::filesystem::path& stem);

}  // namespace pmp
