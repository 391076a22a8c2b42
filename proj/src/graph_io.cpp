#include "pmp/graph_io.hpp"

#include <cstring>

#include <json.hpp>

#include "pmp/data_io.hpp"
#include "pmp/errors.hpp"

namespace pmp {

using nlohmann::json;

std::string graph_to_json(const FactorGraph& g) {
  json doc;
  doc["format"] = "pmp-factor-graph";
  doc["version"] = 1;
  json vars = json::array();
  for (std::size_t i = 0; i < g.num_variables(); ++i) {
    const auto u = g.unary(i);
    vars.push_back({{"cardinality", g.cardinality(i)}, {"unary", std::vector<double>(u.begin(), u.end())}});
  }
  doc["variables"] = std::move(vars);
  json factors = json::array();
  for (const auto& f : g.factors()) {
    json j;
    j["vars"] = f.vars;
    if (const auto* t = std::get_if<DenseTable>(&f.kind)) {
      j["kind"] = "dense";
      j["log_potentials"] = t->log_potentials;
    } else if (const auto* e = std::get_if<IsingEdge>(&f.kind)) {
      j["kind"] = "ising";
      j["weight"] = e->weight;
    } else if (const auto* r = std::get_if<RbmBlock>(&f.kind)) {
      j["kind"] = "rbm";
      j["n_hidden"] = r->n_hidden;
      j["n_visible"] = r->n_visible;
      j["weights"] = r->weights;
    } else if (std::holds_alternative<OrFactor>(f.kind)) {
      j["kind"] = "or";
    } else {
      j["kind"] = "and";
    }
    factors.push_back(std::move(j));
  }
  doc["factors"] = std::move(factors);
  return doc.dump(1);
}

FactorGraph graph_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what(), e.byte);
  }
  try {
    if (doc.at("format").get<std::string>() != "pmp-factor-graph") throw ParseError("not a factor graph document", 0);
    if (doc.at("version").get<int>() != 1) throw ParseError("unsupported factor graph version", 0);
    FactorGraph g;
    for (const auto& v : doc.at("variables")) {
      auto unary = v.at("unary").get<std::vector<double>>();
      if (static_cast<std::int64_t>(unary.size()) != v.at("cardinality").get<std::int64_t>())
        throw StructuralError("unary length does not match cardinality");
      g.add_variable(std::move(unary));
    }
    for (const auto& f : doc.at("factors")) {
      auto vars = f.at("vars").get<std::vector<std::uint32_t>>();
      const auto kind = f.at("kind").get<std::string>();
      if (kind == "dense")
        g.add_factor(std::move(vars), DenseTable{f.at("log_potentials").get<std::vector<double>>()});
      else if (kind == "ising")
        g.add_factor(std::move(vars), IsingEdge{f.at("weight").get<double>()});
      else if (kind == "rbm")
        g.add_factor(std::move(vars), RbmBlock{f.at("n_hidden").get<std::uint32_t>(), f.at("n_visible").get<std::uint32_t>(),
                                               f.at("weights").get<std::vector<double>>()});
      else if (kind == "or")
        g.add_factor(std::move(vars), OrFactor{});
      else if (kind == "and")
        g.add_factor(std::move(vars), AndFactor{});
      else
        throw ParseError("unknown factor kind '" + kind + "'", 0);
    }
    return g;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed factor graph: ") + e.what(), 0);
  }
}

std::vector<std::uint8_t> encode_f64(std::span<const double> values) {
  std::vector<std::uint8_t> out(values.size() * 8);
  for (std::size_t k = 0; k < values.size(); ++k) {
    std::uint64_t bits;
    std::memcpy(&bits, &values[k], 8);
    for (int b = 0; b < 8; ++b) out[k * 8 + static_cast<std::size_t>(b)] = static_cast<std::uint8_t>(bits >> (8 * b));
  }
  return out;
}

std::vector<double> decode_f64(std::span<const std::uint8_t> bytes) {
  if (bytes.size() % 8 != 0) throw ParseError("f64 blob length is not a multiple of 8", bytes.size() - bytes.size() % 8);
  std::vector<double> out(bytes.size() / 8);
  for (std::size_t k = 0; k < out.size(); ++k) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= std::uint64_t{bytes[k * 8 + static_cast<std::size_t>(b)]} << (8 * b);
    std::memcpy(&out[k], &bits, 8);
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& stem, const FactorGraph& g) {
  auto json_path = stem;
  json_path += ".json";
  auto blob_path = stem;
  blob_path += ".f64";
  write_text(json_path, graph_to_json(g));
  write_file(blob_path, encode_f64(g.parameters()));
}

FactorGraph load_checkpoint(const std::filesystem::path& stem) {
  auto json_path = stem;
  json_path += ".json";
  auto blob_path = stem;
  blob_path += ".f64";
  const auto text = read_file(json_path);
  FactorGraph g = graph_from_json(std::string(text.begin(), text.end()));
  const auto theta = decode_f64(read_file(blob_path));
  if (theta.size() != g.num_parameters()) throw StructuralError("checkpoint blob does not match the graph");
  g.set_parameters(theta);
  return g;
}

}  // namespace pmp
