// Experiment driver: runs one experiment per invocation and writes
// metrics.csv, manifest.json, timing.csv, traces, samples and models to --out.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include "pmp/data_io.hpp"
#include "pmp/errors.hpp"
#include "pmp/experiments.hpp"
#include "pmp/graph_io.hpp"
#include "pmp/lp_export.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pmp;

namespace {

constexpr int kExitCapacity = 2;
constexpr int kExitValidation = 3;

// Git blob object id: sha1("blob <size>\0" + content).
std::string git_hash(std::string_view content) {
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr);
  EVP_DigestUpdate(ctx, header.data(), header.size());
  EVP_DigestUpdate(ctx, content.data(), content.size());
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  char buf[3];
  for (unsigned i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

std::string file_hash(const fs::path& path) {
  const auto bytes = read_file(path);
  return git_hash(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

std::string fmt(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

struct Common {
  std::uint64_t seed = 1;
  std::optional<std::size_t> sweeps, chains;
  std::optional<double> damping;
  std::string method;
  std::string out;
  std::string config_path;
  bool paper_scale = false;
  double budget_secs = 0.0;
  bool samples_csv = false;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--seed", c.seed, "Master seed")->capture_default_str();
  app->add_option("--sweeps", c.sweeps, "Max-product (or Gibbs) sweeps per sample");
  app->add_option("--chains", c.chains, "Parallel chains / samples per step");
  app->add_option("--damping", c.damping, "Message damping in (0, 1]");
  app->add_option("--method", c.method, "pmp | gibbs | gibbs-reset | pcd")
      ->check(CLI::IsMember({"pmp", "gibbs", "gibbs-reset", "pcd"}));
  app->add_option("--out", c.out, "Output directory");
  app->add_option("--config", c.config_path, "JSON file overriding configuration fields");
  app->add_flag("--paper-scale", c.paper_scale, "Use the full-size configuration");
  app->add_option("--budget-secs", c.budget_secs, "Wall-clock cap in seconds (0: none)");
  app->add_flag("--samples-csv", c.samples_csv, "Also write samples as CSV");
}

json load_overrides(const std::string& path) {
  if (path.empty()) return json::object();
  const auto bytes = read_file(path);
  try {
    return json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config: ") + e.what(), e.byte);
  }
}

void require_pmp(const Common& c, const char* sub) {
  if (!c.method.empty() && c.method != "pmp") throw ParameterError(std::string(sub) + " supports --method pmp only");
}

// Resolves the configuration of a subcommand from defaults, --paper-scale,
// --config and the sampling flags.
json resolve_config(const std::string& sub, const Common& c, const json& extra) {
  json cfg;
  const json over = load_overrides(c.config_path);
  auto merge = [&](auto base) {
    json j = to_json(base);
    j.merge_patch(over);
    j.merge_patch(extra);
    from_json(j, base);
    return base;
  };
  if (sub == "toy") {
    require_pmp(c, "toy");
    auto t = merge(c.paper_scale ? paper_toy() : ToyConfig{});
    if (c.sweeps) t.sweeps = *c.sweeps;
    if (c.chains) t.chains = *c.chains;
    if (c.damping) t.damping = *c.damping;
    cfg = to_json(t);
  } else if (sub == "bound") {
    require_pmp(c, "bound");
    auto t = merge(BoundConfig{});
    if (c.sweeps) t.sweeps = *c.sweeps;
    if (c.chains) t.draws = *c.chains;
    if (c.damping) t.damping = *c.damping;
    cfg = to_json(t);
  } else if (sub == "ising") {
    auto t = merge(c.paper_scale ? paper_ising() : IsingExperimentConfig{});
    if (!c.method.empty()) t.methods = {c.method};
    if (c.sweeps) t.train.sweeps = *c.sweeps;
    if (c.chains) t.train.batch = *c.chains;
    if (c.damping) t.train.damping = *c.damping;
    cfg = to_json(t);
  } else if (sub == "rbm") {
    auto t = merge(c.paper_scale ? paper_rbm() : RbmExperimentConfig{});
    if (!c.method.empty()) t.methods = {c.method};
    if (c.sweeps) t.train.sweeps = *c.sweeps;
    if (c.chains) t.train.batch = *c.chains;
    if (c.damping) t.train.damping = *c.damping;
    cfg = to_json(t);
  } else if (sub == "deconv") {
    require_pmp(c, "deconv");
    auto t = merge(c.paper_scale ? paper_deconv() : DeconvConfig{});
    if (c.sweeps) t.sweeps = *c.sweeps;
    if (c.chains) t.seeds = *c.chains;
    if (c.damping) t.damping = *c.damping;
    cfg = to_json(t);
  } else {
    throw ParameterError("unknown experiment '" + sub + "'");
  }
  return cfg;
}

// Content hashes of the files an experiment reads.
json input_hashes(const std::string& sub, const json& cfg) {
  json inputs = json::object();
  if ((sub == "ising" || sub == "rbm") && cfg.value("dataset", "") == "mnist") {
    const auto dir = dataset_dir();
    for (const auto* stem : {"train-images-idx3-ubyte", "train-labels-idx1-ubyte"}) {
      for (const auto* suffix : {"", ".gz"}) {
        const auto path = dir / (std::string(stem) + suffix);
        if (fs::exists(path)) {
          inputs[path.filename().string()] = file_hash(path);
          break;
        }
      }
    }
  }
  return inputs;
}

ExperimentResult dispatch(const std::string& sub, const json& cfg, std::uint64_t seed, double budget) {
  if (sub == "toy") return run_toy(cfg.get<ToyConfig>(), seed, budget);
  if (sub == "bound") return run_bound(cfg.get<BoundConfig>(), seed, budget);
  if (sub == "ising") return run_ising(cfg.get<IsingExperimentConfig>(), seed, budget);
  if (sub == "rbm") return run_rbm(cfg.get<RbmExperimentConfig>(), seed, budget);
  if (sub == "deconv") return run_deconv(cfg.get<DeconvConfig>(), seed, budget);
  throw ParameterError("unknown experiment '" + sub + "'");
}

std::string metrics_csv(const ExperimentResult& r, const std::string& config_hash, std::uint64_t seed) {
  std::ostringstream os;
  os << "metric,value,std_err,config_hash,seed\n";
  for (const auto& m : r.metrics)
    os << m.metric << ',' << fmt(m.value) << ',' << fmt(m.std_err) << ',' << config_hash << ',' << seed << '\n';
  return os.str();
}

// Writes every output of a run and returns the manifest.
json write_run(const fs::path& out, const std::string& sub, const json& cfg, std::uint64_t seed, double budget,
               bool samples_csv) {
  fs::create_directories(out);
  const std::string config_text = cfg.dump();
  const std::string config_hash = git_hash(config_text);
  json manifest{{"format", "pmp-run"},     {"version", 1},          {"subcommand", sub},
                {"seed", seed},            {"budget_secs", budget}, {"config", cfg},
                {"config_hash", config_hash}, {"inputs", input_hashes(sub, cfg)}, {"samples_csv", samples_csv}};

  const auto result = dispatch(sub, cfg, seed, budget);
  json outputs = json::object();
  auto emit = [&](const std::string& name, const std::string& text) {
    write_text(out / name, text);
    outputs[name] = git_hash(text);
  };
  emit("metrics.csv", metrics_csv(result, config_hash, seed));

  std::ostringstream timing;
  timing << "run,iteration,wall_ms\n";
  for (const auto& [name, trace] : result.traces) {
    std::ostringstream os;
    os << "iteration,grad_norm\n";
    for (const auto& m : trace) {
      os << m.iteration << ',' << fmt(m.grad_norm) << '\n';
      timing << name << ',' << m.iteration << ',' << fmt(m.wall_ms) << '\n';
    }
    emit("trace_" + name + ".csv", os.str());
  }
  write_text(out / "timing.csv", timing.str());

  for (const auto& s : result.samples) {
    const auto bytes = encode_samples(s);
    const auto name = "samples_" + s.label + ".pmps";
    write_file(out / name, bytes);
    outputs[name] = git_hash(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
    if (samples_csv) emit("samples_" + s.label + ".csv", samples_to_csv(s));
  }
  for (const auto& [name, g] : result.models) {
    save_checkpoint(out / ("model_" + name), g);
    outputs["model_" + name + ".f64"] = file_hash(out / ("model_" + name + ".f64"));
  }
  manifest["partial"] = result.partial;
  manifest["outputs"] = outputs;
  write_text(out / "manifest.json", manifest.dump(2) + "\n");

  for (const auto& m : result.metrics) std::cout << m.metric << " = " << fmt(m.value) << '\n';
  if (result.partial) std::cout << "budget reached: results are partial\n";
  return manifest;
}

int replay(const fs::path& manifest_path, fs::path out) {
  const auto bytes = read_file(manifest_path);
  json manifest;
  try {
    manifest = json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("manifest: ") + e.what(), e.byte);
  }
  if (manifest.value("format", "") != "pmp-run") throw ParseError("not a run manifest", 0);
  const auto sub = manifest.at("subcommand").get<std::string>();
  const auto cfg = manifest.at("config");
  if (git_hash(cfg.dump()) != manifest.at("config_hash").get<std::string>())
    throw ValidationError("manifest config does not match its hash");
  const auto recorded_inputs = manifest.at("inputs");
  if (input_hashes(sub, cfg) != recorded_inputs) throw ValidationError("input files changed since the run");
  if (out.empty()) out = manifest_path.parent_path() / "replay";
  const auto again = write_run(out, sub, cfg, manifest.at("seed").get<std::uint64_t>(),
                               manifest.at("budget_secs").get<double>(), manifest.value("samples_csv", false));
  std::size_t mismatched = 0;
  for (const auto& [name, hash] : manifest.at("outputs").items()) {
    if (!again.at("outputs").contains(name) || again["outputs"][name] != hash) {
      std::cout << "differs: " << name << '\n';
      ++mismatched;
    }
  }
  if (mismatched) throw ValidationError("replay differs from the recorded run");
  std::cout << "replay identical (" << manifest.at("outputs").size() << " outputs)\n";
  return 0;
}

struct LpExportArgs {
  std::string model = "ising";
  std::string input;
  std::string form = "reduced";
  std::size_t n = 6;
  std::size_t hidden = 3;
  std::uint64_t seed = 1;
  bool halved = false;
  std::string out = "model.lp";
};

int lp_export(const LpExportArgs& a) {
  LinearProgram lp;
  std::string source;
  if (a.model == "ising") {
    IsingModel m;
    if (!a.input.empty()) {
      m = ising_from_graph(load_checkpoint(a.input));
      source = a.input;
    } else {
      Rng rng(a.seed);
      m = IsingModel::zeros(a.n);
      for (std::size_t i = 0; i < a.n; ++i) {
        m.b[i] = rng.normal();
        for (std::size_t j = i + 1; j < a.n; ++j) m.W[i * a.n + j] = m.W[j * a.n + i] = rng.normal();
      }
      source = "random n=" + std::to_string(a.n) + " seed=" + std::to_string(a.seed);
    }
    lp = a.form == "reduced" ? reduced_lp_ising(m.W, m.b, a.halved) : standard_lp_ising(m.W, m.b);
  } else {
    RbmModel m;
    if (!a.input.empty()) {
      m = rbm_from_graph(load_checkpoint(a.input));
      source = a.input;
    } else {
      Rng rng(a.seed);
      m = RbmModel::zeros(a.hidden, a.n);
      for (auto& w : m.W) w = rng.normal();
      for (auto& b : m.b) b = rng.normal();
      for (auto& c : m.c) c = rng.normal();
      source = "random rbm " + std::to_string(a.hidden) + "x" + std::to_string(a.n) + " seed=" + std::to_string(a.seed);
    }
    lp = a.form == "reduced" ? reduced_lp_rbm(m.W, m.b, m.c) : standard_lp_rbm(m.W, m.b, m.c);
  }
  lp.validate();
  const auto text = serialize_lp(lp);
  write_text(a.out, text);
  std::cout << "wrote " << a.out << " (" << lp.num_variables() << " variables, " << lp.num_constraints()
            << " constraints) from " << source << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Perturb-and-max-product sampling and learning experiments"};
  app.require_subcommand(1);

  Common common;
  json extra = json::object();
  std::map<std::string, CLI::App*> experiments;
  for (const auto* name : {"toy", "bound", "ising", "rbm", "deconv"}) {
    experiments[name] = app.add_subcommand(name);
    add_common(experiments[name], common);
  }
  experiments["toy"]->description("Four-spin shared-coupling model learned from exact moments");
  experiments["bound"]->description("Exact log Z against the perturb-and-MAP estimate");
  experiments["ising"]->description("Fully connected Ising model on contour images");
  experiments["rbm"]->description("Restricted Boltzmann machine on binary images");
  experiments["deconv"]->description("Posterior sampling for binary blind deconvolution");

  std::string bound_model, dataset;
  std::optional<std::size_t> side, n, instances, iterations, images;
  std::optional<double> coupling;
  bool exact_map = false;
  experiments["bound"]->add_option("--model", bound_model, "lattice | tree | random | unary")
      ->check(CLI::IsMember({"lattice", "tree", "random", "unary"}));
  experiments["bound"]->add_option("--side", side, "Lattice side length");
  experiments["bound"]->add_option("--coupling", coupling, "Lattice coupling");
  experiments["bound"]->add_option("--n", n, "Variables of tree, random and unary models");
  experiments["bound"]->add_option("--instances", instances, "Number of random instances");
  experiments["bound"]->add_flag("--exact-map", exact_map, "Maximize by enumeration instead of max-product");
  for (const auto* name : {"ising", "rbm"}) {
    experiments[name]->add_option("--dataset", dataset, "Dataset name");
    experiments[name]->add_option("--iterations", iterations, "Training iterations");
    experiments[name]->add_option("--images", images, "Images used (0: all)");
  }
  experiments["deconv"]->add_option("--images", images, "Number of images");

  auto* replay_cmd = app.add_subcommand("replay", "Re-run a manifest and compare every output");
  std::string manifest_path, replay_out;
  replay_cmd->add_option("manifest", manifest_path, "manifest.json of a previous run")->required();
  replay_cmd->add_option("--out", replay_out, "Output directory (default: <run>/replay)");

  auto* lp_cmd = app.add_subcommand("lp-export", "Write the LP relaxation of a binary pairwise model");
  LpExportArgs lp_args;
  lp_cmd->add_option("--model", lp_args.model, "ising | rbm")->check(CLI::IsMember({"ising", "rbm"}));
  lp_cmd->add_option("--input", lp_args.input, "Checkpoint stem (<stem>.json + <stem>.f64); random model if absent");
  lp_cmd->add_option("--form", lp_args.form, "reduced | standard")->check(CLI::IsMember({"reduced", "standard"}));
  lp_cmd->add_option("--n", lp_args.n, "Variables (visible units) of the random model");
  lp_cmd->add_option("--hidden", lp_args.hidden, "Hidden units of the random RBM");
  lp_cmd->add_option("--seed", lp_args.seed, "Seed of the random model");
  lp_cmd->add_flag("--halved", lp_args.halved, "Reduced Ising objective over i < j with doubled weights");
  lp_cmd->add_option("--out", lp_args.out, "Output LP file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (replay_cmd->parsed()) return replay(manifest_path, replay_out);
    if (lp_cmd->parsed()) return lp_export(lp_args);
    for (const auto& [name, sub] : experiments) {
      if (!sub->parsed()) continue;
      if (!bound_model.empty()) extra["model"] = bound_model;
      if (side) extra["side"] = *side;
      if (coupling) extra["coupling"] = *coupling;
      if (n) extra["n"] = *n;
      if (instances) extra["instances"] = *instances;
      if (exact_map) extra["exact_map"] = true;
      if (!dataset.empty()) extra["dataset"] = dataset;
      if (images) extra["images"] = *images;
      if (iterations) extra["train"] = {{"iterations", *iterations}};
      const auto cfg = resolve_config(name, common, extra);
      const fs::path out = common.out.empty() ? fs::path("runs") / name : fs::path(common.out);
      write_run(out, name, cfg, common.seed, common.budget_secs, common.samples_csv);
      std::cout << "outputs in " << out.string() << '\n';
    }
    return 0;
  } catch (const CapacityError& e) {
    std::cerr << "capacity error: " << e.what() << '\n';
    return kExitCapacity;
  } catch (const ValidationError& e) {
    std::cerr << "validation failure: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ParameterError& e) {
    std::cerr << "invalid parameter: " << e.what() << '\n';
    return kExitValidation;
  } catch (const StructuralError& e) {
    std::cerr << "invalid model: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
