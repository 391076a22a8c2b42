#pragma once

// End-to-end experiment drivers shared by the CLI and the acceptance suite.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "pmp/learning.hpp"
#include "pmp/sample_set.hpp"

namespace pmp {

struct MetricRow {
  std::string metric;
  double value = 0.0;
  double std_err = 0.0;
};

struct ExperimentResult {
  std::vector<MetricRow> metrics;
  std::vector<SampleSet> samples;
  /// Per-iteration training trace (iteration, grad_norm) per training run.
  std::vector<std::pair<std::string, std::vector<IterationMetrics>>> traces;
  /// Trained models, by method.
  std::vector<std::pair<std::string, FactorGraph>> models;
  bool partial = false;

  double metric(const std::string& name) const;
};

struct ToyConfig {
  double theta_true = 0.5;
  std::size_t iterations = 200;
  double learning_rate = 0.01;
  std::size_t chains = 100;
  std::size_t sweeps = 100;
  double damping = 0.5;
  std::size_t eval_samples = 1000000;
};

/// Fully connected 4-spin model with one shared coupling, learned from exact
/// moments. Metrics: theta_hat, kl_gibbs (truth vs Gibbs law at theta_hat),
/// kl_pmp (truth vs smoothed empirical PMP law at theta_hat).
ExperimentResult run_toy(const ToyConfig& config, std::uint64_t seed, double budget_secs = 0.0);

struct BoundConfig {
  /// "lattice" (cyclic side x side grid), "tree", "random" (full Ising) or "unary".
  std::string model = "lattice";
  std::size_t side = 5;
  /// Lattice coupling.
  double coupling = 0.1;
  /// Tree, random and unary models: number of variables, coupling and field ranges.
  std::size_t n = 10;
  double w_max = 2.0;
  double b_max = 0.1;
  std::size_t instances = 1;
  std::size_t sweeps = 200;
  std::size_t draws = 500;
  double damping = 0.5;
  bool exact_map = false;
  std::size_t budget_states = std::size_t{1} << 26;
};

/// Exact log Z against the perturb-and-MAP estimate. Metrics per instance k:
/// logz_exact_k, logz_estimate_k (std_err set), error_k; plus mean_error.
ExperimentResult run_bound(const BoundConfig& config, std::uint64_t seed, double budget_secs = 0.0);

struct IsingExperimentConfig {
  /// "synthetic" or "mnist" (zero contours read from the dataset directory).
  std::string dataset = "synthetic";
  /// Number of images used (0 keeps every available image); size applies to
  /// generated images only.
  std::size_t images = 200;
  std::size_t size = 12;
  double holdout = 0.2;
  std::vector<std::string> methods{"pmp", "gibbs", "gibbs-reset"};
  TrainConfig train{0.001, 100, 50, 300};
  std::vector<std::size_t> eval_sweeps{1, 5, 25, 50};
  std::size_t eval_samples = 200;
};

/// Fully connected Ising learned with each method; metric
/// log_mmd2_<method>_<sweeps> against the held-out images.
ExperimentResult run_ising(const IsingExperimentConfig& config, std::uint64_t seed, double budget_secs = 0.0);

struct RbmExperimentConfig {
  /// "stripes" (one or two lines per image), "bars" (bars and stripes) or
  /// "mnist".
  std::string dataset = "stripes";
  /// As for the Ising experiment; mnist images are binarized at 128.
  std::size_t images = 1000;
  std::size_t size = 8;
  std::size_t n_hidden = 32;
  double holdout = 0.2;
  std::vector<std::string> methods{"pmp", "gibbs-reset"};
  TrainConfig train{0.01, 100, 100, 300};
  std::size_t pcd_sweeps = 1;
  std::vector<std::size_t> eval_sweeps{10, 100};
  std::size_t eval_samples = 500;
};

/// RBM learned with each method (pmp, gibbs-reset, pcd); metrics
/// log_mmd2_<method>_<sweeps>, sampling each model with its own sampler, and
/// log_mmd2_untrained_<sweeps> for the zero-iteration model sampled by PMP.
ExperimentResult run_rbm(const RbmExperimentConfig& config, std::uint64_t seed, double budget_secs = 0.0);

struct DeconvConfig {
  std::size_t images = 20;
  std::size_t size = 12;
  std::size_t true_features = 3;
  std::size_t feature_size = 3;
  /// Inference feature slots and their side length (0 means feature_size).
  std::size_t slots = 4;
  std::size_t slot_size = 0;
  std::size_t sweeps = 1000;
  double damping = 0.3;
  double feature_density = 0.5;
  double location_density = 0.02;
  /// Prior log-odds of W and S entries; the defaults match the densities.
  double w_logodds = 0.0;
  double s_logodds = -3.8918202981106265;  // log(0.02 / 0.98)
  std::size_t seeds = 5;
};

/// Posterior samples of (W, S) given generated X for consecutive seeds;
/// metrics agreement_<k>, min_agreement and consistency (mean pairwise
/// agreement of the reconstructions).
ExperimentResult run_deconv(const DeconvConfig& config, std::uint64_t seed, double budget_secs = 0.0);

/// Full-size variants of the default configurations (--paper-scale).
ToyConfig paper_toy();
IsingExperimentConfig paper_ising();
RbmExperimentConfig paper_rbm();
DeconvConfig paper_deconv();

nlohmann::json to_json(const ToyConfig& c);
nlohmann::json to_json(const BoundConfig& c);
nlohmann::json to_json(const IsingExperimentConfig& c);
nlohmann::json to_json(const RbmExperimentConfig& c);
nlohmann::json to_json(const DeconvConfig& c);
void from_json(const nlohmann::json& j, ToyConfig& c);
void from_json(const nlohmann::json& j, BoundConfig& c);
void from_json(const nlohmann::json& j, IsingExperimentConfig& c);
void from_json(const nlohmann::json& j, RbmExperimentConfig& c);
void from_json(const nlohmann::json& j, DeconvConfig& c);

SamplingMethod parse_method(const std::string& name);

}  // namespace pmp
