#pragma once

// Replication runner for the synthetic and masked-covariance experiments.
//
// One replication: draw a truth and data (or mask a supplied covariance),
// build the observed covariance, then for each method complete it, choose the
// glasso penalty by the configured policy, and record metrics.

#include "lrgq/config.hpp"
#include "lrgq/metrics.hpp"
#include "lrgq/methods.hpp"
#include "lrgq/model_select.hpp"
#include "lrgq/simgen.hpp"

#include <functional>
#include <map>

namespace lrgq {

enum class GraphKind { sbm, multistar, er, spiked, spiked_sbm };
enum class Source { simulate, covariance };
enum class Sampling { mask, blocks };
enum class LambdaPolicy { oracle_matched, oracle_best_f1, stability, fixed };
enum class StabilityMode { end_to_end, post_completion };

struct ScenarioConfig {
  Source source = Source::simulate;

  // Truth
  GraphKind graph = GraphKind::sbm;
  Index p = 100;
  Index communities = 5;
  double within_prob = 0.8;
  Index hubs = 4;
  double edge_prob = 0.02;
  PrecisionOptions precision;
  double spiked_c = 1.0;
  Index spiked_rank = 3;
  double spiked_lo = 0.6;
  double spiked_hi = 0.9;

  // Observation
  Index K = 2;
  Index o = 60;
  Index n = 2000;
  bool shuffle = true;
  Sampling sampling = Sampling::mask;
  bool correlation = false;

  // Masked-covariance mode
  std::string covariance_path;
  double reference_lambda = 0;
  Index hub_k = 25;

  // Completion
  CompletionParams completion;
  /// bsvd-spiked noise level: estimated (default) or the truth's sigma*^2.
  bool true_noise_level = false;

  // Graph selection
  LambdaPolicy policy = LambdaPolicy::oracle_matched;
  double fixed_lambda = 0.1;
  Index grid_size = 30;
  double grid_ratio = 0.01;
  Index match_iterations = 30;
  StabilityOptions stability;
  StabilityMode stability_mode = StabilityMode::end_to_end;
  double subsample_ratio = 0.8;
  double jackknife_fraction = 0.05;
  GlassoOptions glasso;

  // Run
  std::vector<MethodSpec> methods = all_methods();
  Index replications = 1;
  std::uint64_t seed = 1;
  Index threads = 1;
};

/// Reads [scenario], [completion], [graph] and [run] sections. Unknown keys are errors.
ScenarioConfig scenario_from_config(const Config& cfg);

std::string to_string(GraphKind g);
std::string to_string(LambdaPolicy p);

struct ReplicationInput {
  Index replication = 0;
  /// Reference covariance for the error metrics (sigma*, or the supplied covariance).
  Matrix<double> sigma_reference;
  /// Fully observed empirical covariance used by the oracle penalty policies.
  Matrix<double> full_covariance;
  ObservedCovariance<double> observed;
  std::optional<BlockData<double>> blocks;
  std::optional<GroundTruth<double>> truth;
  EdgeSet truth_edges;
  std::optional<double> true_sigma2;
  /// The truth edges come from the supplied covariance's own graph.
  bool reference_graph = false;
};

ReplicationInput make_replication(const ScenarioConfig& sc, Index replication);

/// Seeds of one replication: truth, data, and block shuffle streams.
struct ReplicationSeeds {
  std::uint64_t truth, data, shuffle, selection;
};
ReplicationSeeds replication_seeds(std::uint64_t seed, Index replication);

struct MetricsRecord {
  std::string method;
  Index replication = 0;
  bool ok = true;
  std::string error;
  double frobenius_error = std::numeric_limits<double>::quiet_NaN();
  double infinity_error = std::numeric_limits<double>::quiet_NaN();
  double f1 = std::numeric_limits<double>::quiet_NaN();
  double hub_overlap = std::numeric_limits<double>::quiet_NaN();
  double runtime_seconds = 0;
  bool converged = false;
  double lambda = std::numeric_limits<double>::quiet_NaN();
  Index edges = 0;
  Index rank_used = 0;
  double sigma2_hat = 0;
  std::vector<std::string> warnings;
};

/// Edge count the estimates must match, and the penalty that produced it on
/// the full covariance.
struct OracleTarget {
  double lambda = 0;
  Index edges = 0;
  double f1 = 0;
};

OracleTarget oracle_target(const ReplicationInput& in, const ScenarioConfig& sc);

/// Glasso penalty whose edge count is closest to `target` (bisection on log lambda).
PrecisionGraph<double> match_edge_count(const Matrix<double>& sigma, Index target, const ScenarioConfig& sc);

struct MethodResult {
  MetricsRecord record;
  std::optional<CompletedCovariance<double>> completed;
  std::optional<PrecisionGraph<double>> graph;
};

MethodResult run_method(const ReplicationInput& in, const MethodSpec& method, const ScenarioConfig& sc,
                        const OracleTarget& oracle);

struct RunResult {
  std::vector<MetricsRecord> records;  // ordered by (method list order, replication)
  std::vector<std::string> method_order;
  std::map<std::string, bool> method_failed;
  Index replications = 0;
};

using ResultSink = std::function<void(const ReplicationInput&, const MethodResult&)>;

RunResult run_replications(const ScenarioConfig& sc, const ResultSink& sink = {});

struct Summary {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double sd = std::numeric_limits<double>::quiet_NaN();
  Index count = 0;
};

/// Mean and sample sd of a metric over successful replications of a method.
Summary summarize(const RunResult& run, const std::string& method, double MetricsRecord::*field);

struct MetricsWriteOptions {
  /// Header comment with the wall-clock time and runtime rows; both vary between runs.
  bool timestamp = true;
};

void write_metrics_csv(const std::filesystem::path& path, const RunResult& run, const MetricsWriteOptions& opts);

}  // namespace lrgq
