#include "lrgq/harness.hpp"

#include <atomic>
#include <chrono>
#include <ctime>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

namespace lrgq {

namespace {

template <typename E>
E parse_enum(const Config& cfg, const std::string& section, const std::string& key, E fallback,
             const std::vector<std::pair<std::string, E>>& names) {
  if (!cfg.has(section, key)) return fallback;
  const std::string v = cfg.get_string(section, key, "");
  for (const auto& [n, e] : names)
    if (n == v) return e;
  std::string allowed;
  for (const auto& [n, e] : names) allowed += (allowed.empty() ? "" : "|") + n;
  throw ParseError(cfg.file(), cfg.line_of(section, key), "[" + section + "] " + key + ": expected one of " + allowed + " (got '" + v + "')");
}

const std::vector<std::pair<std::string, GraphKind>> kGraphNames = {{"sbm", GraphKind::sbm},
                                                                    {"multistar", GraphKind::multistar},
                                                                    {"er", GraphKind::er},
                                                                    {"spiked", GraphKind::spiked},
                                                                    {"spiked-sbm", GraphKind::spiked_sbm}};
const std::vector<std::pair<std::string, LambdaPolicy>> kPolicyNames = {
    {"oracle-matched", LambdaPolicy::oracle_matched},
    {"oracle-best-f1", LambdaPolicy::oracle_best_f1},
    {"stability", LambdaPolicy::stability},
    {"fixed", LambdaPolicy::fixed}};

void check_keys(const Config& cfg, const std::string& section, const std::set<std::string>& allowed) {
  for (const auto& k : cfg.keys(section))
    if (!allowed.count(k)) throw ParseError(cfg.file(), cfg.line_of(section, k), "unknown key '" + k + "' in [" + section + "]");
}

double elapsed(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

/// Standardize columns with the 1/n standard deviation so that the moment
/// covariance of the result is the sample correlation.
Matrix<double> standardize(const Matrix<double>& x) {
  Matrix<double> out = x.rowwise() - x.colwise().mean();
  for (Index j = 0; j < out.cols(); ++j) {
    const double sd = std::sqrt(out.col(j).squaredNorm() / double(out.rows()));
    if (sd > 0) out.col(j) /= sd;
  }
  return out;
}

BlockData<double> split_blocks(const Matrix<double>& x, const BlockDesign& design) {
  std::vector<BlockRecord<double>> blocks;
  for (Index k = 0; k < design.num_blocks(); ++k) {
    const auto& nodes = design.nodes(k);
    Matrix<double> sub(x.rows(), static_cast<Index>(nodes.size()));
    for (std::size_t a = 0; a < nodes.size(); ++a) sub.col(static_cast<Index>(a)) = x.col(nodes[a]);
    blocks.push_back({std::move(sub), nodes});
  }
  return BlockData<double>(design.p(), std::move(blocks));
}

}  // namespace

std::string to_string(GraphKind g) {
  for (const auto& [n, e] : kGraphNames)
    if (e == g) return n;
  return "unknown";
}

std::string to_string(LambdaPolicy p) {
  for (const auto& [n, e] : kPolicyNames)
    if (e == p) return n;
  return "unknown";
}

ScenarioConfig scenario_from_config(const Config& cfg) {
  ScenarioConfig sc;
  check_keys(cfg, "", {});
  check_keys(cfg, "scenario",
             {"source", "graph", "p", "communities", "within_prob", "hubs", "edge_prob", "margin", "random_signs", "negative_weights",
              "spiked_c", "spiked_rank", "spiked_lo", "spiked_hi", "K", "o", "n", "shuffle", "sampling",
              "correlation", "covariance", "reference_lambda", "hub_k"});
  check_keys(cfg, "completion",
             {"methods", "rank", "nu", "noise_level", "order", "preserve_observed", "nn_tol", "nn_max_iter",
              "lrf_tol", "lrf_max_iter"});
  check_keys(cfg, "graph",
             {"lambda_policy", "lambda", "grid_size", "grid_ratio", "match_iterations", "subsamples", "threshold",
              "stability_mode", "subsample_ratio", "jackknife_fraction", "tol", "max_sweeps", "edge_tolerance"});
  check_keys(cfg, "run", {"replications", "seed", "threads"});

  const std::string S = "scenario";
  sc.source = parse_enum(cfg, S, "source", Source::simulate,
                         {{"simulate", Source::simulate}, {"covariance", Source::covariance}});
  sc.graph = parse_enum(cfg, S, "graph", sc.graph, kGraphNames);
  sc.p = cfg.get_int(S, "p", sc.p);
  sc.communities = cfg.get_int(S, "communities", sc.communities);
  sc.within_prob = cfg.get_double(S, "within_prob", sc.within_prob);
  sc.hubs = cfg.get_int(S, "hubs", sc.hubs);
  sc.edge_prob = cfg.get_double(S, "edge_prob", sc.edge_prob);
  sc.precision.margin = cfg.get_double(S, "margin", sc.precision.margin);
  sc.precision.random_signs = cfg.get_bool(S, "random_signs", sc.precision.random_signs);
  sc.precision.negative_weights = cfg.get_bool(S, "negative_weights", sc.precision.negative_weights);
  sc.spiked_c = cfg.get_double(S, "spiked_c", sc.spiked_c);
  sc.spiked_rank = cfg.get_int(S, "spiked_rank", sc.spiked_rank);
  sc.spiked_lo = cfg.get_double(S, "spiked_lo", sc.spiked_lo);
  sc.spiked_hi = cfg.get_double(S, "spiked_hi", sc.spiked_hi);
  sc.K = cfg.get_int(S, "K", sc.K);
  sc.o = cfg.get_int(S, "o", sc.o);
  sc.n = cfg.get_int(S, "n", sc.n);
  sc.shuffle = cfg.get_bool(S, "shuffle", sc.shuffle);
  sc.sampling = parse_enum(cfg, S, "sampling", sc.sampling, {{"mask", Sampling::mask}, {"blocks", Sampling::blocks}});
  sc.correlation = cfg.get_bool(S, "correlation", sc.correlation);
  sc.covariance_path = cfg.get_string(S, "covariance", "");
  // Relative paths are taken from the config file's directory.
  if (!sc.covariance_path.empty() && std::filesystem::path(sc.covariance_path).is_relative() && !cfg.file().empty())
    sc.covariance_path = (std::filesystem::path(cfg.file()).parent_path() / sc.covariance_path).string();
  sc.reference_lambda = cfg.get_double(S, "reference_lambda", sc.reference_lambda);
  sc.hub_k = cfg.get_int(S, "hub_k", sc.hub_k);
  if (sc.source == Source::covariance) {
    if (sc.covariance_path.empty())
      throw ParseError(cfg.file(), 0, "[scenario] covariance: required when source = covariance");
    if (!(sc.reference_lambda > 0))
      throw ParseError(cfg.file(), 0, "[scenario] reference_lambda: required (positive) when source = covariance");
    std::filesystem::path cov = sc.covariance_path;
    if (cov.is_relative() && cfg.file() != "<string>")
      sc.covariance_path = (std::filesystem::path(cfg.file()).parent_path() / cov).string();
  }

  const std::string C = "completion";
  if (cfg.has(C, "methods")) {
    sc.methods.clear();
    for (const auto& m : cfg.get_list(C, "methods", {})) sc.methods.push_back(MethodSpec::parse(m));
  }
  sc.completion.rank = cfg.get_int(C, "rank", sc.completion.rank);
  const std::string nu = cfg.get_string(C, "nu", "auto");
  if (nu != "auto") sc.completion.nu = cfg.get_double(C, "nu", 0.0);
  const std::string noise = cfg.get_string(C, "noise_level", "estimate");
  if (noise == "true") sc.true_noise_level = true;
  else if (noise != "estimate") sc.completion.sigma2 = cfg.get_double(C, "noise_level", 0.0);
  sc.completion.order = parse_enum(cfg, C, "order", sc.completion.order,
                                   {{"manifest", BlockOrder::manifest}, {"greedy", BlockOrder::greedy_overlap}});
  sc.completion.preserve_observed = cfg.get_bool(C, "preserve_observed", false);
  sc.completion.nn.tol = cfg.get_double(C, "nn_tol", sc.completion.nn.tol);
  sc.completion.nn.max_iter = cfg.get_int(C, "nn_max_iter", sc.completion.nn.max_iter);
  sc.completion.lrf.tol = cfg.get_double(C, "lrf_tol", sc.completion.lrf.tol);
  sc.completion.lrf.max_iter = cfg.get_int(C, "lrf_max_iter", sc.completion.lrf.max_iter);

  const std::string G = "graph";
  sc.policy = parse_enum(cfg, G, "lambda_policy", sc.policy, kPolicyNames);
  sc.fixed_lambda = cfg.get_double(G, "lambda", sc.fixed_lambda);
  sc.grid_size = cfg.get_int(G, "grid_size", sc.grid_size);
  sc.grid_ratio = cfg.get_double(G, "grid_ratio", sc.grid_ratio);
  sc.match_iterations = cfg.get_int(G, "match_iterations", sc.match_iterations);
  sc.stability.subsamples = cfg.get_int(G, "subsamples", sc.stability.subsamples);
  sc.stability.threshold = cfg.get_double(G, "threshold", sc.stability.threshold);
  sc.stability_mode = parse_enum(cfg, G, "stability_mode", sc.stability_mode,
                                 {{"end-to-end", StabilityMode::end_to_end},
                                  {"post-completion", StabilityMode::post_completion}});
  sc.subsample_ratio = cfg.get_double(G, "subsample_ratio", sc.subsample_ratio);
  sc.jackknife_fraction = cfg.get_double(G, "jackknife_fraction", sc.jackknife_fraction);
  sc.glasso.tol = cfg.get_double(G, "tol", sc.glasso.tol);
  sc.glasso.max_sweeps = cfg.get_int(G, "max_sweeps", sc.glasso.max_sweeps);
  sc.glasso.edge_tolerance = cfg.get_double(G, "edge_tolerance", sc.glasso.edge_tolerance);
  sc.stability.glasso = sc.glasso;

  const std::string R = "run";
  sc.replications = cfg.get_int(R, "replications", sc.replications);
  const Index seed = cfg.get_int(R, "seed", static_cast<Index>(sc.seed));
  if (seed < 0) throw ParseError(cfg.file(), 0, "[run] seed: must be nonnegative");
  sc.seed = static_cast<std::uint64_t>(seed);
  sc.threads = cfg.get_int(R, "threads", sc.threads);
  if (sc.replications < 1) throw ParseError(cfg.file(), 0, "[run] replications: must be positive");
  if (sc.threads < 1) throw ParseError(cfg.file(), 0, "[run] threads: must be positive");
  return sc;
}

ReplicationSeeds replication_seeds(std::uint64_t seed, Index replication) {
  const std::uint64_t base = seed + static_cast<std::uint64_t>(replication);
  return {derived_seed(base, 0), derived_seed(base, 1), derived_seed(base, 2), derived_seed(base, 3)};
}

namespace {

GroundTruth<double> make_truth(const ScenarioConfig& sc, std::uint64_t seed) {
  switch (sc.graph) {
    case GraphKind::sbm: return gen_sbm_precision<double>(sc.p, sc.communities, sc.within_prob, seed, sc.precision);
    case GraphKind::multistar: return gen_multistar_precision<double>(sc.p, sc.hubs, seed, sc.precision);
    case GraphKind::er: return gen_er_precision<double>(sc.p, sc.edge_prob, seed, sc.precision);
    case GraphKind::spiked:
      return gen_spiked_precision<double>(sc.p, sc.spiked_rank, sc.spiked_c, seed, false, sc.spiked_lo, sc.spiked_hi);
    case GraphKind::spiked_sbm:
      return gen_spiked_precision<double>(sc.p, sc.spiked_rank, sc.spiked_c, seed, true, sc.spiked_lo, sc.spiked_hi);
  }
  throw PreconditionError("unknown graph kind");
}

}  // namespace

ReplicationInput make_replication(const ScenarioConfig& sc, Index replication) {
  const ReplicationSeeds seeds = replication_seeds(sc.seed, replication);
  std::optional<std::uint64_t> shuffle;
  if (sc.shuffle) shuffle = seeds.shuffle;

  if (sc.source == Source::covariance) {
    Matrix<double> full = read_matrix_csv(sc.covariance_path);
    if (full.rows() != full.cols() || !full.allFinite())
      throw PreconditionError("supplied covariance must be a finite square matrix");
    if (!is_exactly_symmetric(full)) throw InvariantError("supplied covariance is not symmetric");
    if (sc.correlation) full = to_correlation(full);
    const Index p = full.rows();
    BlockDesign design = make_block_pattern(p, sc.K, sc.o, std::max<Index>(sc.n, 2), shuffle);
    ObservedCovariance<double> obs(mask_covariance(full, design));
    const auto reference = graphical_lasso(full, sc.reference_lambda, sc.glasso);
    return ReplicationInput{replication, full, full, std::move(obs), std::nullopt, std::nullopt,
                            reference.edges(), std::nullopt, true};
  }

  GroundTruth<double> truth = make_truth(sc, seeds.truth);
  const Index p = truth.p();
  BlockDesign design = make_block_pattern(p, sc.K, sc.o, sc.n, shuffle);
  Matrix<double> reference = sc.correlation ? to_correlation(truth.sigma_star()) : truth.sigma_star();
  std::optional<double> true_sigma2;
  if (truth.spiked()) true_sigma2 = truth.spiked()->sigma2;
  if (sc.true_noise_level && (!true_sigma2 || sc.correlation))
    throw PreconditionError("noise_level = true needs a spiked truth in covariance scale");

  Matrix<double> full_cov;
  std::optional<BlockData<double>> blocks;
  std::optional<ObservedCovariance<double>> obs;
  if (sc.sampling == Sampling::mask) {
    Matrix<double> x = sample_ggm(truth, sc.n, seeds.data);
    if (sc.correlation) x = standardize(x);
    full_cov = sample_covariance(x);
    obs.emplace(mask_covariance(full_cov, design));
    blocks = split_blocks(x, design);
  } else {
    std::vector<BlockRecord<double>> records;
    Matrix<double> first;
    for (Index k = 0; k < design.num_blocks(); ++k) {
      Matrix<double> x = sample_ggm(truth, sc.n, derived_seed(seeds.data, static_cast<std::uint64_t>(k)));
      if (sc.correlation) x = standardize(x);
      if (k == 0) first = x;
      const auto& nodes = design.nodes(k);
      Matrix<double> sub(x.rows(), static_cast<Index>(nodes.size()));
      for (std::size_t a = 0; a < nodes.size(); ++a) sub.col(static_cast<Index>(a)) = x.col(nodes[a]);
      records.push_back({std::move(sub), nodes});
    }
    full_cov = sample_covariance(first);
    blocks.emplace(p, std::move(records));
    obs.emplace(compute_block_covariance(*blocks));
  }
  EdgeSet edges = truth.edges();
  return ReplicationInput{replication, std::move(reference), std::move(full_cov), std::move(*obs),
                          std::move(blocks), std::move(truth), std::move(edges), true_sigma2};
}

OracleTarget oracle_target(const ReplicationInput& in, const ScenarioConfig& sc) {
  OracleTarget best;
  if (in.reference_graph) {
    best.edges = static_cast<Index>(in.truth_edges.size());
    best.lambda = sc.reference_lambda;
    best.f1 = 1.0;
    return best;
  }
  best.f1 = -1;
  GlassoState<double> state;
  for (double lambda : lambda_grid(in.full_covariance, sc.grid_size, sc.grid_ratio)) {
    const auto g = graphical_lasso(in.full_covariance, lambda, sc.glasso, &state);
    const double f1 = f1_score(g.edges(), in.truth_edges);
    if (f1 > best.f1) best = {lambda, static_cast<Index>(g.edges().size()), f1};
  }
  return best;
}

PrecisionGraph<double> match_edge_count(const Matrix<double>& sigma, Index target, const ScenarioConfig& sc) {
  // Probes run at a looser KKT tolerance; edge counts settle long before it.
  GlassoOptions probe_opts = sc.glasso;
  probe_opts.tol = std::max(sc.glasso.tol, 1e-4);
  const double top = lambda_grid(sigma, 1, 1.0).front();
  const double floor = top * 1e-4;

  struct Probe {
    double lambda;
    Index count;
    GlassoState<double> state;
  };
  std::optional<Probe> best;
  auto solve = [&](double lambda, GlassoState<double> state) {
    const auto g = graphical_lasso(sigma, lambda, probe_opts, &state);
    Probe pr{lambda, static_cast<Index>(g.edges().size()), std::move(state)};
    const Index gap = std::abs(pr.count - target);
    if (!best || gap < std::abs(best->count - target) ||
        (gap == std::abs(best->count - target) && lambda > best->lambda))
      best = pr;
    return pr;
  };

  // Descend from the empty-graph penalty until the count reaches the target.
  Probe hi = solve(top, {});
  for (int t = 0; t < 20 && hi.count > target; ++t) hi = solve(hi.lambda * 2, {});
  std::optional<Probe> lo;
  while (hi.count < target && hi.lambda > floor) {
    Probe next = solve(std::max(floor, hi.lambda * std::pow(10.0, -0.25)), hi.state);
    if (next.count >= target) {
      lo = std::move(next);
      break;
    }
    hi = std::move(next);
  }
  // Safeguarded interpolation of the count in log lambda inside the bracket,
  // warm-started from the sparse side.
  if (lo && lo->count != target)
    for (Index it = 0; it < sc.match_iterations && best->count != target; ++it) {
      const double span = static_cast<double>(lo->count - hi.count);
      const double t = std::clamp(static_cast<double>(target - hi.count) / span, 0.1, 0.9);
      const double lambda = std::exp(std::log(hi.lambda) + t * (std::log(lo->lambda) - std::log(hi.lambda)));
      if (!(lambda < hi.lambda && lambda > lo->lambda)) break;
      Probe mid = solve(lambda, hi.state);
      if (mid.count > target) lo = std::move(mid);
      else if (mid.count < target) hi = std::move(mid);
      else break;
    }
  GlassoState<double> state = best->state;
  return graphical_lasso(sigma, best->lambda, sc.glasso, &state);
}

MethodResult run_method(const ReplicationInput& in, const MethodSpec& method, const ScenarioConfig& sc,
                        const OracleTarget& oracle) {
  MethodResult out;
  MetricsRecord& rec = out.record;
  rec.method = method.name();
  rec.replication = in.replication;
  const auto start = std::chrono::steady_clock::now();
  try {
    CompletionParams params = sc.completion;
    if (sc.true_noise_level && method.solver == Solver::bsvd && method.mode == ModelKind::spiked)
      params.sigma2 = *in.true_sigma2;
    auto completed = complete_covariance(in.observed, method, params);
    const Matrix<double>& sigma = completed.sigma_tilde();

    std::optional<PrecisionGraph<double>> graph;
    switch (sc.policy) {
      case LambdaPolicy::fixed:
        graph.emplace(graphical_lasso(sigma, sc.fixed_lambda, sc.glasso));
        break;
      case LambdaPolicy::oracle_matched:
        graph.emplace(match_edge_count(sigma, oracle.edges, sc));
        break;
      case LambdaPolicy::oracle_best_f1: {
        double best = -1;
        GlassoState<double> state;
        for (double lambda : lambda_grid(sigma, sc.grid_size, sc.grid_ratio)) {
          auto g = graphical_lasso(sigma, lambda, sc.glasso, &state);
          const double f1 = f1_score(g.edges(), in.truth_edges);
          if (f1 > best) best = f1, graph.emplace(std::move(g));
        }
        break;
      }
      case LambdaPolicy::stability: {
        const std::uint64_t sel_seed = replication_seeds(sc.seed, in.replication).selection;
        Completer<double> completer = [&](const ObservedCovariance<double>& o) {
          return complete_covariance(o, method, params);
        };
        Resampler<double> resample;
        if (sc.stability_mode == StabilityMode::post_completion) {
          if (!in.blocks) throw PreconditionError("post-completion stability needs block data");
          resample = post_completion_resampler(*in.blocks, sigma, sc.subsample_ratio, sel_seed);
        } else if (in.blocks) {
          resample = block_subsample_resampler(*in.blocks, completer, sc.subsample_ratio, sel_seed);
        } else {
          resample = jackknife_resampler(in.observed, completer, sc.jackknife_fraction, sel_seed);
        }
        const auto sel = select_lambda_stability(resample, lambda_grid(sigma, sc.grid_size, sc.grid_ratio),
                                                 sc.stability);
        for (const auto& w : sel.warnings) rec.warnings.push_back(w);
        graph.emplace(graphical_lasso(sigma, sel.selected, sc.glasso));
        break;
      }
    }
    rec.runtime_seconds = elapsed(start);
    rec.frobenius_error = frobenius_error(sigma, in.sigma_reference);
    rec.infinity_error = infinity_error(sigma, in.sigma_reference);
    const EdgeSet est = graph->edges();
    rec.f1 = f1_score(est, in.truth_edges);
    const Index p = in.observed.p();
    rec.hub_overlap = hub_overlap(est, in.truth_edges, p, std::min(sc.hub_k, p));
    rec.converged = completed.report().converged && graph->report().converged;
    rec.lambda = graph->lambda();
    rec.edges = static_cast<Index>(est.size());
    rec.rank_used = completed.rank_used();
    rec.sigma2_hat = completed.sigma2_hat();
    for (const auto& w : completed.report().warnings) rec.warnings.push_back(w);
    for (const auto& w : graph->report().warnings) rec.warnings.push_back(w);
    out.completed.emplace(std::move(completed));
    out.graph.emplace(std::move(*graph));
  } catch (const std::exception& e) {
    rec.ok = false;
    rec.error = e.what();
    rec.runtime_seconds = elapsed(start);
  }
  return out;
}

RunResult run_replications(const ScenarioConfig& sc, const ResultSink& sink) {
  if (sc.methods.empty()) throw PreconditionError("no methods to run");
  RunResult run;
  run.replications = sc.replications;
  for (const auto& m : sc.methods) run.method_order.push_back(m.name());

  const auto R = static_cast<std::size_t>(sc.replications);
  const std::size_t M = sc.methods.size();
  std::vector<MetricsRecord> cells(R * M);
  std::vector<std::string> rep_errors(R);
  std::atomic<Index> next{0};
  std::mutex sink_mutex;

  auto worker = [&]() {
    for (Index r; (r = next++) < sc.replications;) {
      const auto ri = static_cast<std::size_t>(r);
      try {
        const ReplicationInput in = make_replication(sc, r);
        const OracleTarget oracle = oracle_target(in, sc);
        for (std::size_t m = 0; m < M; ++m) {
          MethodResult res = run_method(in, sc.methods[m], sc, oracle);
          if (sink) {
            std::lock_guard<std::mutex> lock(sink_mutex);
            sink(in, res);
          }
          cells[m * R + ri] = std::move(res.record);
        }
      } catch (const std::exception& e) {
        for (std::size_t m = 0; m < M; ++m) {
          MetricsRecord& rec = cells[m * R + ri];
          rec.method = sc.methods[m].name();
          rec.replication = r;
          rec.ok = false;
          rec.error = std::string("replication setup failed: ") + e.what();
        }
      }
    }
  };
  const Index threads = std::min<Index>(sc.threads, sc.replications);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (Index t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  run.records = std::move(cells);
  for (std::size_t m = 0; m < M; ++m) {
    Index failures = 0;
    for (std::size_t r = 0; r < R; ++r) failures += run.records[m * R + r].ok ? 0 : 1;
    run.method_failed[run.method_order[m]] = 2 * failures > sc.replications;
  }
  return run;
}

Summary summarize(const RunResult& run, const std::string& method, double MetricsRecord::*field) {
  std::vector<double> v;
  for (const auto& rec : run.records)
    if (rec.method == method && rec.ok) v.push_back(rec.*field);
  Summary s;
  s.count = static_cast<Index>(v.size());
  if (v.empty()) return s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
  if (v.size() > 1) {
    double ss = 0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / double(v.size() - 1));
  } else {
    s.sd = 0;
  }
  return s;
}

void write_metrics_csv(const std::filesystem::path& path, const RunResult& run, const MetricsWriteOptions& opts) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  if (opts.timestamp) {
    const std::time_t now = std::time(nullptr);
    char buf[64];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    out << "# generated " << buf << '\n';
  }
  out << "method,replication,metric,value\n";

  struct Column {
    const char* name;
    double MetricsRecord::*field;
  };
  std::vector<Column> columns = {{"frobenius_error", &MetricsRecord::frobenius_error},
                                 {"infinity_error", &MetricsRecord::infinity_error},
                                 {"f1", &MetricsRecord::f1},
                                 {"hub_overlap", &MetricsRecord::hub_overlap},
                                 {"lambda", &MetricsRecord::lambda},
                                 {"sigma2_hat", &MetricsRecord::sigma2_hat}};
  if (opts.timestamp) columns.push_back({"runtime_seconds", &MetricsRecord::runtime_seconds});

  for (const auto& rec : run.records) {
    const std::string prefix = rec.method + "," + std::to_string(rec.replication) + ",";
    out << prefix << "ok," << (rec.ok ? 1 : 0) << '\n';
    for (const auto& c : columns) out << prefix << c.name << ',' << format_number(rec.*(c.field)) << '\n';
    out << prefix << "converged," << (rec.converged ? 1 : 0) << '\n';
    out << prefix << "edges," << rec.edges << '\n';
    out << prefix << "rank_used," << rec.rank_used << '\n';
  }
  for (const auto& method : run.method_order) {
    for (const auto& c : columns) {
      const Summary s = summarize(run, method, c.field);
      out << method << ",mean," << c.name << ',' << format_number(s.mean) << '\n';
      out << method << ",sd," << c.name << ',' << format_number(s.sd) << '\n';
    }
    out << method << ",summary,method_failed," << (run.method_failed.at(method) ? 1 : 0) << '\n';
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace lrgq
