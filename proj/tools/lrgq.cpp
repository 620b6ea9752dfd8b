// Command-line front end: simulate | estimate-cov | complete | graph | select | evaluate | pipeline.

#include "lrgq/harness.hpp"
#include "lrgq/io.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace fs = std::filesystem;
using namespace lrgq;

namespace {

std::string quote(std::string s) {
  for (char& c : s)
    if (c == '"' || c == '\n') c = '\'';
  return "\"" + s + "\"";
}

int report_error(const std::string& kind, const std::string& message, const std::string& file = "", Index line = 0) {
  std::cerr << "error: kind=" << kind;
  if (!file.empty()) std::cerr << " file=" << file << " line=" << line;
  std::cerr << " message=" << quote(message) << '\n';
  return kind == "parse" || kind == "usage" ? 2 : 1;
}

std::vector<Index> parse_index_list(const std::string& text) {
  std::vector<Index> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    const long long v = std::stoll(item, &used);
    if (used != item.size()) throw PreconditionError("not an integer list: '" + text + "'");
    out.push_back(static_cast<Index>(v));
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    const double v = std::stod(item, &used);
    if (used != item.size()) throw PreconditionError("not a number list: '" + text + "'");
    out.push_back(v);
  }
  return out;
}

ModelKind parse_mode(const std::string& s) {
  if (s == "exact") return ModelKind::exact;
  if (s == "spiked") return ModelKind::spiked;
  throw PreconditionError("mode must be exact or spiked");
}

void write_selection_rows(const fs::path& path, const std::vector<std::pair<double, double>>& rows, double selected) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << "candidate,score,selected\n";
  for (const auto& [c, s] : rows)
    out << format_number(c) << ',' << format_number(s) << ',' << (c == selected ? 1 : 0) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-rank graph quilting: covariance completion and graph recovery from overlapping blocks"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Draw one replication of a scenario and write its files");
  std::string sim_config, sim_out;
  Index sim_rep = 0;
  sim->add_option("--config", sim_config, "Scenario config file")->required()->check(CLI::ExistingFile);
  sim->add_option("--out", sim_out, "Output directory")->required();
  sim->add_option("--replication", sim_rep, "Replication index (seeds derive from seed + index)");

  // estimate-cov
  auto* est = app.add_subcommand("estimate-cov", "Pooled block covariance from a manifest of block CSVs");
  std::string est_manifest, est_out, est_mask_out;
  Index est_p = 0;
  bool est_repair = false;
  double est_floor = -1;
  est->add_option("--manifest", est_manifest, "Manifest: '<csv> <id>,<id>,...' per line")
      ->required()
      ->check(CLI::ExistingFile);
  est->add_option("--p", est_p, "Number of nodes (default: largest id)");
  est->add_option("--out", est_out, "Covariance CSV (NaN off the observed set)")->required();
  est->add_option("--mask-out", est_mask_out, "Observed-pair mask CSV");
  est->add_flag("--psd-repair", est_repair, "Project the observed entries to a PSD-completable set");
  est->add_option("--floor", est_floor, "Eigenvalue floor for --psd-repair (default 1e-6 mean diagonal)");

  // complete
  auto* cmp = app.add_subcommand("complete", "Complete an observed covariance");
  std::string cmp_method = "bsvd-exact", cmp_in, cmp_mask, cmp_out, cmp_order = "manifest", cmp_noise = "estimate";
  std::string cmp_nu = "auto";
  Index cmp_rank = 5;
  bool cmp_preserve = false;
  cmp->add_option("--method", cmp_method, "zero | bsvd | nn | lrf, optionally suffixed -exact or -spiked");
  cmp->add_option("--rank", cmp_rank, "Target rank (bsvd, lrf; nn default penalty)");
  cmp->add_option("--nu", cmp_nu, "Nuclear penalty or 'auto'");
  cmp->add_option("--noise-level", cmp_noise, "bsvd-spiked noise level or 'estimate'");
  cmp->add_option("--order", cmp_order, "bsvd block order: manifest | greedy");
  cmp->add_flag("--preserve-observed", cmp_preserve, "Keep observed entries in the output");
  cmp->add_option("--in", cmp_in, "Observed covariance CSV")->required()->check(CLI::ExistingFile);
  cmp->add_option("--mask", cmp_mask, "Mask CSV (default: finite entries)")->check(CLI::ExistingFile);
  cmp->add_option("--out", cmp_out, "Completed covariance CSV")->required();

  // graph
  auto* gr = app.add_subcommand("graph", "Graphical lasso on a covariance");
  std::string gr_in, gr_out, gr_theta;
  double gr_lambda = 0.1;
  gr->add_option("--in", gr_in, "Covariance CSV")->required()->check(CLI::ExistingFile);
  gr->add_option("--lambda", gr_lambda, "Penalty")->required();
  gr->add_option("--out", gr_out, "Edge list CSV")->required();
  gr->add_option("--theta-out", gr_theta, "Precision matrix CSV");

  // select
  auto* sel = app.add_subcommand("select", "Hyperparameter selection tables");
  std::string sel_what, sel_in, sel_mask, sel_out, sel_grid, sel_solver = "bsvd", sel_mode = "exact";
  std::string sel_manifest, sel_method = "zero";
  std::string sel_ranks = "1,2,3,4,5";
  Index sel_folds = 5, sel_subsamples = 20, sel_rank = 5;
  double sel_fraction = 0.05, sel_threshold = 0.05;
  std::uint64_t sel_seed = 1;
  sel->add_option("--what", sel_what, "rank | nu | lambda")->required();
  sel->add_option("--in", sel_in, "Observed covariance CSV (rank, nu; lambda without --manifest)");
  sel->add_option("--mask", sel_mask, "Mask CSV")->check(CLI::ExistingFile);
  sel->add_option("--manifest", sel_manifest, "Block data manifest (lambda: subsample rows)");
  sel->add_option("--out", sel_out, "Selection table CSV")->required();
  sel->add_option("--ranks", sel_ranks, "Candidate ranks");
  sel->add_option("--solver", sel_solver, "Rank solver: bsvd | lrf");
  sel->add_option("--mode", sel_mode, "exact | spiked");
  sel->add_option("--grid", sel_grid, "Candidate values for nu or lambda (comma separated)");
  sel->add_option("--folds", sel_folds, "CV folds");
  sel->add_option("--holdout-fraction", sel_fraction, "CV holdout fraction");
  sel->add_option("--subsamples", sel_subsamples, "Stability subsamples");
  sel->add_option("--threshold", sel_threshold, "Stability instability threshold");
  sel->add_option("--method", sel_method, "Completion method inside stability selection");
  sel->add_option("--rank", sel_rank, "Completion rank inside stability selection");
  sel->add_option("--seed", sel_seed, "Seed");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Compare an estimate against a reference");
  std::string ev_est, ev_truth, ev_est_cov, ev_truth_cov;
  Index ev_hubs = 0, ev_p = 0;
  ev->add_option("--est", ev_est, "Estimated edge list")->check(CLI::ExistingFile);
  ev->add_option("--truth", ev_truth, "Reference edge list")->check(CLI::ExistingFile);
  ev->add_option("--est-cov", ev_est_cov, "Estimated covariance CSV")->check(CLI::ExistingFile);
  ev->add_option("--truth-cov", ev_truth_cov, "Reference covariance CSV")->check(CLI::ExistingFile);
  ev->add_option("--hubs", ev_hubs, "Report top-k hub overlap (needs --p)");
  ev->add_option("--p", ev_p, "Number of nodes for hub analysis");

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "Replicated end-to-end runs with metrics");
  std::string pipe_config, pipe_out, pipe_methods;
  Index pipe_reps = 0;
  Index pipe_threads = 0;
  std::int64_t pipe_seed = -1;
  bool pipe_no_ts = false, pipe_artifacts = true;
  pipe->add_option("--config", pipe_config, "Scenario config file")->required()->check(CLI::ExistingFile);
  pipe->add_option("--method", pipe_methods, "Comma-separated methods (overrides the config)");
  pipe->add_option("--out", pipe_out, "Output directory")->required();
  pipe->add_option("--replications", pipe_reps, "Replications (overrides the config)");
  pipe->add_option("--seed", pipe_seed, "Seed (overrides the config)");
  pipe->add_option("--threads", pipe_threads, "Worker threads (overrides the config)");
  pipe->add_flag("--no-timestamp", pipe_no_ts, "Omit the timestamp header and runtime rows");
  pipe->add_flag("!--no-artifacts", pipe_artifacts, "Skip per-method matrices for replication 0");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what());
  }

  try {
    if (sim->parsed()) {
      const ScenarioConfig sc = scenario_from_config(Config::load(sim_config));
      const ReplicationInput in = make_replication(sc, sim_rep);
      const fs::path out = sim_out;
      if (in.truth) {
        write_matrix_csv(out / "theta_star.csv", in.truth->theta_star());
        write_matrix_csv(out / "sigma_star.csv", in.truth->sigma_star());
        write_edge_list(out / "truth_edges.csv", in.truth_edges, &in.truth->theta_star());
      } else {
        write_edge_list(out / "truth_edges.csv", in.truth_edges);
      }
      write_matrix_csv(out / "full_cov.csv", in.full_covariance);
      write_matrix_csv(out / "cov.csv", in.observed.values());
      write_mask_csv(out / "mask.csv", in.observed.mask());
      if (in.blocks) write_manifest(out, "manifest.txt", *in.blocks);
    } else if (est->parsed()) {
      const auto data = read_manifest(est_manifest, est_p > 0 ? std::optional<Index>(est_p) : std::nullopt);
      auto obs = compute_block_covariance(data);
      for (Index v : obs.zero_variance_nodes())
        std::cerr << "warning: node " << v + 1 << " has zero variance\n";
      if (est_repair) obs = est_floor >= 0 ? project_psd(obs, est_floor) : project_psd(obs);
      write_matrix_csv(est_out, obs.values());
      if (!est_mask_out.empty()) write_mask_csv(est_mask_out, obs.mask());
    } else if (cmp->parsed()) {
      const auto obs = read_observed_covariance(cmp_in, cmp_mask.empty() ? std::nullopt
                                                                         : std::optional<fs::path>(cmp_mask));
      CompletionParams params;
      params.rank = cmp_rank;
      if (cmp_nu != "auto") params.nu = parse_double_list(cmp_nu).at(0);
      if (cmp_noise != "estimate") params.sigma2 = parse_double_list(cmp_noise).at(0);
      if (cmp_order == "greedy") params.order = BlockOrder::greedy_overlap;
      else if (cmp_order != "manifest") throw PreconditionError("--order must be manifest or greedy");
      params.preserve_observed = cmp_preserve;
      const auto done = complete_covariance(obs, MethodSpec::parse(cmp_method), params);
      for (const auto& w : done.report().warnings) std::cerr << "warning: " << w << '\n';
      write_matrix_csv(cmp_out, done.sigma_tilde());
    } else if (gr->parsed()) {
      const Matrix<double> sigma = read_matrix_csv(gr_in);
      const auto g = graphical_lasso(sigma, gr_lambda);
      for (const auto& w : g.report().warnings) std::cerr << "warning: " << w << '\n';
      write_edge_list(gr_out, g.edges(), &g.theta());
      if (!gr_theta.empty()) write_matrix_csv(gr_theta, g.theta());
    } else if (sel->parsed()) {
      const std::optional<fs::path> mask = sel_mask.empty() ? std::nullopt : std::optional<fs::path>(sel_mask);
      if (sel_what == "rank") {
        if (sel_in.empty()) throw PreconditionError("select --what rank needs --in");
        const auto obs = read_observed_covariance(sel_in, mask);
        const Solver solver = MethodSpec::parse(sel_solver).solver;
        const auto res = select_rank_bic(obs, parse_index_list(sel_ranks), parse_mode(sel_mode), solver);
        std::vector<std::pair<double, double>> rows;
        for (const auto& r : res.table)
          if (r.feasible) rows.push_back({double(r.rank), r.score});
          else std::cerr << "note: rank " << r.rank << " skipped: " << r.note << '\n';
        write_selection_rows(sel_out, rows, double(res.selected));
        std::cout << "selected=" << res.selected << '\n';
      } else if (sel_what == "nu") {
        if (sel_in.empty()) throw PreconditionError("select --what nu needs --in");
        const auto obs = read_observed_covariance(sel_in, mask);
        CvOptions cv;
        cv.folds = sel_folds;
        cv.holdout_fraction = sel_fraction;
        cv.seed = sel_seed;
        cv.mode = parse_mode(sel_mode);
        std::vector<double> grid = sel_grid.empty() ? std::vector<double>{} : parse_double_list(sel_grid);
        if (grid.empty()) {
          const double top = default_nu(obs, 0);
          for (int k = 0; k < 8; ++k) grid.push_back(top * std::pow(10.0, -0.5 * k));
        }
        const auto res = select_nu_cv(obs, grid, cv);
        std::vector<std::pair<double, double>> rows;
        for (const auto& r : res.table) rows.push_back({r.nu, r.mean_error});
        write_selection_rows(sel_out, rows, res.selected);
        std::cout << "selected=" << format_number(res.selected) << '\n';
      } else if (sel_what == "lambda") {
        const MethodSpec method = MethodSpec::parse(sel_method);
        CompletionParams params;
        params.rank = sel_rank;
        Completer<double> completer = [&](const ObservedCovariance<double>& o) {
          return complete_covariance(o, method, params);
        };
        Resampler<double> resample;
        Matrix<double> base;
        if (!sel_manifest.empty()) {
          const auto data = read_manifest(sel_manifest);
          base = completer(compute_block_covariance(data)).sigma_tilde();
          resample = block_subsample_resampler(data, completer, 0.8, sel_seed);
        } else {
          if (sel_in.empty()) throw PreconditionError("select --what lambda needs --manifest or --in");
          const auto obs = read_observed_covariance(sel_in, mask);
          base = completer(obs).sigma_tilde();
          resample = jackknife_resampler(obs, completer, 0.05, sel_seed);
        }
        StabilityOptions so;
        so.subsamples = sel_subsamples;
        so.threshold = sel_threshold;
        const auto grid = sel_grid.empty() ? lambda_grid(base, 20, 0.05) : parse_double_list(sel_grid);
        const auto res = select_lambda_stability(resample, grid, so);
        for (const auto& w : res.warnings) std::cerr << "warning: " << w << '\n';
        std::vector<std::pair<double, double>> rows;
        for (const auto& r : res.curve) rows.push_back({r.lambda, r.monotone_instability});
        write_selection_rows(sel_out, rows, res.selected);
        std::cout << "selected=" << format_number(res.selected) << '\n';
      } else {
        throw PreconditionError("--what must be rank, nu or lambda");
      }
    } else if (ev->parsed()) {
      bool any = false;
      if (!ev_est.empty() || !ev_truth.empty()) {
        if (ev_est.empty() || ev_truth.empty()) throw PreconditionError("--est and --truth go together");
        const EdgeSet a = edges_of(read_edge_list(ev_est)), b = edges_of(read_edge_list(ev_truth));
        const F1Result f = f1_detail(a, b);
        std::cout << "f1=" << format_number(f.f1) << " precision=" << format_number(f.precision)
                  << " recall=" << format_number(f.recall) << (f.both_empty ? " both_empty=1" : "") << '\n';
        if (ev_hubs > 0) {
          if (ev_p < 1) throw PreconditionError("--hubs needs --p");
          std::cout << "hub_overlap=" << format_number(hub_overlap(a, b, ev_p, ev_hubs)) << '\n';
        }
        any = true;
      }
      if (!ev_est_cov.empty() || !ev_truth_cov.empty()) {
        if (ev_est_cov.empty() || ev_truth_cov.empty())
          throw PreconditionError("--est-cov and --truth-cov go together");
        const Matrix<double> a = read_matrix_csv(ev_est_cov), b = read_matrix_csv(ev_truth_cov);
        std::cout << "frobenius_error=" << format_number(frobenius_error(a, b))
                  << " infinity_error=" << format_number(infinity_error(a, b)) << '\n';
        any = true;
      }
      if (!any) throw PreconditionError("evaluate needs --est/--truth or --est-cov/--truth-cov");
    } else if (pipe->parsed()) {
      Config cfg = Config::load(pipe_config);
      if (!pipe_methods.empty()) cfg.set("completion", "methods", pipe_methods);
      if (pipe_reps > 0) cfg.set("run", "replications", std::to_string(pipe_reps));
      if (pipe_seed >= 0) cfg.set("run", "seed", std::to_string(pipe_seed));
      if (pipe_threads > 0) cfg.set("run", "threads", std::to_string(pipe_threads));
      const ScenarioConfig sc = scenario_from_config(cfg);
      const fs::path out = pipe_out;
      fs::create_directories(out);
      ResultSink sink;
      if (pipe_artifacts)
        sink = [&](const ReplicationInput& in, const MethodResult& res) {
          if (in.replication != 0) return;
          if (res.record.method == sc.methods.front().name())
            write_edge_list(out / "truth_edges.csv", in.truth_edges);
          if (!res.completed) return;
          const std::string m = res.record.method;
          write_matrix_csv(out / ("sigma_tilde_" + m + ".csv"), res.completed->sigma_tilde());
          write_matrix_csv(out / ("theta_" + m + ".csv"), res.graph->theta());
          write_edge_list(out / ("edges_" + m + ".csv"), res.graph->edges(), &res.graph->theta());
        };
      const RunResult run = run_replications(sc, sink);
      write_metrics_csv(out / "metrics.csv", run, MetricsWriteOptions{!pipe_no_ts});
      for (const auto& rec : run.records)
        if (!rec.ok)
          std::cerr << "warning: " << rec.method << " replication " << rec.replication << " failed: " << rec.error
                    << '\n';
      for (const auto& [m, failed] : run.method_failed)
        if (failed) std::cerr << "warning: method " << m << " failed in more than half of the replications\n";
      for (const auto& m : run.method_order) {
        const Summary s = summarize(run, m, &MetricsRecord::f1);
        std::cout << m << " f1_mean=" << format_number(s.mean) << " f1_sd=" << format_number(s.sd) << '\n';
      }
    }
  } catch (const ParseError& e) {
    return report_error("parse", e.message(), e.file(), e.line());
  } catch (const Error& e) {
    return report_error(e.kind(), e.what());
  } catch (const std::exception& e) {
    return report_error("runtime", e.what());
  }
  return 0;
}
