#include "lrgq/harness.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace lrgq;
namespace fs = std::filesystem;

namespace {

ScenarioConfig small_sbm() {
  ScenarioConfig sc;
  sc.p = 30;
  sc.communities = 3;
  sc.K = 2;
  sc.o = 20;
  sc.n = 400;
  sc.completion.rank = 3;
  sc.grid_size = 10;
  sc.seed = 5;
  return sc;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config to scenario") {
  const auto cfg = Config::parse(
      "[scenario]\ngraph = er\np = 40\nedge_prob = 0.05\nK = 3\no = 20\n"
      "[completion]\nmethods = zero, nn-spiked\nrank = 4\nnu = 0.2\n"
      "[graph]\nlambda_policy = stability\nsubsamples = 7\n"
      "[run]\nreplications = 3\nseed = 11\n",
      "s.cfg");
  const auto sc = scenario_from_config(cfg);
  CHECK(sc.graph == GraphKind::er);
  CHECK(sc.p == 40);
  CHECK(sc.K == 3);
  CHECK(sc.methods.size() == 2);
  CHECK(sc.methods[1] == MethodSpec{Solver::nn, ModelKind::spiked});
  CHECK(sc.completion.rank == 4);
  CHECK(*sc.completion.nu == 0.2);
  CHECK(sc.policy == LambdaPolicy::stability);
  CHECK(sc.stability.subsamples == 7);
  CHECK(sc.replications == 3);
  CHECK(sc.seed == 11);

  try {
    scenario_from_config(Config::parse("[scenario]\np = 10\ncolour = red\n", "s.cfg"));
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(scenario_from_config(Config::parse("[graph]\nlambda_policy = magic\n")), ParseError);
  CHECK_THROWS_AS(scenario_from_config(Config::parse("[completion]\nmethods = svd\n")), PreconditionError);
}

TEST_CASE("fully observed zero imputation reduces to the sample covariance") {
  ScenarioConfig sc = small_sbm();
  sc.K = 1;
  sc.o = sc.p;
  sc.methods = {MethodSpec{}};
  const auto run = run_replications(sc);
  REQUIRE(run.records.size() == 1);
  const auto in = make_replication(sc, 0);
  const Matrix<double> x = sample_ggm(*in.truth, sc.n, replication_seeds(sc.seed, 0).data);
  const double expected = frobenius_error(sample_covariance(x), in.truth->sigma_star());
  CHECK(run.records[0].ok);
  CHECK(std::abs(run.records[0].frobenius_error - expected) <= 1e-12);
}

TEST_CASE("harness metrics match module-level recomputation") {
  ScenarioConfig sc = small_sbm();
  sc.methods = {MethodSpec{Solver::bsvd, ModelKind::exact}, MethodSpec{}};
  Index checked = 0;
  run_replications(sc, [&](const ReplicationInput& in, const MethodResult& res) {
    REQUIRE(res.record.ok);
    const Matrix<double>& s = res.completed->sigma_tilde();
    CHECK(std::abs(res.record.frobenius_error - frobenius_error(s, in.sigma_reference)) <= 1e-12);
    CHECK(std::abs(res.record.infinity_error - infinity_error(s, in.sigma_reference)) <= 1e-12);
    CHECK(std::abs(res.record.f1 - f1_score(res.graph->edges(), in.truth_edges)) <= 1e-12);
    CHECK(res.record.f1 >= 0.0);
    CHECK(res.record.f1 <= 1.0);
    ++checked;
  });
  CHECK(checked == 2);
}

TEST_CASE("oracle matching reaches the target edge count") {
  ScenarioConfig sc = small_sbm();
  const auto in = make_replication(sc, 0);
  const auto oracle = oracle_target(in, sc);
  CHECK(oracle.edges > 0);
  const auto g = match_edge_count(in.full_covariance, oracle.edges, sc);
  CHECK(static_cast<Index>(g.edges().size()) == oracle.edges);
  CHECK(g.report().converged);
}

TEST_CASE("fixed seed reruns are byte-identical") {
  ScenarioConfig sc = small_sbm();
  sc.replications = 2;
  sc.methods = {MethodSpec{Solver::nn, ModelKind::spiked}, MethodSpec{Solver::lrf, ModelKind::exact}, MethodSpec{}};
  const fs::path dir = fs::temp_directory_path() / ("lrgq_h_" + std::to_string(std::random_device{}()));
  write_metrics_csv(dir / "a.csv", run_replications(sc), {false});
  sc.threads = 2;
  write_metrics_csv(dir / "b.csv", run_replications(sc), {false});
  const std::string a = slurp(dir / "a.csv");
  CHECK(a == slurp(dir / "b.csv"));
  CHECK(a.rfind("method,replication,metric,value\n", 0) == 0);
  CHECK(a.find("runtime_seconds") == std::string::npos);
  write_metrics_csv(dir / "c.csv", run_replications(sc), {true});
  const std::string c = slurp(dir / "c.csv");
  CHECK(c.rfind("# generated ", 0) == 0);
  CHECK(c.find("runtime_seconds") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("failing method is recorded and the run continues") {
  ScenarioConfig sc = small_sbm();
  sc.replications = 2;
  sc.completion.rank = 15;  // overlap is 10
  sc.methods = {MethodSpec{Solver::bsvd, ModelKind::exact}, MethodSpec{}};
  const auto run = run_replications(sc);
  CHECK(run.method_failed.at("bsvd-exact"));
  CHECK_FALSE(run.method_failed.at("zero"));
  CHECK_FALSE(run.records[0].ok);
  CHECK(run.records[0].error.find("overlap") != std::string::npos);
  CHECK(summarize(run, "zero", &MetricsRecord::f1).count == 2);
  CHECK(summarize(run, "bsvd-exact", &MetricsRecord::f1).count == 0);
}

TEST_CASE("masked-covariance mode keeps observed entries") {
  const fs::path dir = fs::temp_directory_path() / ("lrgq_m_" + std::to_string(std::random_device{}()));
  fs::create_directories(dir);
  const auto truth = gen_sbm_precision(20, 2, 0.5, 3);
  const Matrix<double> cov = sample_covariance(sample_ggm(truth, 500, 4));
  write_matrix_csv(dir / "cov.csv", cov);
  ScenarioConfig sc;
  sc.source = Source::covariance;
  sc.covariance_path = (dir / "cov.csv").string();
  sc.reference_lambda = 0.1;
  sc.p = 20;
  sc.K = 2;
  sc.o = 14;
  sc.hub_k = 5;
  sc.completion.rank = 3;
  const auto in = make_replication(sc, 0);
  const Matrix<double> reread = read_matrix_csv(dir / "cov.csv");
  for (Index j = 0; j < 20; ++j)
    for (Index i = 0; i < 20; ++i)
      if (in.observed.mask()(i, j)) CHECK(in.observed.values()(i, j) == reread(i, j));
  CHECK(in.reference_graph);
  sc.methods = {MethodSpec{Solver::bsvd, ModelKind::spiked}};
  const auto run = run_replications(sc);
  CHECK(run.records[0].ok);
  CHECK(run.records[0].hub_overlap >= 0.0);
  fs::remove_all(dir);
}

TEST_CASE("stability policy and best-f1 policy run") {
  ScenarioConfig sc = small_sbm();
  sc.methods = {MethodSpec{Solver::bsvd, ModelKind::spiked}};
  sc.policy = LambdaPolicy::stability;
  sc.stability.subsamples = 4;
  sc.grid_size = 6;
  CHECK(run_replications(sc).records[0].ok);
  sc.stability_mode = StabilityMode::post_completion;
  CHECK(run_replications(sc).records[0].ok);
  sc.policy = LambdaPolicy::oracle_best_f1;
  CHECK(run_replications(sc).records[0].ok);
  sc.sampling = Sampling::blocks;
  sc.policy = LambdaPolicy::fixed;
  CHECK(run_replications(sc).records[0].ok);
}
