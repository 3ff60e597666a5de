#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <unistd.h>

#include "brvr/experiment.hpp"
#include "brvr/expression.hpp"

using namespace brvr;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("brvr_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

const char* kSmallGrid = R"yaml(
datasets:
  - synthetic: gaussian
    m: 60
    d: 4
    seed: 3
methods: [br-lsvrg, byrd-saga]
attacks: [none, ipm]
aggregators: [gm+bucket]
batchsizes: ["2"]
stepsizes: ["1/(12L)"]
seeds: [1, 2]
workers: 6
byzantine: 1
K: 40
eval_every: 10
)yaml";

// Every file under dir, keyed by relative path.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
  return out;
}

}  // namespace

TEST_CASE("expressions") {
  const std::map<std::string, double> vars{{"L", 3.0}, {"m", 8124.0}, {"mu", 0.5}};
  CHECK(evaluate_expression("1/(12L)", vars) == doctest::Approx(1.0 / 36.0));
  CHECK(evaluate_expression("5/(2L)", vars) == doctest::Approx(5.0 / 6.0));
  CHECK(evaluate_expression("-2 + 3*4", vars) == 10.0);
  CHECK(evaluate_expression("2(L+1)", vars) == 8.0);
  CHECK(resolve_batchsize("0.01m", 8124) == 82);
  CHECK(resolve_batchsize("0.01m", 1000) == 10);
  CHECK(resolve_batchsize("1", 1000) == 1);
  CHECK(resolve_batchsize("0.0001m", 100) == 1);
  CHECK_THROWS_AS(evaluate_expression("1/(12K)", vars), ExpressionError);
  CHECK_THROWS_AS(evaluate_expression("1/(12L", vars), ExpressionError);
  CHECK_THROWS_AS(evaluate_expression("", vars), ExpressionError);
}

TEST_CASE("grid parsing") {
  SUBCASE("defaults and fields") {
    const auto g = parse_grid(kSmallGrid);
    CHECK(g.K == 40);
    CHECK(g.workers == 6);
    CHECK(g.seeds == std::vector<std::uint64_t>{1, 2});
    CHECK(g.datasets.at(0).name == "gaussian");
    CHECK(g.byrd_saga_aggregators == std::vector<std::string>{"gm"});
  }
  SUBCASE("errors name the field") {
    auto message = [](const std::string& yaml) {
      try {
        parse_grid(yaml);
      } catch (const ConfigError& e) {
        return std::string(e.what());
      }
      return std::string();
    };
    CHECK(message("datasets: [a.libsvm]\n").find("'K'") != std::string::npos);
    CHECK(message("K: 10\n").find("'datasets'") != std::string::npos);
    CHECK(message("K: ten\ndatasets: [a]\n").find("K") != std::string::npos);
    CHECK(message("K: 1\ndatasets: [a]\nbogus: 1\n").find("bogus") != std::string::npos);
    CHECK(message("K: 1\ndatasets: [a]\nseeds: [x]\n").find("seeds") != std::string::npos);
    CHECK(message("K: 1\ndatasets: [{synthetic: cifar}]\n").find("datasets[0].synthetic") != std::string::npos);
    CHECK(message("K: [1\n").find("YAML") != std::string::npos);
  }
}

TEST_CASE("grid resolution") {
  const auto g = parse_grid(kSmallGrid);
  const std::vector<LoadedDataset> ds{load_dataset(g.datasets[0])};
  const auto runs = resolve_grid(g, ds);
  CHECK(runs.size() == 2 * 2 * 1 * 1 * 1 * 2);
  std::set<std::string> slugs;
  for (const auto& r : runs) slugs.insert(r.slug);
  CHECK(slugs.size() == runs.size());
  CHECK(runs.front().config.gamma == doctest::Approx(1.0 / (12.0 * ds[0].objective->L())));
  CHECK(runs.front().config.byzantine_ids == std::vector<std::size_t>{5});
  CHECK(runs.back().config.method == Method::ByrdSAGA);
  CHECK(runs.back().config.aggregator.to_string() == "gm");

  SUBCASE("bad attack is reported against its field") {
    auto bad = g;
    bad.attacks = {"gaussian"};
    CHECK_THROWS_AS(resolve_grid(bad, ds), ConfigError);
  }
  SUBCASE("duplicate entries collide") {
    auto dup = g;
    dup.seeds = {1, 1};
    CHECK_THROWS_AS(resolve_grid(dup, ds), ConfigError);
  }
  SUBCASE("stepsize sees the resolved batch size") {
    auto e = g;
    e.batchsizes = {"0.05m"};
    e.stepsizes = {"b/(12L)"};
    const auto r = resolve_grid(e, ds);
    CHECK(r.front().config.b == 3);
    CHECK(r.front().config.gamma == doctest::Approx(3.0 / (12.0 * ds[0].objective->L())));
  }
}

TEST_CASE("experiment runs") {
  const auto g = parse_grid(kSmallGrid);
  TempDir a("a"), b("b");

  auto ga = g;
  ga.output_dir = a.path;
  const auto ra = run_experiment(ga);
  CHECK(ra.exit_code() == 0);
  CHECK(ra.rows.size() == 8);
  CHECK(fs::exists(a.path / "summary.csv"));
  CHECK(fs::exists(a.path / "refcache"));
  CHECK(fs::exists(a.path / "plot_gaussian_ipm-0.1.svg"));
  CHECK(fs::exists(a.path / "plot_gaussian_none.svg"));
  for (const auto& row : ra.rows) {
    CHECK(row.status == "completed");
    CHECK(fs::exists(a.path / row.slug / "trace.csv"));
    CHECK(fs::exists(a.path / row.slug / "meta.json"));
    CHECK(read_trace_subopt(a.path / row.slug / "trace.csv").size() == 5);
  }

  SUBCASE("parallel jobs write identical files") {
    auto gb = g;
    gb.output_dir = b.path;
    RunOptions opts;
    opts.jobs = 3;
    CHECK(run_experiment(gb, opts).exit_code() == 0);
    CHECK(snapshot(a.path) == snapshot(b.path));
  }
  SUBCASE("rerun reuses the cache and reproduces the output") {
    const auto before = snapshot(a.path);
    CHECK(run_experiment(ga).exit_code() == 0);
    CHECK(snapshot(a.path) == before);
  }
  SUBCASE("filter that matches nothing") {
    auto gb = g;
    gb.output_dir = b.path;
    RunOptions opts;
    opts.filter = "no-such-run";
    const auto r = run_experiment(gb, opts);
    CHECK(r.exit_code() == 0);
    CHECK(r.rows.empty());
  }
  SUBCASE("seed override") {
    auto gb = g;
    gb.output_dir = b.path;
    RunOptions opts;
    opts.seed_override = 9;
    opts.filter = "br-lsvrg__none";
    const auto r = run_experiment(gb, opts);
    REQUIRE(r.rows.size() >= 1);
    for (const auto& row : r.rows) CHECK(row.seed == 9);
  }
}
