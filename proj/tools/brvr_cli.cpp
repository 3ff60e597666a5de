// Command-line front end: experiment grids, reference solutions, aggregator
// audits, complexity bounds and synthetic data generation.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <iostream>
#include <memory>

#include "brvr/aggregation.hpp"
#include "brvr/analysis.hpp"
#include "brvr/data_io.hpp"
#include "brvr/experiment.hpp"
#include "brvr/rng.hpp"

using namespace brvr;
using nlohmann::json;

namespace {

std::filesystem::path default_output_dir() {
  if (const char* env = std::getenv("BRVR_OUTPUT_DIR"); env && *env) return env;
  return "results";
}

int cmd_run(const std::string& grid_path, const std::string& output_dir, std::size_t jobs,
            const std::optional<std::uint64_t>& seed, const std::string& filter, bool quiet) {
  ExperimentGrid grid = load_grid(grid_path);
  if (!output_dir.empty()) grid.output_dir = output_dir;
  else if (grid.output_dir.empty()) grid.output_dir = default_output_dir();
  RunOptions opts;
  opts.jobs = jobs;
  opts.seed_override = seed;
  opts.filter = filter;
  opts.log = quiet ? nullptr : &std::cerr;
  const ExperimentResult res = run_experiment(grid, opts);
  std::cerr << res.rows.size() << " runs, " << res.errors << " errors; summary in "
            << (grid.output_dir / "summary.csv").string() << "\n";
  return res.exit_code();
}

int cmd_solve_ref(const std::string& path, std::optional<double> l2, double tol, std::optional<std::size_t> count,
                  std::uint64_t sub_seed, std::optional<std::size_t> dim, bool with_x) {
  ParseOptions popts;
  popts.dim = dim;
  Dataset ds = load_libsvm(path, popts);
  if (count) ds = subsample(ds, *count, sub_seed);
  auto data = std::make_shared<const Dataset>(std::move(ds));
  const LogisticObjective obj = l2 ? LogisticObjective(data, *l2) : LogisticObjective::with_default_l2(data);
  const ReferenceSolution ref = solve_reference(obj, tol);
  json j{{"m", obj.size()},         {"d", obj.dim()},        {"L", obj.L()},
         {"mu", obj.mu()},          {"l2", obj.l2()},        {"f_star", ref.f_star},
         {"grad_norm", ref.grad_norm}, {"tol", tol},         {"iterations", ref.iterations}};
  if (with_x) j["x_star"] = ref.x_star;
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_audit(const std::string& agg_text, std::size_t honest, std::size_t byzantine, std::size_t dim,
              double scale, std::size_t seeds, std::uint64_t master) {
  AggregatorSpec spec = AggregatorSpec::parse(agg_text);
  const double delta = static_cast<double>(byzantine) / static_cast<double>(honest + byzantine);
  if (spec.bucket_size && *spec.bucket_size == 0) spec.bucket_size = default_bucket_size(spec.base, delta);
  if (spec.base == BaseRule::Krum) spec.krum_byzantine_count = byzantine;

  std::vector<std::size_t> honest_idx(honest);
  for (std::size_t i = 0; i < honest; ++i) honest_idx[i] = i;
  double sum_c = 0.0, sum_err = 0.0, sum_sigma = 0.0;
  std::size_t counted = 0;
  for (std::size_t s = 0; s < seeds; ++s) {
    Rng rng(derive_seed(master, hash_tag("audit"), s));
    std::normal_distribution<double> normal;
    std::vector<Vector> all(honest + byzantine, Vector(dim));
    for (std::size_t i = 0; i < honest; ++i)
      for (double& v : all[i]) v = normal(rng);
    for (std::size_t i = honest; i < all.size(); ++i) std::fill(all[i].begin(), all[i].end(), scale);
    const RobustnessAudit a = audit_robustness(spec, all, honest_idx, delta, derive_seed(master, hash_tag("bucket"), s));
    sum_err += a.measured_err2;
    sum_sigma += a.measured_sigma2;
    if (a.implied_c) {
      sum_c += *a.implied_c;
      ++counted;
    }
  }
  json j{{"aggregator", spec.to_string()},
         {"honest", honest},
         {"byzantine", byzantine},
         {"delta", delta},
         {"dim", dim},
         {"byzantine_value", scale},
         {"seeds", seeds},
         {"mean_err2", sum_err / static_cast<double>(seeds)},
         {"mean_sigma2", sum_sigma / static_cast<double>(seeds)},
         {"mean_implied_c", counted ? sum_c / static_cast<double>(counted) : 0.0}};
  std::cout << j.dump(2) << "\n";
  return 0;
}

json report_json(const ComplexityReport& r) {
  json j{{"method", std::string(to_string(r.method))},
         {"iterations_bound", r.iterations_bound},
         {"oracle_bound", r.oracle_bound},
         {"inputs",
          {{"L", r.inputs.L},
           {"mu", r.inputs.mu},
           {"m", r.inputs.m},
           {"n", r.inputs.n},
           {"b", r.inputs.b},
           {"c", r.inputs.c},
           {"delta", r.inputs.delta},
           {"eps", r.inputs.eps}}},
         {"note", r.note}};
  if (r.method == BoundMethod::BRLSVRG) j["regime_batchsize"] = r.regime_batchsize;
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Byzantine-robust variance-reduced optimization simulator"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run an experiment grid");
  std::string grid_path, output_dir, filter;
  std::size_t jobs = 1;
  std::optional<std::uint64_t> seed_override;
  bool quiet = false;
  run->add_option("grid", grid_path, "Grid file (YAML)")->required()->check(CLI::ExistingFile);
  run->add_option("--output-dir", output_dir, "Output directory (overrides the grid file)");
  run->add_option("--jobs,-j", jobs, "Concurrent runs")->check(CLI::PositiveNumber);
  run->add_option("--seed-override", seed_override, "Replace the seed axis with this single seed");
  run->add_option("--filter", filter, "Only runs whose slug contains this text");
  run->add_flag("--quiet,-q", quiet, "No progress output");

  auto* solve = app.add_subcommand("solve-ref", "Solve for the reference minimizer of a LIBSVM dataset");
  std::string data_path;
  std::optional<double> l2;
  double tol = 1e-12;
  std::optional<std::size_t> sub_count, dim;
  std::uint64_t sub_seed = 7;
  bool with_x = false;
  solve->add_option("dataset", data_path, "LIBSVM file (.gz allowed)")->required()->check(CLI::ExistingFile);
  solve->add_option("--l2", l2, "Regularizer (default L0/1000)");
  solve->add_option("--tol", tol, "Gradient-norm tolerance");
  solve->add_option("--subsample", sub_count, "Rows to keep");
  solve->add_option("--subsample-seed", sub_seed, "Subsample seed");
  solve->add_option("--dim", dim, "Feature dimension override");
  solve->add_flag("--print-x", with_x, "Include x* in the output");

  auto* audit = app.add_subcommand("audit-agg", "Synthetic robustness audit of an aggregation rule");
  std::string agg_text = "gm+bucket:2";
  std::size_t honest = 13, byz = 3, adim = 10, aseeds = 200;
  double scale = 1e6;
  std::uint64_t amaster = 1;
  audit->add_option("--aggregator", agg_text, "Rule, e.g. mean, gm, cm, krum, gm+bucket:2");
  audit->add_option("--honest", honest, "Honest vectors, drawn from N(0, I)");
  audit->add_option("--byzantine", byz, "Byzantine vectors, all equal to value * ones");
  audit->add_option("--dim", adim, "Dimension");
  audit->add_option("--value", scale, "Byzantine coordinate value");
  audit->add_option("--seeds", aseeds, "Number of draws");
  audit->add_option("--seed", amaster, "Master seed");

  auto* bounds = app.add_subcommand("bounds", "Complexity bounds (constants set to 1), as JSON");
  std::string method = "all";
  ComplexityInputs in;
  in.n = 16;
  bounds->add_option("--method", method, "br-lsvrg, byrd-saga, byz-vr-marina or all");
  bounds->add_option("--L", in.L, "Smoothness constant")->required();
  bounds->add_option("--mu", in.mu, "Strong convexity constant")->required();
  bounds->add_option("--m", in.m, "Local dataset size")->required();
  bounds->add_option("--n", in.n, "Number of workers (default 16)");
  bounds->add_option("--b", in.b, "Batchsize");
  bounds->add_option("--c", in.c, "Aggregator constant");
  bounds->add_option("--delta", in.delta, "Byzantine fraction");
  bounds->add_option("--eps", in.eps, "Target accuracy");

  auto* gen = app.add_subcommand("gen-data", "Write a synthetic dataset in LIBSVM format");
  std::string kind = "mushrooms_like", out_path;
  std::size_t gm = 0, gd = 10;
  std::uint64_t gseed = 1;
  gen->add_option("--kind", kind, "mushrooms_like or gaussian");
  gen->add_option("--m", gm, "Rows (default 8124 / 200)");
  gen->add_option("--d", gd, "Features (gaussian only)");
  gen->add_option("--seed", gseed, "Seed");
  gen->add_option("--output,-o", out_path, "Output file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(grid_path, output_dir, jobs, seed_override, filter, quiet);
    if (*solve) return cmd_solve_ref(data_path, l2, tol, sub_count, sub_seed, dim, with_x);
    if (*audit) return cmd_audit(agg_text, honest, byz, adim, scale, aseeds, amaster);
    if (*bounds) {
      json out;
      if (method == "all") {
        out = json::array();
        for (auto m : {BoundMethod::BRLSVRG, BoundMethod::ByrdSAGA, BoundMethod::ByzVRMARINA})
          out.push_back(report_json(complexity_bounds(m, in)));
      } else {
        out = report_json(complexity_bounds(parse_bound_method(method), in));
      }
      std::cout << out.dump(2) << "\n";
      return 0;
    }
    if (*gen) {
      Dataset ds;
      if (kind == "mushrooms_like") ds = gm ? make_mushrooms_like(gseed, gm) : make_mushrooms_like(gseed);
      else if (kind == "gaussian") ds = make_gaussian_dataset(gm ? gm : 200, gd, gseed);
      else throw std::invalid_argument("unknown kind '" + kind + "'");
      save_libsvm(ds, out_path);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
