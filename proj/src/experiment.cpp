#include "brvr/experiment.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "brvr/expression.hpp"
#include "brvr/svg_plot.hpp"

namespace brvr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string shortest(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

template <class T>
T scalar(const YAML::Node& node, const std::string& field) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("grid field '" + field + "' has the wrong type");
  }
}

std::vector<std::string> string_list(const YAML::Node& node, const std::string& field) {
  std::vector<std::string> out;
  if (node.IsScalar()) {
    out.push_back(node.as<std::string>());
  } else if (node.IsSequence()) {
    for (const auto& item : node) out.push_back(scalar<std::string>(item, field));
  } else {
    throw ConfigError("grid field '" + field + "' must be a value or a list");
  }
  if (out.empty()) throw ConfigError("grid field '" + field + "' is empty");
  return out;
}

DatasetEntry parse_dataset(const YAML::Node& node, std::size_t index) {
  const std::string field = "datasets[" + std::to_string(index) + "]";
  DatasetEntry e;
  if (node.IsScalar()) {
    e.path = node.as<std::string>();
  } else if (node.IsMap()) {
    for (const auto& kv : node) {
      const auto key = kv.first.as<std::string>();
      const auto& v = kv.second;
      if (key == "name") e.name = scalar<std::string>(v, field + ".name");
      else if (key == "path") e.path = scalar<std::string>(v, field + ".path");
      else if (key == "synthetic") e.synthetic = scalar<std::string>(v, field + ".synthetic");
      else if (key == "m") e.synthetic_m = scalar<std::size_t>(v, field + ".m");
      else if (key == "d") e.synthetic_d = scalar<std::size_t>(v, field + ".d");
      else if (key == "seed") e.synthetic_seed = scalar<std::uint64_t>(v, field + ".seed");
      else if (key == "dim") e.dim = scalar<std::size_t>(v, field + ".dim");
      else if (key == "subsample") e.subsample = scalar<std::size_t>(v, field + ".subsample");
      else if (key == "subsample_seed") e.subsample_seed = scalar<std::uint64_t>(v, field + ".subsample_seed");
      else throw ConfigError("unknown key '" + key + "' in " + field);
    }
  } else {
    throw ConfigError(field + " must be a path or a mapping");
  }
  if (!e.path && e.synthetic.empty()) throw ConfigError(field + " needs 'path' or 'synthetic'");
  if (!e.path && e.synthetic != "mushrooms_like" && e.synthetic != "gaussian")
    throw ConfigError(field + ".synthetic must be mushrooms_like or gaussian");
  if (e.name.empty()) e.name = e.path ? e.path->stem().string() : e.synthetic;
  if (e.subsample) e.name += "_sub" + std::to_string(*e.subsample);
  return e;
}

struct DatasetStats {
  double sigma2_x0 = 0.0;
  double sigma2_star = 0.0;
};

json config_json(const ResolvedRun& r, const LoadedDataset& ds, const ReferenceSolution& ref,
                 const DatasetStats& stats, const RunTrace& trace) {
  const auto& c = r.config;
  const auto& obj = *ds.objective;
  json j;
  j["slug"] = r.slug;
  j["dataset"] = {{"name", r.dataset},
                  {"m", obj.size()},
                  {"d", obj.dim()},
                  {"content_hash", hex64(ds.data->content_hash())},
                  {"features_normalized", false}};
  if (ds.entry.path) j["dataset"]["path"] = ds.entry.path->string();
  if (ds.entry.subsample) j["dataset"]["subsample"] = {{"count", *ds.entry.subsample}, {"seed", ds.entry.subsample_seed}};
  j["constants"] = {{"L", obj.L()}, {"mu", obj.mu()}, {"l2", obj.l2()}, {"gram_lambda_max", obj.gram_lambda_max()}};
  j["config"] = {{"method", std::string(to_string(c.method))},
                 {"gamma", c.gamma},
                 {"gamma_expr", r.stepsize_expr},
                 {"b", c.b},
                 {"b_expr", r.batchsize_expr},
                 {"p", trace.p},
                 {"n", c.n},
                 {"byzantine_ids", c.byzantine_ids},
                 {"aggregator", c.aggregator.to_string()},
                 {"aggregator_resolved", trace.aggregator.to_string()},
                 {"attack", c.attack.to_string()},
                 {"K", c.K},
                 {"master_seed", c.master_seed},
                 {"eval_every", c.eval_every},
                 {"psi_variant", c.psi_variant == LyapunovVariant::Thm1 ? "thm1" : "thm2"}};
  j["reference"] = {{"f_star", ref.f_star}, {"grad_norm", ref.grad_norm}, {"tol", ref.solver_tol}};
  j["sigma2_estimates"] = {{"at_x0", stats.sigma2_x0}, {"at_x_star", stats.sigma2_star}};
  j["notes"] = {"features are used as read; no normalization is applied",
                "Byzantine bf/lf workers switch reference points with the same probability p as honest workers",
                "the output is the last iterate x^K"};
  j["result"] = {{"status", trace.status == RunStatus::Completed ? "completed" : "diverged"},
                 {"message", trace.message},
                 {"warnings", trace.warnings},
                 {"rounds_completed", trace.rounds_completed},
                 {"honest_oracle_calls", trace.honest_calls},
                 {"byzantine_oracle_calls", trace.byzantine_calls},
                 {"diagnostic_oracle_calls", trace.diagnostic_calls}};
  // Wall time only when timing was requested, so meta.json stays reproducible.
  if (c.record_time) j["result"]["wall_time_s"] = trace.wall_time_s;
  return j;
}

void write_text_atomically(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
  }
  fs::rename(tmp, path);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

ExperimentGrid parse_grid(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("grid file is not valid YAML: ") + e.what());
  }
  if (!root.IsMap()) throw ConfigError("grid file must be a mapping");

  ExperimentGrid g;
  bool have_k = false;
  for (const auto& kv : root) {
    const auto key = kv.first.as<std::string>();
    const auto& v = kv.second;
    if (key == "datasets") {
      if (!v.IsSequence()) throw ConfigError("grid field 'datasets' must be a list");
      for (std::size_t i = 0; i < v.size(); ++i) g.datasets.push_back(parse_dataset(v[i], i));
    } else if (key == "methods") g.methods = string_list(v, key);
    else if (key == "attacks") g.attacks = string_list(v, key);
    else if (key == "aggregators") g.aggregators = string_list(v, key);
    else if (key == "byrd_saga_aggregators") g.byrd_saga_aggregators = string_list(v, key);
    else if (key == "batchsizes") g.batchsizes = string_list(v, key);
    else if (key == "stepsizes") g.stepsizes = string_list(v, key);
    else if (key == "seeds") {
      g.seeds.clear();
      for (const auto& s : string_list(v, key)) {
        std::uint64_t seed = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), seed);
        if (ec != std::errc() || ptr != s.data() + s.size()) throw ConfigError("grid field 'seeds' has a bad entry '" + s + "'");
        g.seeds.push_back(seed);
      }
    } else if (key == "workers") g.workers = scalar<std::size_t>(v, key);
    else if (key == "byzantine") g.byzantine = scalar<std::size_t>(v, key);
    else if (key == "K") {
      g.K = scalar<std::size_t>(v, key);
      have_k = true;
    } else if (key == "eval_every") g.eval_every = scalar<std::size_t>(v, key);
    else if (key == "p") g.p = scalar<std::string>(v, key);
    else if (key == "psi_variant") g.psi_variant = scalar<std::string>(v, key);
    else if (key == "track_psi") g.track_psi = scalar<bool>(v, key);
    else if (key == "record_time") g.record_time = scalar<bool>(v, key);
    else if (key == "ref_tol") g.ref_tol = scalar<double>(v, key);
    else if (key == "output_dir") g.output_dir = scalar<std::string>(v, key);
    else throw ConfigError("unknown grid field '" + key + "'");
  }
  if (!have_k) throw ConfigError("grid field 'K' is required");
  if (g.datasets.empty()) throw ConfigError("grid field 'datasets' is required");
  if (g.psi_variant != "thm1" && g.psi_variant != "thm2") throw ConfigError("grid field 'psi_variant' must be thm1 or thm2");
  if (g.byzantine > g.workers) throw ConfigError("grid field 'byzantine' exceeds 'workers'");
  return g;
}

ExperimentGrid load_grid(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open grid file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_grid(ss.str());
}

LoadedDataset load_dataset(const DatasetEntry& entry) {
  Dataset ds;
  if (entry.path) {
    ParseOptions opts;
    opts.dim = entry.dim;
    opts.name = entry.name;
    ds = load_libsvm(*entry.path, opts);
  } else if (entry.synthetic == "mushrooms_like") {
    ds = entry.synthetic_m ? make_mushrooms_like(entry.synthetic_seed, entry.synthetic_m)
                           : make_mushrooms_like(entry.synthetic_seed);
  } else {
    ds = make_gaussian_dataset(entry.synthetic_m ? entry.synthetic_m : 200, entry.synthetic_d, entry.synthetic_seed);
  }
  if (entry.subsample) ds = subsample(ds, *entry.subsample, entry.subsample_seed);
  ds.name = entry.name;
  LoadedDataset out;
  out.entry = entry;
  out.data = std::make_shared<const Dataset>(std::move(ds));
  out.objective = std::make_shared<const LogisticObjective>(LogisticObjective::with_default_l2(out.data));
  return out;
}

std::string config_slug(const std::string& dataset, const RunConfig& c) {
  std::string attack = c.attack.to_string();
  std::replace(attack.begin(), attack.end(), ':', '-');
  std::string agg = c.aggregator.to_string();
  std::replace(agg.begin(), agg.end(), ':', '-');
  std::string slug = dataset + "__" + std::string(to_string(c.method)) + "__" + attack + "__" + agg + "__b" +
                     std::to_string(c.b) + "__g" + shortest(c.gamma) + "__n" + std::to_string(c.n) + "B" +
                     std::to_string(c.byzantine_ids.size()) + "__K" + std::to_string(c.K) + "__s" +
                     std::to_string(c.master_seed);
  if (c.p) slug += "__p" + shortest(*c.p);
  for (char& ch : slug)
    if (ch == '/' || ch == ' ') ch = '_';
  return slug;
}

std::vector<ResolvedRun> resolve_grid(const ExperimentGrid& grid, const std::vector<LoadedDataset>& datasets) {
  std::vector<ResolvedRun> runs;
  std::set<std::string> slugs;
  for (std::size_t di = 0; di < datasets.size(); ++di) {
    const auto& obj = *datasets[di].objective;
    const double m = static_cast<double>(obj.size());
    for (const auto& method_text : grid.methods) {
      const Method method = parse_method(method_text);
      const auto& aggs = method == Method::ByrdSAGA ? grid.byrd_saga_aggregators : grid.aggregators;
      for (const auto& attack_text : grid.attacks) {
        AttackSpec attack;
        try {
          attack = AttackSpec::parse(attack_text);
        } catch (const std::invalid_argument& e) {
          throw ConfigError(std::string("grid field 'attacks': ") + e.what());
        }
        for (const auto& agg_text : aggs) {
          AggregatorSpec agg;
          try {
            agg = AggregatorSpec::parse(agg_text);
          } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("grid field 'aggregators': ") + e.what());
          }
          for (const auto& b_text : grid.batchsizes) {
            std::size_t b = 0;
            try {
              b = resolve_batchsize(b_text, m);
            } catch (const ExpressionError& e) {
              throw ConfigError(std::string("grid field 'batchsizes': ") + e.what());
            }
            std::optional<double> p;
            std::map<std::string, double> vars{{"L", obj.L()}, {"mu", obj.mu()}, {"m", m},
                                               {"b", static_cast<double>(b)}};
            if (!grid.p.empty()) {
              try {
                p = evaluate_expression(grid.p, vars);
              } catch (const ExpressionError& e) {
                throw ConfigError(std::string("grid field 'p': ") + e.what());
              }
            }
            vars["p"] = p ? *p : static_cast<double>(b) / m;
            for (const auto& g_text : grid.stepsizes) {
              double gamma = 0.0;
              try {
                gamma = evaluate_expression(g_text, vars);
              } catch (const ExpressionError& e) {
                throw ConfigError(std::string("grid field 'stepsizes': ") + e.what());
              }
              for (std::uint64_t seed : grid.seeds) {
                ResolvedRun r;
                r.dataset_index = di;
                r.dataset = datasets[di].entry.name;
                r.batchsize_expr = b_text;
                r.stepsize_expr = g_text;
                auto& c = r.config;
                c.method = method;
                c.gamma = gamma;
                c.b = b;
                c.p = p;
                c.n = grid.workers;
                c.byzantine_ids = last_workers(grid.workers, grid.byzantine);
                c.aggregator = agg;
                c.attack = attack;
                c.K = grid.K;
                c.master_seed = seed;
                c.eval_every = grid.eval_every;
                c.psi_variant = grid.psi_variant == "thm2" ? LyapunovVariant::Thm2 : LyapunovVariant::Thm1;
                c.track_psi = grid.track_psi;
                c.record_time = grid.record_time;
                r.slug = config_slug(r.dataset, c);
                if (!slugs.insert(r.slug).second) throw ConfigError("two grid entries resolve to the same run " + r.slug);
                runs.push_back(std::move(r));
              }
            }
          }
        }
      }
    }
  }
  return runs;
}

ReferenceSolution cached_reference(const LogisticObjective& obj, double tol, const fs::path& cache_dir) {
  std::uint64_t l2_bits = 0, tol_bits = 0;
  const double l2 = obj.l2();
  std::memcpy(&l2_bits, &l2, sizeof l2);
  std::memcpy(&tol_bits, &tol, sizeof tol);
  const std::string hash = hex64(obj.data().content_hash());
  const fs::path file = cache_dir / (hash + "_" + hex64(l2_bits) + "_" + hex64(tol_bits) + ".json");

  if (fs::exists(file)) {
    std::ifstream in(file);
    json j = json::parse(in, nullptr, false);
    if (!j.is_discarded() && j.value("dataset_hash", "") == hash && j.value("l2_bits", "") == hex64(l2_bits)) {
      ReferenceSolution ref;
      ref.x_star = j.at("x_star").get<Vector>();
      ref.f_star = j.at("f_star").get<double>();
      ref.grad_norm = j.at("grad_norm").get<double>();
      ref.solver_tol = j.at("tol").get<double>();
      ref.iterations = j.at("iterations").get<std::size_t>();
      if (ref.x_star.size() == obj.dim()) return ref;
    }
  }

  ReferenceSolution ref = solve_reference(obj, tol);
  fs::create_directories(cache_dir);
  json j{{"dataset_hash", hash},
         {"l2", obj.l2()},
         {"l2_bits", hex64(l2_bits)},
         {"tol", ref.solver_tol},
         {"f_star", ref.f_star},
         {"grad_norm", ref.grad_norm},
         {"iterations", ref.iterations},
         {"x_star", ref.x_star}};
  write_text_atomically(file, j.dump());
  return ref;
}

std::vector<std::pair<double, double>> read_trace_subopt(const fs::path& csv) {
  std::ifstream in(csv);
  if (!in) throw std::runtime_error("cannot read " + csv.string());
  std::vector<std::pair<double, double>> out;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::istringstream row(line);
    std::string k, subopt;
    std::getline(row, k, ',');
    std::getline(row, subopt, ',');
    out.emplace_back(std::stod(k), subopt == "nan" ? std::nan("") : std::stod(subopt));
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentGrid& grid, const RunOptions& options) {
  const fs::path out_dir = grid.output_dir.empty() ? fs::path("results") : grid.output_dir;
  fs::create_directories(out_dir);
  auto log = [&, mutex = std::make_shared<std::mutex>()](const std::string& msg) {
    if (!options.log) return;
    std::lock_guard lock(*mutex);
    *options.log << msg << std::endl;
  };

  std::vector<LoadedDataset> datasets;
  for (const auto& entry : grid.datasets) {
    datasets.push_back(load_dataset(entry));
    log("loaded " + entry.name + ": m=" + std::to_string(datasets.back().data->size()) +
        " d=" + std::to_string(datasets.back().data->dim) + " L=" + shortest(datasets.back().objective->L()));
  }

  ExperimentGrid effective = grid;
  if (options.seed_override) effective.seeds = {*options.seed_override};
  std::vector<ResolvedRun> runs = resolve_grid(effective, datasets);
  if (!options.filter.empty())
    std::erase_if(runs, [&](const ResolvedRun& r) { return r.slug.find(options.filter) == std::string::npos; });

  std::vector<ReferenceSolution> refs(datasets.size());
  std::vector<DatasetStats> stats(datasets.size());
  std::vector<bool> needed(datasets.size(), false);
  for (const auto& r : runs) needed[r.dataset_index] = true;
  for (std::size_t i = 0; i < datasets.size(); ++i) {
    if (!needed[i]) continue;
    const auto& obj = *datasets[i].objective;
    refs[i] = cached_reference(obj, grid.ref_tol, out_dir / "refcache");
    stats[i].sigma2_x0 = gradient_variance(obj, Vector(obj.dim(), 0.0));
    stats[i].sigma2_star = gradient_variance(obj, refs[i].x_star);
    log("reference for " + datasets[i].entry.name + ": f*=" + shortest(refs[i].f_star));
  }

  ExperimentResult result;
  result.rows.resize(runs.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> errors{0};

  auto worker = [&] {
    for (std::size_t idx = next++; idx < runs.size(); idx = next++) {
      const auto& r = runs[idx];
      const auto& ds = datasets[r.dataset_index];
      SummaryRow& row = result.rows[idx];
      row.slug = r.slug;
      row.dataset = r.dataset;
      row.method = std::string(to_string(r.config.method));
      row.attack = r.config.attack.to_string();
      row.aggregator = r.config.aggregator.to_string();
      row.b = r.config.b;
      row.gamma = r.config.gamma;
      row.seed = r.config.master_seed;
      try {
        const Vector x0(ds.objective->dim(), 0.0);
        const RunTrace trace = run(r.config, *ds.objective, x0, &refs[r.dataset_index]);
        const fs::path dir = out_dir / r.slug;
        fs::create_directories(dir);
        std::ostringstream csv;
        write_trace_csv(trace, csv);
        write_text_atomically(dir / "trace.csv", csv.str());
        write_text_atomically(dir / "meta.json",
                              config_json(r, ds, refs[r.dataset_index], stats[r.dataset_index], trace).dump(2) + "\n");
        row.status = trace.status == RunStatus::Completed ? "completed" : "diverged";
        row.final_subopt = trace.points.back().subopt;
        row.final_dist2 = trace.points.back().dist2;
        row.rounds = trace.rounds_completed;
        row.honest_calls = trace.honest_calls;
        if (trace.status == RunStatus::Diverged) {
          row.final_subopt = row.final_dist2 = std::numeric_limits<double>::infinity();
        }
        log("[" + std::to_string(idx + 1) + "/" + std::to_string(runs.size()) + "] " + r.slug + " " + row.status +
            " subopt=" + shortest(row.final_subopt));
      } catch (const std::exception& e) {
        row.status = std::string("error: ") + e.what();
        row.final_subopt = row.final_dist2 = std::nan("");
        ++errors;
        log("[" + std::to_string(idx + 1) + "/" + std::to_string(runs.size()) + "] " + r.slug + " " + row.status);
      }
    }
  };
  const std::size_t jobs = std::max<std::size_t>(1, std::min(options.jobs, runs.size()));
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  result.errors = errors;

  {
    std::ostringstream csv;
    csv << "slug,dataset,method,attack,aggregator,b,gamma,seed,status,final_subopt,final_dist2,rounds,honest_calls\n";
    for (const auto& row : result.rows)
      csv << csv_field(row.slug) << ',' << csv_field(row.dataset) << ',' << row.method << ','
          << csv_field(row.attack) << ',' << csv_field(row.aggregator) << ',' << row.b << ',' << shortest(row.gamma)
          << ',' << row.seed << ',' << csv_field(row.status) << ',' << shortest(row.final_subopt) << ','
          << shortest(row.final_dist2) << ',' << row.rounds << ',' << row.honest_calls << '\n';
    write_text_atomically(out_dir / "summary.csv", csv.str());
  }

  // One panel per (dataset, attack): median over seeds of each curve, read
  // back from the trace files.
  std::map<std::pair<std::string, std::string>, std::map<std::string, std::vector<std::size_t>>> panels;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (result.rows[i].status.starts_with("error")) continue;
    const auto& r = runs[i];
    const std::string label = std::string(to_string(r.config.method)) + " " + r.config.aggregator.to_string() +
                              " b=" + r.batchsize_expr + " g=" + r.stepsize_expr;
    panels[{r.dataset, r.config.attack.to_string()}][label].push_back(i);
  }
  for (const auto& [key, curves] : panels) {
    std::vector<PlotSeries> series;
    for (const auto& [label, members] : curves) {
      std::map<double, std::vector<double>> by_k;
      for (std::size_t i : members)
        for (auto [k, v] : read_trace_subopt(out_dir / runs[i].slug / "trace.csv")) by_k[k].push_back(v);
      PlotSeries s;
      s.label = label;
      for (auto& [k, values] : by_k) {
        std::sort(values.begin(), values.end());
        const std::size_t n = values.size();
        const double med = n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
        s.points.emplace_back(k, med);
      }
      series.push_back(std::move(s));
    }
    std::string attack = key.second;
    std::replace(attack.begin(), attack.end(), ':', '-');
    const std::string svg = render_log_plot(key.first + ", attack " + key.second, "iteration k",
                                            "f(x^k) - f(x*) (median over seeds)", series);
    write_text_atomically(out_dir / ("plot_" + key.first + "_" + attack + ".svg"), svg);
  }
  return result;
}

}  // namespace brvr
