#ifndef BRVR_EXPERIMENT_HPP
#define BRVR_EXPERIMENT_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "brvr/analysis.hpp"
#include "brvr/data_io.hpp"
#include "brvr/engine.hpp"
#include "brvr/objective.hpp"

namespace brvr {

/// One dataset axis entry: a LIBSVM file or a synthetic generator, with an
/// optional deterministic subsample.
struct DatasetEntry {
  std::string name;
  std::optional<std::filesystem::path> path;
  std::string synthetic;  ///< "mushrooms_like" or "gaussian" when no path
  std::size_t synthetic_m = 0;
  std::size_t synthetic_d = 10;
  std::uint64_t synthetic_seed = 1;
  std::optional<std::size_t> dim;
  std::optional<std::size_t> subsample;
  std::uint64_t subsample_seed = 7;
};

struct ExperimentGrid {
  std::vector<DatasetEntry> datasets;
  std::vector<std::string> methods{"br-lsvrg"};
  std::vector<std::string> attacks{"none"};
  std::vector<std::string> aggregators{"gm+bucket"};
  /// Aggregators used for Byrd-SAGA runs in place of `aggregators`.
  std::vector<std::string> byrd_saga_aggregators{"gm"};
  std::vector<std::string> batchsizes{"1"};
  std::vector<std::string> stepsizes{"1/(12L)"};
  std::vector<std::uint64_t> seeds{1};
  std::size_t workers = 16;
  std::size_t byzantine = 3;
  std::size_t K = 0;
  std::size_t eval_every = 100;
  /// Switch probability over b and m; empty means b/m.
  std::string p;
  std::string psi_variant = "thm1";
  bool track_psi = true;
  bool record_time = false;
  double ref_tol = 1e-12;
  std::filesystem::path output_dir;
};

/// Reads the YAML grid format documented in the README. Throws ConfigError
/// naming the offending field.
ExperimentGrid parse_grid(const std::string& yaml_text);
ExperimentGrid load_grid(const std::filesystem::path& path);

struct LoadedDataset {
  DatasetEntry entry;
  std::shared_ptr<const Dataset> data;
  std::shared_ptr<const LogisticObjective> objective;
};

LoadedDataset load_dataset(const DatasetEntry& entry);

struct ResolvedRun {
  std::size_t dataset_index = 0;
  std::string dataset;
  std::string batchsize_expr;
  std::string stepsize_expr;
  RunConfig config;
  std::string slug;
};

/// Cartesian product over datasets, methods, attacks, aggregators,
/// batchsizes, stepsizes and seeds, in that nesting order. Expressions are
/// evaluated against each dataset's L, mu and m. Throws ConfigError on an
/// unparseable field or a slug collision.
std::vector<ResolvedRun> resolve_grid(const ExperimentGrid& grid, const std::vector<LoadedDataset>& datasets);

/// Directory-safe name derived from the resolved configuration.
std::string config_slug(const std::string& dataset, const RunConfig& config);

/// Loads the cached reference solution for (dataset, l2, tol) from
/// cache_dir, or solves and stores it (write to a temporary name, then
/// rename).
ReferenceSolution cached_reference(const LogisticObjective& obj, double tol, const std::filesystem::path& cache_dir);

struct RunOptions {
  std::size_t jobs = 1;
  std::optional<std::uint64_t> seed_override;
  /// Keep only runs whose slug contains this text.
  std::string filter;
  std::ostream* log = nullptr;
};

struct SummaryRow {
  std::string slug;
  std::string dataset;
  std::string method;
  std::string attack;
  std::string aggregator;
  std::size_t b = 0;
  double gamma = 0.0;
  std::uint64_t seed = 0;
  std::string status;
  double final_subopt = 0.0;
  double final_dist2 = 0.0;
  std::size_t rounds = 0;
  std::uint64_t honest_calls = 0;
};

struct ExperimentResult {
  std::vector<SummaryRow> rows;
  std::size_t errors = 0;
  int exit_code() const { return errors == 0 ? 0 : 1; }
};

/// Runs every resolved configuration and writes <output_dir>/<slug>/
/// {trace.csv, meta.json}, summary.csv and one SVG per (dataset, attack).
ExperimentResult run_experiment(const ExperimentGrid& grid, const RunOptions& options = {});

/// Reads back a trace written by write_trace_csv as (k, subopt) pairs.
std::vector<std::pair<double, double>> read_trace_subopt(const std::filesystem::path& csv);

}  // namespace brvr

#endif  // BRVR_EXPERIMENT_HPP
