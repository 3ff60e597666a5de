#ifndef BRVR_DATA_IO_HPP
#define BRVR_DATA_IO_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace brvr {

/// One example's features in compressed form. Indices are 0-based and
/// strictly increasing; values[k] belongs to indices[k].
struct SparseRow {
  std::vector<std::uint32_t> indices;
  std::vector<double> values;

  std::size_t nnz() const { return indices.size(); }
  double dot(std::span<const double> x) const;
  double squared_norm() const;
  /// out += scale * row
  void axpy(double scale, std::span<double> out) const;

  friend bool operator==(const SparseRow&, const SparseRow&) = default;
};

/// Binary-labelled sparse dataset: rows a_j with labels y_j in {-1, +1}.
struct Dataset {
  std::vector<SparseRow> rows;
  std::vector<double> labels;
  std::size_t dim = 0;
  std::string name;

  std::size_t size() const { return rows.size(); }

  /// Throws std::invalid_argument if any structural invariant is broken.
  void validate() const;

  /// Copy with every label negated (used by the label-flipping attack).
  Dataset with_negated_labels() const;

  /// Stable content hash over dim, labels and rows (name excluded).
  std::uint64_t content_hash() const;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct ParseOptions {
  /// Force the feature dimension (must cover every observed index).
  std::optional<std::size_t> dim;
  /// Accept any two distinct label values, mapping the smaller to -1 and
  /// the larger to +1 (e.g. files labelled 1/2). Off by default.
  bool remap_binary_labels = false;
  std::string name;
};

Dataset parse_libsvm(std::istream& in, const ParseOptions& options = {});
Dataset parse_libsvm(std::string_view text, const ParseOptions& options = {});

/// Reads a LIBSVM file, transparently gunzipping names ending in ".gz".
Dataset load_libsvm(const std::filesystem::path& path, ParseOptions options = {});

/// Canonical text form: "+1"/"-1" labels, 1-based indices, shortest
/// round-trip decimal values, one trailing newline per row.
std::string serialize_libsvm(const Dataset& ds);
void save_libsvm(const Dataset& ds, const std::filesystem::path& path);

/// Samples `count` rows without replacement. Rows keep their original
/// relative order; dim is preserved. Throws std::invalid_argument when
/// count is zero or exceeds the dataset size.
Dataset subsample(const Dataset& ds, std::size_t count, std::uint64_t seed);

/// Dense Gaussian features with labels drawn from a logistic model around a
/// random ground-truth direction.
Dataset make_gaussian_dataset(std::size_t m, std::size_t d, std::uint64_t seed);

/// Offline stand-in for the UCI mushrooms table in LIBSVM form: 22 one-hot
/// categorical attributes spanning 112 binary features, 8124 rows by default.
/// Labels come from a sparse logistic model over the categories.
Dataset make_mushrooms_like(std::uint64_t seed, std::size_t m = 8124);

}  // namespace brvr

#endif  // BRVR_DATA_IO_HPP
