#include "brvr/data_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <set>
#include <sstream>

#include "brvr/rng.hpp"

namespace brvr {

double SparseRow::dot(std::span<const double> x) const {
  double s = 0.0;
  for (std::size_t k = 0; k < indices.size(); ++k) s += values[k] * x[indices[k]];
  return s;
}

double SparseRow::squared_norm() const {
  double s = 0.0;
  for (double v : values) s += v * v;
  return s;
}

void SparseRow::axpy(double scale, std::span<double> out) const {
  for (std::size_t k = 0; k < indices.size(); ++k) out[indices[k]] += scale * values[k];
}

void Dataset::validate() const {
  if (rows.empty()) throw std::invalid_argument("dataset is empty");
  if (rows.size() != labels.size()) throw std::invalid_argument("rows/labels length mismatch");
  for (std::size_t j = 0; j < rows.size(); ++j) {
    const auto& r = rows[j];
    if (r.indices.size() != r.values.size())
      throw std::invalid_argument("row " + std::to_string(j) + ": indices/values length mismatch");
    for (std::size_t k = 0; k < r.indices.size(); ++k) {
      if (r.indices[k] >= dim)
        throw std::invalid_argument("row " + std::to_string(j) + ": index exceeds dimension");
      if (k > 0 && r.indices[k] <= r.indices[k - 1])
        throw std::invalid_argument("row " + std::to_string(j) + ": indices not strictly increasing");
    }
    if (labels[j] != 1.0 && labels[j] != -1.0)
      throw std::invalid_argument("row " + std::to_string(j) + ": label not in {-1,+1}");
  }
}

Dataset Dataset::with_negated_labels() const {
  Dataset out = *this;
  for (double& y : out.labels) y = -y;
  out.name = name + "[flipped]";
  return out;
}

std::uint64_t Dataset::content_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix_bytes = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  const std::uint64_t d = dim, m = rows.size();
  mix_bytes(&d, sizeof d);
  mix_bytes(&m, sizeof m);
  for (std::size_t j = 0; j < rows.size(); ++j) {
    mix_bytes(&labels[j], sizeof(double));
    const std::uint64_t nnz = rows[j].nnz();
    mix_bytes(&nnz, sizeof nnz);
    mix_bytes(rows[j].indices.data(), nnz * sizeof(std::uint32_t));
    mix_bytes(rows[j].values.data(), nnz * sizeof(double));
  }
  return h;
}

ParseError::ParseError(std::size_t line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

namespace {

bool parse_double(std::string_view tok, double& out) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  if (tok.empty()) return false;
  const auto* first = tok.data();
  const auto* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

bool parse_index(std::string_view tok, std::uint64_t& out) {
  if (tok.empty()) return false;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && ptr == tok.data() + tok.size();
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> toks;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) toks.push_back(line.substr(start, i - start));
  }
  return toks;
}

}  // namespace

Dataset parse_libsvm(std::istream& in, const ParseOptions& options) {
  Dataset ds;
  ds.name = options.name;
  std::vector<double> raw_labels;
  std::vector<std::size_t> label_lines;
  std::uint64_t max_index = 0;
  bool any_index = false;

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view view(line);
    if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    const auto toks = split_ws(view);
    if (toks.empty()) continue;

    double label = 0.0;
    if (!parse_double(toks[0], label)) throw ParseError(lineno, "non-numeric label '" + std::string(toks[0]) + "'");

    SparseRow row;
    row.indices.reserve(toks.size() - 1);
    row.values.reserve(toks.size() - 1);
    for (std::size_t t = 1; t < toks.size(); ++t) {
      const auto colon = toks[t].find(':');
      if (colon == std::string_view::npos)
        throw ParseError(lineno, "expected idx:val, got '" + std::string(toks[t]) + "'");
      std::uint64_t idx = 0;
      double val = 0.0;
      if (!parse_index(toks[t].substr(0, colon), idx) || idx == 0)
        throw ParseError(lineno, "bad feature index in '" + std::string(toks[t]) + "'");
      if (!parse_double(toks[t].substr(colon + 1), val))
        throw ParseError(lineno, "non-numeric feature value in '" + std::string(toks[t]) + "'");
      if (idx - 1 > 0xffffffffULL) throw ParseError(lineno, "feature index too large");
      const auto zero_based = static_cast<std::uint32_t>(idx - 1);
      if (!row.indices.empty()) {
        if (zero_based == row.indices.back()) throw ParseError(lineno, "duplicate feature index " + std::to_string(idx));
        if (zero_based < row.indices.back()) throw ParseError(lineno, "feature indices not increasing");
      }
      row.indices.push_back(zero_based);
      row.values.push_back(val);
      max_index = std::max<std::uint64_t>(max_index, zero_based);
      any_index = true;
    }
    raw_labels.push_back(label);
    label_lines.push_back(lineno);
    ds.rows.push_back(std::move(row));
  }
  if (ds.rows.empty()) throw ParseError(lineno, "empty file");

  const std::set<double> distinct(raw_labels.begin(), raw_labels.end());
  if (options.remap_binary_labels && distinct.size() > 2)
    throw ParseError(label_lines.front(), "more than two distinct labels");
  ds.labels.reserve(raw_labels.size());
  if (options.remap_binary_labels && distinct.size() == 2) {
    const double low = *distinct.begin();
    for (double y : raw_labels) ds.labels.push_back(y == low ? -1.0 : 1.0);
  } else {
    for (std::size_t j = 0; j < raw_labels.size(); ++j) {
      const double y = raw_labels[j];
      if (y == 1.0) ds.labels.push_back(1.0);
      else if (y == -1.0 || y == 0.0) ds.labels.push_back(-1.0);
      else throw ParseError(label_lines[j], "label outside {-1, 0, +1}");
    }
  }

  const std::size_t observed = any_index ? static_cast<std::size_t>(max_index) + 1 : 0;
  if (options.dim) {
    if (*options.dim < observed)
      throw ParseError(lineno, "dimension override " + std::to_string(*options.dim) +
                                   " smaller than observed " + std::to_string(observed));
    ds.dim = *options.dim;
  } else {
    ds.dim = observed;
  }
  return ds;
}

Dataset parse_libsvm(std::string_view text, const ParseOptions& options) {
  std::istringstream in{std::string(text)};
  return parse_libsvm(in, options);
}

Dataset load_libsvm(const std::filesystem::path& path, ParseOptions options) {
  if (options.name.empty()) options.name = path.stem().string();
  const std::string p = path.string();
  if (p.size() > 3 && p.ends_with(".gz")) {
    gzFile gz = gzopen(p.c_str(), "rb");
    if (gz == nullptr) throw std::runtime_error("cannot open " + p);
    std::string text;
    std::array<char, 1 << 16> buf{};
    int got = 0;
    while ((got = gzread(gz, buf.data(), static_cast<unsigned>(buf.size()))) > 0) text.append(buf.data(), got);
    const bool failed = got < 0;
    gzclose(gz);
    if (failed) throw std::runtime_error("gzip read error in " + p);
    if (options.name.ends_with(".txt")) options.name.resize(options.name.size() - 4);
    return parse_libsvm(std::string_view(text), options);
  }
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + p);
  return parse_libsvm(in, options);
}

namespace {

void append_double(std::string& out, double v) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  out.append(buf.data(), ptr);
}

}  // namespace

std::string serialize_libsvm(const Dataset& ds) {
  std::string out;
  for (std::size_t j = 0; j < ds.rows.size(); ++j) {
    out += ds.labels[j] > 0 ? "+1" : "-1";
    const auto& r = ds.rows[j];
    for (std::size_t k = 0; k < r.nnz(); ++k) {
      out += ' ';
      out += std::to_string(r.indices[k] + 1);
      out += ':';
      append_double(out, r.values[k]);
    }
    out += '\n';
  }
  return out;
}

void save_libsvm(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << serialize_libsvm(ds);
}

Dataset subsample(const Dataset& ds, std::size_t count, std::uint64_t seed) {
  if (count == 0 || count > ds.size())
    throw std::invalid_argument("subsample count " + std::to_string(count) + " outside [1, " +
                                std::to_string(ds.size()) + "]");
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, hash_tag("subsample")));
  // Partial Fisher-Yates: the first `count` slots are a uniform sample.
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + uniform_index(rng, ds.size() - i);
    std::swap(order[i], order[j]);
  }
  order.resize(count);
  std::sort(order.begin(), order.end());

  Dataset out;
  out.dim = ds.dim;
  out.name = ds.name + "_sub" + std::to_string(count) + "s" + std::to_string(seed);
  out.rows.reserve(count);
  out.labels.reserve(count);
  for (std::size_t j : order) {
    out.rows.push_back(ds.rows[j]);
    out.labels.push_back(ds.labels[j]);
  }
  return out;
}

Dataset make_gaussian_dataset(std::size_t m, std::size_t d, std::uint64_t seed) {
  Rng rng(derive_seed(seed, hash_tag("gaussian-dataset")));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> truth(d);
  for (double& t : truth) t = normal(rng);

  Dataset ds;
  ds.dim = d;
  ds.name = "gaussian_m" + std::to_string(m) + "_d" + std::to_string(d) + "_s" + std::to_string(seed);
  ds.rows.resize(m);
  ds.labels.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    auto& row = ds.rows[j];
    row.indices.resize(d);
    row.values.resize(d);
    double score = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      row.indices[i] = static_cast<std::uint32_t>(i);
      row.values[i] = normal(rng);
      score += row.values[i] * truth[i];
    }
    const double prob = 1.0 / (1.0 + std::exp(-score / std::sqrt(static_cast<double>(d))));
    ds.labels[j] = uniform01(rng) < prob ? 1.0 : -1.0;
  }
  return ds;
}

Dataset make_mushrooms_like(std::uint64_t seed, std::size_t m) {
  // Category counts per attribute; they sum to 112 one-hot columns.
  static constexpr std::array<std::size_t, 22> kCardinality = {6, 4, 10, 2, 9, 2, 2, 2, 12, 2, 5,
                                                              4, 4, 9, 9, 1, 4, 3, 5, 9, 6, 2};
  Rng rng(derive_seed(seed, hash_tag("mushrooms-like")));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::gamma_distribution<double> gamma(0.7, 1.0);

  std::vector<std::vector<double>> cdf(kCardinality.size());
  std::vector<std::vector<double>> effect(kCardinality.size());
  for (std::size_t a = 0; a < kCardinality.size(); ++a) {
    std::vector<double> w(kCardinality[a]);
    double total = 0.0;
    for (double& v : w) total += (v = gamma(rng) + 1e-3);
    double acc = 0.0;
    for (double v : w) cdf[a].push_back(acc += v / total);
    cdf[a].back() = 1.0;
    // A handful of attributes carry most of the signal, like odor and
    // spore-print colour in the real table.
    const double scale = (a == 4 || a == 19) ? 2.5 : (a % 3 == 0 ? 0.6 : 0.25);
    for (std::size_t c = 0; c < kCardinality[a]; ++c) effect[a].push_back(scale * normal(rng));
  }

  Dataset ds;
  ds.dim = std::accumulate(kCardinality.begin(), kCardinality.end(), std::size_t{0});
  ds.name = "mushrooms_like_s" + std::to_string(seed);
  ds.rows.resize(m);
  ds.labels.resize(m);
  std::vector<double> scores(m);
  for (std::size_t j = 0; j < m; ++j) {
    auto& row = ds.rows[j];
    std::size_t offset = 0;
    double score = 0.0;
    for (std::size_t a = 0; a < kCardinality.size(); ++a) {
      const double u = uniform01(rng);
      const auto c = static_cast<std::size_t>(std::lower_bound(cdf[a].begin(), cdf[a].end(), u) - cdf[a].begin());
      const std::size_t cat = std::min(c, kCardinality[a] - 1);
      row.indices.push_back(static_cast<std::uint32_t>(offset + cat));
      row.values.push_back(1.0);
      score += effect[a][cat];
      offset += kCardinality[a];
    }
    scores[j] = score;
  }
  // Centre scores so the classes are roughly balanced.
  std::vector<double> sorted = scores;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(m / 2), sorted.end());
  const double median = sorted[m / 2];
  for (std::size_t j = 0; j < m; ++j) {
    const double prob = 1.0 / (1.0 + std::exp(-(scores[j] - median)));
    ds.labels[j] = uniform01(rng) < prob ? 1.0 : -1.0;
  }
  return ds;
}

}  // namespace brvr
