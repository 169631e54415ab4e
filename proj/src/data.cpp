#include "sensflow/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace sensflow {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

bool parse_double(std::string_view text, double& value) {
  if (text.empty()) return false;
  if (text.front() == '+') text.remove_prefix(1);
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  return ec == std::errc() && ptr == end;
}

void check_unique(const std::vector<std::string>& names) {
  std::set<std::string> seen;
  for (const auto& name : names) {
    if (!seen.insert(name).second) throw Error("duplicate feature name: " + name);
  }
}

}  // namespace

Seed derive_seed(Seed parent, std::string_view stream, std::uint64_t index) {
  std::uint64_t h = splitmix64(parent.value);
  h = splitmix64(h ^ fnv1a(stream));
  h = splitmix64(h ^ index);
  return Seed{h};
}

Rng::Rng(Seed seed) : engine_(splitmix64(seed.value)) {}

Rng::Rng(Seed seed, std::string_view stream, std::uint64_t index)
    : Rng(derive_seed(seed, stream, index)) {}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw Error("Rng::index: empty range");
  const std::uint64_t bound = n;
  // rejection keeps the draw unbiased
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
  std::uint64_t v;
  do {
    v = engine_();
  } while (v >= limit);
  return static_cast<std::size_t>(v % bound);
}

SampleSet::SampleSet(Eigen::MatrixXd features, Eigen::VectorXd outputs,
                     std::vector<std::string> feature_names, std::string output_name)
    : features_(std::move(features)),
      outputs_(std::move(outputs)),
      names_(std::move(feature_names)),
      output_name_(std::move(output_name)) {
  if (names_.empty()) throw Error("sample set needs at least one feature");
  if (features_.rows() != outputs_.size()) {
    throw Error("feature rows and output length differ");
  }
  if (static_cast<std::size_t>(features_.cols()) != names_.size()) {
    throw Error("feature columns and names differ");
  }
  if (!features_.allFinite() || !outputs_.allFinite()) {
    throw Error("sample set holds non-finite values");
  }
  check_unique(names_);
}

SampleSet SampleSet::empty(std::vector<std::string> feature_names, std::string output_name) {
  const auto d = static_cast<Eigen::Index>(feature_names.size());
  return SampleSet(Eigen::MatrixXd(0, d), Eigen::VectorXd(0), std::move(feature_names),
                   std::move(output_name));
}

std::vector<std::string> SampleSet::default_names(std::size_t d_total) {
  std::vector<std::string> names(d_total);
  for (std::size_t i = 0; i < d_total; ++i) names[i] = "x" + std::to_string(i);
  return names;
}

SampleSet SampleSet::rows(std::span<const std::size_t> indices) const {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(indices.size()), features_.cols());
  Eigen::VectorXd y(static_cast<Eigen::Index>(indices.size()));
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= n()) throw Error("row index out of range");
    x.row(r) = features_.row(indices[r]);
    y(r) = outputs_(indices[r]);
  }
  return SampleSet(std::move(x), std::move(y), names_, output_name_);
}

Eigen::MatrixXd SampleSet::columns(std::span<const std::size_t> columns) const {
  Eigen::MatrixXd out(features_.rows(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c] >= d_total()) throw Error("feature index out of range");
    out.col(c) = features_.col(columns[c]);
  }
  return out;
}

void SampleSet::append(const Eigen::VectorXd& x, double y) {
  if (static_cast<std::size_t>(x.size()) != d_total()) throw Error("dimension mismatch");
  if (!x.allFinite() || !std::isfinite(y)) throw Error("sample set holds non-finite values");
  const auto r = features_.rows();
  features_.conservativeResize(r + 1, Eigen::NoChange);
  features_.row(r) = x.transpose();
  outputs_.conservativeResize(r + 1);
  outputs_(r) = y;
}

SampleSet load_csv(const std::filesystem::path& path, std::string_view output_column,
                   std::size_t* rejected_rows) {
  std::ifstream in(path);
  if (!in) throw Error("missing file: " + path.string());

  std::string line;
  if (!std::getline(in, line) || trim(line).empty()) throw Error("empty table");
  const auto header = split_fields(line);
  std::size_t out_col = header.size();
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == output_column) out_col = c;
  }
  if (out_col == header.size()) throw Error("missing column: " + std::string(output_column));

  std::vector<std::string> names;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c != out_col) names.emplace_back(header[c]);
  }
  if (names.empty()) throw Error("table has no feature columns");

  std::vector<double> values;
  std::vector<double> outputs;
  std::size_t rejected = 0;
  std::size_t line_no = 1;
  std::vector<double> row(header.size());
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw Error("wrong field count on line " + std::to_string(line_no));
    }
    bool finite = true;
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (!parse_double(fields[c], row[c])) {
        throw Error("non-numeric cell on line " + std::to_string(line_no));
      }
      finite = finite && std::isfinite(row[c]);
    }
    if (!finite) {
      ++rejected;
      continue;
    }
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c == out_col) {
        outputs.push_back(row[c]);
      } else {
        values.push_back(row[c]);
      }
    }
  }
  if (outputs.empty()) throw Error("empty table");
  if (rejected_rows) *rejected_rows = rejected;

  const auto n = static_cast<Eigen::Index>(outputs.size());
  const auto d = static_cast<Eigen::Index>(names.size());
  Eigen::MatrixXd x =
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          values.data(), n, d);
  Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(outputs.data(), n);
  return SampleSet(std::move(x), std::move(y), std::move(names),
                   std::string(header[out_col]));
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] =
      std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 17);
  return std::string(buf, ptr);
}

void save_csv(const SampleSet& set, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& name : set.feature_names()) out << name << ',';
  out << set.output_name() << '\n';
  const auto& x = set.features();
  for (std::size_t i = 0; i < set.n(); ++i) {
    for (std::size_t j = 0; j < set.d_total(); ++j) out << format_double(x(i, j)) << ',';
    out << format_double(set.outputs()(i)) << '\n';
  }
}

Split split(const SampleSet& set, double ratio, Seed seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw Error("split ratio must lie in (0,1)");
  if (set.n() < 2) throw Error("split needs at least 2 rows");

  std::vector<std::size_t> order(set.n());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed, "split");
  rng.shuffle(std::span(order));

  auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(set.n())));
  n_train = std::clamp<std::size_t>(n_train, 1, set.n() - 1);

  Split out;
  out.ratio = ratio;
  out.train_indices.assign(order.begin(), order.begin() + n_train);
  out.test_indices.assign(order.begin() + n_train, order.end());
  std::sort(out.train_indices.begin(), out.train_indices.end());
  std::sort(out.test_indices.begin(), out.test_indices.end());
  out.train = set.rows(out.train_indices);
  out.test = set.rows(out.test_indices);
  return out;
}

std::string join(std::span<const std::size_t> values, char sep) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += sep;
    out += std::to_string(values[i]);
  }
  return out;
}

std::vector<std::size_t> parse_index_list(std::string_view text) {
  std::vector<std::size_t> out;
  std::size_t start = 0;
  text = trim(text);
  if (text.empty()) return out;
  while (start <= text.size()) {
    auto end = text.find_first_of(",;", start);
    if (end == std::string_view::npos) end = text.size();
    const auto field = trim(text.substr(start, end - start));
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
      throw Error("bad index list: " + std::string(text));
    }
    out.push_back(v);
    start = end + 1;
  }
  return out;
}

}  // namespace sensflow
