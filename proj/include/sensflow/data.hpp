#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace sensflow {

/// Raised for every contract violation in the library (bad input, bad config,
/// numerical failure). Messages are short and stable so the CLI can print them
/// verbatim.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Seed {
  std::uint64_t value = 0;

  friend bool operator==(Seed, Seed) = default;
};

/// Derive an independent seed from a parent seed, a stream name and an index.
Seed derive_seed(Seed parent, std::string_view stream, std::uint64_t index = 0);

/// Deterministic generator. All randomness in the library flows through
/// explicitly passed instances of this class, one per named stream.
class Rng {
 public:
  explicit Rng(Seed seed);
  Rng(Seed seed, std::string_view stream, std::uint64_t index = 0);

  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform();

  /// Uniform on {0, ..., n - 1}; n must be positive.
  std::size_t index(std::size_t n);

  double normal() { return normal_(engine_); }

  /// Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::swap(values[i - 1], values[index(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

/// Paired feature matrix (N x D) and output vector (N).
class SampleSet {
 public:
  SampleSet() = default;
  SampleSet(Eigen::MatrixXd features, Eigen::VectorXd outputs,
            std::vector<std::string> feature_names,
            std::string output_name = "y");

  /// Empty set with D named features.
  static SampleSet empty(std::vector<std::string> feature_names,
                         std::string output_name = "y");

  /// Default names x0..x{D-1}.
  static std::vector<std::string> default_names(std::size_t d_total);

  const Eigen::MatrixXd& features() const { return features_; }
  const Eigen::VectorXd& outputs() const { return outputs_; }
  const std::vector<std::string>& feature_names() const { return names_; }
  const std::string& output_name() const { return output_name_; }

  std::size_t n() const { return static_cast<std::size_t>(outputs_.size()); }
  std::size_t d_total() const { return names_.size(); }

  Eigen::VectorXd row(std::size_t i) const { return features_.row(i).transpose(); }

  /// Subset of rows, in the given order.
  SampleSet rows(std::span<const std::size_t> indices) const;

  /// Feature columns restricted to `columns`, N x |columns|.
  Eigen::MatrixXd columns(std::span<const std::size_t> columns) const;

  void append(const Eigen::VectorXd& x, double y);

 private:
  Eigen::MatrixXd features_;
  Eigen::VectorXd outputs_;
  std::vector<std::string> names_;
  std::string output_name_ = "y";
};

struct Split {
  SampleSet train;
  SampleSet test;
  double ratio = 0.75;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;
};

/// Reads a comma separated table with a header row. Every column other than
/// `output_column` becomes a feature, in header order. Rows holding a
/// non-finite value are skipped; their count is written to `rejected_rows`.
SampleSet load_csv(const std::filesystem::path& path, std::string_view output_column,
                   std::size_t* rejected_rows = nullptr);

/// Writes features then the output column, 17 significant digits.
void save_csv(const SampleSet& set, const std::filesystem::path& path);

/// Uniform random partition; train.n = round(ratio * n), clamped so that
/// neither side is empty.
Split split(const SampleSet& set, double ratio, Seed seed);

/// 17 significant digits, enough to round-trip any double.
std::string format_double(double value);

/// List cells inside CSV files use ';' as separator.
std::string join(std::span<const std::size_t> values, char sep = ';');
std::vector<std::size_t> parse_index_list(std::string_view text);

}  // namespace sensflow
