#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "sensflow/metrics.hpp"
#include "sensflow/sampler.hpp"
#include "sensflow/sensitivity.hpp"

namespace sensflow {

/// Analytic source: flows evaluate the G-function at arbitrary points and are
/// scored on `n_test` independent draws.
struct GeneratorSource {
  std::size_t d_significant = 4;
  std::size_t d_total = 450;
  std::size_t n_test = 1000;
};

/// Tabular source: split 75/25, flows query the training part as a pool and
/// are scored on the held-out part. The oracle is a sensitivity pass on the
/// whole table.
struct DatasetSource {
  SampleSet data;
  double train_ratio = 0.75;
};

using Source = std::variant<GeneratorSource, DatasetSource>;

/// One curve family in a comparison: a flow configuration plus an optional
/// random-acquisition prefix (hybrid flows).
struct MethodSpec {
  std::string label;
  FlowConfig config;
  std::optional<std::size_t> random_until;
};

struct ComparisonSetup {
  Source source = GeneratorSource{};
  FlowConfig base;                 // budgets, m, d, grid; method fields are overridden
  std::vector<int> methods{1, 2, 3, 4, 5, 6};
  std::vector<MethodSpec> custom;  // used instead of `methods` when non-empty
  std::size_t runs = 20;
  Seed seed{1};
  std::size_t threads = 1;
};

struct MethodComparison {
  std::vector<std::string> labels;
  std::vector<std::size_t> budgets;
  std::size_t runs = 0;
  /// curves[method][run][budget]; missing runs are std::nullopt.
  std::vector<std::vector<std::optional<std::vector<double>>>> curves;
  /// mean over the runs that completed, per method and budget.
  std::vector<std::vector<double>> mean;
  std::vector<std::string> failures;

  std::size_t method_index(std::string_view label) const;
  double mean_at(std::string_view label, std::size_t budget) const;

  /// Long format: method,run,N,r2
  void write_csv(const std::filesystem::path& path) const;
  /// method,N,mean_r2,runs
  void write_mean_csv(const std::filesystem::path& path) const;
};

/// Runs every method for `runs` seeds on the same initial sets and scores
/// R^2(N) on the held-out data at evaluation_budgets().
MethodComparison compare_methods(const ComparisonSetup& setup);

std::string method_label(int number);

enum class SweepMode { N, K };

struct ConjectureParams {
  SweepMode mode = SweepMode::N;
  std::vector<std::size_t> n_values;  // sweep-N grid, or the single N of a sweep-k
  std::vector<std::size_t> k_values;  // sweep-k grid, or the single k of a sweep-N
  std::size_t batches = 100;
  Seed seed{1};
  std::size_t threads = 1;
};

/// Grid helpers for the sweeps: log-spaced integers in [lo, hi].
std::vector<std::size_t> log_grid(std::size_t lo, std::size_t hi, std::size_t points);

struct GammaSample {
  SweepMode mode = SweepMode::N;
  std::size_t batch = 0;
  std::size_t n = 0;
  std::size_t k = 0;
  double xi_max = 0.0;
  double gamma = 0.0;
};

struct ConjectureStudy {
  std::vector<GammaSample> samples;

  /// Fraction of samples with gamma in [lo, hi].
  double fraction_within(double lo, double hi) const;

  /// mode,batch,N,k,xi_max,gamma
  void write_csv(const std::filesystem::path& path) const;
};

/// For each batch, draws independent (X_1..X_kmax, Y) of size N_max and
/// records xi_max and gamma = xi_max / sqrt(4 log k / (5N)) on prefixes (the
/// first N rows, or the first k features).
ConjectureStudy conjecture_tightness(const ConjectureParams& params);

struct ConjectureFits {
  std::optional<OlsFit> alpha1;  // slope and interval already negated
  std::optional<OlsFit> beta1;
  std::size_t dropped = 0;       // samples with xi_max <= 0
};

/// Regresses log xi_max on log(5N/2) (slope -alpha1) over the sweep-N samples
/// and on log(2 log k) (slope beta1) over the sweep-k samples.
ConjectureFits conjecture_regression(const ConjectureStudy& study);

/// target,slope,lo,hi,r2
void write_ols_csv(const ConjectureFits& fits, const std::filesystem::path& path);

struct AppendixParams {
  std::string preset = "g4-low-dim";
  std::optional<std::size_t> m;
  std::optional<std::size_t> runs;
  std::optional<std::size_t> nf;
  std::optional<std::size_t> n_test;
  Seed seed{1};
  std::size_t threads = 1;
};

/// Low-dimensional G-function studies: active vs random ("g4-low-dim"), plus
/// hybrid flows switching at N1 = 20 and 40 ("g4-hybrid").
MethodComparison appendix_validation(const AppendixParams& params);

/// The setup behind an appendix preset, for inspection and manifests.
ComparisonSetup appendix_setup(const AppendixParams& params);

}  // namespace sensflow
