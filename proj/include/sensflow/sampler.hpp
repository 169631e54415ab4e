#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sensflow/blackbox.hpp"
#include "sensflow/data.hpp"
#include "sensflow/surrogate.hpp"

namespace sensflow {

enum class Selection { Gsa, Oracle, Random };
enum class Acquisition { MaxVariance, Random };

std::string to_string(Selection s);
std::string to_string(Acquisition a);
Selection parse_selection(std::string_view text);
Acquisition parse_acquisition(std::string_view text);

/// The six ablation variants: {GSA, Oracle, Random} x {MaxVariance, Random},
/// numbered 1..6 in that order.
struct Method {
  Selection selection = Selection::Gsa;
  Acquisition acquisition = Acquisition::MaxVariance;

  static Method from_number(int number);
  int number() const;
  friend bool operator==(const Method&, const Method&) = default;
};

struct FlowConfig {
  std::size_t n0 = 10;
  std::size_t nf = 200;
  std::size_t m = 1000;  // candidates per acquisition step
  std::size_t d = 4;     // selected features
  Selection selection = Selection::Gsa;
  Acquisition acquisition = Acquisition::MaxVariance;
  std::size_t refit_period = 1;  // iterations between reselection + hyperparameter refit
  std::size_t batch = 1;         // points per iteration; > 1 is experimental
  std::vector<std::size_t> oracle_indices;
  std::size_t eval_every = 10;   // R^2 cadence when a test set is supplied
  std::size_t threads = 1;       // for the per-feature sensitivity pass
  GridSpec grid;

  Method method() const { return Method{selection, acquisition}; }
  void set_method(Method method);

  /// Throws on invalid combinations for a black box of dimension `d_total`.
  void validate(std::size_t d_total) const;

  /// Flat key=value lines.
  std::string to_kv() const;
  static FlowConfig from_kv(std::string_view text);
};

/// Budgets at which R^2 is evaluated: n0, multiples of `every` in between, nf.
std::vector<std::size_t> evaluation_budgets(std::size_t n0, std::size_t nf, std::size_t every);

struct IterationRecord {
  std::size_t n = 0;  // training size after this sample was added
  std::vector<std::size_t> selected;
  std::optional<std::size_t> pool_index;
  Eigen::VectorXd point;  // values on the selected coordinates
  double y = 0.0;
  double score = std::numeric_limits<double>::quiet_NaN();      // posterior variance
  double batch_best = std::numeric_limits<double>::quiet_NaN();  // max over candidates
  double r2 = std::numeric_limits<double>::quiet_NaN();
  double signal_variance = std::numeric_limits<double>::quiet_NaN();
  double lengthscale = std::numeric_limits<double>::quiet_NaN();
  double lml = std::numeric_limits<double>::quiet_NaN();
  double wall_ms = 0.0;
};

struct Evaluation {
  std::size_t n = 0;
  std::vector<std::size_t> selected;
  double r2 = 0.0;
};

struct RunTrace {
  Seed seed;
  FlowConfig config;
  std::vector<IterationRecord> records;
  std::vector<Evaluation> evaluations;
  bool exhausted = false;  // pool ran out before nf
  SampleSet samples;       // final training set

  /// CSV, one row per added sample. Wall time is left out unless asked for so
  /// that reruns are byte-identical.
  void write_csv(const std::filesystem::path& path, bool include_timing = false) const;
};

struct OptimizedChoice {
  CandidateSet candidates;
  Eigen::VectorXd scores;  // posterior variance per candidate
  std::size_t chosen = 0;  // argmax, ties to the lowest candidate index
};

/// Fits a GP on (train restricted to `selected`, y) with `kernel`, proposes m
/// candidates from the box, and picks the one of maximal posterior variance.
OptimizedChoice optimized_sample(const SampleSet& train, std::span<const std::size_t> selected,
                                 std::size_t m, BlackBox& box, Rng& rng, const Kernel& kernel);

/// Same, fitting the kernel hyperparameters first (grid center when N < 3).
OptimizedChoice optimized_sample(const SampleSet& train, std::span<const std::size_t> selected,
                                 std::size_t m, BlackBox& box, Rng& rng,
                                 const GridSpec& grid = {});

/// Indices of the top-`count` scores, ties to the lower index.
std::vector<std::size_t> top_indices(const Eigen::VectorXd& scores, std::size_t count);

/// Places selected values and complement values back at their original
/// coordinates. The two index lists must partition 0..D-1.
Eigen::VectorXd concatenate(std::span<const double> selected_values,
                            std::span<const double> complement_values,
                            std::span<const std::size_t> selected_indices,
                            std::span<const std::size_t> complement_indices);

/// Hyperparameters for the current training set: grid search when N >= 3,
/// grid center otherwise.
HyperparameterFit kernel_for(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                             const GridSpec& grid);

/// Optimized-sampling flow from `init` up to config.nf samples. Selection and
/// acquisition follow config.method(). With a test set, R^2 of a freshly fitted
/// GP on the selected features is recorded at evaluation_budgets().
RunTrace run_active_flow(const FlowConfig& config, BlackBox& box, const SampleSet& init,
                         Seed seed, const SampleSet* test = nullptr);

/// Random acquisition until n1 samples, then config's acquisition until nf,
/// in one trace.
RunTrace run_hybrid_flow(const FlowConfig& config, std::size_t n1, BlackBox& box,
                         const SampleSet& init, Seed seed, const SampleSet* test = nullptr);

/// n0 i.i.d. draws from the law of X (or uniform unconsumed pool rows).
SampleSet initial_samples(BlackBox& box, std::size_t n0, Rng& rng);

/// R^2 on `test` of a GP fitted on `train` restricted to `selected`.
double evaluate_r2(const SampleSet& train, std::span<const std::size_t> selected,
                   const SampleSet& test, const GridSpec& grid);

}  // namespace sensflow
