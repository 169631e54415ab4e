#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>

#include "sensflow/data.hpp"

namespace sensflow {

/// One evaluated point. `pool_index` is set when the point came from a pool.
struct Draw {
  std::optional<std::size_t> pool_index;
  Eigen::VectorXd x;
  double y = 0.0;
};

/// Candidate points restricted to a set of selected coordinates. Pool boxes
/// also carry the row each candidate came from, in ascending order.
struct CandidateSet {
  Eigen::MatrixXd points;  // m x |selected|
  std::vector<std::size_t> pool_indices;

  std::size_t size() const { return static_cast<std::size_t>(points.rows()); }
};

/// Source of (x, y) pairs for the sampling flows.
class BlackBox {
 public:
  virtual ~BlackBox() = default;

  virtual std::size_t dimension() const = 0;
  virtual std::vector<std::string> feature_names() const;

  /// Independent draw from the law of X, evaluated.
  virtual Draw draw_random(Rng& rng) = 0;

  /// Up to m candidates on the selected coordinates, drawn from their law.
  virtual CandidateSet propose(std::span<const std::size_t> selected, std::size_t m,
                               Rng& rng) = 0;

  /// Turns candidate `which` into an evaluated full point. Generators draw the
  /// complement coordinates from `complement_rng`; pools consume the row.
  virtual Draw realize(const CandidateSet& candidates, std::size_t which,
                       std::span<const std::size_t> selected, Rng& complement_rng) = 0;

  /// Rows still available; generators are unbounded.
  virtual std::size_t remaining() const { return SIZE_MAX; }

  virtual std::unique_ptr<BlackBox> clone() const = 0;
};

/// Sobol' G-function with a = 0 on [0,1]^D; only the first d_significant
/// coordinates matter.
class GFunctionBox final : public BlackBox {
 public:
  GFunctionBox(std::size_t d_significant, std::size_t d_total);

  std::size_t d_significant() const { return d_significant_; }
  std::size_t dimension() const override { return d_total_; }

  /// prod_{i < d} |4 x_i - 2|
  double eval(std::span<const double> x) const;
  double eval(const Eigen::VectorXd& x) const {
    return eval(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
  }

  /// n i.i.d. uniform points on [0,1]^D with their outputs.
  SampleSet sample(std::size_t n, Seed seed) const;
  SampleSet sample(std::size_t n, Rng& rng) const;

  Draw draw_random(Rng& rng) override;
  CandidateSet propose(std::span<const std::size_t> selected, std::size_t m,
                       Rng& rng) override;
  Draw realize(const CandidateSet& candidates, std::size_t which,
               std::span<const std::size_t> selected, Rng& complement_rng) override;
  std::unique_ptr<BlackBox> clone() const override;

 private:
  std::size_t d_significant_;
  std::size_t d_total_;
};

/// Finite table of pre-simulated rows, each queryable once per run.
class PoolBox final : public BlackBox {
 public:
  explicit PoolBox(SampleSet pool);

  const SampleSet& pool() const { return pool_; }
  std::size_t dimension() const override { return pool_.d_total(); }
  std::vector<std::string> feature_names() const override { return pool_.feature_names(); }
  std::size_t remaining() const override { return available_.size(); }
  bool consumed(std::size_t row) const { return consumed_.at(row); }

  /// Uniform over unconsumed rows.
  Draw draw_random(Rng& rng) override;

  /// Candidate maximizing `score`; ties go to the lowest row index.
  Draw draw_among(std::span<const std::size_t> candidates,
                  const std::function<double(std::size_t)>& score);

  /// Marks a specific row consumed and returns it.
  Draw take(std::size_t row);

  CandidateSet propose(std::span<const std::size_t> selected, std::size_t m,
                       Rng& rng) override;
  Draw realize(const CandidateSet& candidates, std::size_t which,
               std::span<const std::size_t> selected, Rng& complement_rng) override;
  std::unique_ptr<BlackBox> clone() const override;

 private:
  SampleSet pool_;
  std::vector<bool> consumed_;
  std::vector<std::size_t> available_;  // unconsumed rows, unordered
  std::vector<std::size_t> slot_;       // row -> position in available_
};

}  // namespace sensflow
