#include "sensflow/blackbox.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sensflow {

std::vector<std::string> BlackBox::feature_names() const {
  return SampleSet::default_names(dimension());
}

GFunctionBox::GFunctionBox(std::size_t d_significant, std::size_t d_total)
    : d_significant_(d_significant), d_total_(d_total) {
  if (d_significant < 1) throw Error("G-function needs d >= 1");
  if (d_total < d_significant) throw Error("G-function needs D >= d");
}

double GFunctionBox::eval(std::span<const double> x) const {
  if (x.size() != d_total_) throw Error("wrong dimension");
  for (double v : x) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error("coordinate outside [0,1]");
  }
  double y = 1.0;
  for (std::size_t i = 0; i < d_significant_; ++i) y *= std::abs(4.0 * x[i] - 2.0);
  return y;
}

SampleSet GFunctionBox::sample(std::size_t n, Seed seed) const {
  Rng rng(seed, "gfunction-sample");
  return sample(n, rng);
}

SampleSet GFunctionBox::sample(std::size_t n, Rng& rng) const {
  if (n < 1) throw Error("sample size must be >= 1");
  const auto rows = static_cast<Eigen::Index>(n);
  const auto cols = static_cast<Eigen::Index>(d_total_);
  Eigen::MatrixXd x(rows, cols);
  Eigen::VectorXd y(rows);
  // row-wise fill so the first n rows of a larger draw match a smaller one
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) x(i, j) = rng.uniform();
    double v = 1.0;
    for (std::size_t j = 0; j < d_significant_; ++j) {
      v *= std::abs(4.0 * x(i, static_cast<Eigen::Index>(j)) - 2.0);
    }
    y(i) = v;
  }
  return SampleSet(std::move(x), std::move(y), SampleSet::default_names(d_total_));
}

Draw GFunctionBox::draw_random(Rng& rng) {
  Draw d;
  d.x.resize(static_cast<Eigen::Index>(d_total_));
  for (auto& v : d.x) v = rng.uniform();
  d.y = eval(d.x);
  return d;
}

CandidateSet GFunctionBox::propose(std::span<const std::size_t> selected, std::size_t m,
                                   Rng& rng) {
  CandidateSet c;
  c.points.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(selected.size()));
  for (Eigen::Index i = 0; i < c.points.rows(); ++i) {
    for (Eigen::Index j = 0; j < c.points.cols(); ++j) c.points(i, j) = rng.uniform();
  }
  return c;
}

Draw GFunctionBox::realize(const CandidateSet& candidates, std::size_t which,
                           std::span<const std::size_t> selected, Rng& complement_rng) {
  if (which >= candidates.size()) throw Error("candidate index out of range");
  std::vector<bool> is_selected(d_total_, false);
  for (auto s : selected) {
    if (s >= d_total_) throw Error("feature index out of range");
    is_selected[s] = true;
  }
  Draw d;
  d.x.resize(static_cast<Eigen::Index>(d_total_));
  for (std::size_t i = 0; i < d_total_; ++i) {
    if (!is_selected[i]) d.x(i) = complement_rng.uniform();
  }
  for (std::size_t j = 0; j < selected.size(); ++j) {
    d.x(selected[j]) = candidates.points(which, j);
  }
  d.y = eval(d.x);
  return d;
}

std::unique_ptr<BlackBox> GFunctionBox::clone() const {
  return std::make_unique<GFunctionBox>(*this);
}

PoolBox::PoolBox(SampleSet pool) : pool_(std::move(pool)) {
  consumed_.assign(pool_.n(), false);
  available_.resize(pool_.n());
  std::iota(available_.begin(), available_.end(), 0);
  slot_ = available_;
}

Draw PoolBox::take(std::size_t row) {
  if (row >= pool_.n()) throw Error("pool row out of range");
  if (consumed_[row]) throw Error("pool row already consumed");
  consumed_[row] = true;
  const auto pos = slot_[row];
  const auto last = available_.back();
  available_[pos] = last;
  slot_[last] = pos;
  available_.pop_back();
  return Draw{row, pool_.row(row), pool_.outputs()(static_cast<Eigen::Index>(row))};
}

Draw PoolBox::draw_random(Rng& rng) {
  if (available_.empty()) throw Error("pool exhausted");
  return take(available_[rng.index(available_.size())]);
}

Draw PoolBox::draw_among(std::span<const std::size_t> candidates,
                         const std::function<double(std::size_t)>& score) {
  if (candidates.empty()) throw Error("empty candidate list");
  std::size_t best = candidates.front();
  double best_score = score(best);
  for (auto c : candidates.subspan(1)) {
    const double s = score(c);
    if (s > best_score || (s == best_score && c < best)) {
      best = c;
      best_score = s;
    }
  }
  return take(best);
}

CandidateSet PoolBox::propose(std::span<const std::size_t> selected, std::size_t m,
                              Rng& rng) {
  if (available_.empty()) throw Error("pool exhausted");
  std::vector<std::size_t> rows = available_;
  const std::size_t k = std::min(m, rows.size());
  for (std::size_t i = 0; i < k; ++i) {
    std::swap(rows[i], rows[i + rng.index(rows.size() - i)]);
  }
  rows.resize(k);
  std::sort(rows.begin(), rows.end());

  CandidateSet c;
  c.pool_indices = rows;
  c.points.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(selected.size()));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < selected.size(); ++j) {
      if (selected[j] >= dimension()) throw Error("feature index out of range");
      c.points(i, j) = pool_.features()(rows[i], selected[j]);
    }
  }
  return c;
}

Draw PoolBox::realize(const CandidateSet& candidates, std::size_t which,
                      std::span<const std::size_t>, Rng&) {
  if (which >= candidates.pool_indices.size()) throw Error("candidate index out of range");
  return take(candidates.pool_indices[which]);
}

std::unique_ptr<BlackBox> PoolBox::clone() const { return std::make_unique<PoolBox>(*this); }

}  // namespace sensflow
