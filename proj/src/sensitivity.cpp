#include "sensflow/sensitivity.hpp"

#include <algorithm>
#include <limits>
#include <optional>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "sensflow/parallel.hpp"

namespace sensflow {

namespace {

void check_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) throw Error("non-finite input");
  }
}

double xi_from_sum(std::int64_t sum_abs, std::size_t n) {
  const double nn = static_cast<double>(n);
  return 1.0 - 3.0 * static_cast<double>(sum_abs) / (nn * nn - 1.0);
}

}  // namespace

std::vector<std::int64_t> output_ranks(std::span<const double> y) {
  std::vector<double> sorted(y.begin(), y.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::int64_t> ranks(y.size());
  for (std::size_t j = 0; j < y.size(); ++j) {
    ranks[j] = std::upper_bound(sorted.begin(), sorted.end(), y[j]) - sorted.begin();
  }
  return ranks;
}

double chatterjee_xi_ranked(std::span<const double> x, std::span<const std::int64_t> ranks,
                            Seed tie_seed) {
  const std::size_t n = x.size();
  if (n < 2) throw Error("chatterjee_xi needs N >= 2");
  if (ranks.size() != n) throw Error("length mismatch");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x[a] < x[b] || (x[a] == x[b] && a < b);
  });

  // shuffle each run of equal x values; the generator only exists if a tie does
  std::optional<Rng> ties;
  for (std::size_t start = 0; start < n;) {
    std::size_t end = start + 1;
    while (end < n && x[order[end]] == x[order[start]]) ++end;
    if (end - start > 1) {
      if (!ties) ties.emplace(tie_seed, "xi-ties");
      ties->shuffle(std::span(order).subspan(start, end - start));
    }
    start = end;
  }

  std::int64_t sum = 0;
  for (std::size_t j = 0; j + 1 < n; ++j) {
    sum += std::abs(ranks[order[j + 1]] - ranks[order[j]]);
  }
  return xi_from_sum(sum, n);
}

double chatterjee_xi(std::span<const double> x, std::span<const double> y, Seed tie_seed) {
  if (x.size() != y.size()) throw Error("length mismatch");
  if (x.size() < 2) throw Error("chatterjee_xi needs N >= 2");
  check_finite(x);
  check_finite(y);
  const auto ranks = output_ranks(y);
  return chatterjee_xi_ranked(x, ranks, tie_seed);
}

SensitivityReport select_features(const SampleSet& set, std::size_t d, Seed seed,
                                  std::size_t threads) {
  const std::size_t big_d = set.d_total();
  if (d < 1 || d > big_d) throw Error("d out of range");
  if (set.n() < 2) throw Error("feature selection needs N >= 2");

  const auto& y = set.outputs();
  const auto ranks = output_ranks(std::span<const double>(y.data(), set.n()));

  SensitivityReport report;
  report.degenerate = (y.array() == y(0)).all();
  report.estimates.resize(big_d);
  parallel_for(big_d, threads, [&](std::size_t i) {
    const auto col = set.features().col(static_cast<Eigen::Index>(i));
    const double xi = chatterjee_xi_ranked(std::span<const double>(col.data(), set.n()), ranks,
                                           derive_seed(seed, "feature", i));
    report.estimates[i] = XiEstimate{i, xi, set.n()};
  });

  std::vector<std::size_t> order(big_d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return report.estimates[a].xi_hat > report.estimates[b].xi_hat;
  });
  report.selected.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(d));
  report.threshold = (big_d - d >= 2) ? noise_threshold(set.n(), big_d - d)
                                      : std::numeric_limits<double>::quiet_NaN();
  return report;
}

double noise_threshold(std::size_t n, std::size_t k) {
  if (k < 2) throw Error("noise_threshold needs k >= 2");
  if (n < 2) throw Error("noise_threshold needs n >= 2");
  return std::sqrt(4.0 * std::log(static_cast<double>(k)) / (5.0 * static_cast<double>(n)));
}

double xi_max(const SampleSet& set, std::span<const std::size_t> indices, Seed seed) {
  if (indices.empty()) throw Error("empty index list");
  if (set.n() < 2) throw Error("xi_max needs N >= 2");
  const auto& y = set.outputs();
  const auto ranks = output_ranks(std::span<const double>(y.data(), set.n()));
  double best = -std::numeric_limits<double>::infinity();
  for (auto i : indices) {
    if (i >= set.d_total()) throw Error("feature index out of range");
    const auto col = set.features().col(static_cast<Eigen::Index>(i));
    best = std::max(best, chatterjee_xi_ranked(std::span<const double>(col.data(), set.n()),
                                               ranks, derive_seed(seed, "feature", i)));
  }
  return best;
}

OlsFit ols_fit(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (y.size() != n) throw Error("length mismatch");
  if (n < 3) throw Error("ols_fit needs at least 3 points");
  const double nn = static_cast<double>(n);
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / nn;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / nn;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw Error("ols_fit: constant x");

  OlsFit fit;
  fit.n = n;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (fit.intercept + fit.slope * x[i]);
    ssr += r * r;
  }
  const double se = std::sqrt(ssr / (nn - 2.0) / sxx);
  fit.slope_ci95 = {fit.slope - 1.96 * se, fit.slope + 1.96 * se};
  fit.r2 = syy > 0.0 ? 1.0 - ssr / syy : 1.0;
  return fit;
}

std::pair<double, double> gumbel_constants(double k) {
  if (!(k >= 2.0)) throw Error("gumbel_constants needs k >= 2");
  const double two_log_k = 2.0 * std::log(k);
  const double a = std::sqrt(two_log_k);
  const double b =
      a - 0.5 / a * (std::log(4.0 * std::numbers::pi) + std::log(std::log(k)));
  return {a, b};
}

double gumbel_cdf(double x) { return std::exp(-std::exp(-x)); }

double ks_distance(std::vector<double> sample, double (*cdf)(double)) {
  if (sample.empty()) throw Error("empty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

void write_report_csv(const SensitivityReport& report, const std::vector<std::string>& names,
                      const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  std::vector<bool> chosen(report.estimates.size(), false);
  for (auto s : report.selected) chosen[s] = true;
  out << "feature_name,feature_index,xi_hat,selected,threshold\n";
  for (const auto& e : report.estimates) {
    out << names.at(e.feature_index) << ',' << e.feature_index << ',' << format_double(e.xi_hat)
        << ',' << (chosen[e.feature_index] ? 1 : 0) << ',' << format_double(report.threshold)
        << '\n';
  }
}

}  // namespace sensflow
