#pragma once

#include <filesystem>
#include <span>
#include <utility>

#include "sensflow/data.hpp"

namespace sensflow {

/// Chatterjee's rank estimate of the first-order Cramer-von Mises index of one
/// feature against the output.
struct XiEstimate {
  std::size_t feature_index = 0;
  double xi_hat = 0.0;
  std::size_t n = 0;
};

struct SensitivityReport {
  std::vector<XiEstimate> estimates;  // one per feature, by feature index
  std::vector<std::size_t> selected;  // top-d, by descending xi_hat
  double threshold = 0.0;             // noise scale for the D - d unselected
  bool degenerate = false;            // output column is constant
};

struct OlsFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::pair<double, double> slope_ci95{0.0, 0.0};
  double r2 = 0.0;
  std::size_t n = 0;
};

/// r_j = #{k : y_k <= y_j}, in the original row order.
std::vector<std::int64_t> output_ranks(std::span<const double> y);

/// xi_hat = 1 - 3 sum |r_{j+1} - r_j| / (N^2 - 1), with pairs sorted by x.
///
/// Ties in x are broken by a uniform shuffle drawn from `tie_seed`; without
/// ties the seed is never used. Ties in y go through the <= rank definition.
double chatterjee_xi(std::span<const double> x, std::span<const double> y, Seed tie_seed = {});

/// Same estimate with the output ranks computed once up front.
double chatterjee_xi_ranked(std::span<const double> x, std::span<const std::int64_t> ranks,
                            Seed tie_seed = {});

/// Computes xi_hat for every feature and keeps the d largest (ties to the lower
/// feature index). `threads` > 1 splits the feature loop.
SensitivityReport select_features(const SampleSet& set, std::size_t d, Seed seed,
                                  std::size_t threads = 1);

/// sqrt(4 log k / (5 n)): conjectured scale of the largest xi_hat among k
/// features independent of the output.
double noise_threshold(std::size_t n, std::size_t k);

/// max over `indices` of xi_hat against the output.
double xi_max(const SampleSet& set, std::span<const std::size_t> indices, Seed seed = {});

/// Least squares line with a normal-error 95% interval on the slope.
OlsFit ols_fit(std::span<const double> x, std::span<const double> y);

/// Normalizing constants for the maximum of k standard Gaussians:
/// a_k = sqrt(2 log k), b_k = a_k - (log 4pi + log log k) / (2 a_k).
std::pair<double, double> gumbel_constants(double k);

/// Standard Gumbel CDF exp(-exp(-x)).
double gumbel_cdf(double x);

/// Kolmogorov-Smirnov distance between a sample and a continuous CDF.
double ks_distance(std::vector<double> sample, double (*cdf)(double));

/// CSV: feature_name,feature_index,xi_hat,selected,threshold
void write_report_csv(const SensitivityReport& report, const std::vector<std::string>& names,
                      const std::filesystem::path& path);

}  // namespace sensflow
