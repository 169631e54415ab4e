#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "sensflow/data.hpp"

namespace sensflow {

/// Squared-exponential kernel
///   k(a, b) = signal_variance * exp(-0.5 * sum_i ((a_i - b_i) / l_i)^2)
/// with either one shared lengthscale or one per input dimension.
struct Kernel {
  double signal_variance = 1.0;
  std::vector<double> lengthscales{1.0};
  double jitter = 0.0;  // added to the diagonal of the training covariance

  double operator()(std::span<const double> a, std::span<const double> b) const;

  /// k(a_i, b_j) for the rows of a and b.
  Eigen::MatrixXd cross(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) const;

  void validate(std::size_t dim) const;
};

/// Log-spaced search grid for the shared-lengthscale kernel. Lengthscale
/// bounds are multiples of the widest input range, variance bounds are
/// multiples of the normalized output variance (1).
struct GridSpec {
  std::size_t variance_points = 8;
  std::size_t lengthscale_points = 12;
  double variance_lo = 0.1;
  double variance_hi = 10.0;
  double lengthscale_lo = 0.05;
  double lengthscale_hi = 5.0;
  std::size_t refinements = 2;
  double nugget = 1e-6;  // diagonal floor while scoring, relative to the signal variance
};

struct Prediction {
  double mean = 0.0;      // original output units
  double variance = 0.0;  // normalized output units, clamped at 0
};

/// Exact GP posterior given training data. Outputs are normalized to zero mean
/// and unit variance before conditioning a zero-mean prior.
class GpModel {
 public:
  const Kernel& kernel() const { return kernel_; }
  std::size_t n() const { return static_cast<std::size_t>(x_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(x_.cols()); }
  double y_mean() const { return y_mean_; }
  double y_std() const { return y_std_; }
  bool constant_outputs() const { return constant_outputs_; }
  const Eigen::MatrixXd& train_x() const { return x_; }
  const Eigen::VectorXd& train_y() const { return y_raw_; }
  const Eigen::MatrixXd& chol() const { return chol_; }
  const Eigen::VectorXd& alpha() const { return alpha_; }

  Prediction predict(std::span<const double> z) const;

  /// Posterior means (original units) at the rows of z.
  Eigen::VectorXd mean(const Eigen::MatrixXd& z) const;

  /// Posterior variances (normalized units, clamped at 0) at the rows of z.
  Eigen::VectorXd variance(const Eigen::MatrixXd& z) const;

  double log_marginal_likelihood() const;

 private:
  friend GpModel gp_fit(const Eigen::MatrixXd&, const Eigen::VectorXd&, const Kernel&);

  Kernel kernel_;
  Eigen::MatrixXd x_;
  Eigen::VectorXd y_raw_;
  Eigen::VectorXd y_norm_;
  double y_mean_ = 0.0;
  double y_std_ = 1.0;
  bool constant_outputs_ = false;
  Eigen::MatrixXd chol_;
  Eigen::VectorXd alpha_;
};

/// Factorizes K + jitter I, escalating jitter from 1e-10 to 1e-4 times the
/// signal variance (x10 per step) until the Cholesky factor exists.
GpModel gp_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Kernel& kernel);

inline Prediction gp_predict(const GpModel& model, std::span<const double> z) {
  return model.predict(z);
}

/// -1/2 y^T alpha - sum log diag(L) - N/2 log 2pi, on normalized outputs.
inline double log_marginal_likelihood(const GpModel& model) {
  return model.log_marginal_likelihood();
}

struct HyperparameterFit {
  Kernel kernel;
  double lml = 0.0;           // scored with score_jitter on the diagonal
  double score_jitter = 0.0;  // absolute; the returned kernel keeps jitter 0
  bool degenerate = false;    // constant outputs; kernel is the grid center
};

/// Maximizes the log marginal likelihood over GridSpec, then refines around
/// the best cell with half and quarter steps. Needs N >= 3. Cells are scored
/// with at least GridSpec::nugget on the diagonal; the returned kernel does not
/// carry it, so gp_fit still interpolates the training data.
HyperparameterFit fit_hyperparameters(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                      const GridSpec& grid = {});

/// Lengthscale and variance at the geometric center of the grid. Used where
/// there are too few points to fit anything.
Kernel grid_center_kernel(const Eigen::MatrixXd& x, const GridSpec& grid = {});

/// Widest per-column range of x, or 1 when every column is constant.
double input_range(const Eigen::MatrixXd& x);

/// Full LML grid (variance-major) without refinement; exposed for tests.
Eigen::MatrixXd lml_grid(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                         const GridSpec& grid, std::vector<double>* variances = nullptr,
                         std::vector<double>* lengthscales = nullptr);

}  // namespace sensflow
