#include "sensflow/surrogate.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

namespace sensflow {

namespace {

constexpr double kJitterStart = 1e-10;
constexpr double kJitterMax = 1e-4;
constexpr Eigen::Index kPredictChunk = 4096;

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

/// Rows of x divided by the lengthscales.
Eigen::MatrixXd scaled(const Eigen::MatrixXd& x, const std::vector<double>& ls) {
  if (ls.size() == 1) return x / ls.front();
  Eigen::MatrixXd out = x;
  for (Eigen::Index j = 0; j < x.cols(); ++j) out.col(j) /= ls[static_cast<std::size_t>(j)];
  return out;
}

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const Eigen::VectorXd na = a.rowwise().squaredNorm();
  const Eigen::VectorXd nb = b.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = -2.0 * a * b.transpose();
  d2.colwise() += na;
  d2.rowwise() += nb.transpose();
  return d2.cwiseMax(0.0);
}

/// Lower Cholesky factor of m + j I for the first j in the escalation schedule
/// (relative to `scale`) that works. Returns the jitter used.
std::optional<double> factor_with_jitter(const Eigen::MatrixXd& m, double scale, double start,
                                         Eigen::MatrixXd& lower) {
  const double first = std::max(start, kJitterStart * scale);
  for (double j = first; j <= kJitterMax * scale * (1.0 + 1e-12); j *= 10.0) {
    Eigen::MatrixXd a = m;
    a.diagonal().array() += j;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() == Eigen::Success) {
      lower = llt.matrixL();
      if (lower.allFinite() && (lower.diagonal().array() > 0.0).all()) return j;
    }
  }
  return std::nullopt;
}

struct Normalized {
  Eigen::VectorXd values;
  double mean = 0.0;
  double std = 1.0;
  bool constant = false;
};

Normalized normalize(const Eigen::VectorXd& y) {
  Normalized out;
  const double n = static_cast<double>(y.size());
  out.mean = y.mean();
  const double var = (y.array() - out.mean).square().sum() / n;
  out.constant = !(var > 0.0);
  out.std = out.constant ? 1.0 : std::sqrt(var);
  out.values = (y.array() - out.mean) / out.std;
  return out;
}

std::vector<double> log_spaced(double lo, double hi, std::size_t count) {
  std::vector<double> out(count);
  if (count == 1) {
    out[0] = std::sqrt(lo * hi);
    return out;
  }
  const double step = std::log(hi / lo) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = lo * std::exp(step * static_cast<double>(i));
  }
  return out;
}

/// Correlation-matrix factorization for one lengthscale; the LML for any
/// signal variance s follows in O(1):
///   lml(s) = -q / (2 s) - (N/2) log s - logdet_half - (N/2) log 2pi
struct LengthscaleTerms {
  bool ok = false;
  double jitter = 0.0;       // j, relative to the signal variance
  double quad = 0.0;         // y^T (R + jI)^{-1} y
  double logdet_half = 0.0;  // sum log diag chol(R + jI)

  double lml(double s, std::size_t n) const {
    if (!ok) return -std::numeric_limits<double>::infinity();
    const double nn = static_cast<double>(n);
    return -0.5 * quad / s - 0.5 * nn * std::log(s) - logdet_half - 0.5 * nn * kLog2Pi;
  }
};

LengthscaleTerms lengthscale_terms(const Eigen::MatrixXd& d2, const Eigen::VectorXd& y,
                                   double lengthscale, double nugget) {
  LengthscaleTerms t;
  const Eigen::MatrixXd r = (-0.5 / (lengthscale * lengthscale) * d2.array()).exp().matrix();
  Eigen::MatrixXd lower;
  const auto j = factor_with_jitter(r, 1.0, nugget, lower);
  if (!j) return t;
  const Eigen::VectorXd v = lower.triangularView<Eigen::Lower>().solve(y);
  t.ok = true;
  t.jitter = *j;
  t.quad = v.squaredNorm();
  t.logdet_half = lower.diagonal().array().log().sum();
  return t;
}

}  // namespace

double Kernel::operator()(std::span<const double> a, std::span<const double> b) const {
  if (a.size() != b.size()) throw Error("dimension mismatch");
  double r2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double l = lengthscales.size() == 1 ? lengthscales.front() : lengthscales.at(i);
    const double u = (a[i] - b[i]) / l;
    r2 += u * u;
  }
  return signal_variance * std::exp(-0.5 * r2);
}

Eigen::MatrixXd Kernel::cross(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) const {
  if (a.cols() != b.cols()) throw Error("dimension mismatch");
  const Eigen::MatrixXd d2 = squared_distances(scaled(a, lengthscales), scaled(b, lengthscales));
  return signal_variance * (-0.5 * d2.array()).exp().matrix();
}

void Kernel::validate(std::size_t dim) const {
  if (!(signal_variance > 0.0)) throw Error("signal variance must be positive");
  if (lengthscales.size() != 1 && lengthscales.size() != dim) {
    throw Error("lengthscale count must be 1 or the input dimension");
  }
  for (double l : lengthscales) {
    if (!(l > 0.0)) throw Error("lengthscales must be positive");
  }
  if (!(jitter >= 0.0)) throw Error("jitter must be non-negative");
}

GpModel gp_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Kernel& kernel) {
  if (x.rows() < 1 || x.cols() < 1) throw Error("gp_fit needs N >= 1 and d >= 1");
  if (x.rows() != y.size()) throw Error("dimension mismatch");
  kernel.validate(static_cast<std::size_t>(x.cols()));

  GpModel m;
  m.x_ = x;
  m.y_raw_ = y;
  const auto norm = normalize(y);
  m.y_norm_ = norm.values;
  m.y_mean_ = norm.mean;
  m.y_std_ = norm.std;
  m.constant_outputs_ = norm.constant;

  const Eigen::MatrixXd k = kernel.cross(x, x);
  const auto jitter = factor_with_jitter(k, kernel.signal_variance, kernel.jitter, m.chol_);
  if (!jitter) throw Error("Cholesky factorization failed at maximum jitter");
  m.kernel_ = kernel;
  m.kernel_.jitter = *jitter;

  const Eigen::MatrixXd& l = m.chol_;
  m.alpha_ = l.triangularView<Eigen::Lower>().solve(m.y_norm_);
  l.transpose().triangularView<Eigen::Upper>().solveInPlace(m.alpha_);
  return m;
}

Prediction GpModel::predict(std::span<const double> z) const {
  if (z.size() != dim()) throw Error("dimension mismatch");
  const Eigen::MatrixXd zm =
      Eigen::Map<const Eigen::RowVectorXd>(z.data(), static_cast<Eigen::Index>(z.size()));
  return Prediction{mean(zm)(0), variance(zm)(0)};
}

Eigen::VectorXd GpModel::mean(const Eigen::MatrixXd& z) const {
  if (static_cast<std::size_t>(z.cols()) != dim()) throw Error("dimension mismatch");
  Eigen::VectorXd out(z.rows());
  for (Eigen::Index start = 0; start < z.rows(); start += kPredictChunk) {
    const Eigen::Index len = std::min(kPredictChunk, z.rows() - start);
    const Eigen::MatrixXd kzx = kernel_.cross(z.middleRows(start, len), x_);
    out.segment(start, len) = (kzx * alpha_).array() * y_std_ + y_mean_;
  }
  return out;
}

Eigen::VectorXd GpModel::variance(const Eigen::MatrixXd& z) const {
  if (static_cast<std::size_t>(z.cols()) != dim()) throw Error("dimension mismatch");
  Eigen::VectorXd out(z.rows());
  const auto lower = chol_.triangularView<Eigen::Lower>();
  for (Eigen::Index start = 0; start < z.rows(); start += kPredictChunk) {
    const Eigen::Index len = std::min(kPredictChunk, z.rows() - start);
    Eigen::MatrixXd v = kernel_.cross(x_, z.middleRows(start, len));
    lower.solveInPlace(v);
    out.segment(start, len) =
        (kernel_.signal_variance - v.colwise().squaredNorm().array()).cwiseMax(0.0).transpose();
  }
  return out;
}

double GpModel::log_marginal_likelihood() const {
  const double nn = static_cast<double>(n());
  return -0.5 * y_norm_.dot(alpha_) - chol_.diagonal().array().log().sum() - 0.5 * nn * kLog2Pi;
}

double input_range(const Eigen::MatrixXd& x) {
  if (x.rows() == 0) return 1.0;
  const double r = (x.colwise().maxCoeff() - x.colwise().minCoeff()).maxCoeff();
  return r > 0.0 ? r : 1.0;
}

Kernel grid_center_kernel(const Eigen::MatrixXd& x, const GridSpec& grid) {
  Kernel k;
  k.signal_variance = std::sqrt(grid.variance_lo * grid.variance_hi);
  k.lengthscales = {std::sqrt(grid.lengthscale_lo * grid.lengthscale_hi) * input_range(x)};
  return k;
}

Eigen::MatrixXd lml_grid(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                         const GridSpec& grid, std::vector<double>* variances,
                         std::vector<double>* lengthscales) {
  if (x.rows() != y.size()) throw Error("dimension mismatch");
  const auto norm = normalize(y);
  const double range = input_range(x);
  const auto vs = log_spaced(grid.variance_lo, grid.variance_hi, grid.variance_points);
  const auto ls = log_spaced(grid.lengthscale_lo * range, grid.lengthscale_hi * range,
                             grid.lengthscale_points);
  const Eigen::MatrixXd d2 = squared_distances(x, x);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(vs.size()), static_cast<Eigen::Index>(ls.size()));
  for (std::size_t j = 0; j < ls.size(); ++j) {
    const auto terms = lengthscale_terms(d2, norm.values, ls[j], grid.nugget);
    for (std::size_t i = 0; i < vs.size(); ++i) out(i, j) = terms.lml(vs[i], norm.values.size());
  }
  if (variances) *variances = vs;
  if (lengthscales) *lengthscales = ls;
  return out;
}

HyperparameterFit fit_hyperparameters(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                      const GridSpec& grid) {
  if (x.rows() < 3) throw Error("fit_hyperparameters needs N >= 3");
  if (grid.variance_points < 1 || grid.lengthscale_points < 1) throw Error("empty grid");

  const auto norm = normalize(y);
  const auto n = static_cast<std::size_t>(y.size());
  std::vector<double> vs, ls;
  const Eigen::MatrixXd table = lml_grid(x, y, grid, &vs, &ls);

  const Eigen::MatrixXd d2 = squared_distances(x, x);
  HyperparameterFit fit;
  if (norm.constant) {
    const std::size_t vi = vs.size() / 2, li = ls.size() / 2;
    fit.kernel.signal_variance = vs[vi];
    fit.kernel.lengthscales = {ls[li]};
    fit.score_jitter = lengthscale_terms(d2, norm.values, ls[li], grid.nugget).jitter * vs[vi];
    fit.lml = table(static_cast<Eigen::Index>(vi), static_cast<Eigen::Index>(li));
    fit.degenerate = true;
    return fit;
  }

  Eigen::Index bi = 0, bj = 0;
  double best = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < table.cols(); ++j) {
    for (Eigen::Index i = 0; i < table.rows(); ++i) {
      if (table(i, j) > best) {
        best = table(i, j);
        bi = i;
        bj = j;
      }
    }
  }
  if (!std::isfinite(best)) throw Error("no grid cell could be factorized");

  double best_v = vs[static_cast<std::size_t>(bi)];
  double best_l = ls[static_cast<std::size_t>(bj)];
  const double step_v =
      vs.size() > 1 ? std::log(grid.variance_hi / grid.variance_lo) / double(vs.size() - 1) : 0.0;
  const double step_l =
      ls.size() > 1 ? std::log(grid.lengthscale_hi / grid.lengthscale_lo) / double(ls.size() - 1)
                    : 0.0;

  double best_j = lengthscale_terms(d2, norm.values, best_l, grid.nugget).jitter;
  double h = 1.0;
  for (std::size_t pass = 0; pass < grid.refinements; ++pass) {
    h *= 0.5;
    const double center_v = best_v, center_l = best_l;
    for (int dl = -1; dl <= 1; ++dl) {
      const double l = center_l * std::exp(h * step_l * dl);
      const auto terms = lengthscale_terms(d2, norm.values, l, grid.nugget);
      for (int dv = -1; dv <= 1; ++dv) {
        if (dl == 0 && dv == 0) continue;
        const double v = center_v * std::exp(h * step_v * dv);
        const double lml = terms.lml(v, n);
        if (lml > best) {
          best = lml;
          best_v = v;
          best_l = l;
          best_j = terms.jitter;
        }
      }
    }
  }

  fit.kernel.signal_variance = best_v;
  fit.kernel.lengthscales = {best_l};
  fit.score_jitter = best_j * best_v;
  fit.lml = best;
  return fit;
}

}  // namespace sensflow
