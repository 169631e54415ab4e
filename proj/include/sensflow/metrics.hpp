#pragma once

#include <span>

namespace sensflow {

/// Determination score 1 - sum (y - yhat)^2 / sum (y - mean(y))^2.
double r2_score(std::span<const double> y_test, std::span<const double> predictions);

}  // namespace sensflow
