#pragma once

#include "romforge/fem.hpp"

namespace romforge::eval {

struct MetricResult {
  double value = 0.0;
  int used = 0;        // samples entering the geometric mean
  int excluded = 0;    // samples with zero-norm truth, skipped with a warning
  int exact_zero = 0;  // samples with exactly zero error (floored at 1e-300)
};

// Geometric mean over samples of ||pred_j - truth_j|| / ||truth_j||.
// Zero-norm truths are excluded; a sample with exactly zero error enters via
// a 1e-300 floor; if every sample is exact the metric is defined as 0.
MetricResult metric_e_u(const Mat& predictions, const Mat& truths);

// Same aggregation on residual space: relative size of
// R(pred_j; mu_eval) - R(truth_j; mu_eval) against ||R(truth_j; mu_eval)||.
MetricResult metric_e_r(const fem::ResidualModel& model, const Mat& predictions,
                        const Mat& truths, const fem::LoadParams& mu_eval,
                        int threads = 1);

}  // namespace romforge::eval
