#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crashlens/common.hpp"
#include "crashlens/predictor.hpp"

namespace crashlens::evalkit {

struct SplitSpec {
  std::array<double, 3> ratios{7.0, 1.5, 1.5};  // train, val, test
  std::uint64_t seed = 0;

  // Post-split balancing: remove `drop_s1` S1 events from each of val and
  // test, then truncate both to `keep` events.
  struct SeverityFilter {
    int drop_s1 = 0;
    int keep = 0;
  };
  std::optional<SeverityFilter> severity_filter;
};

struct SplitResult {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
  std::vector<std::size_t> dropped;
};

// Largest-remainder allocation of `total` across the spec's ratios.
std::array<std::size_t, 3> allocate_counts(std::size_t total,
                                           const std::array<double, 3>& ratios);

// Deterministic seeded shuffle + allocation. `is_s1` is consulted only when
// the severity filter is set.
SplitResult split_dataset(std::size_t count, const SplitSpec& spec,
                          const std::function<bool(std::size_t)>& is_s1 = {});

struct ClassCounts {
  long tp = 0;
  long tn = 0;
  long fp = 0;
  long fn = 0;
  long support = 0;
  std::optional<double> precision;  // null when never predicted
  std::optional<double> recall;
  std::optional<double> f1;
};

struct MetricsReport {
  int class_count = 0;
  long total = 0;
  double accuracy = 0.0;
  double weighted_precision = 0.0;
  double weighted_recall = 0.0;
  double weighted_f1 = 0.0;
  double macro_precision = 0.0;
  double macro_f1 = 0.0;
  std::vector<ClassCounts> per_class;
  std::vector<std::vector<long>> confusion;  // [gold][pred]
};

MetricsReport compute_metrics(std::span<const int> pred, std::span<const int> gold,
                              int class_count);

std::optional<double> precision_for_class(const MetricsReport& report,
                                          int class_index);

struct CalibrationBin {
  double lo = 0.0;
  double hi = 0.0;
  long count = 0;
  std::optional<double> accuracy;  // null for empty bins
};

struct CalibrationCurve {
  std::vector<CalibrationBin> bins;
};

// Bins are [lo, hi) with the final bin closed at 1.0. Edges must be strictly
// increasing and span [0, 1].
CalibrationCurve calibration_bins(
    std::span<const predictor::ClassDistribution> dists, std::span<const int> gold,
    std::span<const double> edges);

std::vector<double> equal_width_edges(int bins = 10);

}  // namespace crashlens::evalkit
