#include "crashlens/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace crashlens::evalkit {

std::array<std::size_t, 3> allocate_counts(std::size_t total,
                                           const std::array<double, 3>& ratios) {
  double ratio_sum = ratios[0] + ratios[1] + ratios[2];
  for (double r : ratios) {
    if (!(r > 0.0)) throw ConfigError("split ratios must be positive");
  }
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> remainders{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    double quota = static_cast<double>(total) * ratios[i] / ratio_sum;
    counts[i] = static_cast<std::size_t>(std::floor(quota));
    remainders[i] = quota - std::floor(quota);
    assigned += counts[i];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return remainders[a] > remainders[b];
  });
  for (std::size_t i = 0; assigned < total; ++i) {
    ++counts[order[i % 3]];
    ++assigned;
  }
  return counts;
}

SplitResult split_dataset(std::size_t count, const SplitSpec& spec,
                          const std::function<bool(std::size_t)>& is_s1) {
  if (count < 10) {
    throw DataError("split needs at least 10 events, got " + std::to_string(count));
  }
  std::vector<std::size_t> indices(count);
  std::iota(indices.begin(), indices.end(), std::size_t{0});
  std::mt19937_64 rng(spec.seed);
  deterministic_shuffle(indices, rng);

  auto counts = allocate_counts(count, spec.ratios);
  SplitResult result;
  result.train.assign(indices.begin(),
                      indices.begin() + static_cast<std::ptrdiff_t>(counts[0]));
  result.val.assign(indices.begin() + static_cast<std::ptrdiff_t>(counts[0]),
                    indices.begin() +
                        static_cast<std::ptrdiff_t>(counts[0] + counts[1]));
  result.test.assign(
      indices.begin() + static_cast<std::ptrdiff_t>(counts[0] + counts[1]),
      indices.end());

  if (spec.severity_filter) {
    if (!is_s1) {
      throw ConfigError("severity filter requires an S1 predicate");
    }
    const auto& filter = *spec.severity_filter;
    if (filter.drop_s1 < 0 || filter.keep < 0) {
      throw ConfigError("severity filter counts must be non-negative");
    }
    auto apply = [&](std::vector<std::size_t>& part, const char* name) {
      long removed = 0;
      std::vector<std::size_t> kept;
      kept.reserve(part.size());
      for (std::size_t idx : part) {
        if (removed < filter.drop_s1 && is_s1(idx)) {
          result.dropped.push_back(idx);
          ++removed;
        } else {
          kept.push_back(idx);
        }
      }
      if (removed < filter.drop_s1) {
        throw DataError(std::string("severity filter asks to drop ") +
                        std::to_string(filter.drop_s1) + " S1 events from " +
                        name + " but only " + std::to_string(removed) +
                        " are available");
      }
      if (filter.keep > 0 && kept.size() > static_cast<std::size_t>(filter.keep)) {
        for (std::size_t i = static_cast<std::size_t>(filter.keep);
             i < kept.size(); ++i) {
          result.dropped.push_back(kept[i]);
        }
        kept.resize(static_cast<std::size_t>(filter.keep));
      }
      part = std::move(kept);
    };
    apply(result.val, "the validation split");
    apply(result.test, "the test split");
  }
  return result;
}

MetricsReport compute_metrics(std::span<const int> pred, std::span<const int> gold,
                              int class_count) {
  if (pred.size() != gold.size()) {
    throw DataError("compute_metrics: prediction and gold lengths differ (" +
                    std::to_string(pred.size()) + " vs " +
                    std::to_string(gold.size()) + ")");
  }
  if (pred.empty()) throw DataError("compute_metrics: empty inputs");
  if (class_count < 1) throw ConfigError("compute_metrics: class count must be >= 1");

  MetricsReport report;
  report.class_count = class_count;
  report.total = static_cast<long>(pred.size());
  report.confusion.assign(static_cast<std::size_t>(class_count),
                          std::vector<long>(static_cast<std::size_t>(class_count), 0));
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] < 0 || pred[i] >= class_count || gold[i] < 0 ||
        gold[i] >= class_count) {
      throw DataError("compute_metrics: class index out of range at sample " +
                      std::to_string(i));
    }
    ++report.confusion[static_cast<std::size_t>(gold[i])]
                      [static_cast<std::size_t>(pred[i])];
  }

  long correct = 0;
  for (int k = 0; k < class_count; ++k) {
    correct += report.confusion[static_cast<std::size_t>(k)]
                               [static_cast<std::size_t>(k)];
  }
  report.accuracy = static_cast<double>(correct) / static_cast<double>(report.total);

  report.per_class.resize(static_cast<std::size_t>(class_count));
  double weighted_precision = 0.0;
  double weighted_recall = 0.0;
  double weighted_f1 = 0.0;
  double macro_precision = 0.0;
  double macro_f1 = 0.0;
  for (int k = 0; k < class_count; ++k) {
    auto& counts = report.per_class[static_cast<std::size_t>(k)];
    long tp = report.confusion[static_cast<std::size_t>(k)]
                              [static_cast<std::size_t>(k)];
    long fn = 0;
    long fp = 0;
    for (int j = 0; j < class_count; ++j) {
      if (j == k) continue;
      fn += report.confusion[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
      fp += report.confusion[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
    }
    counts.tp = tp;
    counts.fp = fp;
    counts.fn = fn;
    counts.tn = report.total - tp - fp - fn;
    counts.support = tp + fn;
    if (tp + fp > 0) {
      counts.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    }
    if (tp + fn > 0) {
      counts.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    }
    double p = counts.precision.value_or(0.0);
    double r = counts.recall.value_or(0.0);
    if (counts.precision || counts.recall) {
      counts.f1 = (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
    }
    double w = static_cast<double>(counts.support) /
               static_cast<double>(report.total);
    weighted_precision += w * p;
    weighted_recall += w * r;
    weighted_f1 += w * counts.f1.value_or(0.0);
    macro_precision += p / static_cast<double>(class_count);
    macro_f1 += counts.f1.value_or(0.0) / static_cast<double>(class_count);
  }
  report.weighted_precision = weighted_precision;
  report.weighted_recall = weighted_recall;
  report.weighted_f1 = weighted_f1;
  report.macro_precision = macro_precision;
  report.macro_f1 = macro_f1;
  return report;
}

std::optional<double> precision_for_class(const MetricsReport& report,
                                          int class_index) {
  if (class_index < 0 || class_index >= report.class_count) {
    throw ComputeError("precision_for_class: class index out of range");
  }
  return report.per_class[static_cast<std::size_t>(class_index)].precision;
}

CalibrationCurve calibration_bins(
    std::span<const predictor::ClassDistribution> dists, std::span<const int> gold,
    std::span<const double> edges) {
  if (dists.size() != gold.size()) {
    throw DataError("calibration: distribution and gold lengths differ");
  }
  if (edges.size() < 2) throw ConfigError("calibration: need at least 2 edges");
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i] > edges[i - 1])) {
      throw ConfigError("calibration: edges must be strictly increasing");
    }
  }
  if (edges.front() != 0.0 || edges.back() != 1.0) {
    throw ConfigError("calibration: edges must span [0, 1]");
  }

  CalibrationCurve curve;
  const std::size_t bin_count = edges.size() - 1;
  std::vector<long> correct(bin_count, 0);
  std::vector<long> total(bin_count, 0);
  for (std::size_t i = 0; i < dists.size(); ++i) {
    double confidence = dists[i].confidence;
    std::size_t bin = bin_count - 1;
    for (std::size_t b = 0; b < bin_count; ++b) {
      if (confidence < edges[b + 1] ||
          (b == bin_count - 1 && confidence <= edges[b + 1])) {
        bin = b;
        break;
      }
    }
    ++total[bin];
    if (dists[i].predicted == gold[i]) ++correct[bin];
  }
  for (std::size_t b = 0; b < bin_count; ++b) {
    CalibrationBin bin;
    bin.lo = edges[b];
    bin.hi = edges[b + 1];
    bin.count = total[b];
    if (total[b] > 0) {
      bin.accuracy = static_cast<double>(correct[b]) / static_cast<double>(total[b]);
    }
    curve.bins.push_back(bin);
  }
  return curve;
}

std::vector<double> equal_width_edges(int bins) {
  if (bins < 1) throw ConfigError("calibration: bin count must be >= 1");
  std::vector<double> edges;
  for (int i = 0; i <= bins; ++i) {
    edges.push_back(static_cast<double>(i) / static_cast<double>(bins));
  }
  edges.front() = 0.0;
  edges.back() = 1.0;
  return edges;
}

}  // namespace crashlens::evalkit
