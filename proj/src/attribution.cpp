#include "crashlens/attribution.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>

#include "crashlens/evalkit.hpp"

namespace crashlens::attribution {

namespace {

// Compensated (Kahan) accumulator; additions are index-ordered by callers.
struct KahanSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double value) {
    double y = value - carry;
    double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
};

// Streaming mean/variance per (player, stratum) cell.
struct Welford {
  long count = 0;
  double mean = 0.0;
  double m2 = 0.0;
  void add(double value) {
    ++count;
    double delta = value - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (value - mean);
  }
  double variance_of_mean() const {
    if (count < 2) return 0.0;
    return m2 / static_cast<double>(count - 1) / static_cast<double>(count);
  }
};

void check_game(const CoalitionGame& game) {
  if (game.player_count < 1) {
    throw ComputeError("coalition game needs at least one player");
  }
  if (!game.value) throw ComputeError("coalition game has no value function");
  if (!game.player_labels.empty() &&
      static_cast<int>(game.player_labels.size()) != game.player_count) {
    throw ComputeError("player label count does not match player count");
  }
}

std::vector<std::string> labels_or_default(const CoalitionGame& game) {
  if (!game.player_labels.empty()) return game.player_labels;
  std::vector<std::string> labels;
  for (int i = 0; i < game.player_count; ++i) {
    labels.push_back("player " + std::to_string(i));
  }
  return labels;
}

}  // namespace

double AttributionReport::phi_sum() const {
  KahanSum sum;
  for (double p : phi) sum.add(p);
  return sum.sum;
}

AttributionReport exact_shapley(const CoalitionGame& game, int jobs, int cap) {
  check_game(game);
  const int n = game.player_count;
  if (n > cap) {
    throw ComputeError("exact enumeration over " + std::to_string(n) +
                       " players exceeds the cap of " + std::to_string(cap));
  }
  const std::uint64_t subsets = std::uint64_t{1} << n;

  // Every subset value computed once, gathered by subset index.
  std::vector<double> cache(subsets);
  jobs = std::max(1, jobs);
  if (jobs == 1 || subsets < 256) {
    for (std::uint64_t mask = 0; mask < subsets; ++mask) {
      cache[mask] = game.value(mask);
    }
  } else {
    std::vector<std::thread> workers;
    const std::uint64_t chunk = (subsets + static_cast<std::uint64_t>(jobs) - 1) /
                                static_cast<std::uint64_t>(jobs);
    for (int w = 0; w < jobs; ++w) {
      std::uint64_t begin = static_cast<std::uint64_t>(w) * chunk;
      std::uint64_t end = std::min(subsets, begin + chunk);
      if (begin >= end) break;
      workers.emplace_back([&, begin, end] {
        for (std::uint64_t mask = begin; mask < end; ++mask) {
          cache[mask] = game.value(mask);
        }
      });
    }
    for (auto& worker : workers) worker.join();
  }

  // weight(|S|) = 1 / (n * C(n-1, |S|)); exact in double for n <= 20
  std::vector<double> weight(static_cast<std::size_t>(n));
  double binom = 1.0;
  for (int k = 0; k < n; ++k) {
    if (k > 0) {
      binom = binom * static_cast<double>(n - k) / static_cast<double>(k);
    }
    weight[static_cast<std::size_t>(k)] = 1.0 / (static_cast<double>(n) * binom);
  }

  AttributionReport report;
  report.method = Method::Exact;
  report.player_labels = labels_or_default(game);
  report.v_base = cache[0];
  report.v_full = cache[subsets - 1];
  report.phi.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const std::uint64_t bit = std::uint64_t{1} << i;
    KahanSum phi;
    for (std::uint64_t mask = 0; mask < subsets; ++mask) {
      if (mask & bit) continue;
      int size = std::popcount(mask);
      phi.add(weight[static_cast<std::size_t>(size)] *
              (cache[mask | bit] - cache[mask]));
    }
    report.phi[static_cast<std::size_t>(i)] = phi.sum;
  }

  double gap = std::abs(report.phi_sum() - (report.v_full - report.v_base));
  if (gap > 1e-9) {
    throw ComputeError("exact Shapley efficiency violated by " +
                       std::to_string(gap) +
                       "; the value function may not be pure");
  }
  return report;
}

namespace {

struct SizeClass {
  int size = 0;            // |S| drawn by this class
  int blocks_per_round = 0;  // ceil(n / size): one full cover round
  std::uint64_t pairs = 0;   // sampled (S, complement) pairs allocated
  int strata_served = 0;     // 2 for size < n/2, 1 for the middle class
};

std::vector<SizeClass> plan_size_classes(int n, std::uint64_t total_pairs) {
  std::vector<SizeClass> classes;
  for (int k = 1; k <= n / 2; ++k) {
    SizeClass c;
    c.size = k;
    c.blocks_per_round = (n + k - 1) / k;
    c.strata_served = (2 * k == n) ? 1 : 2;
    classes.push_back(c);
  }
  if (classes.empty()) return classes;

  // One mandatory cover round per class, then proportional to strata served.
  std::uint64_t mandatory = 0;
  for (const auto& c : classes) {
    mandatory += static_cast<std::uint64_t>(c.blocks_per_round);
  }
  if (total_pairs < mandatory) {
    throw ComputeError("sampling budget cannot cover every stratum");
  }
  std::uint64_t rest = total_pairs - mandatory;
  int strata_total = 0;
  for (const auto& c : classes) strata_total += c.strata_served;
  std::uint64_t assigned = 0;
  for (auto& c : classes) {
    c.pairs = static_cast<std::uint64_t>(c.blocks_per_round) +
              rest * static_cast<std::uint64_t>(c.strata_served) /
                  static_cast<std::uint64_t>(strata_total);
    assigned += c.pairs;
  }
  // round-robin leftovers
  std::size_t next = 0;
  while (assigned < total_pairs) {
    ++classes[next % classes.size()].pairs;
    ++assigned;
    ++next;
  }
  return classes;
}

}  // namespace

std::uint64_t cc_min_budget(int player_count) {
  if (player_count < 1) {
    throw ComputeError("coalition game needs at least one player");
  }
  std::uint64_t pairs = 1;  // grand pair
  for (int k = 1; k <= player_count / 2; ++k) {
    pairs += static_cast<std::uint64_t>((player_count + k - 1) / k);
  }
  return 2 * pairs;
}

AttributionReport cc_sample_shapley(const CoalitionGame& game,
                                    std::uint64_t budget, std::uint64_t seed) {
  check_game(game);
  const int n = game.player_count;
  if (budget < 2 * static_cast<std::uint64_t>(n)) {
    throw ComputeError("sampling budget too small: " + std::to_string(budget) +
                       " evaluations for " + std::to_string(n) +
                       " players (need at least 2n)");
  }
  const std::uint64_t min_budget = cc_min_budget(n);
  if (budget < min_budget) {
    throw ComputeError("sampling budget too small: stratum coverage for " +
                       std::to_string(n) + " players needs at least " +
                       std::to_string(min_budget) + " evaluations, got " +
                       std::to_string(budget));
  }

  const std::uint64_t full_mask = (std::uint64_t{1} << n) - 1;
  // cells[i][k-1]: samples of v(S) - v(N\S) with i in S, |S| = k
  std::vector<std::vector<Welford>> cells(
      static_cast<std::size_t>(n),
      std::vector<Welford>(static_cast<std::size_t>(n)));

  std::uint64_t evaluations = 0;
  auto value_pair = [&](std::uint64_t mask) {
    double v_s = game.value(mask);
    double v_c = game.value(full_mask & ~mask);
    evaluations += 2;
    return v_s - v_c;
  };

  // Grand pair: the deterministic stratum-n sample for every player.
  const double v_full = game.value(full_mask);
  const double v_base = game.value(0);
  evaluations += 2;
  const double grand_cc = v_full - v_base;
  for (int i = 0; i < n; ++i) {
    cells[static_cast<std::size_t>(i)][static_cast<std::size_t>(n - 1)].add(
        grand_cc);
  }

  std::mt19937_64 rng(seed);
  auto classes = plan_size_classes(n, budget / 2 - 1);
  std::vector<int> order(static_cast<std::size_t>(n));
  for (auto& size_class : classes) {
    const int k = size_class.size;
    std::uint64_t remaining = size_class.pairs;
    while (remaining > 0) {
      std::iota(order.begin(), order.end(), 0);
      deterministic_shuffle(order, rng);
      for (int block = 0;
           block < size_class.blocks_per_round && remaining > 0;
           ++block, --remaining) {
        std::uint64_t mask = 0;
        for (int t = 0; t < k; ++t) {
          int player = order[static_cast<std::size_t>((block * k + t) % n)];
          mask |= std::uint64_t{1} << player;
        }
        double cc = value_pair(mask);
        for (int i = 0; i < n; ++i) {
          if (mask & (std::uint64_t{1} << i)) {
            cells[static_cast<std::size_t>(i)][static_cast<std::size_t>(k - 1)]
                .add(cc);
          } else {
            cells[static_cast<std::size_t>(i)][static_cast<std::size_t>(n - k - 1)]
                .add(-cc);
          }
        }
      }
    }
  }

  AttributionReport report;
  report.method = Method::ComplementarySampled;
  report.player_labels = labels_or_default(game);
  report.budget = evaluations;
  report.strata = n;
  report.seed = seed;
  report.v_full = v_full;
  report.v_base = v_base;
  report.phi.resize(static_cast<std::size_t>(n));
  std::vector<double> errors(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    KahanSum sum;
    double variance = 0.0;
    for (int k = 1; k <= n; ++k) {
      const auto& cell =
          cells[static_cast<std::size_t>(i)][static_cast<std::size_t>(k - 1)];
      if (cell.count == 0) {
        throw ComputeError("stratum " + std::to_string(k) + " for player " +
                           std::to_string(i) + " received no samples");
      }
      sum.add(cell.mean);
      variance += cell.variance_of_mean();
    }
    report.phi[static_cast<std::size_t>(i)] = sum.sum / static_cast<double>(n);
    errors[static_cast<std::size_t>(i)] =
        std::sqrt(variance) / static_cast<double>(n);
  }
  report.std_error = std::move(errors);
  return report;
}

AttributionReport training_stage_attribution(
    std::span<const predictor::LabeledDoc> train,
    std::span<const predictor::LabeledDoc> val,
    const labels::SpecialVocab& vocab, const predictor::TrainerConfig& trainer,
    Metric metric) {
  if (train.empty() || val.empty()) {
    throw DataError("training-stage attribution needs non-empty train and "
                    "validation sets");
  }

  auto coalition_name = [](std::uint64_t mask) {
    std::string name = "{system";
    for (std::size_t k = 0; k < 4; ++k) {
      if (mask & (std::uint64_t{1} << k)) {
        name += std::string(", ") + ingest::kSectionNames[k];
      }
    }
    return name + "}";
  };

  CoalitionGame game;
  game.player_count = 4;
  game.player_labels.assign(ingest::kSectionNames.begin(),
                            ingest::kSectionNames.end());
  game.value = [&, trainer, metric](std::uint64_t mask) {
    try {
      std::vector<predictor::LabeledDoc> variant;
      variant.reserve(train.size());
      for (const auto& item : train) {
        predictor::LabeledDoc reduced;
        reduced.label = item.label;
        reduced.doc.task = item.doc.task;
        reduced.doc.system = item.doc.system;
        for (std::size_t k = 0; k < 4; ++k) {
          if (mask & (std::uint64_t{1} << k)) {
            reduced.doc.parts[k] = item.doc.parts[k];
          }
        }
        variant.push_back(std::move(reduced));
      }
      predictor::BaselineModel model =
          predictor::train_baseline(variant, vocab, trainer);
      predictor::BaselinePredictor predictor_impl(std::move(model));

      std::vector<int> pred;
      std::vector<int> gold;
      pred.reserve(val.size());
      gold.reserve(val.size());
      for (const auto& item : val) {
        auto prompt = predictor::reduce_to_parts(item.doc, mask);
        pred.push_back(predictor_impl.predict(prompt).predicted);
        gold.push_back(item.label);
      }
      auto report = evalkit::compute_metrics(pred, gold, vocab.size());
      return metric == Metric::Accuracy ? report.accuracy : report.weighted_f1;
    } catch (const Error& e) {
      throw ComputeError("training failed for coalition " +
                         coalition_name(mask) + ": " + e.what());
    }
  };
  return exact_shapley(game);
}

std::vector<std::string> group_players(const textualize::PromptDocument& doc,
                                       const textualize::GroupTaxonomy& taxonomy) {
  std::vector<std::string> players;
  for (const auto& group : taxonomy.groups) players.push_back(group.label);
  bool has_other = std::any_of(
      doc.sentences.begin(), doc.sentences.end(), [](const auto& sentence) {
        return sentence.group == textualize::kOtherGroupLabel;
      });
  if (has_other) players.emplace_back(textualize::kOtherGroupLabel);
  return players;
}

AttributionReport inference_stage_attribution(
    const textualize::PromptDocument& doc, const predictor::Predictor& model,
    int target, const textualize::GroupTaxonomy& taxonomy,
    const AttributionPolicy& policy) {
  if (doc.sentences.empty()) {
    throw DataError("document has no segmented sentences; run segmentation and "
                    "group assignment first");
  }
  for (const auto& sentence : doc.sentences) {
    if (sentence.group.empty()) {
      throw DataError("document has unlabeled sentences; run group assignment "
                      "first");
    }
  }
  if (target < 0 || target >= model.class_count()) {
    throw ComputeError("target class index " + std::to_string(target) +
                       " is out of range for " +
                       std::to_string(model.class_count()) + " classes");
  }

  CoalitionGame game;
  game.player_labels = group_players(doc, taxonomy);
  game.player_count = static_cast<int>(game.player_labels.size());
  if (game.player_count > 63) {
    throw ComputeError("more than 63 sentence groups are not supported");
  }
  const auto& players = game.player_labels;
  game.value = [&doc, &model, &players, target](std::uint64_t mask) {
    return predictor::coalition_value(model, doc, mask,
                                      predictor::PlayerMode::SentenceGroups,
                                      players, target);
  };

  bool exact = policy.method == AttributionPolicy::Choice::Exact ||
               (policy.method == AttributionPolicy::Choice::Auto &&
                game.player_count <= policy.exact_cap);
  if (exact) {
    return exact_shapley(game, policy.jobs, policy.exact_cap);
  }
  return cc_sample_shapley(game, policy.budget, policy.seed);
}

}  // namespace crashlens::attribution
