#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crashlens/common.hpp"
#include "crashlens/predictor.hpp"
#include "crashlens/textualize.hpp"

namespace crashlens::attribution {

// A cooperative game over n players. The value function must be pure; any
// always-included base players (the system prompt) are the value function's
// concern, so value(0) is the base-only worth.
struct CoalitionGame {
  int player_count = 0;
  std::vector<std::string> player_labels;  // empty or player_count entries
  std::function<double(std::uint64_t)> value;
};

enum class Method { Exact, ComplementarySampled };

struct AttributionReport {
  std::vector<double> phi;
  std::vector<std::string> player_labels;
  Method method = Method::Exact;
  std::uint64_t budget = 0;  // value evaluations spent (sampled only)
  int strata = 0;            // sampled only
  std::uint64_t seed = 0;    // sampled only
  std::optional<std::vector<double>> std_error;  // sampled only
  double v_full = 0.0;
  double v_base = 0.0;

  double phi_sum() const;
};

// Exact enumeration: each of the 2^n subsets is evaluated exactly once;
// jobs > 1 evaluates subsets concurrently, accumulation stays index-ordered.
AttributionReport exact_shapley(const CoalitionGame& game, int jobs = 1,
                                int cap = 20);

// Smallest budget for which every (player, stratum) cell gets a sample:
// the grand pair plus one block-cover round per size class.
std::uint64_t cc_min_budget(int player_count);

// Size-stratified complementary-contribution sampling:
//   phi_i = (1/n) * sum_k E[v(S) - v(N\S) | i in S, |S| = k].
// Each sampled pair (S, N\S) yields one sample for every player. Subsets are
// drawn as cyclic blocks of seeded random permutations so every cell is
// covered; remaining budget is spread proportionally over the strata.
AttributionReport cc_sample_shapley(const CoalitionGame& game,
                                    std::uint64_t budget, std::uint64_t seed);

enum class Metric { Accuracy, F1 };

// Retrains the baseline on every part coalition (16 retrains, shared seed)
// and attributes the validation metric across the four content parts.
AttributionReport training_stage_attribution(
    std::span<const predictor::LabeledDoc> train,
    std::span<const predictor::LabeledDoc> val,
    const labels::SpecialVocab& vocab, const predictor::TrainerConfig& trainer,
    Metric metric);

struct AttributionPolicy {
  enum class Choice { Auto, Exact, Sampled };
  Choice method = Choice::Auto;
  std::uint64_t budget = 4096;
  int exact_cap = 20;
  std::uint64_t seed = 0;
  int jobs = 1;
};

// Players are the taxonomy's sentence groups (taxonomy order) plus a final
// "other" player when the document has unmatched sentences.
std::vector<std::string> group_players(const textualize::PromptDocument& doc,
                                       const textualize::GroupTaxonomy& taxonomy);

AttributionReport inference_stage_attribution(
    const textualize::PromptDocument& doc, const predictor::Predictor& model,
    int target, const textualize::GroupTaxonomy& taxonomy,
    const AttributionPolicy& policy = {});

}  // namespace crashlens::attribution
