#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "crashlens/common.hpp"
#include "crashlens/labels.hpp"
#include "crashlens/textualize.hpp"

namespace crashlens::predictor {

struct ClassDistribution {
  Task task{};
  std::vector<double> probs;  // over SpecialVocab order, sums to 1
  int predicted = 0;          // argmax, ties to the lowest index
  double confidence = 0.0;    // max probability
  double raw_mass = 1.0;      // probability mass before renormalization

  // Normalizes, computes argmax/confidence, and checks invariants.
  static ClassDistribution from_probs(Task task, std::vector<double> probs,
                                      double raw_mass = 1.0);
};

// A prompt reduced to a coalition: the system prompt plus either selected
// content parts or selected sentences, in original order.
struct ReducedPrompt {
  Task task{};
  std::string system;
  std::vector<std::string> parts;
  std::vector<std::string> sentences;
  bool sentence_mode = false;
};

enum class PlayerMode { Parts, SentenceGroups };

ReducedPrompt reduce_to_parts(const textualize::PromptDocument& doc,
                              std::uint64_t part_mask);
// players[i] is selected when bit i of mask is set; sentences keep their
// original order and delimiters, dropped sentences take theirs with them.
ReducedPrompt reduce_to_groups(const textualize::PromptDocument& doc,
                               std::span<const std::string> players,
                               std::uint64_t mask);

class Predictor {
public:
  virtual ~Predictor() = default;
  virtual Task task() const = 0;
  virtual int class_count() const = 0;
  virtual ClassDistribution predict(const ReducedPrompt& prompt) const = 0;
};

ClassDistribution predict_document(const Predictor& model,
                                   const textualize::PromptDocument& doc);

// Probability of `target` under the reduced prompt. The system prompt is
// always part of the coalition.
double coalition_value(const Predictor& model,
                       const textualize::PromptDocument& doc,
                       std::uint64_t mask, PlayerMode mode,
                       std::span<const std::string> players, int target);

// --- in-repo trainable baseline -----------------------------------------

struct TrainerConfig {
  double learning_rate = 0.5;
  int epochs = 300;
  double l2 = 1e-4;             // applied to weights, not biases
  bool class_balanced = false;  // equal per-class draws each epoch
  std::uint64_t seed = 0;
};

// Multinomial logistic regression over lowercased word unigrams.
struct BaselineModel {
  Task task{};
  std::vector<std::string> vocabulary;      // class tokens, index order
  std::vector<std::string> feature_tokens;  // column -> token, sorted
  std::vector<std::vector<double>> weights; // [classes][features + 1], bias last
  TrainerConfig trainer;

  int class_count() const { return static_cast<int>(weights.size()); }
  int feature_count() const { return static_cast<int>(feature_tokens.size()); }

  std::string save_string() const;  // versioned flat text format
  void save(const std::filesystem::path& path) const;
  static BaselineModel load_string(const std::string& text);
  static BaselineModel load(const std::filesystem::path& path);
};

struct LabeledDoc {
  textualize::PromptDocument doc;
  int label = 0;  // class index in vocabulary order
};

BaselineModel train_baseline(std::span<const LabeledDoc> corpus,
                             const labels::SpecialVocab& vocab,
                             const TrainerConfig& config);

class BaselinePredictor final : public Predictor {
public:
  explicit BaselinePredictor(BaselineModel model);
  Task task() const override { return model_.task; }
  int class_count() const override { return model_.class_count(); }
  ClassDistribution predict(const ReducedPrompt& prompt) const override;
  const BaselineModel& model() const { return model_; }

private:
  BaselineModel model_;
  std::unordered_map<std::string, int> feature_index_;
};

// Training internals, exposed for gradient verification.
namespace detail {

// Sparse sample: (feature column, count), columns strictly increasing.
using SparseVec = std::vector<std::pair<int, double>>;

SparseVec featurize(const ReducedPrompt& prompt,
                    const std::unordered_map<std::string, int>& feature_index);

// Averaged cross-entropy over the batch plus (l2/2)*sum(w^2) on non-bias
// weights.
double cross_entropy_loss(const std::vector<std::vector<double>>& weights,
                          std::span<const SparseVec> xs, std::span<const int> ys,
                          double l2);
std::vector<std::vector<double>> cross_entropy_gradient(
    const std::vector<std::vector<double>>& weights, std::span<const SparseVec> xs,
    std::span<const int> ys, double l2);

}  // namespace detail

}  // namespace crashlens::predictor
