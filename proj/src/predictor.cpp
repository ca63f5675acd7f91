#include "crashlens/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace crashlens::predictor {

ClassDistribution ClassDistribution::from_probs(Task task,
                                                std::vector<double> probs,
                                                double raw_mass) {
  if (probs.empty()) throw ComputeError("class distribution has no classes");
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw ComputeError("class distribution has a negative or non-finite entry");
    }
    sum += p;
  }
  if (sum <= 0.0) throw ComputeError("class distribution has zero total mass");
  ClassDistribution dist;
  dist.task = task;
  dist.raw_mass = raw_mass;
  dist.probs = std::move(probs);
  for (double& p : dist.probs) p /= sum;
  dist.predicted = 0;
  dist.confidence = dist.probs[0];
  for (int i = 1; i < static_cast<int>(dist.probs.size()); ++i) {
    if (dist.probs[static_cast<std::size_t>(i)] > dist.confidence) {
      dist.confidence = dist.probs[static_cast<std::size_t>(i)];
      dist.predicted = i;
    }
  }
  return dist;
}

ReducedPrompt reduce_to_parts(const textualize::PromptDocument& doc,
                              std::uint64_t part_mask) {
  ReducedPrompt prompt;
  prompt.task = doc.task;
  prompt.system = doc.system;
  for (std::size_t k = 0; k < 4; ++k) {
    if (part_mask & (std::uint64_t{1} << k)) prompt.parts.push_back(doc.parts[k]);
  }
  return prompt;
}

ReducedPrompt reduce_to_groups(const textualize::PromptDocument& doc,
                               std::span<const std::string> players,
                               std::uint64_t mask) {
  std::set<std::string> selected;
  for (std::size_t i = 0; i < players.size(); ++i) {
    if (mask & (std::uint64_t{1} << i)) selected.insert(players[i]);
  }
  ReducedPrompt prompt;
  prompt.task = doc.task;
  prompt.system = doc.system;
  prompt.sentence_mode = true;
  for (const auto& sentence : doc.sentences) {
    if (selected.contains(sentence.group)) prompt.sentences.push_back(sentence.text);
  }
  return prompt;
}

ClassDistribution predict_document(const Predictor& model,
                                   const textualize::PromptDocument& doc) {
  if (model.task() != doc.task) {
    throw ComputeError("predictor task does not match document task");
  }
  return model.predict(reduce_to_parts(doc, 0b1111));
}

double coalition_value(const Predictor& model,
                       const textualize::PromptDocument& doc,
                       std::uint64_t mask, PlayerMode mode,
                       std::span<const std::string> players, int target) {
  if (model.task() != doc.task) {
    throw ComputeError("predictor task does not match document task");
  }
  ReducedPrompt prompt = mode == PlayerMode::Parts
                             ? reduce_to_parts(doc, mask)
                             : reduce_to_groups(doc, players, mask);
  ClassDistribution dist = model.predict(prompt);
  if (target < 0 || target >= static_cast<int>(dist.probs.size())) {
    throw ComputeError("target class index " + std::to_string(target) +
                       " is out of range");
  }
  return dist.probs[static_cast<std::size_t>(target)];
}

namespace detail {

SparseVec featurize(const ReducedPrompt& prompt,
                    const std::unordered_map<std::string, int>& feature_index) {
  std::map<int, double> counts;
  auto add_text = [&](const std::string& text) {
    for (const auto& token : word_tokens(text)) {
      auto it = feature_index.find(token);
      if (it != feature_index.end()) counts[it->second] += 1.0;
    }
  };
  add_text(prompt.system);
  for (const auto& part : prompt.parts) add_text(part);
  for (const auto& sentence : prompt.sentences) add_text(sentence);
  return SparseVec(counts.begin(), counts.end());
}

namespace {

std::vector<double> class_scores(const std::vector<std::vector<double>>& weights,
                                 const SparseVec& x) {
  const std::size_t classes = weights.size();
  const std::size_t bias_col = weights.empty() ? 0 : weights[0].size() - 1;
  std::vector<double> scores(classes);
  for (std::size_t k = 0; k < classes; ++k) {
    double s = weights[k][bias_col];
    for (const auto& [col, count] : x) {
      s += weights[k][static_cast<std::size_t>(col)] * count;
    }
    scores[k] = s;
  }
  return scores;
}

std::vector<double> softmax(std::vector<double> scores) {
  double max_score = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (double& s : scores) {
    s = std::exp(s - max_score);
    sum += s;
  }
  for (double& s : scores) s /= sum;
  return scores;
}

}  // namespace

double cross_entropy_loss(const std::vector<std::vector<double>>& weights,
                          std::span<const SparseVec> xs, std::span<const int> ys,
                          double l2) {
  if (xs.size() != ys.size() || xs.empty()) {
    throw ComputeError("loss needs matching non-empty samples and labels");
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    auto probs = softmax(class_scores(weights, xs[i]));
    double p = probs[static_cast<std::size_t>(ys[i])];
    loss -= std::log(std::max(p, 1e-300));
  }
  loss /= static_cast<double>(xs.size());
  const std::size_t bias_col = weights[0].size() - 1;
  double penalty = 0.0;
  for (const auto& row : weights) {
    for (std::size_t j = 0; j < bias_col; ++j) penalty += row[j] * row[j];
  }
  return loss + 0.5 * l2 * penalty;
}

std::vector<std::vector<double>> cross_entropy_gradient(
    const std::vector<std::vector<double>>& weights, std::span<const SparseVec> xs,
    std::span<const int> ys, double l2) {
  if (xs.size() != ys.size() || xs.empty()) {
    throw ComputeError("gradient needs matching non-empty samples and labels");
  }
  const std::size_t classes = weights.size();
  const std::size_t cols = weights[0].size();
  const std::size_t bias_col = cols - 1;
  std::vector<std::vector<double>> grad(classes, std::vector<double>(cols, 0.0));
  const double inv_m = 1.0 / static_cast<double>(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    auto probs = softmax(class_scores(weights, xs[i]));
    for (std::size_t k = 0; k < classes; ++k) {
      double coef = probs[k] - (static_cast<int>(k) == ys[i] ? 1.0 : 0.0);
      coef *= inv_m;
      for (const auto& [col, count] : xs[i]) {
        grad[k][static_cast<std::size_t>(col)] += coef * count;
      }
      grad[k][bias_col] += coef;
    }
  }
  for (std::size_t k = 0; k < classes; ++k) {
    for (std::size_t j = 0; j < bias_col; ++j) grad[k][j] += l2 * weights[k][j];
  }
  return grad;
}

}  // namespace detail

BaselineModel train_baseline(std::span<const LabeledDoc> corpus,
                             const labels::SpecialVocab& vocab,
                             const TrainerConfig& config) {
  if (corpus.empty()) throw DataError("training corpus is empty");
  const int classes = vocab.size();
  std::set<int> present;
  for (const auto& item : corpus) {
    if (item.label < 0 || item.label >= classes) {
      throw DataError("training label " + std::to_string(item.label) +
                      " is outside the vocabulary of " + std::to_string(classes) +
                      " classes");
    }
    present.insert(item.label);
  }
  if (present.size() < 2) {
    throw DataError("degenerate corpus: training needs at least 2 distinct "
                    "classes, found " + std::to_string(present.size()));
  }

  BaselineModel model;
  model.task = vocab.task;
  model.vocabulary = vocab.tokens;
  model.trainer = config;

  std::set<std::string> token_set;
  for (const auto& item : corpus) {
    for (const auto& token : word_tokens(item.doc.full_text())) {
      token_set.insert(token);
    }
  }
  model.feature_tokens.assign(token_set.begin(), token_set.end());
  std::unordered_map<std::string, int> feature_index;
  for (int i = 0; i < model.feature_count(); ++i) {
    feature_index.emplace(model.feature_tokens[static_cast<std::size_t>(i)], i);
  }

  std::vector<detail::SparseVec> xs;
  std::vector<int> ys;
  xs.reserve(corpus.size());
  ys.reserve(corpus.size());
  for (const auto& item : corpus) {
    xs.push_back(detail::featurize(reduce_to_parts(item.doc, 0b1111), feature_index));
    ys.push_back(item.label);
  }

  std::vector<std::vector<int>> by_class(static_cast<std::size_t>(classes));
  for (std::size_t i = 0; i < ys.size(); ++i) {
    by_class[static_cast<std::size_t>(ys[i])].push_back(static_cast<int>(i));
  }

  model.weights.assign(static_cast<std::size_t>(classes),
                       std::vector<double>(model.feature_tokens.size() + 1, 0.0));

  std::mt19937_64 rng(config.seed);
  const std::size_t per_class =
      (corpus.size() + static_cast<std::size_t>(classes) - 1) /
      static_cast<std::size_t>(classes);

  std::vector<detail::SparseVec> batch_x;
  std::vector<int> batch_y;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::span<const detail::SparseVec> epoch_x(xs);
    std::span<const int> epoch_y(ys);
    if (config.class_balanced) {
      batch_x.clear();
      batch_y.clear();
      for (int k = 0; k < classes; ++k) {
        const auto& pool = by_class[static_cast<std::size_t>(k)];
        if (pool.empty()) continue;
        for (std::size_t draw = 0; draw < per_class; ++draw) {
          int idx = pool[static_cast<std::size_t>(bounded_rand(rng, pool.size()))];
          batch_x.push_back(xs[static_cast<std::size_t>(idx)]);
          batch_y.push_back(ys[static_cast<std::size_t>(idx)]);
        }
      }
      epoch_x = batch_x;
      epoch_y = batch_y;
    }
    auto grad = detail::cross_entropy_gradient(model.weights, epoch_x, epoch_y,
                                               config.l2);
    for (std::size_t k = 0; k < model.weights.size(); ++k) {
      for (std::size_t j = 0; j < model.weights[k].size(); ++j) {
        model.weights[k][j] -= config.learning_rate * grad[k][j];
      }
    }
  }
  return model;
}

BaselinePredictor::BaselinePredictor(BaselineModel model)
    : model_(std::move(model)) {
  for (int i = 0; i < model_.feature_count(); ++i) {
    feature_index_.emplace(model_.feature_tokens[static_cast<std::size_t>(i)], i);
  }
}

ClassDistribution BaselinePredictor::predict(const ReducedPrompt& prompt) const {
  if (prompt.task != model_.task) {
    throw ComputeError("prompt task does not match baseline model task");
  }
  auto x = detail::featurize(prompt, feature_index_);
  auto probs = detail::softmax(detail::class_scores(model_.weights, x));
  return ClassDistribution::from_probs(model_.task, std::move(probs));
}

namespace {

std::string format_double(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

}  // namespace

std::string BaselineModel::save_string() const {
  std::ostringstream out;
  out << "crashlens baseline model v1\n";
  out << "task " << to_string(task) << "\n";
  out << "classes " << class_count() << "\n";
  out << "features " << feature_count() << "\n";
  out << "trainer lr " << format_double(trainer.learning_rate) << " epochs "
      << trainer.epochs << " l2 " << format_double(trainer.l2) << " balanced "
      << (trainer.class_balanced ? 1 : 0) << " seed " << trainer.seed << "\n";
  for (const auto& token : vocabulary) out << "class " << token << "\n";
  for (const auto& token : feature_tokens) out << "feature " << token << "\n";
  for (const auto& row : weights) {
    out << "row";
    for (double w : row) out << ' ' << format_double(w);
    out << "\n";
  }
  return out.str();
}

void BaselineModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write model file: " + path.string());
  out << save_string();
}

BaselineModel BaselineModel::load_string(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "crashlens baseline model v1") {
    throw DataError("model file: unknown format or version");
  }
  BaselineModel model;
  int classes = 0;
  int features = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "task") {
      std::string name;
      ls >> name;
      model.task = parse_task(name);
    } else if (tag == "classes") {
      ls >> classes;
    } else if (tag == "features") {
      ls >> features;
    } else if (tag == "trainer") {
      std::string key;
      while (ls >> key) {
        if (key == "lr") ls >> model.trainer.learning_rate;
        else if (key == "epochs") ls >> model.trainer.epochs;
        else if (key == "l2") ls >> model.trainer.l2;
        else if (key == "balanced") {
          int b = 0;
          ls >> b;
          model.trainer.class_balanced = b != 0;
        } else if (key == "seed") {
          ls >> model.trainer.seed;
        }
      }
    } else if (tag == "class") {
      std::string rest = line.substr(6);
      model.vocabulary.push_back(rest);
    } else if (tag == "feature") {
      std::string token;
      ls >> token;
      model.feature_tokens.push_back(token);
    } else if (tag == "row") {
      std::vector<double> row;
      double w = 0.0;
      while (ls >> w) row.push_back(w);
      model.weights.push_back(std::move(row));
    } else {
      throw DataError("model file: unknown line tag '" + tag + "'");
    }
  }
  if (model.class_count() != classes || model.feature_count() != features) {
    throw DataError("model file: class or feature count mismatch");
  }
  for (const auto& row : model.weights) {
    if (static_cast<int>(row.size()) != features + 1) {
      throw DataError("model file: weight row width mismatch");
    }
  }
  if (static_cast<int>(model.vocabulary.size()) != classes) {
    throw DataError("model file: vocabulary size mismatch");
  }
  return model;
}

BaselineModel BaselineModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return load_string(buffer.str());
}

}  // namespace crashlens::predictor
