#include "crashlens/labels.hpp"

#include <charconv>
#include <fstream>
#include <set>

#include "json.hpp"

namespace crashlens::labels {

namespace {

using nlohmann::json;

int expected_type_count(const DatasetId& dataset, int configured) {
  switch (dataset.kind) {
    case DatasetId::Kind::Washington: return 14;
    case DatasetId::Kind::Illinois: return 16;
    case DatasetId::Kind::Other: return configured;
  }
  return configured;
}

}  // namespace

Injury derive_injury(long count) {
  if (count < 0) count = 0;
  if (count >= 3) return Injury::ThreePlus;
  return static_cast<Injury>(count);
}

Severity derive_severity(const std::string& raw_code, const LabelCodemaps& maps) {
  auto it = maps.severity_codes.find(lower_copy(trim_copy(raw_code)));
  if (it == maps.severity_codes.end()) {
    throw DataError("unmapped severity code '" + raw_code + "' for dataset " +
                    maps.dataset.name);
  }
  return static_cast<Severity>(it->second);
}

int derive_type(const std::string& raw_code, const LabelCodemaps& maps) {
  auto it = maps.type_codes.find(lower_copy(trim_copy(raw_code)));
  if (it == maps.type_codes.end()) {
    throw DataError("unmapped crash-type code '" + raw_code + "' for dataset " +
                    maps.dataset.name);
  }
  return it->second;
}

LabelSet derive_labels(const ingest::CrashEvent& event, const LabelCodemaps& maps) {
  auto value_of = [&](const std::string& key) -> const std::string& {
    const std::string* value = event.outcomes.find(key);
    if (value == nullptr) {
      throw DataError("crash '" + event.crash_id + "': outcome key '" + key +
                      "' is missing");
    }
    return *value;
  };

  const std::string& count_raw = value_of(maps.injury_count_key);
  std::string trimmed = trim_copy(count_raw);
  long count = 0;
  auto [ptr, ec] =
      std::from_chars(trimmed.data(), trimmed.data() + trimmed.size(), count);
  if (ec != std::errc{} || ptr != trimmed.data() + trimmed.size() || count < 0) {
    throw DataError("crash '" + event.crash_id + "': injured count '" +
                    count_raw + "' is not a non-negative integer");
  }

  LabelSet labels;
  labels.injury = derive_injury(count);
  labels.severity = derive_severity(value_of(maps.severity_key), maps);
  labels.type = derive_type(value_of(maps.type_key), maps);
  return labels;
}

void LabelCodemaps::validate() const {
  std::set<int> severity_targets;
  for (const auto& [code, level] : severity_codes) severity_targets.insert(level);
  if (severity_targets != std::set<int>{1, 2, 3, 4, 5}) {
    throw ConfigError("severity codemap for " + dataset.name +
                      " must cover levels 1..5 exactly");
  }
  int expected = expected_type_count(dataset, type_class_count);
  if (expected < 2) {
    throw ConfigError("type codemap for " + dataset.name +
                      " needs a class count of at least 2");
  }
  std::set<int> type_targets;
  for (const auto& [code, index] : type_codes) type_targets.insert(index);
  std::set<int> wanted;
  for (int i = 1; i <= expected; ++i) wanted.insert(i);
  if (type_targets != wanted) {
    throw ConfigError("type codemap for " + dataset.name + " must cover classes 1.." +
                      std::to_string(expected) + " exactly");
  }
}

LabelCodemaps LabelCodemaps::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open codemap file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
  }
  LabelCodemaps maps;
  maps.dataset = DatasetId::parse(j.at("dataset").get<std::string>());
  if (j.contains("injury_count_key")) {
    maps.injury_count_key = j.at("injury_count_key").get<std::string>();
  }
  if (j.contains("severity_key")) {
    maps.severity_key = j.at("severity_key").get<std::string>();
  }
  if (j.contains("type_key")) maps.type_key = j.at("type_key").get<std::string>();
  for (const auto& [code, level] : j.at("severity").items()) {
    maps.severity_codes[lower_copy(code)] = level.get<int>();
  }
  for (const auto& [code, index] : j.at("type").items()) {
    maps.type_codes[lower_copy(code)] = index.get<int>();
  }
  std::set<int> targets;
  for (const auto& [code, index] : maps.type_codes) targets.insert(index);
  maps.type_class_count = static_cast<int>(targets.size());
  maps.validate();
  return maps;
}

int SpecialVocab::index_of(std::string_view token) const {
  for (int i = 0; i < size(); ++i) {
    if (tokens[static_cast<std::size_t>(i)] == token) return i;
  }
  return -1;
}

SpecialVocab vocabulary(Task task, const DatasetId& dataset, int type_class_count) {
  SpecialVocab vocab;
  vocab.task = task;
  vocab.dataset = dataset;
  switch (task) {
    case Task::Injury:
      vocab.tokens = {"<ZERO>", "<ONE>", "<TWO>", "<THREE AND MORE THAN THREE>"};
      break;
    case Task::Severity:
      for (int k = 1; k <= 5; ++k) vocab.tokens.push_back("<S" + std::to_string(k) + ">");
      break;
    case Task::Type: {
      int count = expected_type_count(dataset, type_class_count);
      if (count < 2) {
        throw ConfigError("type vocabulary for " + dataset.name +
                          " needs a class count of at least 2");
      }
      for (int k = 1; k <= count; ++k) {
        vocab.tokens.push_back("<T" + std::to_string(k) + ">");
      }
      break;
    }
  }
  return vocab;
}

int class_index(const LabelSet& labels, Task task) {
  switch (task) {
    case Task::Injury: return static_cast<int>(labels.injury);
    case Task::Severity: return static_cast<int>(labels.severity) - 1;
    case Task::Type: return labels.type - 1;
  }
  throw ComputeError("unknown task");
}

}  // namespace crashlens::labels
