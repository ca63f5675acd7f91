#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "crashlens/common.hpp"
#include "crashlens/ingest.hpp"

namespace crashlens::labels {

enum class Injury { Zero = 0, One = 1, Two = 2, ThreePlus = 3 };

// KABCO levels: S1 = no apparent injury ... S5 = fatal.
enum class Severity { S1 = 1, S2 = 2, S3 = 3, S4 = 4, S5 = 5 };

struct LabelSet {
  Injury injury{};
  Severity severity{};
  int type = 1;  // 1-based crash-type index
};

// Per-dataset raw-code maps and the outcome keys they read from.
struct LabelCodemaps {
  DatasetId dataset;
  std::string injury_count_key = "injury_count";
  std::string severity_key = "severity_code";
  std::string type_key = "crash_type";
  std::map<std::string, int> severity_codes;  // raw code -> 1..5
  std::map<std::string, int> type_codes;      // raw code -> 1..K
  int type_class_count = 0;

  // Validates severity covers {1..5} and type covers {1..K} with K = 14
  // (Washington), 16 (Illinois), or the configured count otherwise.
  void validate() const;
  static LabelCodemaps load(const std::filesystem::path& path);
};

Injury derive_injury(long count);
Severity derive_severity(const std::string& raw_code, const LabelCodemaps& maps);
int derive_type(const std::string& raw_code, const LabelCodemaps& maps);
LabelSet derive_labels(const ingest::CrashEvent& event, const LabelCodemaps& maps);

// Ordered special-token list; position defines the class-index <-> token
// bijection used everywhere.
struct SpecialVocab {
  Task task{};
  DatasetId dataset;
  std::vector<std::string> tokens;

  int size() const { return static_cast<int>(tokens.size()); }
  int index_of(std::string_view token) const;  // -1 when absent
};

// type_class_count is required only for Other datasets on the Type task.
SpecialVocab vocabulary(Task task, const DatasetId& dataset,
                        int type_class_count = 0);

int class_index(const LabelSet& labels, Task task);

}  // namespace crashlens::labels
