#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crashlens/common.hpp"
#include "crashlens/ingest.hpp"

namespace crashlens::textualize {

// One sentence pattern per attribute key, in render order. A rule with key
// "*" is the catch-all for keys the template does not name. Patterns may use
// {value} and {key} ({key} renders with underscores as spaces). Unit-section
// keys match rules by suffix ("bac" matches "unit 1 person 1 bac").
struct PartTemplate {
  struct Rule {
    std::string key;
    std::string pattern;
  };
  std::vector<Rule> rules;

  bool has_catch_all() const;
  static PartTemplate parse(std::string_view text);
  static PartTemplate load(const std::filesystem::path& path);
};

struct TemplateSet {
  std::array<PartTemplate, 4> parts;  // general, infrastructure, event, unit
  std::string system_injury;
  std::string system_severity;
  std::string system_type;

  const std::string& system_for(Task task) const;
  // Expects <dir>/{general,infrastructure,event,unit}.tmpl and
  // <dir>/system_{injury,severity,type}.txt
  static TemplateSet load(const std::filesystem::path& dir);
};

// Provenance of a rendered character range: which attribute key produced it.
struct KeySpan {
  std::size_t offset = 0;
  std::size_t length = 0;
  std::string key;
  bool operator==(const KeySpan&) const = default;
};

struct RenderedPart {
  std::string text;
  std::vector<KeySpan> spans;
};

struct SentenceUnit {
  std::string text;       // without the trailing delimiter
  int part = 0;           // content part index 0..3
  std::string delimiter;  // delimiter chars plus following whitespace
  std::string source_key; // attribute key that produced this sentence
  std::string group;      // assigned by assign_groups
  bool operator==(const SentenceUnit&) const = default;
};

struct PromptDocument {
  Task task{};
  DatasetId dataset;
  std::string crash_id;
  std::string system;
  std::array<std::string, 4> parts;
  std::array<std::vector<KeySpan>, 4> spans;
  std::vector<SentenceUnit> sentences;

  // Rejoins the recorded sentences of one part; equals parts[k] byte-exactly
  // once segment_sentences has run.
  std::string rejoin_part(int part) const;
  std::string full_text() const;  // system + parts, newline-separated

  bool operator==(const PromptDocument&) const = default;
};

struct GroupTaxonomy {
  struct Group {
    std::string label;
    std::vector<std::string> keys;
  };
  DatasetId dataset;
  std::vector<Group> groups;

  int group_count() const { return static_cast<int>(groups.size()); }
  // Throws ConfigError if a key is owned by more than one group or the
  // group count does not match the dataset's expected count (14 Washington,
  // 12 Illinois; free otherwise).
  void validate() const;
  static GroupTaxonomy load(const std::filesystem::path& path);
};

inline constexpr char kOtherGroupLabel[] = "other";

RenderedPart render_part(const OrderedMap& section, const PartTemplate& tmpl,
                         Diagnostics* diag = nullptr);

// Optional hook: externally paraphrased part texts keyed by crash id. When a
// part override is present it replaces the rendered text and the part's key
// provenance is empty (its sentences all land in the "other" group).
struct ExternalParts {
  std::array<std::optional<std::string>, 4> parts;
};
ExternalParts load_external_parts(const std::filesystem::path& csv_path,
                                  const std::string& crash_id);

PromptDocument build_prompt(const ingest::CrashEvent& event, Task task,
                            const TemplateSet& templates,
                            Diagnostics* diag = nullptr,
                            const ExternalParts* overrides = nullptr);

// Splits parts on '.' and ',' outside numeric tokens and records per-sentence
// delimiters so the split is reversible.
PromptDocument segment_sentences(PromptDocument doc);

PromptDocument assign_groups(PromptDocument doc, const GroupTaxonomy& taxonomy);

}  // namespace crashlens::textualize
