#include "crashlens/textualize.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "crashlens/csv.hpp"

namespace crashlens::textualize {

namespace {

using nlohmann::json;

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open template file: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string prettify_key(std::string_view key) {
  std::string out(key);
  std::replace(out.begin(), out.end(), '_', ' ');
  return out;
}

std::string substitute(std::string_view pattern, std::string_view key,
                       std::string_view value) {
  std::string out;
  out.reserve(pattern.size() + value.size());
  for (std::size_t i = 0; i < pattern.size();) {
    if (pattern.compare(i, 7, "{value}") == 0) {
      out.append(value);
      i += 7;
    } else if (pattern.compare(i, 5, "{key}") == 0) {
      out.append(prettify_key(key));
      i += 5;
    } else {
      out.push_back(pattern[i]);
      ++i;
    }
  }
  return out;
}

}  // namespace

bool PartTemplate::has_catch_all() const {
  return std::any_of(rules.begin(), rules.end(),
                     [](const Rule& r) { return r.key == "*"; });
}

PartTemplate PartTemplate::parse(std::string_view text) {
  PartTemplate tmpl;
  for (const auto& raw_line : split(text, '\n')) {
    std::string line = trim_copy(raw_line);
    if (line.empty() || line.front() == '#') continue;
    std::size_t colon = line.find(':');
    if (colon == std::string::npos) {
      throw ConfigError("template line is missing ':' separator: " + line);
    }
    Rule rule;
    rule.key = trim_copy(line.substr(0, colon));
    rule.pattern = trim_copy(line.substr(colon + 1));
    if (rule.key.empty() || rule.pattern.empty()) {
      throw ConfigError("template line has an empty key or pattern: " + line);
    }
    tmpl.rules.push_back(std::move(rule));
  }
  return tmpl;
}

PartTemplate PartTemplate::load(const std::filesystem::path& path) {
  return parse(read_text_file(path));
}

const std::string& TemplateSet::system_for(Task task) const {
  switch (task) {
    case Task::Injury: return system_injury;
    case Task::Severity: return system_severity;
    case Task::Type: return system_type;
  }
  throw ComputeError("unknown task");
}

TemplateSet TemplateSet::load(const std::filesystem::path& dir) {
  TemplateSet set;
  const std::array<const char*, 4> names{"general", "infrastructure", "event",
                                         "unit"};
  for (std::size_t i = 0; i < 4; ++i) {
    set.parts[i] = PartTemplate::load(dir / (std::string(names[i]) + ".tmpl"));
  }
  set.system_injury = trim_copy(read_text_file(dir / "system_injury.txt"));
  set.system_severity = trim_copy(read_text_file(dir / "system_severity.txt"));
  set.system_type = trim_copy(read_text_file(dir / "system_type.txt"));
  return set;
}

RenderedPart render_part(const OrderedMap& section, const PartTemplate& tmpl,
                         Diagnostics* diag) {
  RenderedPart out;
  if (tmpl.rules.empty()) {
    warn_into(diag, "template references no keys; rendered empty text");
    return out;
  }
  if (section.empty()) {
    warn_into(diag, "section is empty; rendered empty text");
    return out;
  }

  // Keys claimed by any named rule never fall through to the catch-all.
  std::set<std::string> named;
  for (const auto& [key, _] : section) {
    for (const auto& rule : tmpl.rules) {
      if (rule.key != "*" && key_matches(key, rule.key)) {
        named.insert(key);
        break;
      }
    }
  }

  auto append_sentence = [&out](const std::string& key, std::string sentence) {
    if (sentence.empty()) return;
    if (sentence.back() != '.') sentence.push_back('.');
    if (!out.text.empty()) out.text.push_back(' ');
    KeySpan span;
    span.offset = out.text.size();
    span.length = sentence.size();
    span.key = key;
    out.text.append(sentence);
    out.spans.push_back(std::move(span));
  };

  for (const auto& rule : tmpl.rules) {
    if (rule.key == "*") {
      for (const auto& [key, value] : section) {
        if (named.contains(key)) continue;
        append_sentence(key, substitute(rule.pattern, key, value));
      }
    } else {
      for (const auto& [key, value] : section) {
        if (!key_matches(key, rule.key)) continue;
        append_sentence(key, substitute(rule.pattern, key, value));
      }
    }
  }
  return out;
}

ExternalParts load_external_parts(const std::filesystem::path& csv_path,
                                  const std::string& crash_id) {
  csv::Table table = csv::read_file(csv_path);
  int id_col = table.column("crash_id");
  if (id_col < 0) throw DataError("external parts file: missing crash_id column");
  ExternalParts parts;
  for (const auto& row : table.rows) {
    if (row[static_cast<std::size_t>(id_col)] != crash_id) continue;
    for (std::size_t k = 0; k < 4; ++k) {
      int col = table.column(ingest::kSectionNames[k]);
      if (col >= 0 && !is_blank(row[static_cast<std::size_t>(col)])) {
        parts.parts[k] = row[static_cast<std::size_t>(col)];
      }
    }
    break;
  }
  return parts;
}

PromptDocument build_prompt(const ingest::CrashEvent& event, Task task,
                            const TemplateSet& templates, Diagnostics* diag,
                            const ExternalParts* overrides) {
  PromptDocument doc;
  doc.task = task;
  doc.dataset = event.dataset;
  doc.crash_id = event.crash_id;
  doc.system = templates.system_for(task);

  for (std::size_t k = 0; k < 4; ++k) {
    if (overrides != nullptr && overrides->parts[k]) {
      doc.parts[k] = *overrides->parts[k];
      continue;
    }
    RenderedPart rendered;
    if (k == 1) {
      // Annotations are textualized inside the infrastructure part.
      OrderedMap merged = event.infrastructure;
      for (const auto& [key, value] : event.annotations) merged.set(key, value);
      rendered = render_part(merged, templates.parts[k], diag);
    } else {
      rendered = render_part(event.section(k), templates.parts[k], diag);
    }
    doc.parts[k] = std::move(rendered.text);
    doc.spans[k] = std::move(rendered.spans);
    std::size_t words = word_count(doc.parts[k]);
    if (words > 150) {
      warn_into(diag, "crash '" + event.crash_id + "': " +
                          ingest::kSectionNames[k] + " part is " +
                          std::to_string(words) + " words (target is about 100)");
    }
  }
  return doc;
}

namespace {

bool splits_here(const std::string& text, std::size_t i) {
  char c = text[i];
  if (c != '.' && c != ',') return false;
  bool digit_before =
      i > 0 && std::isdigit(static_cast<unsigned char>(text[i - 1])) != 0;
  bool digit_after = i + 1 < text.size() &&
                     std::isdigit(static_cast<unsigned char>(text[i + 1])) != 0;
  return !(digit_before && digit_after);
}

std::string find_source_key(const std::vector<KeySpan>& spans,
                            std::size_t offset) {
  for (const auto& span : spans) {
    if (offset >= span.offset && offset < span.offset + span.length) {
      return span.key;
    }
  }
  return {};
}

}  // namespace

PromptDocument segment_sentences(PromptDocument doc) {
  doc.sentences.clear();
  for (int k = 0; k < 4; ++k) {
    const std::string& text = doc.parts[static_cast<std::size_t>(k)];
    const auto& spans = doc.spans[static_cast<std::size_t>(k)];
    // Blank segments (double delimiters, stray whitespace) fold into the
    // next sentence's text so the rejoin stays byte-exact.
    std::string pending;
    std::size_t pending_offset = 0;
    bool have_pending = false;
    std::size_t start = 0;
    std::size_t first_unit = doc.sentences.size();

    auto emit_segment = [&](std::size_t seg_begin, std::size_t seg_end,
                            std::string delimiter) {
      std::string combined =
          pending + text.substr(seg_begin, seg_end - seg_begin);
      if (is_blank(combined)) {
        if (!have_pending) {
          pending_offset = seg_begin;
          have_pending = true;
        }
        pending = combined + delimiter;
        return;
      }
      SentenceUnit unit;
      unit.text = std::move(combined);
      unit.part = k;
      unit.delimiter = std::move(delimiter);
      unit.source_key =
          find_source_key(spans, have_pending ? pending_offset : seg_begin);
      doc.sentences.push_back(std::move(unit));
      pending.clear();
      have_pending = false;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
      if (!splits_here(text, i)) continue;
      std::size_t delim_end = i + 1;
      while (delim_end < text.size() &&
             std::isspace(static_cast<unsigned char>(text[delim_end]))) {
        ++delim_end;
      }
      emit_segment(start, i, text.substr(i, delim_end - i));
      start = delim_end;
      i = delim_end - 1;
    }
    if (start < text.size()) emit_segment(start, text.size(), "");
    if (!pending.empty()) {
      if (doc.sentences.size() > first_unit) {
        doc.sentences.back().delimiter += pending;
      } else {
        SentenceUnit unit;
        unit.text = pending;
        unit.part = k;
        unit.source_key = find_source_key(spans, pending_offset);
        doc.sentences.push_back(std::move(unit));
      }
    }
  }
  return doc;
}

void GroupTaxonomy::validate() const {
  int expected = -1;
  if (dataset.kind == DatasetId::Kind::Washington) expected = 14;
  if (dataset.kind == DatasetId::Kind::Illinois) expected = 12;
  if (expected > 0 && group_count() != expected) {
    throw ConfigError("taxonomy for " + dataset.name + " must define " +
                      std::to_string(expected) + " groups, found " +
                      std::to_string(group_count()));
  }
  if (groups.empty()) throw ConfigError("taxonomy defines no groups");

  std::set<std::string> labels;
  std::set<std::string> keys;
  for (const auto& group : groups) {
    if (group.label.empty()) throw ConfigError("taxonomy group with empty label");
    if (group.label == kOtherGroupLabel) {
      throw ConfigError("taxonomy label '" + group.label +
                        "' is reserved for unmatched sentences");
    }
    if (!labels.insert(group.label).second) {
      throw ConfigError("duplicate taxonomy label '" + group.label + "'");
    }
    for (const auto& key : group.keys) {
      if (!keys.insert(key).second) {
        throw ConfigError("taxonomy key '" + key +
                          "' is owned by more than one group");
      }
    }
  }
}

GroupTaxonomy GroupTaxonomy::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open taxonomy file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
  }
  GroupTaxonomy taxonomy;
  taxonomy.dataset = DatasetId::parse(j.at("dataset").get<std::string>());
  for (const auto& g : j.at("groups")) {
    GroupTaxonomy::Group group;
    group.label = g.at("label").get<std::string>();
    for (const auto& key : g.at("keys")) group.keys.push_back(key.get<std::string>());
    taxonomy.groups.push_back(std::move(group));
  }
  taxonomy.validate();
  return taxonomy;
}

PromptDocument assign_groups(PromptDocument doc, const GroupTaxonomy& taxonomy) {
  taxonomy.validate();
  for (auto& sentence : doc.sentences) {
    sentence.group = kOtherGroupLabel;
    if (sentence.source_key.empty()) continue;
    // Most specific (longest) owning key wins when several bases match.
    std::size_t best_len = 0;
    for (const auto& group : taxonomy.groups) {
      for (const auto& base : group.keys) {
        if (base.size() > best_len && key_matches(sentence.source_key, base)) {
          best_len = base.size();
          sentence.group = group.label;
        }
      }
    }
  }
  return doc;
}

std::string PromptDocument::rejoin_part(int part) const {
  std::string out;
  for (const auto& sentence : sentences) {
    if (sentence.part != part) continue;
    out += sentence.text;
    out += sentence.delimiter;
  }
  return out;
}

std::string PromptDocument::full_text() const {
  std::string out = system;
  for (const auto& part : parts) {
    out.push_back('\n');
    out += part;
  }
  return out;
}

}  // namespace crashlens::textualize
