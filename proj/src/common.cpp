#include "crashlens/common.hpp"

#include <algorithm>
#include <cctype>

namespace crashlens {

std::string to_string(Task task) {
  switch (task) {
    case Task::Injury: return "injury";
    case Task::Severity: return "severity";
    case Task::Type: return "type";
  }
  return "unknown";
}

Task parse_task(std::string_view text) {
  std::string t = lower_copy(text);
  if (t == "injury") return Task::Injury;
  if (t == "severity") return Task::Severity;
  if (t == "type") return Task::Type;
  throw ConfigError("unknown task '" + std::string(text) +
                    "' (expected injury, severity, or type)");
}

DatasetId DatasetId::parse(std::string_view text) {
  std::string t = lower_copy(trim_copy(text));
  if (t == "washington" || t == "wa") return washington();
  if (t == "illinois" || t == "il") return illinois();
  if (t.empty()) throw ConfigError("dataset name is empty");
  return other(t);
}

bool OrderedMap::contains(std::string_view key) const {
  return find(key) != nullptr;
}

const std::string* OrderedMap::find(std::string_view key) const {
  for (const auto& [k, v] : items_) {
    if (k == key) return &v;
  }
  return nullptr;
}

void OrderedMap::set(std::string key, std::string value) {
  for (auto& [k, v] : items_) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  items_.emplace_back(std::move(key), std::move(value));
}

void OrderedMap::insert_unique(std::string key, std::string value) {
  if (contains(key)) throw DataError("duplicate key '" + key + "'");
  items_.emplace_back(std::move(key), std::move(value));
}

bool OrderedMap::erase(std::string_view key) {
  for (auto it = items_.begin(); it != items_.end(); ++it) {
    if (it->first == key) {
      items_.erase(it);
      return true;
    }
  }
  return false;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string to_hex(std::uint64_t value) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[value & 0xF];
    value >>= 4;
  }
  return out;
}

std::uint64_t bounded_rand(std::mt19937_64& rng, std::uint64_t bound) {
  if (bound == 0) throw ComputeError("bounded_rand: bound must be positive");
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  std::uint64_t draw;
  do {
    draw = rng();
  } while (draw >= limit);
  return draw % bound;
}

std::string lower_copy(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string trim_copy(std::string_view text) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
  return std::string(text.substr(begin, end - begin));
}

bool is_blank(std::string_view text) {
  return std::all_of(text.begin(), text.end(), [](unsigned char c) {
    return std::isspace(c) != 0;
  });
}

std::vector<std::string> split(std::string_view text, char delimiter) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = text.find(delimiter, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(text.substr(start));
      return out;
    }
    out.emplace_back(text.substr(start, pos - start));
    start = pos + 1;
  }
}

std::vector<std::string> word_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::size_t word_count(std::string_view text) {
  std::size_t count = 0;
  bool in_word = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++count;
    }
  }
  return count;
}

bool key_matches(std::string_view key, std::string_view base) {
  if (key == base) return true;
  if (key.size() <= base.size() + 1) return false;
  return key.ends_with(base) && key[key.size() - base.size() - 1] == ' ';
}

}  // namespace crashlens
