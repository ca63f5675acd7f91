#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace crashlens {

// Error categories; the CLI maps each to a distinct exit code.
enum class ErrorKind { Config, Data, Transport, Compute };

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

private:
  ErrorKind kind_;
};

class ConfigError : public Error {
public:
  explicit ConfigError(const std::string& m) : Error(ErrorKind::Config, m) {}
};

class DataError : public Error {
public:
  explicit DataError(const std::string& m) : Error(ErrorKind::Data, m) {}
};

class TransportError : public Error {
public:
  explicit TransportError(const std::string& m) : Error(ErrorKind::Transport, m) {}
};

// Remote endpoint answered but violated the wire contract. Shares the
// transport exit code but is a distinct type so callers can tell a bad
// response from a dead connection.
class ProtocolError : public TransportError {
public:
  explicit ProtocolError(const std::string& m) : TransportError(m) {}
};

class ComputeError : public Error {
public:
  explicit ComputeError(const std::string& m) : Error(ErrorKind::Compute, m) {}
};

enum class Task { Injury, Severity, Type };

std::string to_string(Task task);
Task parse_task(std::string_view text);

struct DatasetId {
  enum class Kind { Washington, Illinois, Other };
  Kind kind = Kind::Other;
  std::string name;  // lowercase identifier, e.g. "washington"

  static DatasetId washington() { return {Kind::Washington, "washington"}; }
  static DatasetId illinois() { return {Kind::Illinois, "illinois"}; }
  static DatasetId other(std::string name) { return {Kind::Other, std::move(name)}; }
  static DatasetId parse(std::string_view text);

  bool operator==(const DatasetId& rhs) const {
    return kind == rhs.kind && name == rhs.name;
  }
};

// Insertion-ordered string map. Sections are small (tens of keys), so
// lookups are linear scans.
class OrderedMap {
public:
  using Item = std::pair<std::string, std::string>;

  bool contains(std::string_view key) const;
  const std::string* find(std::string_view key) const;
  // Inserts or overwrites; insertion order is preserved on overwrite.
  void set(std::string key, std::string value);
  // Inserts only; throws DataError on duplicate key.
  void insert_unique(std::string key, std::string value);
  bool erase(std::string_view key);

  bool empty() const { return items_.empty(); }
  std::size_t size() const { return items_.size(); }
  const std::vector<Item>& items() const { return items_; }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

  bool operator==(const OrderedMap&) const = default;

private:
  std::vector<Item> items_;
};

// Collector for non-fatal warnings emitted by parsing and rendering.
struct Diagnostics {
  std::vector<std::string> messages;
  void warn(std::string message) { messages.push_back(std::move(message)); }
  bool empty() const { return messages.empty(); }
};

inline void warn_into(Diagnostics* diag, std::string message) {
  if (diag != nullptr) diag->warn(std::move(message));
}

// --- deterministic helpers ---------------------------------------------

std::uint64_t fnv1a64(std::string_view bytes);
std::string to_hex(std::uint64_t value);

// Uniform draw in [0, bound) by rejection; fully specified so results are
// identical across platforms (uniform_int_distribution is not).
std::uint64_t bounded_rand(std::mt19937_64& rng, std::uint64_t bound);

template <typename T>
void deterministic_shuffle(std::vector<T>& values, std::mt19937_64& rng) {
  for (std::size_t i = values.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(bounded_rand(rng, i));
    std::swap(values[i - 1], values[j]);
  }
}

// --- string helpers -----------------------------------------------------

std::string lower_copy(std::string_view text);
std::string trim_copy(std::string_view text);
bool is_blank(std::string_view text);
std::vector<std::string> split(std::string_view text, char delimiter);
// Lowercased [a-z0-9]+ runs; everything else separates tokens.
std::vector<std::string> word_tokens(std::string_view text);
std::size_t word_count(std::string_view text);
// True if key equals base or ends with " " + base (unit keys carry
// "unit N [person M] " prefixes).
bool key_matches(std::string_view key, std::string_view base);

}  // namespace crashlens
