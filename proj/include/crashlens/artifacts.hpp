#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "crashlens/attribution.hpp"
#include "crashlens/evalkit.hpp"
#include "crashlens/ingest.hpp"
#include "crashlens/labels.hpp"
#include "crashlens/predictor.hpp"
#include "crashlens/riskanalysis.hpp"
#include "crashlens/textualize.hpp"

namespace crashlens::artifacts {

// --- domain type <-> JSON -------------------------------------------------

nlohmann::json to_json(const OrderedMap& map);  // array of [key, value] pairs
OrderedMap ordered_map_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ingest::CrashEvent& event);
ingest::CrashEvent event_from_json(const nlohmann::json& j);

nlohmann::json to_json(const textualize::PromptDocument& doc);
textualize::PromptDocument document_from_json(const nlohmann::json& j);

nlohmann::json to_json(const evalkit::MetricsReport& report);
nlohmann::json to_json(const evalkit::CalibrationCurve& curve);

nlohmann::json to_json(const attribution::AttributionReport& report);
std::string attribution_csv(const attribution::AttributionReport& report,
                            const std::string& config_hash);

// --- versioned artifact files --------------------------------------------

// Top-level envelope: {"format": ..., "version": 1, "config_hash": ...,
// "seed": ..., <payload>}. Serialization is key-sorted and timestamp-free,
// so unchanged inputs reproduce byte-identical files.
nlohmann::json make_envelope(const std::string& format,
                             const std::string& config_hash,
                             std::uint64_t seed);

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json_file(const std::filesystem::path& path);
// Checks the envelope's format tag and returns the parsed file.
nlohmann::json read_artifact(const std::filesystem::path& path,
                             const std::string& expected_format,
                             const std::string& producing_command);

void write_text_file(const std::filesystem::path& path, const std::string& text);

std::string file_digest(const std::filesystem::path& path);
std::string config_hash(const nlohmann::json& resolved_config);

struct Manifest {
  std::string command;
  std::string config_hash;
  std::uint64_t seed = 0;
  nlohmann::json config;  // resolved configuration
  std::vector<std::pair<std::string, std::string>> inputs;   // path, digest
  std::vector<std::pair<std::string, std::string>> outputs;  // path, digest

  void add_input(const std::filesystem::path& path);
  void add_output(const std::filesystem::path& path);
  void write(const std::filesystem::path& out_dir) const;
};

}  // namespace crashlens::artifacts
