#include "crashlens/artifacts.hpp"

#include <fstream>
#include <sstream>

namespace crashlens::artifacts {

using nlohmann::json;

json to_json(const OrderedMap& map) {
  json out = json::array();
  for (const auto& [key, value] : map) out.push_back(json::array({key, value}));
  return out;
}

OrderedMap ordered_map_from_json(const json& j) {
  OrderedMap map;
  for (const auto& item : j) {
    map.set(item.at(0).get<std::string>(), item.at(1).get<std::string>());
  }
  return map;
}

json to_json(const ingest::CrashEvent& event) {
  json j;
  j["crash_id"] = event.crash_id;
  j["dataset"] = event.dataset.name;
  if (event.gps) {
    j["gps"] = {{"lat", event.gps->lat}, {"lon", event.gps->lon}};
  } else {
    j["gps"] = nullptr;
  }
  j["sections"] = {{"general", to_json(event.general)},
                   {"infrastructure", to_json(event.infrastructure)},
                   {"event", to_json(event.event)},
                   {"unit", to_json(event.unit)}};
  j["annotations"] = to_json(event.annotations);
  j["outcomes"] = to_json(event.outcomes);
  j["infra_fallback"] = event.infra_fallback;
  return j;
}

ingest::CrashEvent event_from_json(const json& j) {
  ingest::CrashEvent event;
  event.crash_id = j.at("crash_id").get<std::string>();
  event.dataset = DatasetId::parse(j.at("dataset").get<std::string>());
  if (!j.at("gps").is_null()) {
    event.gps = ingest::GpsPoint{j.at("gps").at("lat").get<double>(),
                                 j.at("gps").at("lon").get<double>()};
  }
  const auto& sections = j.at("sections");
  event.general = ordered_map_from_json(sections.at("general"));
  event.infrastructure = ordered_map_from_json(sections.at("infrastructure"));
  event.event = ordered_map_from_json(sections.at("event"));
  event.unit = ordered_map_from_json(sections.at("unit"));
  event.annotations = ordered_map_from_json(j.at("annotations"));
  event.outcomes = ordered_map_from_json(j.at("outcomes"));
  event.infra_fallback = j.at("infra_fallback").get<bool>();
  return event;
}

json to_json(const textualize::PromptDocument& doc) {
  json j;
  j["task"] = to_string(doc.task);
  j["dataset"] = doc.dataset.name;
  j["crash_id"] = doc.crash_id;
  j["system"] = doc.system;
  j["parts"] = doc.parts;
  json spans = json::array();
  for (const auto& part_spans : doc.spans) {
    json list = json::array();
    for (const auto& span : part_spans) {
      list.push_back(json::array({span.offset, span.length, span.key}));
    }
    spans.push_back(std::move(list));
  }
  j["spans"] = std::move(spans);
  json sentences = json::array();
  for (const auto& sentence : doc.sentences) {
    sentences.push_back({{"text", sentence.text},
                         {"part", sentence.part},
                         {"delim", sentence.delimiter},
                         {"key", sentence.source_key},
                         {"group", sentence.group}});
  }
  j["sentences"] = std::move(sentences);
  return j;
}

textualize::PromptDocument document_from_json(const json& j) {
  textualize::PromptDocument doc;
  doc.task = parse_task(j.at("task").get<std::string>());
  doc.dataset = DatasetId::parse(j.at("dataset").get<std::string>());
  doc.crash_id = j.at("crash_id").get<std::string>();
  doc.system = j.at("system").get<std::string>();
  const auto& parts = j.at("parts");
  for (std::size_t k = 0; k < 4; ++k) doc.parts[k] = parts.at(k).get<std::string>();
  const auto& spans = j.at("spans");
  for (std::size_t k = 0; k < 4; ++k) {
    for (const auto& item : spans.at(k)) {
      textualize::KeySpan span;
      span.offset = item.at(0).get<std::size_t>();
      span.length = item.at(1).get<std::size_t>();
      span.key = item.at(2).get<std::string>();
      doc.spans[k].push_back(std::move(span));
    }
  }
  for (const auto& item : j.at("sentences")) {
    textualize::SentenceUnit sentence;
    sentence.text = item.at("text").get<std::string>();
    sentence.part = item.at("part").get<int>();
    sentence.delimiter = item.at("delim").get<std::string>();
    sentence.source_key = item.at("key").get<std::string>();
    sentence.group = item.at("group").get<std::string>();
    doc.sentences.push_back(std::move(sentence));
  }
  return doc;
}

json to_json(const evalkit::MetricsReport& report) {
  json j;
  j["class_count"] = report.class_count;
  j["total"] = report.total;
  j["accuracy"] = report.accuracy;
  j["weighted_precision"] = report.weighted_precision;
  j["weighted_recall"] = report.weighted_recall;
  j["weighted_f1"] = report.weighted_f1;
  j["macro_precision"] = report.macro_precision;
  j["macro_f1"] = report.macro_f1;
  json per_class = json::array();
  for (const auto& c : report.per_class) {
    json entry;
    entry["tp"] = c.tp;
    entry["tn"] = c.tn;
    entry["fp"] = c.fp;
    entry["fn"] = c.fn;
    entry["support"] = c.support;
    entry["precision"] = c.precision ? json(*c.precision) : json(nullptr);
    entry["recall"] = c.recall ? json(*c.recall) : json(nullptr);
    entry["f1"] = c.f1 ? json(*c.f1) : json(nullptr);
    per_class.push_back(std::move(entry));
  }
  j["per_class"] = std::move(per_class);
  j["confusion"] = report.confusion;
  return j;
}

json to_json(const evalkit::CalibrationCurve& curve) {
  json bins = json::array();
  for (const auto& bin : curve.bins) {
    bins.push_back({{"lo", bin.lo},
                    {"hi", bin.hi},
                    {"count", bin.count},
                    {"accuracy", bin.accuracy ? json(*bin.accuracy) : json(nullptr)}});
  }
  return json{{"bins", std::move(bins)}};
}

json to_json(const attribution::AttributionReport& report) {
  json j;
  j["phi"] = report.phi;
  j["player_labels"] = report.player_labels;
  j["method"] = report.method == attribution::Method::Exact
                    ? "exact"
                    : "complementary-sampled";
  if (report.method == attribution::Method::ComplementarySampled) {
    j["budget"] = report.budget;
    j["strata"] = report.strata;
    j["seed"] = report.seed;
  }
  j["std_error"] = report.std_error ? json(*report.std_error) : json(nullptr);
  j["v_full"] = report.v_full;
  j["v_base"] = report.v_base;
  j["phi_sum"] = report.phi_sum();
  return j;
}

std::string attribution_csv(const attribution::AttributionReport& report,
                            const std::string& hash) {
  std::ostringstream out;
  out << "# config_hash=" << hash << "\n";
  out << "label,phi,std_error\n";
  char buffer[64];
  for (std::size_t i = 0; i < report.phi.size(); ++i) {
    std::snprintf(buffer, sizeof(buffer), "%.17g", report.phi[i]);
    out << csv::escape_field(report.player_labels[i]) << ',' << buffer << ',';
    if (report.std_error) {
      std::snprintf(buffer, sizeof(buffer), "%.17g", (*report.std_error)[i]);
      out << buffer;
    }
    out << "\n";
  }
  return out.str();
}

json make_envelope(const std::string& format, const std::string& hash,
                   std::uint64_t seed) {
  json j;
  j["format"] = format;
  j["version"] = 1;
  j["config_hash"] = hash;
  j["seed"] = seed;
  return j;
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path.string());
  out << j.dump(2) << "\n";
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("invalid JSON in " + path.string() + ": " + e.what());
  }
  return j;
}

json read_artifact(const std::filesystem::path& path,
                   const std::string& expected_format,
                   const std::string& producing_command) {
  if (!std::filesystem::exists(path)) {
    throw DataError("missing artifact " + path.string() + "; produce it with '" +
                    producing_command + "' first");
  }
  json j = read_json_file(path);
  if (!j.is_object() || j.value("format", "") != expected_format) {
    throw DataError(path.string() + " is not a '" + expected_format +
                    "' artifact; produce it with '" + producing_command + "'");
  }
  return j;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path.string());
  out << text;
}

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file for digest: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return to_hex(fnv1a64(buffer.str()));
}

std::string config_hash(const json& resolved_config) {
  return to_hex(fnv1a64(resolved_config.dump()));
}

void Manifest::add_input(const std::filesystem::path& path) {
  inputs.emplace_back(path.string(), file_digest(path));
}

void Manifest::add_output(const std::filesystem::path& path) {
  outputs.emplace_back(path.string(), file_digest(path));
}

void Manifest::write(const std::filesystem::path& out_dir) const {
  json j;
  j["format"] = "manifest";
  j["version"] = 1;
  j["command"] = command;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  j["config"] = config;
  json in = json::array();
  for (const auto& [path, digest] : inputs) {
    in.push_back({{"path", path}, {"digest", digest}});
  }
  j["inputs"] = std::move(in);
  json out = json::array();
  for (const auto& [path, digest] : outputs) {
    out.push_back({{"path", path}, {"digest", digest}});
  }
  j["outputs"] = std::move(out);
  write_json_file(out_dir / (command + ".manifest.json"), j);
}

}  // namespace crashlens::artifacts
