#include "crashlens/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace crashlens::ingest {

namespace {

using nlohmann::json;

std::optional<double> parse_double(std::string_view text) {
  std::string t = trim_copy(text);
  if (t.empty()) return std::nullopt;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc{} || ptr != t.data() + t.size()) return std::nullopt;
  return value;
}

std::optional<int> parse_int(std::string_view text) {
  std::string t = trim_copy(text);
  if (t.empty()) return std::nullopt;
  int value = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc{} || ptr != t.data() + t.size()) return std::nullopt;
  return value;
}

void require_columns(const csv::Table& table, std::span<const std::string> names,
                     const std::string& table_name) {
  for (const auto& name : names) {
    if (!table.has_column(name)) {
      throw DataError(table_name + " table: missing declared column '" + name + "'");
    }
  }
}

OrderedMap row_to_map(const csv::Table& table, const std::vector<std::string>& row,
                      std::span<const std::string> skip_columns) {
  OrderedMap map;
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    const std::string& name = table.header[i];
    bool skip = std::find(skip_columns.begin(), skip_columns.end(), name) !=
                skip_columns.end();
    if (!skip) map.set(name, row[i]);
  }
  return map;
}

json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  json parsed;
  try {
    in >> parsed;
  } catch (const json::exception& e) {
    throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
  }
  return parsed;
}

std::vector<std::string> string_list(const json& j, const char* field) {
  std::vector<std::string> out;
  if (!j.contains(field)) return out;
  for (const auto& item : j.at(field)) out.push_back(item.get<std::string>());
  return out;
}

}  // namespace

const OrderedMap& CrashEvent::section(std::size_t index) const {
  switch (index) {
    case 0: return general;
    case 1: return infrastructure;
    case 2: return event;
    case 3: return unit;
  }
  throw ComputeError("section index out of range");
}

OrderedMap& CrashEvent::section(std::size_t index) {
  return const_cast<OrderedMap&>(
      static_cast<const CrashEvent&>(*this).section(index));
}

TableSchema TableSchema::load(const std::filesystem::path& path) {
  json j = load_json_file(path);
  TableSchema schema;
  if (j.contains("columns")) {
    const auto& c = j.at("columns");
    auto get = [&](const char* field, std::string& target) {
      if (c.contains(field)) target = c.at(field).get<std::string>();
    };
    get("crash_id", schema.crash_id_column);
    get("unit_index", schema.unit_index_column);
    get("person_index", schema.person_index_column);
    get("route_id", schema.route_id_column);
    get("milepost", schema.milepost_column);
    get("milepost_begin", schema.milepost_begin_column);
    get("milepost_end", schema.milepost_end_column);
    get("latitude", schema.latitude_column);
    get("longitude", schema.longitude_column);
  }
  schema.general_columns = string_list(j, "general");
  schema.event_columns = string_list(j, "event");
  schema.infrastructure_columns = string_list(j, "infrastructure");
  schema.outcome_columns = string_list(j, "outcomes");
  if (j.contains("required")) {
    const auto& r = j.at("required");
    schema.crash_required = string_list(r, "crash");
    schema.vehicle_required = string_list(r, "vehicle");
    schema.person_required = string_list(r, "person");
    schema.infrastructure_required = string_list(r, "infrastructure");
  }
  return schema;
}

void validate_category_maps(std::span<const CategoryMap> maps) {
  // attribute -> all source values seen so far
  std::map<std::string, std::set<std::string>> sources_by_attribute;
  for (const auto& map : maps) {
    auto& seen = sources_by_attribute[map.attribute];
    for (const auto& merge : map.merges) {
      for (const auto& source : merge.sources) {
        if (!seen.insert(source).second) {
          throw ConfigError("category map for '" + map.attribute +
                            "': source value '" + source +
                            "' appears in more than one merge");
        }
      }
    }
  }
  for (const auto& map : maps) {
    const auto& seen = sources_by_attribute[map.attribute];
    for (const auto& merge : map.merges) {
      if (seen.contains(merge.target)) {
        throw ConfigError("category map for '" + map.attribute + "': target '" +
                          merge.target + "' is also a source value");
      }
    }
  }
}

std::vector<CategoryMap> load_category_maps(const std::filesystem::path& path) {
  json j = load_json_file(path);
  std::vector<CategoryMap> maps;
  for (const auto& entry : j) {
    CategoryMap map;
    map.attribute = entry.at("attribute").get<std::string>();
    for (const auto& m : entry.at("merges")) {
      CategoryMap::Merge merge;
      for (const auto& s : m.at("sources")) merge.sources.push_back(s.get<std::string>());
      merge.target = m.at("target").get<std::string>();
      map.merges.push_back(std::move(merge));
    }
    maps.push_back(std::move(map));
  }
  validate_category_maps(maps);
  return maps;
}

RawTables parse_tables(const TablePaths& paths, const TableSchema& schema,
                       Diagnostics* diag) {
  RawTables tables;
  tables.schema = schema;

  csv::Table crash = csv::read_file(paths.crash);
  csv::Table vehicle = csv::read_file(paths.vehicle);
  csv::Table person = csv::read_file(paths.person);
  csv::Table infra = csv::read_file(paths.infrastructure);

  require_columns(crash, std::array{schema.crash_id_column}, "crash");
  require_columns(crash, schema.crash_required, "crash");
  require_columns(vehicle, std::array{schema.crash_id_column, schema.unit_index_column},
                  "vehicle");
  require_columns(vehicle, schema.vehicle_required, "vehicle");
  require_columns(person,
                  std::array{schema.crash_id_column, schema.unit_index_column,
                             schema.person_index_column},
                  "person");
  require_columns(person, schema.person_required, "person");
  require_columns(infra,
                  std::array{schema.route_id_column, schema.milepost_begin_column,
                             schema.milepost_end_column},
                  "infrastructure");
  require_columns(infra, schema.infrastructure_required, "infrastructure");

  int crash_id_col = crash.column(schema.crash_id_column);
  for (const auto& row : crash.rows) {
    const std::string& id = row[static_cast<std::size_t>(crash_id_col)];
    if (is_blank(id)) {
      warn_into(diag, "crash table: row with blank crash id rejected");
      continue;
    }
    if (tables.crash.contains(id)) {
      throw DataError("crash table: duplicate crash id '" + id + "'");
    }
    tables.crash.emplace(id, row_to_map(crash, row, {}));
    tables.crash_order.push_back(id);
  }
  tables.counts.crash = tables.crash.size();

  const std::array vehicle_keys{schema.crash_id_column, schema.unit_index_column};
  int v_id = vehicle.column(schema.crash_id_column);
  int v_unit = vehicle.column(schema.unit_index_column);
  for (const auto& row : vehicle.rows) {
    const std::string& id = row[static_cast<std::size_t>(v_id)];
    auto unit = parse_int(row[static_cast<std::size_t>(v_unit)]);
    if (!tables.crash.contains(id)) {
      warn_into(diag, "vehicle table: row references unknown crash id '" + id +
                          "'; rejected");
      continue;
    }
    if (!unit) {
      warn_into(diag, "vehicle table: row for crash '" + id +
                          "' has a non-integer unit index; rejected");
      continue;
    }
    auto key = std::make_pair(id, *unit);
    if (tables.vehicle.contains(key)) {
      warn_into(diag, "vehicle table: duplicate (crash '" + id + "', unit " +
                          std::to_string(*unit) + "); later row rejected");
      continue;
    }
    tables.vehicle.emplace(std::move(key), row_to_map(vehicle, row, vehicle_keys));
  }
  tables.counts.vehicle = tables.vehicle.size();

  const std::array person_keys{schema.crash_id_column, schema.unit_index_column,
                               schema.person_index_column};
  int p_id = person.column(schema.crash_id_column);
  int p_unit = person.column(schema.unit_index_column);
  int p_person = person.column(schema.person_index_column);
  for (const auto& row : person.rows) {
    const std::string& id = row[static_cast<std::size_t>(p_id)];
    auto unit = parse_int(row[static_cast<std::size_t>(p_unit)]);
    auto pidx = parse_int(row[static_cast<std::size_t>(p_person)]);
    if (!tables.crash.contains(id)) {
      warn_into(diag, "person table: row references unknown crash id '" + id +
                          "'; rejected");
      continue;
    }
    if (!unit || !pidx) {
      warn_into(diag, "person table: row for crash '" + id +
                          "' has a non-integer unit or person index; rejected");
      continue;
    }
    auto key = std::make_tuple(id, *unit, *pidx);
    if (tables.person.contains(key)) {
      warn_into(diag, "person table: duplicate (crash '" + id + "', unit " +
                          std::to_string(*unit) + ", person " +
                          std::to_string(*pidx) + "); later row rejected");
      continue;
    }
    tables.person.emplace(std::move(key), row_to_map(person, row, person_keys));
  }
  tables.counts.person = tables.person.size();

  const std::array infra_keys{schema.route_id_column, schema.milepost_begin_column,
                              schema.milepost_end_column};
  int i_route = infra.column(schema.route_id_column);
  int i_begin = infra.column(schema.milepost_begin_column);
  int i_end = infra.column(schema.milepost_end_column);
  for (const auto& row : infra.rows) {
    const std::string& route = row[static_cast<std::size_t>(i_route)];
    auto begin = parse_double(row[static_cast<std::size_t>(i_begin)]);
    auto end = parse_double(row[static_cast<std::size_t>(i_end)]);
    if (is_blank(route) || !begin || !end || !(*begin < *end)) {
      warn_into(diag, "infrastructure table: row with invalid route or milepost "
                      "range rejected");
      continue;
    }
    auto& segments = tables.segments[route];
    bool overlaps = std::any_of(segments.begin(), segments.end(),
                                [&](const Segment& s) {
                                  return *begin < s.end && s.begin < *end;
                                });
    if (overlaps) {
      std::ostringstream msg;
      msg << "infrastructure table: segment [" << *begin << ", " << *end
          << ") on route '" << route << "' overlaps an earlier segment; rejected";
      warn_into(diag, msg.str());
      continue;
    }
    Segment segment;
    segment.begin = *begin;
    segment.end = *end;
    segment.values = row_to_map(infra, row, infra_keys);
    segments.push_back(std::move(segment));
    ++tables.counts.infrastructure;
  }
  for (auto& [route, segments] : tables.segments) {
    std::sort(segments.begin(), segments.end(),
              [](const Segment& a, const Segment& b) { return a.begin < b.begin; });
  }

  if (diag != nullptr) {
    std::ostringstream msg;
    msg << "row counts: crash=" << tables.counts.crash
        << " vehicle=" << tables.counts.vehicle
        << " person=" << tables.counts.person
        << " infrastructure=" << tables.counts.infrastructure;
    diag->warn(msg.str());
  }
  return tables;
}

namespace {

// Blank values read as "unknown" in prompts.
std::string normalized(const std::string& value) {
  return is_blank(value) ? std::string("unknown") : value;
}

bool in_list(const std::vector<std::string>& list, const std::string& name) {
  return std::find(list.begin(), list.end(), name) != list.end();
}

}  // namespace

CrashEvent join_event(const RawTables& tables, const std::string& crash_id,
                      const DatasetId& dataset, Diagnostics* diag) {
  auto crash_it = tables.crash.find(crash_id);
  if (crash_it == tables.crash.end()) {
    throw DataError("crash id '" + crash_id + "' not found in crash table");
  }
  const OrderedMap& crash_row = crash_it->second;
  const TableSchema& schema = tables.schema;

  CrashEvent event;
  event.crash_id = crash_id;
  event.dataset = dataset;

  const std::array<std::string, 5> key_columns{
      schema.crash_id_column, schema.route_id_column, schema.milepost_column,
      schema.latitude_column, schema.longitude_column};

  OrderedMap crash_infra;
  for (const auto& [column, value] : crash_row) {
    if (std::find(key_columns.begin(), key_columns.end(), column) !=
        key_columns.end()) {
      continue;
    }
    if (in_list(schema.outcome_columns, column)) {
      event.outcomes.set(column, value);
    } else if (in_list(schema.infrastructure_columns, column)) {
      crash_infra.set(column, normalized(value));
    } else if (in_list(schema.event_columns, column)) {
      event.event.set(column, normalized(value));
    } else {
      event.general.set(column, normalized(value));
    }
  }

  if (const std::string* lat = crash_row.find(schema.latitude_column)) {
    if (const std::string* lon = crash_row.find(schema.longitude_column)) {
      auto lat_v = parse_double(*lat);
      auto lon_v = parse_double(*lon);
      if (lat_v && lon_v) event.gps = GpsPoint{*lat_v, *lon_v};
    }
  }

  // Infrastructure: the containing segment's attributes first, then the
  // crash row's road-state columns. Segment values win on key collision.
  const Segment* match = nullptr;
  const std::string* route = crash_row.find(schema.route_id_column);
  std::optional<double> milepost;
  if (const std::string* mp = crash_row.find(schema.milepost_column)) {
    milepost = parse_double(*mp);
  }
  if (route != nullptr && milepost) {
    auto seg_it = tables.segments.find(*route);
    if (seg_it != tables.segments.end()) {
      for (const Segment& s : seg_it->second) {
        if (*milepost >= s.begin && *milepost < s.end) {
          match = &s;
          break;
        }
      }
    }
  }
  if (match != nullptr) {
    for (const auto& [k, v] : match->values) {
      event.infrastructure.set(k, normalized(v));
    }
    for (const auto& [k, v] : crash_infra) {
      if (!event.infrastructure.contains(k)) event.infrastructure.set(k, v);
    }
  } else {
    event.infrastructure = crash_infra;
    event.infra_fallback = true;
    warn_into(diag, "crash '" + crash_id +
                        "': no infrastructure segment matches; using crash-row "
                        "fallback columns");
  }

  // Unit section: units ascending, vehicle attributes then persons ascending.
  std::set<int> unit_indices;
  for (const auto& [key, _] : tables.vehicle) {
    if (key.first == crash_id) unit_indices.insert(key.second);
  }
  for (const auto& [key, _] : tables.person) {
    if (std::get<0>(key) == crash_id) unit_indices.insert(std::get<1>(key));
  }
  for (int u : unit_indices) {
    std::string unit_prefix = "unit " + std::to_string(u) + " ";
    auto v_it = tables.vehicle.find({crash_id, u});
    if (v_it != tables.vehicle.end()) {
      for (const auto& [k, v] : v_it->second) {
        event.unit.set(unit_prefix + k, normalized(v));
      }
    }
    auto p_it = tables.person.lower_bound({crash_id, u, 0});
    for (; p_it != tables.person.end(); ++p_it) {
      const auto& [id, unit, pidx] = p_it->first;
      if (id != crash_id || unit != u) break;
      std::string person_prefix = unit_prefix + "person " + std::to_string(pidx) + " ";
      for (const auto& [k, v] : p_it->second) {
        event.unit.set(person_prefix + k, normalized(v));
      }
    }
  }

  for (std::size_t s = 0; s < 4; ++s) {
    if (event.section(s).empty()) {
      throw DataError("crash '" + crash_id + "': " + kSectionNames[s] +
                      " section is empty after join");
    }
  }
  return event;
}

CrashEvent reduce_categories(CrashEvent event, std::span<const CategoryMap> maps) {
  validate_category_maps(maps);
  auto reduce_map = [&maps](OrderedMap& section) {
    OrderedMap out;
    for (const auto& [key, value] : section) {
      std::string new_value = value;
      for (const auto& map : maps) {
        if (!key_matches(key, map.attribute)) continue;
        for (const auto& merge : map.merges) {
          if (std::find(merge.sources.begin(), merge.sources.end(), value) !=
              merge.sources.end()) {
            new_value = merge.target;
            break;
          }
        }
      }
      out.set(key, std::move(new_value));
    }
    section = std::move(out);
  };
  for (std::size_t s = 0; s < 4; ++s) reduce_map(event.section(s));
  reduce_map(event.annotations);
  return event;
}

CrashEvent attach_annotations(CrashEvent event, const csv::Table& annotations,
                              const TableSchema& schema, Diagnostics* diag) {
  int id_col = annotations.column(schema.crash_id_column);
  if (id_col < 0) {
    throw DataError("annotations file: missing key column '" +
                    schema.crash_id_column + "'");
  }
  for (const auto& row : annotations.rows) {
    const std::string& id = row[static_cast<std::size_t>(id_col)];
    if (is_blank(id)) {
      warn_into(diag, "annotations file: row with blank crash id skipped");
      continue;
    }
    if (id != event.crash_id) continue;
    for (std::size_t i = 0; i < annotations.header.size(); ++i) {
      if (static_cast<int>(i) == id_col) continue;
      const std::string& key = annotations.header[i];
      const std::string& value = row[i];
      if (is_blank(value)) continue;
      bool conflicted = false;
      for (std::size_t s = 0; s < 4; ++s) {
        if (event.section(s).contains(key)) {
          // Annotation wins over the table-derived value.
          event.section(s).set(key, value);
          warn_into(diag, "crash '" + event.crash_id + "': annotation '" + key +
                              "' overrides the " + kSectionNames[s] +
                              " section value");
          conflicted = true;
          break;
        }
      }
      if (!conflicted) event.annotations.set(key, value);
    }
  }
  return event;
}

CrashEvent attach_annotations(CrashEvent event,
                              const std::filesystem::path& annotations_file,
                              const TableSchema& schema, Diagnostics* diag) {
  return attach_annotations(std::move(event), csv::read_file(annotations_file),
                            schema, diag);
}

}  // namespace crashlens::ingest
