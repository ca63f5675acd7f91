#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "crashlens/common.hpp"
#include "crashlens/csv.hpp"

namespace crashlens::ingest {

// Column declarations for the four source tables. Key columns identify
// records; assignment lists route crash-table columns into event sections.
// Columns in a *_required list must exist in the file; everything else is
// carried through as plain strings.
struct TableSchema {
  // key columns
  std::string crash_id_column = "crash_id";
  std::string unit_index_column = "unit_index";
  std::string person_index_column = "person_index";
  std::string route_id_column = "route_id";
  std::string milepost_column = "milepost";
  std::string milepost_begin_column = "milepost_begin";
  std::string milepost_end_column = "milepost_end";
  std::string latitude_column = "lat";
  std::string longitude_column = "lon";

  // crash-table section assignment; columns in none of these lists (and
  // not keys or coordinates) default to the general section
  std::vector<std::string> general_columns;
  std::vector<std::string> event_columns;
  // crash-row road-state columns merged into the infrastructure section;
  // they are also the fallback when no segment matches
  std::vector<std::string> infrastructure_columns;
  // label sources (injury counts, severity/type codes); kept out of prompts
  std::vector<std::string> outcome_columns;

  // declared columns that must be present per table
  std::vector<std::string> crash_required;
  std::vector<std::string> vehicle_required;
  std::vector<std::string> person_required;
  std::vector<std::string> infrastructure_required;

  static TableSchema load(const std::filesystem::path& path);
};

struct TablePaths {
  std::filesystem::path crash;
  std::filesystem::path vehicle;
  std::filesystem::path person;
  std::filesystem::path infrastructure;
};

struct Segment {
  double begin = 0.0;
  double end = 0.0;  // half-open [begin, end)
  OrderedMap values;
};

struct RawTables {
  TableSchema schema;
  std::vector<std::string> crash_order;  // crash ids in file order
  std::map<std::string, OrderedMap> crash;
  std::map<std::pair<std::string, int>, OrderedMap> vehicle;
  std::map<std::tuple<std::string, int, int>, OrderedMap> person;
  std::map<std::string, std::vector<Segment>> segments;  // sorted by begin

  struct Counts {
    std::size_t crash = 0;
    std::size_t vehicle = 0;
    std::size_t person = 0;
    std::size_t infrastructure = 0;
  } counts;
};

struct GpsPoint {
  double lat = 0.0;
  double lon = 0.0;
  bool operator==(const GpsPoint&) const = default;
};

struct CrashEvent {
  std::string crash_id;
  DatasetId dataset;
  std::optional<GpsPoint> gps;
  OrderedMap general;
  OrderedMap infrastructure;
  OrderedMap event;
  OrderedMap unit;
  OrderedMap annotations;
  // label-source values (never textualized)
  OrderedMap outcomes;
  // set when no segment matched and the infrastructure section came from
  // crash-row fallback columns
  bool infra_fallback = false;

  const OrderedMap& section(std::size_t index) const;
  OrderedMap& section(std::size_t index);

  bool operator==(const CrashEvent&) const = default;
};

inline constexpr std::array<const char*, 4> kSectionNames{
    "general", "infrastructure", "event", "unit"};

struct CategoryMap {
  struct Merge {
    std::vector<std::string> sources;
    std::string target;
  };
  std::string attribute;
  std::vector<Merge> merges;
};

// Throws ConfigError when source sets overlap or a target reappears as a
// source of the same attribute.
void validate_category_maps(std::span<const CategoryMap> maps);
std::vector<CategoryMap> load_category_maps(const std::filesystem::path& path);

RawTables parse_tables(const TablePaths& paths, const TableSchema& schema,
                       Diagnostics* diag = nullptr);

CrashEvent join_event(const RawTables& tables, const std::string& crash_id,
                      const DatasetId& dataset, Diagnostics* diag = nullptr);

CrashEvent reduce_categories(CrashEvent event, std::span<const CategoryMap> maps);

CrashEvent attach_annotations(CrashEvent event, const csv::Table& annotations,
                              const TableSchema& schema,
                              Diagnostics* diag = nullptr);
CrashEvent attach_annotations(CrashEvent event,
                              const std::filesystem::path& annotations_file,
                              const TableSchema& schema,
                              Diagnostics* diag = nullptr);

}  // namespace crashlens::ingest
