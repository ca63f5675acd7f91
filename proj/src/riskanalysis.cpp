#include "crashlens/riskanalysis.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <tuple>

#include "json.hpp"

namespace crashlens::riskanalysis {

namespace {

using nlohmann::json;

std::string normalize(std::string_view value) { return lower_copy(trim_copy(value)); }

bool value_in(const std::vector<std::string>& list, const std::string& value) {
  return std::find(list.begin(), list.end(), value) != list.end();
}

// First value whose key matches `base` by suffix, scanning the four sections
// in order; annotations last.
std::vector<std::string> matching_values(const ingest::CrashEvent& event,
                                         const std::string& base) {
  std::vector<std::string> values;
  for (std::size_t s = 0; s < 4; ++s) {
    for (const auto& [key, value] : event.section(s)) {
      if (key_matches(key, base)) values.push_back(normalize(value));
    }
  }
  for (const auto& [key, value] : event.annotations) {
    if (key_matches(key, base)) values.push_back(normalize(value));
  }
  return values;
}

// Leading number, tolerating units like "95 mg/L". Values such as "none",
// "not offered", or "unknown" yield nullopt.
std::optional<double> leading_number(const std::string& value) {
  std::size_t start = value.find_first_of("0123456789.-");
  if (start == std::string::npos) return std::nullopt;
  double parsed = 0.0;
  auto [ptr, ec] =
      std::from_chars(value.data() + start, value.data() + value.size(), parsed);
  if (ec != std::errc{} || ptr == value.data() + start) return std::nullopt;
  return parsed;
}

}  // namespace

std::string to_string(BacLevel v) {
  switch (v) {
    case BacLevel::ZeroOrNotOffered: return "bac zero or not offered";
    case BacLevel::Under80: return "bac under 80";
    case BacLevel::AtLeast80: return "bac at least 80";
  }
  return "?";
}

std::string to_string(Roadway v) {
  return v == Roadway::Freeway ? "freeway" : "not freeway";
}

std::string to_string(UserType v) {
  return v == UserType::PedOrPedalcyclist ? "ped or pedalcyclist" : "other user";
}

std::string to_string(Behavior v) {
  switch (v) {
    case Behavior::Aggressive: return "aggressive";
    case Behavior::ImpairmentRelated: return "impairment-related";
    case Behavior::TrafficRulesViolations: return "traffic rules violations";
    case Behavior::ImproperDriving: return "improper driving";
    case Behavior::Others: return "others";
  }
  return "?";
}

bool ConditionVector::operator<(const ConditionVector& rhs) const {
  return std::tuple(static_cast<int>(bac), static_cast<int>(roadway), work_zone,
                    static_cast<int>(user_type), static_cast<int>(behavior)) <
         std::tuple(static_cast<int>(rhs.bac), static_cast<int>(rhs.roadway),
                    rhs.work_zone, static_cast<int>(rhs.user_type),
                    static_cast<int>(rhs.behavior));
}

bool ConditionPattern::matches(const ConditionVector& v) const {
  if (bac && *bac != v.bac) return false;
  if (roadway && *roadway != v.roadway) return false;
  if (work_zone && *work_zone != v.work_zone) return false;
  if (user_type && *user_type != v.user_type) return false;
  if (behavior && *behavior != v.behavior) return false;
  return true;
}

ConditionPattern ConditionPattern::exactly(const ConditionVector& v) {
  ConditionPattern p;
  p.bac = v.bac;
  p.roadway = v.roadway;
  p.work_zone = v.work_zone;
  p.user_type = v.user_type;
  p.behavior = v.behavior;
  return p;
}

std::string ConditionPattern::describe() const {
  std::vector<std::string> parts;
  if (bac) parts.push_back(to_string(*bac));
  if (roadway) parts.push_back(to_string(*roadway));
  if (work_zone) parts.push_back(*work_zone ? "work zone" : "no work zone");
  if (user_type) parts.push_back(to_string(*user_type));
  if (behavior) parts.push_back("behavior " + to_string(*behavior));
  if (parts.empty()) return "any";
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += " & ";
    out += parts[i];
  }
  return out;
}

ConditionRules ConditionRules::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open condition rules file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
  }
  ConditionRules rules;
  auto list = [](const json& node) {
    std::vector<std::string> out;
    for (const auto& item : node) out.push_back(lower_copy(item.get<std::string>()));
    return out;
  };
  if (j.contains("bac")) {
    rules.bac_key = j.at("bac").value("key", rules.bac_key);
    rules.bac_limit = j.at("bac").value("limit", rules.bac_limit);
  }
  if (j.contains("roadway")) {
    rules.roadway_key = j.at("roadway").value("key", rules.roadway_key);
    rules.freeway_values = list(j.at("roadway").at("freeway_values"));
  }
  if (j.contains("work_zone")) {
    rules.work_zone_key = j.at("work_zone").value("key", rules.work_zone_key);
    rules.work_zone_true_values = list(j.at("work_zone").at("true_values"));
  }
  if (j.contains("user_type")) {
    rules.user_type_key = j.at("user_type").value("key", rules.user_type_key);
    rules.ped_values = list(j.at("user_type").at("ped_values"));
    if (j.at("user_type").contains("count_keys")) {
      rules.ped_count_keys = list(j.at("user_type").at("count_keys"));
    }
  }
  if (j.contains("behavior")) {
    const auto& b = j.at("behavior");
    rules.behavior_key = b.value("key", rules.behavior_key);
    rules.aggressive_values = list(b.at("aggressive"));
    rules.impairment_values = list(b.at("impairment"));
    if (b.contains("violations")) rules.violation_values = list(b.at("violations"));
    if (b.contains("improper")) rules.improper_values = list(b.at("improper"));
  }
  if (j.contains("factor_groups")) {
    const auto& g = j.at("factor_groups");
    rules.factor_groups = {g.value("bac", ""), g.value("roadway", ""),
                           g.value("work_zone", ""), g.value("user_type", ""),
                           g.value("behavior", "")};
  }
  return rules;
}

ConditionVector extract_conditions(const ingest::CrashEvent& event,
                                   const ConditionRules& rules) {
  ConditionVector out;

  // BAC: worst (highest) reading across units; missing or non-numeric
  // readings mean zero-or-not-offered.
  double max_bac = 0.0;
  for (const auto& value : matching_values(event, rules.bac_key)) {
    if (auto parsed = leading_number(value)) max_bac = std::max(max_bac, *parsed);
  }
  if (max_bac >= rules.bac_limit) {
    out.bac = BacLevel::AtLeast80;
  } else if (max_bac > 0.0) {
    out.bac = BacLevel::Under80;
  }

  for (const auto& value : matching_values(event, rules.roadway_key)) {
    if (value_in(rules.freeway_values, value)) {
      out.roadway = Roadway::Freeway;
      break;
    }
  }

  for (const auto& value : matching_values(event, rules.work_zone_key)) {
    if (value_in(rules.work_zone_true_values, value)) {
      out.work_zone = true;
      break;
    }
  }

  for (const auto& value : matching_values(event, rules.user_type_key)) {
    if (value_in(rules.ped_values, value)) {
      out.user_type = UserType::PedOrPedalcyclist;
      break;
    }
  }
  if (out.user_type == UserType::Other) {
    for (const auto& key : rules.ped_count_keys) {
      for (const auto& value : matching_values(event, key)) {
        auto parsed = leading_number(value);
        if (parsed && *parsed > 0.0) {
          out.user_type = UserType::PedOrPedalcyclist;
          break;
        }
      }
    }
  }

  // Behavior: the most severe category across drivers, in the order
  // aggressive > impairment > violations > improper > others.
  Behavior best = Behavior::Others;
  auto rank = [](Behavior b) {
    switch (b) {
      case Behavior::Aggressive: return 0;
      case Behavior::ImpairmentRelated: return 1;
      case Behavior::TrafficRulesViolations: return 2;
      case Behavior::ImproperDriving: return 3;
      case Behavior::Others: return 4;
    }
    return 4;
  };
  for (const auto& value : matching_values(event, rules.behavior_key)) {
    Behavior category = Behavior::Others;
    if (value_in(rules.aggressive_values, value)) {
      category = Behavior::Aggressive;
    } else if (value_in(rules.impairment_values, value)) {
      category = Behavior::ImpairmentRelated;
    } else if (value_in(rules.violation_values, value)) {
      category = Behavior::TrafficRulesViolations;
    } else if (value_in(rules.improper_values, value)) {
      category = Behavior::ImproperDriving;
    }
    if (rank(category) < rank(best)) best = category;
  }
  out.behavior = best;
  return out;
}

namespace {

double group_phi(const attribution::AttributionReport& report,
                 const std::string& label) {
  if (label.empty()) return 0.0;
  for (std::size_t i = 0; i < report.player_labels.size(); ++i) {
    if (report.player_labels[i] == label) return report.phi[i];
  }
  return 0.0;  // group absent from this document: a dummy player
}

}  // namespace

std::optional<RiskRow> conditional_risk(std::span<const RiskCase> cases,
                                        const ConditionPattern& pattern,
                                        const ConditionRules& rules) {
  RiskRow row;
  row.pattern = pattern;
  double risk_sum = 0.0;
  std::array<double, 5> phi_sum{};
  for (const auto& item : cases) {
    if (!pattern.matches(item.condition)) continue;
    ++row.case_count;
    risk_sum += item.target_confidence;
    for (std::size_t f = 0; f < 5; ++f) {
      phi_sum[f] += group_phi(item.attribution, rules.factor_groups[f]);
    }
  }
  if (row.case_count == 0) return std::nullopt;
  row.risk_level = risk_sum / static_cast<double>(row.case_count);
  for (std::size_t f = 0; f < 5; ++f) {
    row.mean_phi[f] = phi_sum[f] / static_cast<double>(row.case_count);
  }
  return row;
}

int high_risk_factor_count(const ConditionVector& condition) {
  int count = 0;
  if (condition.bac != BacLevel::ZeroOrNotOffered) ++count;
  if (condition.work_zone) ++count;
  if (condition.roadway == Roadway::Freeway) ++count;
  if (condition.user_type == UserType::PedOrPedalcyclist) ++count;
  if (condition.behavior == Behavior::Aggressive ||
      condition.behavior == Behavior::ImpairmentRelated) {
    ++count;
  }
  return count;
}

std::vector<FactorCountPoint> risk_factor_count(std::span<const RiskCase> cases) {
  std::map<int, std::pair<long, double>> grouped;  // count -> (cases, risk sum)
  for (const auto& item : cases) {
    auto& bucket = grouped[high_risk_factor_count(item.condition)];
    ++bucket.first;
    bucket.second += item.target_confidence;
  }
  std::vector<FactorCountPoint> points;
  for (const auto& [count, bucket] : grouped) {
    FactorCountPoint point;
    point.factor_count = count;
    point.case_count = bucket.first;
    point.mean_risk_level = bucket.second / static_cast<double>(bucket.first);
    points.push_back(point);
  }
  return points;
}

}  // namespace crashlens::riskanalysis
