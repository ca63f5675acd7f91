#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crashlens/attribution.hpp"
#include "crashlens/ingest.hpp"
#include "crashlens/predictor.hpp"

namespace crashlens::riskanalysis {

enum class BacLevel { ZeroOrNotOffered, Under80, AtLeast80 };
enum class Roadway { Freeway, NotFreeway };
enum class UserType { PedOrPedalcyclist, Other };
enum class Behavior {
  Aggressive,
  ImpairmentRelated,
  TrafficRulesViolations,
  ImproperDriving,
  Others
};

std::string to_string(BacLevel v);
std::string to_string(Roadway v);
std::string to_string(UserType v);
std::string to_string(Behavior v);

struct ConditionVector {
  BacLevel bac = BacLevel::ZeroOrNotOffered;
  Roadway roadway = Roadway::NotFreeway;
  bool work_zone = false;
  UserType user_type = UserType::Other;
  Behavior behavior = Behavior::Others;

  bool operator==(const ConditionVector&) const = default;
  bool operator<(const ConditionVector& rhs) const;
};

// Partial pattern: unset fields match anything.
struct ConditionPattern {
  std::optional<BacLevel> bac;
  std::optional<Roadway> roadway;
  std::optional<bool> work_zone;
  std::optional<UserType> user_type;
  std::optional<Behavior> behavior;

  bool matches(const ConditionVector& v) const;
  static ConditionPattern exactly(const ConditionVector& v);
  std::string describe() const;
};

// Raw-attribute mapping rules for the five factors. Attribute keys are
// matched by suffix across all sections (unit keys carry prefixes).
struct ConditionRules {
  std::string bac_key = "bac";
  double bac_limit = 80.0;  // mg/L
  std::string roadway_key = "roadway_class";
  std::vector<std::string> freeway_values;
  std::string work_zone_key = "work_zone";
  std::vector<std::string> work_zone_true_values;
  std::string user_type_key = "role";
  std::vector<std::string> ped_values;
  // crash-level numeric fallback, e.g. pedestrians_involved > 0
  std::vector<std::string> ped_count_keys;
  std::string behavior_key = "behavior";
  std::vector<std::string> aggressive_values;
  std::vector<std::string> impairment_values;
  std::vector<std::string> violation_values;
  std::vector<std::string> improper_values;
  // factor -> attribution group label, for per-factor mean contributions
  std::array<std::string, 5> factor_groups{};  // bac, roadway, work_zone, user, behavior

  static ConditionRules load(const std::filesystem::path& path);
};

ConditionVector extract_conditions(const ingest::CrashEvent& event,
                                   const ConditionRules& rules);

// One analyzed case: its conditions, the severity prediction, and the
// sentence-group attribution for the analysis target.
struct RiskCase {
  ConditionVector condition;
  predictor::ClassDistribution dist;
  attribution::AttributionReport attribution;
  double target_confidence = 0.0;  // probability of the analysis target
};

struct RiskRow {
  ConditionPattern pattern;
  long case_count = 0;
  double risk_level = 0.0;              // mean target confidence
  std::array<double, 5> mean_phi{};     // per-factor mean group contribution
};

// Empty-match patterns yield nullopt rather than fabricated zeros.
std::optional<RiskRow> conditional_risk(std::span<const RiskCase> cases,
                                        const ConditionPattern& pattern,
                                        const ConditionRules& rules);

struct FactorCountPoint {
  int factor_count = 0;
  long case_count = 0;
  double mean_risk_level = 0.0;
};

// High-risk factors: drinking (any positive BAC), work zone, freeway,
// pedestrian or pedalcyclist involvement, aggressive or impairment-related
// behavior.
int high_risk_factor_count(const ConditionVector& condition);
std::vector<FactorCountPoint> risk_factor_count(std::span<const RiskCase> cases);

}  // namespace crashlens::riskanalysis
