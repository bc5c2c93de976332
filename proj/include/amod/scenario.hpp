#pragma once
// Scenario documents (road graph + demand + parameters) and optimized-policy
// documents, stored as strictly validated JSON. Canonical serialization
// backs a stable content hash carried into every output row.

#include <string>
#include <vector>

#include "amod/network.hpp"
#include "amod/optimizer.hpp"

namespace amod {

struct BprParams {
  double delta = 0.15;
  double beta = 3.0;
};

inline constexpr int kScenarioSchemaVersion = 1;

struct Scenario {
  int version = kScenarioSchemaVersion;
  std::string name;
  RoadGraph graph;
  DemandSet demands;
  BprParams bpr;
  double epsilon = 0.1;  // default exceedance budget for conservative mode
  std::string hash;      // FNV-1a over the canonical JSON form
};

Scenario parse_scenario(const std::string& json_text);
Scenario load_scenario(const std::string& path);
std::string canonical_scenario_json(const Scenario& scenario);

// Optimized routing + rebalancing bundle tied to a scenario by hash.
struct PolicyDocument {
  std::string scenario_hash;
  CapacityMode mode = CapacityMode::Baseline;
  double epsilon = 0.0;
  double objective = 0.0;
  std::vector<double> rebalancing_rates;  // per rebalancing class
  RoutingPolicy policy;
};

std::string policy_to_json(const AmodNetwork& network, const PolicyDocument& doc);
PolicyDocument policy_from_json(const AmodNetwork& network, const std::string& json_text,
                                const std::string& expected_hash);
void save_policy(const std::string& path, const AmodNetwork& network, const PolicyDocument& doc);
PolicyDocument load_policy(const std::string& path, const AmodNetwork& network,
                           const std::string& expected_hash);

}  // namespace amod
