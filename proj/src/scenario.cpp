#include "amod/scenario.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace amod {

namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key()))
      throw ValidationError("unknown key '" + it.key() + "' in " + where);
}

double require_number(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key)) throw ValidationError(where + " is missing '" + key + "'");
  if (!obj[key].is_number()) throw ValidationError(where + " field '" + key + "' must be a number");
  return obj[key].get<double>();
}

std::string require_string(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key)) throw ValidationError(where + " is missing '" + key + "'");
  if (!obj[key].is_string()) throw ValidationError(where + " field '" + key + "' must be a string");
  return obj[key].get<std::string>();
}

std::uint64_t fnv1a(const std::string& data) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[i] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

}  // namespace

Scenario parse_scenario(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("scenario is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ValidationError("scenario root must be a JSON object");
  reject_unknown_keys(
      doc, {"version", "name", "vertices", "stations", "roads", "demands", "rebalancing_pairs", "bpr", "epsilon"},
      "scenario");

  Scenario sc;
  if (!doc.contains("version") || !doc["version"].is_number_integer())
    throw ValidationError("scenario needs an integer 'version' field");
  sc.version = doc["version"].get<int>();
  if (sc.version != kScenarioSchemaVersion)
    throw ValidationError("unsupported scenario schema version " + std::to_string(sc.version) + " (expected " +
                          std::to_string(kScenarioSchemaVersion) + ")");
  sc.name = require_string(doc, "name", "scenario");
  if (!doc.contains("vertices") || !doc["vertices"].is_array())
    throw ValidationError("scenario needs a 'vertices' array");
  for (const auto& v : doc["vertices"]) {
    if (!v.is_number_integer()) throw ValidationError("vertex ids must be integers");
    sc.graph.vertices.push_back(v.get<int>());
  }

  if (!doc.contains("stations") || !doc["stations"].is_array())
    throw ValidationError("scenario needs a 'stations' array");
  for (const auto& s : doc["stations"]) {
    if (!s.is_object()) throw ValidationError("each station must be an object");
    reject_unknown_keys(s, {"id", "vertex"}, "station");
    Queue q;
    q.id = require_string(s, "id", "station");
    q.kind = QueueKind::Station;
    double v = require_number(s, "vertex", "station '" + q.id + "'");
    q.parent = q.child = static_cast<int>(v);
    sc.graph.stations.push_back(q);
  }

  if (!doc.contains("roads") || !doc["roads"].is_array()) throw ValidationError("scenario needs a 'roads' array");
  for (const auto& r : doc["roads"]) {
    if (!r.is_object()) throw ValidationError("each road must be an object");
    reject_unknown_keys(r, {"id", "from", "to", "travel_time", "capacity"}, "road");
    Queue q;
    q.id = require_string(r, "id", "road");
    q.kind = QueueKind::Road;
    q.parent = static_cast<int>(require_number(r, "from", "road '" + q.id + "'"));
    q.child = static_cast<int>(require_number(r, "to", "road '" + q.id + "'"));
    q.travel_time = require_number(r, "travel_time", "road '" + q.id + "'");
    q.capacity = require_number(r, "capacity", "road '" + q.id + "'");
    sc.graph.roads.push_back(q);
  }

  if (!doc.contains("demands") || !doc["demands"].is_array())
    throw ValidationError("scenario needs a 'demands' array");
  for (const auto& d : doc["demands"]) {
    if (!d.is_object()) throw ValidationError("each demand must be an object");
    reject_unknown_keys(d, {"origin", "destination", "rate"}, "demand");
    Demand dem;
    dem.origin = require_string(d, "origin", "demand");
    dem.destination = require_string(d, "destination", "demand");
    dem.rate = require_number(d, "rate", "demand " + dem.origin + "->" + dem.destination);
    sc.demands.customers.push_back(dem);
  }

  if (doc.contains("rebalancing_pairs")) {
    if (!doc["rebalancing_pairs"].is_array()) throw ValidationError("'rebalancing_pairs' must be an array");
    std::vector<std::pair<std::string, std::string>> pairs;
    for (const auto& p : doc["rebalancing_pairs"]) {
      if (!p.is_array() || p.size() != 2 || !p[0].is_string() || !p[1].is_string())
        throw ValidationError("each rebalancing pair must be [origin, destination]");
      pairs.emplace_back(p[0].get<std::string>(), p[1].get<std::string>());
    }
    sc.demands.rebalancing_pairs = std::move(pairs);
  }

  if (doc.contains("bpr")) {
    if (!doc["bpr"].is_object()) throw ValidationError("'bpr' must be an object");
    reject_unknown_keys(doc["bpr"], {"delta", "beta"}, "bpr");
    if (doc["bpr"].contains("delta")) sc.bpr.delta = require_number(doc["bpr"], "delta", "bpr");
    if (doc["bpr"].contains("beta")) sc.bpr.beta = require_number(doc["bpr"], "beta", "bpr");
    if (!(sc.bpr.delta >= 0) || !(sc.bpr.beta >= 0)) throw ValidationError("bpr parameters must be >= 0");
  }
  if (doc.contains("epsilon")) {
    if (!doc["epsilon"].is_number()) throw ValidationError("'epsilon' must be a number");
    sc.epsilon = doc["epsilon"].get<double>();
    if (!(sc.epsilon > 0 && sc.epsilon < 1)) throw ValidationError("'epsilon' must lie in (0, 1)");
  }

  sc.hash = hex64(fnv1a(canonical_scenario_json(sc)));
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open scenario file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

std::string canonical_scenario_json(const Scenario& sc) {
  ordered_json doc;
  doc["version"] = sc.version;
  doc["name"] = sc.name;
  auto vertices = sc.graph.vertices;
  std::sort(vertices.begin(), vertices.end());
  doc["vertices"] = vertices;
  auto stations = sc.graph.stations;
  std::sort(stations.begin(), stations.end(), [](const Queue& a, const Queue& b) { return a.id < b.id; });
  doc["stations"] = ordered_json::array();
  for (const auto& s : stations) doc["stations"].push_back({{"id", s.id}, {"vertex", s.parent}});
  auto roads = sc.graph.roads;
  std::sort(roads.begin(), roads.end(), [](const Queue& a, const Queue& b) { return a.id < b.id; });
  doc["roads"] = ordered_json::array();
  for (const auto& r : roads)
    doc["roads"].push_back(
        {{"id", r.id}, {"from", r.parent}, {"to", r.child}, {"travel_time", r.travel_time}, {"capacity", r.capacity}});
  auto demands = sc.demands.customers;
  std::sort(demands.begin(), demands.end(), [](const Demand& a, const Demand& b) {
    return std::tie(a.origin, a.destination) < std::tie(b.origin, b.destination);
  });
  doc["demands"] = ordered_json::array();
  for (const auto& d : demands)
    doc["demands"].push_back({{"origin", d.origin}, {"destination", d.destination}, {"rate", d.rate}});
  if (sc.demands.rebalancing_pairs.has_value()) {
    auto pairs = *sc.demands.rebalancing_pairs;
    std::sort(pairs.begin(), pairs.end());
    doc["rebalancing_pairs"] = ordered_json::array();
    for (const auto& [o, t] : pairs) doc["rebalancing_pairs"].push_back({o, t});
  }
  doc["bpr"] = {{"delta", sc.bpr.delta}, {"beta", sc.bpr.beta}};
  doc["epsilon"] = sc.epsilon;
  return doc.dump();
}

std::string policy_to_json(const AmodNetwork& net, const PolicyDocument& doc) {
  ordered_json out;
  out["scenario_hash"] = doc.scenario_hash;
  out["mode"] = to_string(doc.mode);
  out["epsilon"] = doc.epsilon;
  out["objective"] = doc.objective;
  out["rebalancing"] = ordered_json::array();
  int reb_seen = 0;
  for (int k = 0; k < net.num_classes(); ++k) {
    const TripClass& c = net.classes()[k];
    if (c.kind != TripKind::Rebalancing) continue;
    out["rebalancing"].push_back({{"origin", net.queue(c.origin).id},
                                  {"destination", net.queue(c.destination).id},
                                  {"rate", doc.rebalancing_rates.at(reb_seen++)}});
  }
  out["splits"] = ordered_json::array();
  for (int k = 0; k < net.num_classes(); ++k) {
    if (doc.policy.alpha[k].empty()) continue;
    const TripClass& c = net.classes()[k];
    ordered_json entry;
    entry["kind"] = c.kind == TripKind::Customer ? "customer" : "rebalancing";
    entry["origin"] = net.queue(c.origin).id;
    entry["destination"] = net.queue(c.destination).id;
    ordered_json alpha = ordered_json::object();
    for (const auto& [from, dist] : doc.policy.alpha[k]) {
      ordered_json row = ordered_json::object();
      for (auto [road, p] : dist) row[net.queue(road).id] = p;
      alpha[net.queue(from).id] = row;
    }
    entry["alpha"] = alpha;
    out["splits"].push_back(entry);
  }
  return out.dump(2) + "\n";
}

PolicyDocument policy_from_json(const AmodNetwork& net, const std::string& text, const std::string& expected_hash) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("policy document is not valid JSON: ") + e.what());
  }
  reject_unknown_keys(doc, {"scenario_hash", "mode", "epsilon", "objective", "rebalancing", "splits"},
                      "policy document");
  PolicyDocument out;
  out.scenario_hash = require_string(doc, "scenario_hash", "policy document");
  if (!expected_hash.empty() && out.scenario_hash != expected_hash)
    throw ValidationError("policy document was optimized for a different scenario (hash " + out.scenario_hash +
                          ", expected " + expected_hash + ")");
  std::string mode = require_string(doc, "mode", "policy document");
  if (mode == "baseline")
    out.mode = CapacityMode::Baseline;
  else if (mode == "conservative")
    out.mode = CapacityMode::Conservative;
  else
    throw ValidationError("policy mode must be 'baseline' or 'conservative'");
  out.epsilon = require_number(doc, "epsilon", "policy document");
  out.objective = require_number(doc, "objective", "policy document");

  std::map<std::pair<int, int>, double> reb;
  if (!doc.contains("rebalancing") || !doc["rebalancing"].is_array())
    throw ValidationError("policy document needs a 'rebalancing' array");
  for (const auto& r : doc["rebalancing"]) {
    reject_unknown_keys(r, {"origin", "destination", "rate"}, "rebalancing entry");
    int o = net.queue_index(require_string(r, "origin", "rebalancing entry"));
    int t = net.queue_index(require_string(r, "destination", "rebalancing entry"));
    if (o < 0 || t < 0) throw ValidationError("rebalancing entry references an unknown station");
    reb[{o, t}] = require_number(r, "rate", "rebalancing entry");
  }
  for (int k = 0; k < net.num_classes(); ++k) {
    const TripClass& c = net.classes()[k];
    if (c.kind != TripKind::Rebalancing) continue;
    auto it = reb.find({c.origin, c.destination});
    out.rebalancing_rates.push_back(it == reb.end() ? 0.0 : it->second);
  }

  out.policy.alpha.resize(net.num_classes());
  if (!doc.contains("splits") || !doc["splits"].is_array())
    throw ValidationError("policy document needs a 'splits' array");
  for (const auto& entry : doc["splits"]) {
    reject_unknown_keys(entry, {"kind", "origin", "destination", "alpha"}, "policy split");
    std::string kind_text = require_string(entry, "kind", "policy split");
    TripKind kind = kind_text == "customer" ? TripKind::Customer : TripKind::Rebalancing;
    if (kind_text != "customer" && kind_text != "rebalancing")
      throw ValidationError("policy split kind must be 'customer' or 'rebalancing'");
    int o = net.queue_index(require_string(entry, "origin", "policy split"));
    int t = net.queue_index(require_string(entry, "destination", "policy split"));
    int k = o >= 0 && t >= 0 ? net.class_index(kind, o, t) : -1;
    if (k < 0) throw ValidationError("policy split references an unknown class");
    if (!entry.contains("alpha") || !entry["alpha"].is_object())
      throw ValidationError("policy split needs an 'alpha' object");
    for (auto it = entry["alpha"].begin(); it != entry["alpha"].end(); ++it) {
      int from = net.queue_index(it.key());
      if (from < 0) throw ValidationError("policy split references unknown queue '" + it.key() + "'");
      if (!it.value().is_object()) throw ValidationError("policy split rows must map road ids to probabilities");
      std::vector<std::pair<int, double>> dist;
      for (auto jt = it.value().begin(); jt != it.value().end(); ++jt) {
        int road = net.queue_index(jt.key());
        if (road < 0) throw ValidationError("policy split references unknown road '" + jt.key() + "'");
        if (!jt.value().is_number()) throw ValidationError("policy split probabilities must be numbers");
        dist.emplace_back(road, jt.value().get<double>());
      }
      std::sort(dist.begin(), dist.end());
      out.policy.alpha[k][from] = std::move(dist);
    }
  }
  return out;
}

void save_policy(const std::string& path, const AmodNetwork& net, const PolicyDocument& doc) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write policy file '" + path + "'");
  out << policy_to_json(net, doc);
}

PolicyDocument load_policy(const std::string& path, const AmodNetwork& net, const std::string& expected_hash) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open policy file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return policy_from_json(net, ss.str(), expected_hash);
}

}  // namespace amod
