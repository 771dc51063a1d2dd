/*
 * Copyright (c) The corun-affinity Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "corun/csv.hpp"
#include "corun/error.hpp"
#include "corun/metrics.hpp"
#include "corun/store.hpp"
#include "corun/util.hpp"

namespace corun {

// ---------------------------------------------------------------------------
// Inputs
// ---------------------------------------------------------------------------

struct Host {
  std::string id;
  int capacity = 1;  // max co-resident workloads
  friend bool operator==(const Host&, const Host&) = default;
};

struct PlacementRequest {
  std::string request_id;
  std::string workload_id;  // must exist in the matrix workload set
  friend bool operator==(const PlacementRequest&, const PlacementRequest&) = default;
};

/// What "best" means: lowest predicted loss, highest stability, loss with
/// stability as tiebreak, or a blend. The trade-off is the operator's call;
/// MinAverageLoss is only the conventional default.
struct Objective {
  enum class Kind { MinAverageLoss, MinInstability, Lexicographic, Weighted };
  Kind kind = Kind::MinAverageLoss;
  double alpha = 0.5;  // Weighted only: alpha*loss + (1-alpha)*instability

  static Objective min_average_loss() { return {Kind::MinAverageLoss, 0.0}; }
  static Objective min_instability() { return {Kind::MinInstability, 0.0}; }
  static Objective lexicographic() { return {Kind::Lexicographic, 0.0}; }
  static Objective weighted(double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
      raise(Errc::InvalidObjective, "weighted", "alpha must be in [0,1]");
    }
    return {Kind::Weighted, alpha};
  }

  std::string label() const {
    switch (kind) {
      case Kind::MinAverageLoss: return "avg";
      case Kind::MinInstability: return "stability";
      case Kind::Lexicographic: return "lex";
      case Kind::Weighted: return "weighted:" + format_double(alpha);
    }
    return "avg";
  }

  /// Parses "avg" | "stability" | "lex" | "weighted:<alpha>".
  static Objective parse(std::string_view s) {
    const std::string n = to_lower(trim(s));
    if (n == "avg") return min_average_loss();
    if (n == "stability") return min_instability();
    if (n == "lex") return lexicographic();
    if (n.rfind("weighted:", 0) == 0) {
      try {
        return weighted(std::stod(n.substr(9)));
      } catch (const std::logic_error&) {
        raise(Errc::InvalidObjective, std::string(s), "bad alpha");
      }
    }
    raise(Errc::InvalidObjective, std::string(s), "expected avg|stability|lex|weighted:<alpha>");
  }

  friend bool operator==(const Objective&, const Objective&) = default;
};

/// Comparable cost under an objective. Lexicographic order; scalar
/// objectives leave the secondary component at zero.
struct CostValue {
  double primary = 0.0;
  double secondary = 0.0;
  friend auto operator<=>(const CostValue&, const CostValue&) = default;
  CostValue operator-(const CostValue& other) const {
    return {primary - other.primary, secondary - other.secondary};
  }
};

inline CostValue objective_cost(const Objective& o, double average_loss_sum,
                                double instability_sum) {
  switch (o.kind) {
    case Objective::Kind::MinAverageLoss: return {average_loss_sum, 0.0};
    case Objective::Kind::MinInstability: return {instability_sum, 0.0};
    case Objective::Kind::Lexicographic: return {average_loss_sum, instability_sum};
    case Objective::Kind::Weighted:
      return {o.alpha * average_loss_sum + (1.0 - o.alpha) * instability_sum, 0.0};
  }
  return {average_loss_sum, 0.0};
}

// ---------------------------------------------------------------------------
// Host cost prediction
// ---------------------------------------------------------------------------

struct PairCostDetail {
  std::string first;   // resident ids, sorted
  std::string second;
  double average = 0.0;   // clamped at 0
  double distance = 0.0;  // clamped at 0
  std::optional<AffinityClass> classification;  // absent when penalized
  bool default_penalty = false;
  friend bool operator==(const PairCostDetail&, const PairCostDetail&) = default;
};

struct HostCost {
  double average_loss_sum = 0.0;
  double instability_sum = 0.0;
  std::vector<PairCostDetail> pairs;
  std::vector<PairKey> missing;  // pairs that used the default penalty
};

/// Sums entry.average and entry.distance over every unordered resident pair
/// (duplicate workloads pair with themselves), fetching entries in either
/// orientation. Unmeasured pairs contribute `default_penalty` to both sums.
/// Negative values are clamped to zero so cost is monotone in residents.
/// Pairwise-additive composition is the declared approximation for hosts
/// with more than two residents.
inline HostCost predict_host_cost(std::vector<std::string> resident_ids,
                                  const AffinityMatrix& matrix, double default_penalty) {
  for (const auto& id : resident_ids) {
    if (!matrix.workloads().contains(id)) raise(Errc::UnknownWorkload, id);
  }
  std::sort(resident_ids.begin(), resident_ids.end());
  HostCost cost;
  for (std::size_t i = 0; i < resident_ids.size(); ++i) {
    for (std::size_t j = i + 1; j < resident_ids.size(); ++j) {
      const PairKey key{resident_ids[i], resident_ids[j]};
      PairCostDetail d;
      d.first = key.first;
      d.second = key.second;
      if (auto hit = matrix.lookup_either(key)) {
        const AffinityEntry& e = *hit->first;
        d.average = std::max(0.0, e.average);
        d.distance = std::max(0.0, e.distance);
        d.classification = e.classification;
      } else {
        d.average = default_penalty;
        d.distance = default_penalty;
        d.default_penalty = true;
        cost.missing.push_back(key);
      }
      cost.average_loss_sum += d.average;
      cost.instability_sum += d.distance;
      cost.pairs.push_back(std::move(d));
    }
  }
  return cost;
}

// ---------------------------------------------------------------------------
// Plans
// ---------------------------------------------------------------------------

struct PlacementPlan {
  std::map<std::string, std::string> assignment;  // request_id -> host_id
  double total_average_loss = 0.0;
  double total_instability = 0.0;
  std::map<std::string, HostCost> per_host;  // host_id -> breakdown
  std::vector<PairKey> missing_pairs;        // pairs that used the default penalty
  Objective objective;
  double default_penalty = 0.0;
};

namespace detail {

struct PlannerInputs {
  std::vector<PlacementRequest> requests;  // sorted by request_id
  std::vector<Host> hosts;                 // sorted by host id
};

inline PlannerInputs validate_planner_inputs(std::vector<PlacementRequest> requests,
                                             std::vector<Host> hosts,
                                             const AffinityMatrix& matrix) {
  std::set<std::string> request_ids;
  for (const auto& r : requests) {
    if (r.request_id.empty()) raise(Errc::EmptyId, "placement request");
    if (!request_ids.insert(r.request_id).second) raise(Errc::DuplicateId, r.request_id);
    if (!matrix.workloads().contains(r.workload_id)) raise(Errc::UnknownWorkload, r.workload_id);
  }
  std::set<std::string> host_ids;
  std::uint64_t capacity = 0;
  for (const auto& h : hosts) {
    if (h.id.empty()) raise(Errc::EmptyId, "host");
    if (!host_ids.insert(h.id).second) raise(Errc::DuplicateId, h.id);
    if (h.capacity < 1) raise(Errc::InvalidCapacity, h.id, "capacity must be >= 1");
    capacity += static_cast<std::uint64_t>(h.capacity);
  }
  if (capacity < requests.size()) {
    raise(Errc::InsufficientCapacity, "plan",
          std::to_string(requests.size()) + " requests, total capacity " +
              std::to_string(capacity));
  }
  std::sort(requests.begin(), requests.end(),
            [](const auto& a, const auto& b) { return a.request_id < b.request_id; });
  std::sort(hosts.begin(), hosts.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return {std::move(requests), std::move(hosts)};
}

/// Pair average used by the greedy ordering heuristic, clamped like the cost
/// sums are.
inline double heuristic_pair_average(const AffinityMatrix& matrix, const std::string& u,
                                     const std::string& v, double default_penalty) {
  if (auto hit = matrix.lookup_either({u, v})) return std::max(0.0, hit->first->average);
  return default_penalty;
}

inline PlacementPlan finalize_plan(const std::map<std::string, std::string>& assignment,
                                   const PlannerInputs& in, const AffinityMatrix& matrix,
                                   const Objective& objective, double default_penalty) {
  PlacementPlan plan;
  plan.assignment = assignment;
  plan.objective = objective;
  plan.default_penalty = default_penalty;
  std::map<std::string, std::vector<std::string>> residents;
  for (const auto& h : in.hosts) residents[h.id];
  for (const auto& r : in.requests) residents[assignment.at(r.request_id)].push_back(r.workload_id);
  for (const auto& [host_id, ids] : residents) {
    HostCost cost = predict_host_cost(ids, matrix, default_penalty);
    plan.total_average_loss += cost.average_loss_sum;
    plan.total_instability += cost.instability_sum;
    for (const auto& key : cost.missing) plan.missing_pairs.push_back(key);
    plan.per_host.emplace(host_id, std::move(cost));
  }
  return plan;
}

}  // namespace detail

/// Deterministic greedy placement: requests ordered by descending worst-case
/// pairwise average against all other requested workloads (ties by
/// request_id), each placed on the feasible host with the smallest marginal
/// objective increase (ties by host id).
inline PlacementPlan plan_greedy(std::vector<PlacementRequest> requests, std::vector<Host> hosts,
                                 const AffinityMatrix& matrix, const Objective& objective,
                                 double default_penalty) {
  const detail::PlannerInputs in =
      detail::validate_planner_inputs(std::move(requests), std::move(hosts), matrix);

  std::vector<std::size_t> order(in.requests.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<double> worst(in.requests.size(), 0.0);
  for (std::size_t i = 0; i < in.requests.size(); ++i) {
    for (std::size_t j = 0; j < in.requests.size(); ++j) {
      if (i == j) continue;
      worst[i] = std::max(worst[i],
                          detail::heuristic_pair_average(matrix, in.requests[i].workload_id,
                                                         in.requests[j].workload_id,
                                                         default_penalty));
    }
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (worst[a] != worst[b]) return worst[a] > worst[b];
    return in.requests[a].request_id < in.requests[b].request_id;
  });

  std::map<std::string, std::vector<std::string>> residents;
  std::map<std::string, std::string> assignment;
  for (std::size_t idx : order) {
    const PlacementRequest& req = in.requests[idx];
    const Host* best_host = nullptr;
    CostValue best_delta{};
    for (const Host& host : in.hosts) {
      auto& ids = residents[host.id];
      if (static_cast<int>(ids.size()) >= host.capacity) continue;
      const HostCost before = predict_host_cost(ids, matrix, default_penalty);
      std::vector<std::string> with = ids;
      with.push_back(req.workload_id);
      const HostCost after = predict_host_cost(with, matrix, default_penalty);
      const CostValue delta =
          objective_cost(objective, after.average_loss_sum, after.instability_sum) -
          objective_cost(objective, before.average_loss_sum, before.instability_sum);
      if (!best_host || delta < best_delta) {
        best_host = &host;
        best_delta = delta;
      }
    }
    // Total capacity was validated, so a feasible host always exists.
    residents[best_host->id].push_back(req.workload_id);
    assignment[req.request_id] = best_host->id;
  }
  return detail::finalize_plan(assignment, in, matrix, objective, default_penalty);
}

struct ExhaustiveLimits {
  std::uint64_t max_assignments = 1'000'000;  // reject |hosts|^|requests| beyond this
};

/// Enumerates every capacity-feasible assignment and returns the objective
/// minimum; ties go to the lexicographically smallest assignment vector
/// ordered by request_id. Oracle for the greedy planner on small instances.
inline PlacementPlan plan_exhaustive(std::vector<PlacementRequest> requests,
                                     std::vector<Host> hosts, const AffinityMatrix& matrix,
                                     const Objective& objective, double default_penalty,
                                     const ExhaustiveLimits& limits = {}) {
  const detail::PlannerInputs in =
      detail::validate_planner_inputs(std::move(requests), std::move(hosts), matrix);
  const std::size_t n = in.requests.size();
  if (n == 0) {
    return detail::finalize_plan({}, in, matrix, objective, default_penalty);
  }

  double combos = 1.0;
  for (std::size_t i = 0; i < n; ++i) combos *= static_cast<double>(in.hosts.size());
  if (combos > static_cast<double>(limits.max_assignments)) {
    raise(Errc::InstanceTooLarge, "plan_exhaustive",
          std::to_string(in.hosts.size()) + "^" + std::to_string(n) + " assignments exceed limit " +
              std::to_string(limits.max_assignments));
  }

  std::vector<std::size_t> slot(n, 0);  // host index per request, odometer order
  std::optional<CostValue> best_cost;
  std::vector<std::size_t> best_slot;
  while (true) {
    std::vector<int> load(in.hosts.size(), 0);
    bool feasible = true;
    for (std::size_t i = 0; i < n && feasible; ++i) {
      if (++load[slot[i]] > in.hosts[slot[i]].capacity) feasible = false;
    }
    if (feasible) {
      std::map<std::string, std::vector<std::string>> residents;
      for (std::size_t i = 0; i < n; ++i) {
        residents[in.hosts[slot[i]].id].push_back(in.requests[i].workload_id);
      }
      double avg_sum = 0.0, inst_sum = 0.0;
      for (const auto& [host_id, ids] : residents) {
        const HostCost c = predict_host_cost(ids, matrix, default_penalty);
        avg_sum += c.average_loss_sum;
        inst_sum += c.instability_sum;
      }
      const CostValue cost = objective_cost(objective, avg_sum, inst_sum);
      // Strict improvement only: the first minimum in odometer order is the
      // lexicographically smallest assignment vector.
      if (!best_cost || cost < *best_cost) {
        best_cost = cost;
        best_slot = slot;
      }
    }
    std::size_t k = n;
    while (k > 0) {
      if (++slot[k - 1] < in.hosts.size()) break;
      slot[k - 1] = 0;
      --k;
    }
    if (k == 0) break;
  }
  if (!best_cost) raise(Errc::InsufficientCapacity, "plan", "no feasible assignment");

  std::map<std::string, std::string> assignment;
  for (std::size_t i = 0; i < n; ++i) {
    assignment[in.requests[i].request_id] = in.hosts[best_slot[i]].id;
  }
  return detail::finalize_plan(assignment, in, matrix, objective, default_penalty);
}

// ---------------------------------------------------------------------------
// Reports and serialization
// ---------------------------------------------------------------------------

/// Human-readable per-host breakdown. Every Avoid-classified co-residency is
/// flagged with a WARNING line; default-penalty pairs are listed at the end.
inline std::string explain_plan(const PlacementPlan& plan, const AffinityMatrix& matrix) {
  for (const auto& [host_id, cost] : plan.per_host) {
    for (const auto& p : cost.pairs) {
      if (!matrix.workloads().contains(p.first) || !matrix.workloads().contains(p.second)) {
        raise(Errc::UnknownWorkload, p.first + "|" + p.second, "plan does not match this matrix");
      }
    }
  }
  std::string out;
  out += "placement plan (objective " + plan.objective.label() + ")\n";
  out += "total average loss: " + detail::fixed1(plan.total_average_loss) + " pp, total instability: " +
         detail::fixed1(plan.total_instability) + " pp\n";
  bool crowded = false;
  std::map<std::string, int> load;
  for (const auto& [req, host] : plan.assignment) ++load[host];
  for (const auto& [host, n] : load) crowded = crowded || n > 2;
  if (crowded) {
    out += "note: per-host cost is the pairwise-additive approximation; hosts with more than two "
           "residents were never measured directly\n";
  }
  for (const auto& [host_id, cost] : plan.per_host) {
    out += "host " + host_id + ":\n";
    std::vector<std::string> residents;
    for (const auto& [req, host] : plan.assignment) {
      if (host == host_id) residents.push_back(req);
    }
    if (residents.empty()) {
      out += "  (empty)\n";
      continue;
    }
    out += "  requests:";
    for (const auto& r : residents) out += " " + r;
    out += "\n";
    if (cost.pairs.empty()) {
      out += "  no co-resident pairs\n";
    }
    for (const auto& p : cost.pairs) {
      out += "  pair " + p.first + " x " + p.second + ": average " + detail::fixed1(p.average) +
             " pp, distance " + detail::fixed1(p.distance) + " pp, " +
             (p.default_penalty ? std::string("default penalty (unmeasured)")
                                : to_label(*p.classification)) +
             "\n";
      if (p.classification && *p.classification == AffinityClass::Avoid) {
        out += "  WARNING: avoid-classified pair co-resident on " + host_id + ": " + p.first +
               " x " + p.second + "\n";
      }
    }
  }
  if (!plan.missing_pairs.empty()) {
    out += "default penalty (" + format_double(plan.default_penalty) + " pp) applied to " +
           std::to_string(plan.missing_pairs.size()) + " unmeasured pair(s):\n";
    for (const auto& key : plan.missing_pairs) {
      out += "  " + key.first + " x " + key.second + "\n";
    }
  }
  return out;
}

inline nlohmann::json plan_to_json(const PlacementPlan& plan) {
  nlohmann::json doc;
  doc["format_version"] = 1;
  doc["objective"] = plan.objective.label();
  doc["default_penalty"] = plan.default_penalty;
  doc["assignment"] = plan.assignment;
  doc["total_average_loss"] = plan.total_average_loss;
  doc["total_instability"] = plan.total_instability;
  auto& hosts = doc["per_host"] = nlohmann::json::array();
  for (const auto& [host_id, cost] : plan.per_host) {
    nlohmann::json hj;
    hj["host"] = host_id;
    hj["average_loss_sum"] = cost.average_loss_sum;
    hj["instability_sum"] = cost.instability_sum;
    auto& pairs = hj["pairs"] = nlohmann::json::array();
    for (const auto& p : cost.pairs) {
      nlohmann::json pj;
      pj["first"] = p.first;
      pj["second"] = p.second;
      pj["average"] = p.average;
      pj["distance"] = p.distance;
      if (p.classification) pj["class"] = to_label(*p.classification);
      pj["default_penalty"] = p.default_penalty;
      pairs.push_back(std::move(pj));
    }
    hosts.push_back(std::move(hj));
  }
  auto& missing = doc["missing_pairs"] = nlohmann::json::array();
  for (const auto& key : plan.missing_pairs) {
    missing.push_back(nlohmann::json::array({key.first, key.second}));
  }
  return doc;
}

/// Flat CSV: request_id,host_id (rows sorted by request_id).
inline std::string plan_assignment_csv(const PlacementPlan& plan) {
  std::string out = "request_id,host_id\n";
  for (const auto& [req, host] : plan.assignment) {
    const std::vector<std::string> fields = {req, host};
    out += csv_row(fields);
  }
  return out;
}

}  // namespace corun
