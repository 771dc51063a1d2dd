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
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "corun/csv.hpp"
#include "corun/error.hpp"
#include "corun/harness.hpp"
#include "corun/metrics.hpp"
#include "corun/model.hpp"
#include "corun/util.hpp"
#include "corun/workload_file.hpp"

namespace corun {

inline constexpr int kMatrixFormatVersion = 1;

/// One consolidated matrix cell for an ordered pair: per-side losses, the two
/// criteria, classification, and the per-side loss confidence intervals
/// (computed over per-round losses against the fixed baseline mean).
struct AffinityEntry {
  PairKey key;
  LossPercent loss_first;
  LossPercent loss_second;
  double average = 0.0;
  double distance = 0.0;
  AffinityClass classification = AffinityClass::Conditional;
  int sample_count = 0;
  Interval ci_first_pp;
  Interval ci_second_pp;
  std::string provenance;  // campaign manifest config hash

  PairMetrics metrics() const { return pair_metrics(loss_first, loss_second); }
  friend bool operator==(const AffinityEntry&, const AffinityEntry&) = default;
};

enum class LookupOrientation { Forward, Reversed };

/// The directional affinity matrix. Entries are keyed by ordered PairKey;
/// (A,B) and (B,A) can both exist and disagree. Immutable after build.
class AffinityMatrix {
 public:
  AffinityMatrix() = default;
  AffinityMatrix(WorkloadSet workloads, std::map<PairKey, AffinityEntry> entries,
                 ClassificationThresholds thresholds, std::string created_at)
      : workloads_(std::move(workloads)),
        entries_(std::move(entries)),
        thresholds_(thresholds),
        created_at_(std::move(created_at)) {
    thresholds_.validate();
    for (const auto& [key, entry] : entries_) {
      if (!workloads_.contains(key.first) || !workloads_.contains(key.second)) {
        raise(Errc::UnknownWorkload, key.to_string(), "entry references workload outside the set");
      }
      (void)entry;
    }
  }

  const WorkloadSet& workloads() const { return workloads_; }
  const std::map<PairKey, AffinityEntry>& entries() const { return entries_; }
  const ClassificationThresholds& thresholds() const { return thresholds_; }
  const std::string& created_at() const { return created_at_; }
  int format_version() const { return kMatrixFormatVersion; }

  /// Exact ordered-key lookup; never consults the reciprocal key.
  const AffinityEntry* lookup(const PairKey& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : &it->second;
  }

  /// Tries (A,B) then (B,A), reporting which orientation matched.
  std::optional<std::pair<const AffinityEntry*, LookupOrientation>> lookup_either(
      const PairKey& key) const {
    if (const AffinityEntry* e = lookup(key)) return {{e, LookupOrientation::Forward}};
    if (const AffinityEntry* e = lookup(key.reversed())) return {{e, LookupOrientation::Reversed}};
    return std::nullopt;
  }

  friend bool operator==(const AffinityMatrix&, const AffinityMatrix&) = default;

 private:
  WorkloadSet workloads_;
  std::map<PairKey, AffinityEntry> entries_;
  ClassificationThresholds thresholds_;
  std::string created_at_;
};

// ---------------------------------------------------------------------------
// Building from campaign results
// ---------------------------------------------------------------------------

struct BuildOptions {
  ClassificationThresholds thresholds;
  std::string provenance;
  std::string created_at;
};

namespace detail {

inline std::vector<double> durations_of(const std::vector<RunSample>& samples) {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.duration_s);
  return out;
}

}  // namespace detail

/// Consolidates raw observations into matrix entries: per-side mean co-run
/// duration -> loss against the side's baseline mean -> the two criteria and
/// classification. The per-side CI is over per-round losses, exposing the
/// measurement noise behind each point loss.
inline AffinityMatrix build_matrix(const WorkloadSet& workloads,
                                   const std::map<std::string, BaselineProfile>& baselines,
                                   const std::map<PairKey, PairObservation>& observations,
                                   const BuildOptions& options = {}) {
  options.thresholds.validate();
  std::map<PairKey, AffinityEntry> entries;
  for (const auto& [key, obs] : observations) {
    for (const std::string& id : {key.first, key.second}) {
      if (!baselines.count(id)) raise(Errc::MissingBaseline, id);
      if (!workloads.contains(id)) raise(Errc::UnknownWorkload, id);
    }
    if (obs.samples_first.size() != obs.samples_second.size() || obs.samples_first.empty()) {
      raise(Errc::CorruptEntry, key.to_string(), "misaligned observation sample vectors");
    }
    if (obs.samples_first.size() < 2) {
      raise(Errc::InsufficientSamples, key.to_string(), "need >= 2 rounds per pair");
    }

    const BaselineProfile& base_first = baselines.at(key.first);
    const BaselineProfile& base_second = baselines.at(key.second);
    const std::vector<double> dur_first = detail::durations_of(obs.samples_first);
    const std::vector<double> dur_second = detail::durations_of(obs.samples_second);

    AffinityEntry e;
    e.key = key;
    e.loss_first = loss_percent(base_first.mean_s, mean(dur_first));
    e.loss_second = loss_percent(base_second.mean_s, mean(dur_second));
    const PairMetrics m = pair_metrics(e.loss_first, e.loss_second);
    e.average = m.average;
    e.distance = m.distance;
    e.classification = classify(m, options.thresholds);
    e.sample_count = static_cast<int>(obs.samples_first.size());

    std::vector<double> losses_first, losses_second;
    for (double d : dur_first) losses_first.push_back(loss_percent(base_first.mean_s, d).value);
    for (double d : dur_second) losses_second.push_back(loss_percent(base_second.mean_s, d).value);
    e.ci_first_pp = confidence_interval(losses_first, 0.95);
    e.ci_second_pp = confidence_interval(losses_second, 0.95);
    e.provenance = options.provenance;
    entries.emplace(key, std::move(e));
  }
  return AffinityMatrix(workloads, std::move(entries), options.thresholds, options.created_at);
}

// ---------------------------------------------------------------------------
// Persistence (versioned JSON document)
// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::json entry_to_json(const AffinityEntry& e) {
  nlohmann::json j;
  j["first"] = e.key.first;
  j["second"] = e.key.second;
  j["loss_first"] = e.loss_first.value;
  j["loss_second"] = e.loss_second.value;
  j["average"] = e.average;
  j["distance"] = e.distance;
  j["classification"] = to_label(e.classification);
  j["sample_count"] = e.sample_count;
  j["ci_first"] = {e.ci_first_pp.lo, e.ci_first_pp.hi};
  j["ci_second"] = {e.ci_second_pp.lo, e.ci_second_pp.hi};
  j["provenance"] = e.provenance;
  return j;
}

inline bool close_enough(double a, double b) {
  return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)});
}

inline AffinityEntry entry_from_json(const nlohmann::json& j, const std::string& context) {
  AffinityEntry e;
  try {
    e.key.first = j.at("first").get<std::string>();
    e.key.second = j.at("second").get<std::string>();
    e.loss_first.value = j.at("loss_first").get<double>();
    e.loss_second.value = j.at("loss_second").get<double>();
    e.average = j.at("average").get<double>();
    e.distance = j.at("distance").get<double>();
    e.classification = parse_affinity_class(j.at("classification").get<std::string>());
    e.sample_count = j.at("sample_count").get<int>();
    e.ci_first_pp = {j.at("ci_first").at(0).get<double>(), j.at("ci_first").at(1).get<double>()};
    e.ci_second_pp = {j.at("ci_second").at(0).get<double>(), j.at("ci_second").at(1).get<double>()};
    e.provenance = j.value("provenance", "");
  } catch (const nlohmann::json::exception& ex) {
    raise(Errc::ParseError, context, ex.what());
  }
  // Consistency gate: the stored composite criteria must be recomputable
  // from the stored per-side losses.
  const PairMetrics m = pair_metrics(e.loss_first, e.loss_second);
  if (!close_enough(e.average, m.average) || !close_enough(e.distance, m.distance)) {
    raise(Errc::CorruptEntry, e.key.to_string(),
          "stored average/distance disagree with per-side losses");
  }
  if (e.loss_first.value < -100.0 || e.loss_second.value < -100.0) {
    raise(Errc::CorruptEntry, e.key.to_string(), "loss below -100");
  }
  if (e.sample_count < 2) {
    raise(Errc::CorruptEntry, e.key.to_string(), "sample_count below 2");
  }
  return e;
}

}  // namespace detail

inline nlohmann::json matrix_to_json(const AffinityMatrix& m) {
  nlohmann::json doc;
  doc["format_version"] = kMatrixFormatVersion;
  doc["created_at"] = m.created_at();
  doc["thresholds"] = {{"coexist_max_avg", m.thresholds().coexist_max_avg},
                       {"coexist_max_distance", m.thresholds().coexist_max_distance},
                       {"avoid_min_avg", m.thresholds().avoid_min_avg}};
  auto& workloads = doc["workloads"] = nlohmann::json::array();
  for (const auto& s : m.workloads()) workloads.push_back(workload_spec_to_json(s));
  auto& entries = doc["entries"] = nlohmann::json::array();
  for (const auto& [key, e] : m.entries()) entries.push_back(detail::entry_to_json(e));
  return doc;
}

inline void save_matrix(const AffinityMatrix& m, const std::string& path) {
  detail::write_text_file(path, matrix_to_json(m).dump(2) + "\n");
}

inline AffinityMatrix matrix_from_json(const nlohmann::json& doc, const std::string& context) {
  if (!doc.is_object() || !doc.contains("format_version") ||
      !doc["format_version"].is_number_integer()) {
    raise(Errc::FormatVersionMismatch, context, "missing format_version");
  }
  if (doc["format_version"].get<int>() != kMatrixFormatVersion) {
    raise(Errc::FormatVersionMismatch, context,
          "matrix format version " + doc["format_version"].dump() + ", expected " +
              std::to_string(kMatrixFormatVersion));
  }
  ClassificationThresholds thresholds;
  std::string created_at;
  std::vector<WorkloadSpec> specs;
  std::map<PairKey, AffinityEntry> entries;
  try {
    const auto& t = doc.at("thresholds");
    thresholds.coexist_max_avg = t.at("coexist_max_avg").get<double>();
    thresholds.coexist_max_distance = t.at("coexist_max_distance").get<double>();
    thresholds.avoid_min_avg = t.at("avoid_min_avg").get<double>();
    created_at = doc.value("created_at", "");
    for (const auto& w : doc.at("workloads")) specs.push_back(workload_spec_from_json(w));
  } catch (const nlohmann::json::exception& e) {
    raise(Errc::ParseError, context, e.what());
  }
  WorkloadSet set = validate_workload_set(std::move(specs));
  if (!doc.contains("entries") || !doc["entries"].is_array()) {
    raise(Errc::ParseError, context, "missing entries array");
  }
  for (const auto& ej : doc["entries"]) {
    AffinityEntry e = detail::entry_from_json(ej, context);
    if (!set.contains(e.key.first) || !set.contains(e.key.second)) {
      raise(Errc::CorruptEntry, e.key.to_string(), "entry references unknown workload");
    }
    if (!entries.emplace(e.key, e).second) {
      raise(Errc::CorruptEntry, e.key.to_string(), "duplicate entry key");
    }
  }
  return AffinityMatrix(std::move(set), std::move(entries), thresholds, created_at);
}

inline AffinityMatrix load_matrix(const std::string& path) {
  return matrix_from_json(detail::parse_json(detail::read_text_file(path), path), path);
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

struct MatrixCell {
  std::string first;
  std::string second;
  double loss_first = 0.0;
  double loss_second = 0.0;
  double average = 0.0;
  double distance = 0.0;
  AffinityClass classification = AffinityClass::Conditional;
  double severity = 0.0;  // 0..9 rank of the average across all entries
};

struct RenderedMatrix {
  std::string grid;              // human-readable table
  std::vector<MatrixCell> cells; // one row per entry, grid order
};

namespace detail {

inline std::string fixed1(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", v);
  return buf;
}

inline char class_mark(AffinityClass c) {
  switch (c) {
    case AffinityClass::Coexist: return '+';
    case AffinityClass::Conditional: return '~';
    case AffinityClass::Avoid: return '!';
  }
  return '~';
}

}  // namespace detail

/// Grid + cell dump. Rows and columns are ordered by (library, environment,
/// id); each populated cell shows "loss_first/loss_second mark severity".
/// The cell list drives the CSV dump and external heatmap plotting.
inline RenderedMatrix render_matrix_table(const AffinityMatrix& m) {
  std::vector<const WorkloadSpec*> order;
  for (const auto& s : m.workloads()) order.push_back(&s);
  std::sort(order.begin(), order.end(), [](const WorkloadSpec* a, const WorkloadSpec* b) {
    return std::tuple(a->library.label(), to_label(a->environment), a->id) <
           std::tuple(b->library.label(), to_label(b->environment), b->id);
  });

  RenderedMatrix out;
  for (const auto* row : order) {
    for (const auto* col : order) {
      if (const AffinityEntry* e = m.lookup({row->id, col->id})) {
        MatrixCell c;
        c.first = e->key.first;
        c.second = e->key.second;
        c.loss_first = e->loss_first.value;
        c.loss_second = e->loss_second.value;
        c.average = e->average;
        c.distance = e->distance;
        c.classification = e->classification;
        out.cells.push_back(std::move(c));
      }
    }
  }
  if (!out.cells.empty()) {
    std::vector<double> averages;
    averages.reserve(out.cells.size());
    for (const auto& c : out.cells) averages.push_back(c.average);
    const std::vector<double> severities = normalize_scores(averages, 9.0);
    for (std::size_t i = 0; i < out.cells.size(); ++i) out.cells[i].severity = severities[i];
  }

  std::map<PairKey, const MatrixCell*> by_key;
  for (const auto& c : out.cells) by_key[{c.first, c.second}] = &c;

  auto cell_text = [&](const std::string& r, const std::string& c) -> std::string {
    auto it = by_key.find({r, c});
    if (it == by_key.end()) return ".";
    const MatrixCell& cell = *it->second;
    return detail::fixed1(cell.loss_first) + "/" + detail::fixed1(cell.loss_second) + " " +
           detail::class_mark(cell.classification) +
           std::to_string(static_cast<int>(std::lround(cell.severity)));
  };

  std::size_t width = 12;
  for (const auto* w : order) width = std::max(width, w->id.size() + 2);
  for (const auto* r : order) {
    for (const auto* c : order) width = std::max(width, cell_text(r->id, c->id).size() + 2);
  }

  auto pad = [&](const std::string& s) {
    std::string out_s = s;
    out_s.resize(std::max(out_s.size(), width), ' ');
    return out_s;
  };

  std::string grid;
  grid += "affinity matrix: rows = first workload, cols = second workload\n";
  grid += "cell: loss_first/loss_second %, class (+ coexist, ~ conditional, ! avoid), severity 0-9\n";
  grid += pad("");
  for (const auto* c : order) grid += pad(c->id);
  grid += "\n";
  for (const auto* r : order) {
    grid += pad(r->id);
    for (const auto* c : order) grid += pad(cell_text(r->id, c->id));
    grid += "\n";
  }
  out.grid = std::move(grid);
  return out;
}

/// Machine-readable dump: exactly these columns, RFC 4180 quoting.
inline std::string cells_to_csv(const std::vector<MatrixCell>& cells) {
  std::string out = "first_id,second_id,loss_first,loss_second,average,distance,class\n";
  for (const auto& c : cells) {
    const std::vector<std::string> fields = {
        c.first,
        c.second,
        format_double(c.loss_first),
        format_double(c.loss_second),
        format_double(c.average),
        format_double(c.distance),
        to_label(c.classification),
    };
    out += csv_row(fields);
  }
  return out;
}

}  // namespace corun
