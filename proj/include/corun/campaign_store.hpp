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

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "corun/error.hpp"
#include "corun/harness.hpp"
#include "corun/util.hpp"
#include "corun/workload_file.hpp"

// Campaign directory layout:
//
//   <dir>/manifest.json   format version, config fingerprint, campaign params
//   <dir>/samples.jsonl   one JSON object per executed run (audit + rebuild)
//   <dir>/errors.jsonl    error ledger, one JSON object per failed unit
//
// samples.jsonl is the single source of truth: baselines, observations and
// resume state are all reconstructed from it. A unit counts as complete when
// its trailing records hold the full configured number of measured, clean
// (exit_ok, skew within bound) runs; aborted attempts simply leave earlier
// partial records behind, which the rebuild skips.

namespace corun {

inline constexpr int kCampaignFormatVersion = 1;

struct CampaignManifest {
  int format_version = kCampaignFormatVersion;
  std::string config_hash;
  std::string created_at;  // ISO-8601
  int rounds = 20;
  bool include_self = true;
  double skew_bound_s = 0.05;
  int workload_count = 0;
};

/// Stable fingerprint of everything that shapes a campaign's data. Resume
/// refuses to append to a directory recorded under a different fingerprint.
inline std::string campaign_config_hash(const WorkloadSet& set, int rounds, bool include_self,
                                        double skew_bound_s) {
  nlohmann::json j;
  j["rounds"] = rounds;
  j["include_self"] = include_self;
  j["skew_bound_s"] = skew_bound_s;
  auto& arr = j["workloads"] = nlohmann::json::array();
  for (const auto& s : set) arr.push_back(workload_spec_to_json(s));
  return to_hex(fnv1a64(j.dump()));
}

namespace detail {

inline nlohmann::json manifest_to_json(const CampaignManifest& m) {
  nlohmann::json j;
  j["format_version"] = m.format_version;
  j["config_hash"] = m.config_hash;
  j["created_at"] = m.created_at;
  j["rounds"] = m.rounds;
  j["include_self"] = m.include_self;
  j["skew_bound_s"] = m.skew_bound_s;
  j["workload_count"] = m.workload_count;
  return j;
}

inline CampaignManifest manifest_from_json(const nlohmann::json& j, const std::string& context) {
  CampaignManifest m;
  try {
    m.format_version = j.at("format_version").get<int>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.created_at = j.at("created_at").get<std::string>();
    m.rounds = j.at("rounds").get<int>();
    m.include_self = j.at("include_self").get<bool>();
    m.skew_bound_s = j.at("skew_bound_s").get<double>();
    m.workload_count = j.at("workload_count").get<int>();
  } catch (const nlohmann::json::exception& e) {
    raise(Errc::ParseError, context, e.what());
  }
  if (m.format_version != kCampaignFormatVersion) {
    raise(Errc::FormatVersionMismatch, context,
          "campaign format version " + std::to_string(m.format_version));
  }
  return m;
}

}  // namespace detail

/// Append-only persistence for one campaign directory. Implements the
/// harness sink so raw samples and ledger entries land on disk as they
/// happen.
class CampaignStore final : public CampaignSink {
 public:
  /// Creates the directory and manifest, or validates the existing manifest
  /// against `expected` (format version and config hash must match).
  static CampaignStore create_or_validate(const std::filesystem::path& dir,
                                          const CampaignManifest& expected) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const fs::path manifest_path = dir / "manifest.json";
    if (fs::exists(manifest_path)) {
      CampaignStore store = open(dir);
      if (store.manifest().config_hash != expected.config_hash) {
        raise(Errc::ManifestMismatch, manifest_path.string(),
              "campaign was recorded with config hash " + store.manifest().config_hash +
                  ", current config hashes to " + expected.config_hash);
      }
      return store;
    }
    detail::write_text_file(manifest_path.string(),
                            detail::manifest_to_json(expected).dump(2) + "\n");
    // Touch both logs so a campaign directory always has the same file set.
    std::ofstream(dir / "samples.jsonl", std::ios::app);
    std::ofstream(dir / "errors.jsonl", std::ios::app);
    return CampaignStore(dir, expected, 0);
  }

  static CampaignStore open(const std::filesystem::path& dir) {
    const std::filesystem::path manifest_path = dir / "manifest.json";
    if (!std::filesystem::exists(manifest_path)) {
      raise(Errc::IoError, manifest_path.string(), "no campaign manifest");
    }
    CampaignManifest m = detail::manifest_from_json(
        detail::parse_json(detail::read_text_file(manifest_path.string()), manifest_path.string()),
        manifest_path.string());
    return CampaignStore(dir, m, count_lines(dir / "samples.jsonl"));
  }

  const CampaignManifest& manifest() const { return manifest_; }
  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path samples_path() const { return dir_ / "samples.jsonl"; }
  std::filesystem::path errors_path() const { return dir_ / "errors.jsonl"; }

  /// Number of sample records already on disk; the harness continues the
  /// campaign-global sequence from here.
  std::uint64_t sample_count() const { return sample_count_; }

  void on_sample(const RunSample& s, const SampleContext& ctx) override {
    nlohmann::json j;
    j["workload_id"] = s.workload_id;
    j["duration_s"] = s.duration_s;
    j["exit_ok"] = s.exit_ok;
    j["started_at_s"] = s.started_at_s;
    j["sequence"] = s.sequence;
    j["kind"] = ctx.kind == SampleContext::Kind::Baseline ? "baseline" : "pair";
    j["phase"] = ctx.phase == RunPhase::Warmup ? "warmup" : "measured";
    j["round"] = ctx.round;
    j["wall_time"] = iso8601_utc(ctx.wall_unix_s);
    if (ctx.kind == SampleContext::Kind::Pair) {
      j["first"] = ctx.key.first;
      j["second"] = ctx.key.second;
      j["side"] = ctx.side == SampleContext::Side::First ? "first" : "second";
      j["skew_s"] = ctx.skew_s;
    }
    append_line(samples_path(), j.dump());
    ++sample_count_;
  }

  void on_error(const CampaignError& e) override {
    nlohmann::json j;
    j["unit"] = e.unit;
    j["error"] = errc_name(e.code);
    j["message"] = e.message;
    append_line(errors_path(), j.dump());
  }

 private:
  CampaignStore(std::filesystem::path dir, CampaignManifest m, std::uint64_t samples)
      : dir_(std::move(dir)), manifest_(std::move(m)), sample_count_(samples) {}

  static std::uint64_t count_lines(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::uint64_t n = 0;
    std::string line;
    while (std::getline(in, line)) ++n;
    return n;
  }

  static void append_line(const std::filesystem::path& p, const std::string& line) {
    std::ofstream out(p, std::ios::binary | std::ios::app);
    if (!out) raise(Errc::IoError, p.string(), "cannot open for append");
    out << line << '\n';
    out.flush();
    if (!out) raise(Errc::IoError, p.string(), "append failed");
  }

  std::filesystem::path dir_;
  CampaignManifest manifest_;
  std::uint64_t sample_count_ = 0;
};

// ---------------------------------------------------------------------------
// Rebuilding results from the sample log
// ---------------------------------------------------------------------------

struct RebuiltCampaign {
  std::map<std::string, BaselineProfile> baselines;
  std::map<PairKey, PairObservation> observations;
  std::set<std::string> completed_units;
};

namespace detail {

struct LoggedRun {
  RunSample sample;
  std::string phase;
  std::string side;
  double skew_s = 0.0;
};

}  // namespace detail

/// Reconstructs baselines and pair observations from samples.jsonl. A
/// baseline is complete when it has at least `samples` measured clean runs
/// (the trailing ones are used); a pair when it has `rounds` measured rounds
/// with both sides clean and skew within the manifest bound.
inline RebuiltCampaign load_campaign_results(const CampaignStore& store, const WorkloadSet& set) {
  const CampaignManifest& mf = store.manifest();
  RebuiltCampaign out;

  std::map<std::string, std::vector<detail::LoggedRun>> baseline_runs;
  struct PairRound {
    detail::LoggedRun first;
    detail::LoggedRun second;
    bool have_first = false;
    bool have_second = false;
  };
  std::map<PairKey, std::vector<PairRound>> pair_rounds;

  std::ifstream in(store.samples_path(), std::ios::binary);
  std::string line;
  std::uint64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::string where = store.samples_path().string() + ":" + std::to_string(lineno);
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) raise(Errc::ParseError, where, "invalid JSON record");
    detail::LoggedRun run;
    std::string kind;
    PairKey key;
    try {
      run.sample.workload_id = j.at("workload_id").get<std::string>();
      run.sample.duration_s = j.at("duration_s").get<double>();
      run.sample.exit_ok = j.at("exit_ok").get<bool>();
      run.sample.started_at_s = j.at("started_at_s").get<double>();
      run.sample.sequence = j.at("sequence").get<std::uint64_t>();
      run.phase = j.at("phase").get<std::string>();
      kind = j.at("kind").get<std::string>();
      if (kind == "pair") {
        key.first = j.at("first").get<std::string>();
        key.second = j.at("second").get<std::string>();
        run.side = j.at("side").get<std::string>();
        run.skew_s = j.at("skew_s").get<double>();
      } else if (kind != "baseline") {
        raise(Errc::ParseError, where, "unknown record kind '" + kind + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      raise(Errc::ParseError, where, e.what());
    }
    if (run.phase != "measured") continue;
    if (kind == "baseline") {
      if (run.sample.exit_ok) baseline_runs[run.sample.workload_id].push_back(run);
      continue;
    }
    auto& rounds = pair_rounds[key];
    if (run.side == "first") {
      rounds.emplace_back();
      rounds.back().first = run;
      rounds.back().have_first = true;
    } else {
      if (rounds.empty() || rounds.back().have_second) rounds.emplace_back();
      rounds.back().second = run;
      rounds.back().have_second = true;
    }
  }

  for (const auto& spec : set) {
    auto it = baseline_runs.find(spec.id);
    if (it == baseline_runs.end() || it->second.size() < spec.samples || spec.samples < 2) continue;
    BaselineProfile p;
    p.workload_id = spec.id;
    const auto& runs = it->second;
    for (std::size_t i = runs.size() - spec.samples; i < runs.size(); ++i) {
      p.samples.push_back(runs[i].sample);
    }
    std::vector<double> durations;
    for (const auto& s : p.samples) durations.push_back(s.duration_s);
    p.mean_s = mean(durations);
    p.stddev_s = sample_stddev(durations);
    p.ci95_s = confidence_interval(durations, 0.95);
    out.baselines.emplace(spec.id, std::move(p));
    out.completed_units.insert(baseline_unit_key(spec.id));
  }

  for (auto& [key, rounds] : pair_rounds) {
    std::vector<const PairRound*> clean;
    for (const auto& r : rounds) {
      if (r.have_first && r.have_second && r.first.sample.exit_ok && r.second.sample.exit_ok &&
          r.first.skew_s <= mf.skew_bound_s) {
        clean.push_back(&r);
      }
    }
    if (clean.size() < static_cast<std::size_t>(mf.rounds) || mf.rounds < 1) continue;
    PairObservation obs;
    obs.key = key;
    for (std::size_t i = clean.size() - static_cast<std::size_t>(mf.rounds); i < clean.size();
         ++i) {
      obs.samples_first.push_back(clean[i]->first.sample);
      obs.samples_second.push_back(clean[i]->second.sample);
      obs.start_skew_max_s = std::max(obs.start_skew_max_s, clean[i]->first.skew_s);
    }
    out.observations.emplace(key, std::move(obs));
    out.completed_units.insert(pair_unit_key(key));
  }

  return out;
}

}  // namespace corun
