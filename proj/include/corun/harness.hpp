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
#include <set>
#include <string>
#include <vector>

#include "corun/error.hpp"
#include "corun/metrics.hpp"
#include "corun/model.hpp"

namespace corun {

// ---------------------------------------------------------------------------
// Raw timing records
// ---------------------------------------------------------------------------

/// One measured execution. `started_at_s` is monotonic seconds from the
/// runner's epoch (the barrier-release moment); `sequence` is the campaign-
/// global run counter.
struct RunSample {
  std::string workload_id;
  double duration_s = 0.0;
  bool exit_ok = false;
  double started_at_s = 0.0;
  std::uint64_t sequence = 0;
  friend bool operator==(const RunSample&, const RunSample&) = default;
};

/// Solo-run statistics for one workload, computed over post-warmup samples
/// only. This is the concurrency-free reference every loss compares against.
struct BaselineProfile {
  std::string workload_id;
  std::vector<RunSample> samples;
  double mean_s = 0.0;
  double stddev_s = 0.0;
  Interval ci95_s;
  friend bool operator==(const BaselineProfile&, const BaselineProfile&) = default;
};

/// Raw timings from one co-run campaign of an ordered pair. Sample vectors
/// are round-aligned: samples_first[i] and samples_second[i] were released
/// together in measured round i.
struct PairObservation {
  PairKey key;
  std::vector<RunSample> samples_first;
  std::vector<RunSample> samples_second;
  double start_skew_max_s = 0.0;
  friend bool operator==(const PairObservation&, const PairObservation&) = default;
};

// ---------------------------------------------------------------------------
// Process runner abstraction
// ---------------------------------------------------------------------------

/// Result of one command slot in a synchronized group run.
struct LaunchOutcome {
  bool launched = true;
  std::string failure_reason;   // set when launched == false
  double duration_s = 0.0;      // barrier release -> exit
  bool exit_ok = false;
  int exit_code = 0;            // exit status, or -signal when killed
  double released_at_s = 0.0;   // monotonic seconds from the runner's epoch
  double wall_unix_s = 0.0;     // wall-clock release time, for audit logs
};

/// Launches a group of commands, holds every member at a start barrier,
/// releases them together and waits for all of them to exit. Implementations
/// must be replaceable by a deterministic fake; the harness never talks to
/// the OS directly.
class ProcessRunner {
 public:
  virtual ~ProcessRunner() = default;
  virtual std::vector<LaunchOutcome> run_group(const std::vector<const WorkloadSpec*>& group) = 0;
};

// ---------------------------------------------------------------------------
// Campaign observer
// ---------------------------------------------------------------------------

enum class RunPhase { Warmup, Measured };

struct SampleContext {
  enum class Kind { Baseline, Pair } kind = Kind::Baseline;
  PairKey key;                 // pair runs only
  enum class Side { First, Second } side = Side::First;
  int round = 0;               // index within its phase
  RunPhase phase = RunPhase::Measured;
  double skew_s = 0.0;         // pair runs only
  double wall_unix_s = 0.0;
};

struct CampaignError {
  std::string unit;  // "baseline:<id>" or "pair:<first>|<second>"
  Errc code = Errc::LaunchFailure;
  std::string message;
  friend bool operator==(const CampaignError&, const CampaignError&) = default;
};

/// Sink for the raw-sample audit stream and the error ledger. The campaign
/// store implements this; tests use in-memory collectors.
class CampaignSink {
 public:
  virtual ~CampaignSink() = default;
  virtual void on_sample(const RunSample& sample, const SampleContext& ctx) = 0;
  virtual void on_error(const CampaignError& error) = 0;
};

inline std::string baseline_unit_key(const std::string& id) { return "baseline:" + id; }
inline std::string pair_unit_key(const PairKey& key) { return "pair:" + key.to_string(); }

// ---------------------------------------------------------------------------
// Harness
// ---------------------------------------------------------------------------

struct HarnessOptions {
  double skew_bound_s = 0.05;  // max tolerated gap between co-start releases
};

struct CampaignOptions {
  int rounds = 20;
  bool include_self = true;
  std::set<std::string> completed_units;  // unit keys to skip (resume)
};

struct CampaignResult {
  std::map<std::string, BaselineProfile> baselines;
  std::map<PairKey, PairObservation> observations;
  std::vector<CampaignError> errors;
  int executed_units = 0;
  int skipped_units = 0;
};

/// Drives baselines and synchronized co-runs through a ProcessRunner.
/// Blocking, single-caller; all concurrency lives inside the runner.
class Harness {
 public:
  explicit Harness(ProcessRunner& runner, HarnessOptions options = {},
                   CampaignSink* sink = nullptr, std::uint64_t first_sequence = 0)
      : runner_(runner), options_(options), sink_(sink), next_sequence_(first_sequence) {}

  /// warmup_runs discarded solo runs, then spec.samples measured solo runs.
  /// Nothing else managed by this harness runs meanwhile.
  BaselineProfile run_baseline(const WorkloadSpec& spec) {
    if (spec.samples < 2) {
      raise(Errc::InsufficientSamples, spec.id, "baseline needs samples >= 2");
    }
    BaselineProfile profile;
    profile.workload_id = spec.id;
    const std::uint32_t total = spec.warmup_runs + spec.samples;
    for (std::uint32_t i = 0; i < total; ++i) {
      const bool warmup = i < spec.warmup_runs;
      auto outcomes = runner_.run_group({&spec});
      const LaunchOutcome& out = outcomes.at(0);
      if (!out.launched) raise(Errc::LaunchFailure, spec.id, out.failure_reason);
      RunSample sample{spec.id, out.duration_s, out.exit_ok, out.released_at_s, next_sequence_++};
      SampleContext ctx;
      ctx.kind = SampleContext::Kind::Baseline;
      ctx.round = warmup ? static_cast<int>(i) : static_cast<int>(i - spec.warmup_runs);
      ctx.phase = warmup ? RunPhase::Warmup : RunPhase::Measured;
      ctx.wall_unix_s = out.wall_unix_s;
      emit(sample, ctx);
      if (!out.exit_ok) {
        raise(Errc::NonZeroExit, spec.id,
              "run " + std::to_string(i) + (warmup ? " (warmup)" : "") + " exited with status " +
                  std::to_string(out.exit_code));
      }
      if (!warmup) profile.samples.push_back(sample);
    }
    finalize_baseline_stats(profile);
    return profile;
  }

  /// One measured round launches both commands, releases them from a shared
  /// barrier and waits for both exits. max(a.warmup, b.warmup) co-run rounds
  /// are discarded first so both sides are warm.
  PairObservation run_pair(const WorkloadSpec& a, const WorkloadSpec& b, int rounds) {
    if (rounds < 1) raise(Errc::InsufficientSamples, pair_unit_key({a.id, b.id}), "rounds >= 1");
    PairObservation obs;
    obs.key = {a.id, b.id};
    const int warmup_rounds = static_cast<int>(std::max(a.warmup_runs, b.warmup_runs));
    for (int r = 0; r < warmup_rounds + rounds; ++r) {
      const bool warmup = r < warmup_rounds;
      const int round = warmup ? r : r - warmup_rounds;
      auto outcomes = runner_.run_group({&a, &b});
      const LaunchOutcome& oa = outcomes.at(0);
      const LaunchOutcome& ob = outcomes.at(1);
      for (const auto* o : {&oa, &ob}) {
        if (!o->launched) {
          raise(Errc::LaunchFailure, o == &oa ? a.id : b.id, o->failure_reason);
        }
      }
      const double skew = std::abs(oa.released_at_s - ob.released_at_s);
      obs.start_skew_max_s = std::max(obs.start_skew_max_s, skew);

      RunSample sa{a.id, oa.duration_s, oa.exit_ok, oa.released_at_s, next_sequence_++};
      RunSample sb{b.id, ob.duration_s, ob.exit_ok, ob.released_at_s, next_sequence_++};
      emit_pair(sa, obs.key, SampleContext::Side::First, round, warmup, skew, oa.wall_unix_s);
      emit_pair(sb, obs.key, SampleContext::Side::Second, round, warmup, skew, ob.wall_unix_s);

      if (!oa.exit_ok || !ob.exit_ok) {
        const bool first_failed = !oa.exit_ok;
        raise(Errc::NonZeroExit, first_failed ? a.id : b.id,
              "round " + std::to_string(round) + (warmup ? " (warmup)" : "") +
                  " exited with status " +
                  std::to_string(first_failed ? oa.exit_code : ob.exit_code));
      }
      if (!warmup && skew > options_.skew_bound_s) {
        raise(Errc::SkewExceeded, pair_unit_key(obs.key),
              "round " + std::to_string(round) + " skew " + std::to_string(skew) + "s > bound " +
                  std::to_string(options_.skew_bound_s) + "s");
      }
      if (!warmup) {
        obs.samples_first.push_back(sa);
        obs.samples_second.push_back(sb);
      }
    }
    return obs;
  }

  /// All baselines first (sorted by id), then all ordered pairs in
  /// enumerate_pairs order. Individual unit failures go to the error ledger
  /// and the campaign moves on; pairs whose side has no usable baseline are
  /// skipped with a ledger entry.
  CampaignResult run_campaign(const WorkloadSet& set, const CampaignOptions& opts) {
    CampaignResult result;
    std::set<std::string> failed_baselines;
    for (const auto& spec : set) {
      const std::string unit = baseline_unit_key(spec.id);
      if (opts.completed_units.count(unit)) {
        ++result.skipped_units;
        continue;
      }
      try {
        result.baselines.emplace(spec.id, run_baseline(spec));
        ++result.executed_units;
      } catch (const Error& e) {
        record_error(result, {unit, e.code(), e.what()});
        failed_baselines.insert(spec.id);
      }
    }
    for (const PairKey& key : enumerate_pairs(set, opts.include_self)) {
      const std::string unit = pair_unit_key(key);
      if (failed_baselines.count(key.first) || failed_baselines.count(key.second)) {
        record_error(result, {unit, Errc::MissingBaseline, "skipped: baseline run failed"});
        continue;
      }
      if (opts.completed_units.count(unit)) {
        ++result.skipped_units;
        continue;
      }
      try {
        result.observations.emplace(key, run_pair(set.at(key.first), set.at(key.second), opts.rounds));
        ++result.executed_units;
      } catch (const Error& e) {
        record_error(result, {unit, e.code(), e.what()});
      }
    }
    return result;
  }

 private:
  void finalize_baseline_stats(BaselineProfile& p) {
    std::vector<double> durations;
    durations.reserve(p.samples.size());
    for (const auto& s : p.samples) durations.push_back(s.duration_s);
    p.mean_s = mean(durations);
    p.stddev_s = sample_stddev(durations);
    p.ci95_s = confidence_interval(durations, 0.95);
  }

  void emit(const RunSample& s, const SampleContext& ctx) {
    if (sink_) sink_->on_sample(s, ctx);
  }

  void emit_pair(const RunSample& s, const PairKey& key, SampleContext::Side side, int round,
                 bool warmup, double skew, double wall) {
    SampleContext ctx;
    ctx.kind = SampleContext::Kind::Pair;
    ctx.key = key;
    ctx.side = side;
    ctx.round = round;
    ctx.phase = warmup ? RunPhase::Warmup : RunPhase::Measured;
    ctx.skew_s = skew;
    ctx.wall_unix_s = wall;
    emit(s, ctx);
  }

  void record_error(CampaignResult& result, CampaignError err) {
    if (sink_) sink_->on_error(err);
    result.errors.push_back(std::move(err));
  }

  ProcessRunner& runner_;
  HarnessOptions options_;
  CampaignSink* sink_;
  std::uint64_t next_sequence_;
};

}  // namespace corun
