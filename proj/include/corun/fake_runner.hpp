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

#include <deque>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "corun/harness.hpp"
#include "corun/util.hpp"

namespace corun {

/// Deterministic scripted ProcessRunner. Runs on a virtual clock (group
/// members are released at exactly the same instant, so skew is always zero)
/// and stamps wall times from a fixed epoch, which makes every campaign
/// artifact byte-reproducible.
///
/// Two modes:
///  - scripted: tests queue explicit per-workload events (durations,
///    non-zero exits, launch failures) consumed FIFO;
///  - synthetic: when a queue is empty and synthetic mode is on, timings are
///    derived from stable hashes of the workload ids — solo runs take
///    base(id) seconds and each co-resident inflates the duration by a fixed
///    per-id factor. This is what `--runner fake` uses end to end.
class FakeRunner final : public ProcessRunner {
 public:
  // 2026-01-01T00:00:00Z, the virtual wall epoch.
  static constexpr double kWallEpoch = 1767225600.0;

  explicit FakeRunner(bool synthetic = false) : synthetic_(synthetic) {}

  void script_duration(const std::string& id, double duration_s) {
    scripts_[id].push_back({Event::Kind::Duration, duration_s, 0, ""});
  }

  void script_durations(const std::string& id, const std::vector<double>& durations) {
    for (double d : durations) script_duration(id, d);
  }

  void script_exit_failure(const std::string& id, double duration_s, int exit_code = 1) {
    scripts_[id].push_back({Event::Kind::ExitFailure, duration_s, exit_code, ""});
  }

  void script_launch_failure(const std::string& id, const std::string& reason) {
    scripts_[id].push_back({Event::Kind::LaunchFailure, 0.0, 0, reason});
  }

  std::vector<LaunchOutcome> run_group(const std::vector<const WorkloadSpec*>& group) override {
    const double release = now_;
    std::vector<LaunchOutcome> outcomes;
    outcomes.reserve(group.size());
    double longest = 0.0;
    GroupTrace trace;
    trace.release_s = release;
    for (std::size_t i = 0; i < group.size(); ++i) {
      const WorkloadSpec& spec = *group[i];
      trace.ids.push_back(spec.id);
      Event ev = next_event(spec, group, i);
      LaunchOutcome out;
      out.released_at_s = release;
      out.wall_unix_s = kWallEpoch + release;
      switch (ev.kind) {
        case Event::Kind::Duration:
          out.duration_s = ev.duration_s;
          out.exit_ok = true;
          break;
        case Event::Kind::ExitFailure:
          out.duration_s = ev.duration_s;
          out.exit_ok = false;
          out.exit_code = ev.exit_code;
          break;
        case Event::Kind::LaunchFailure:
          out.launched = false;
          out.failure_reason = ev.reason;
          break;
      }
      longest = std::max(longest, out.duration_s);
      trace.exit_s.push_back(release + out.duration_s);
      outcomes.push_back(std::move(out));
    }
    timeline_.push_back(std::move(trace));
    now_ = release + longest + 1.0;  // fixed settle gap between groups
    ++groups_run_;
    return outcomes;
  }

  /// Recorded release/exit instants per group, for overlap assertions.
  struct GroupTrace {
    std::vector<std::string> ids;
    double release_s = 0.0;
    std::vector<double> exit_s;
  };
  const std::vector<GroupTrace>& timeline() const { return timeline_; }
  int groups_run() const { return groups_run_; }

  /// Synthetic solo duration for an id, exposed so tests and docs can state
  /// expected fake-mode losses: base(id) seconds solo, and each co-resident
  /// `o` multiplies duration by (1 + load_factor(o)).
  static double base_duration(const std::string& id) {
    return 1.0 + static_cast<double>(fnv1a64(id) % 2000) / 1000.0;
  }
  static double load_factor(const std::string& id) {
    return 0.05 + static_cast<double>((fnv1a64(id) >> 7) % 900) / 1000.0;
  }

 private:
  struct Event {
    enum class Kind { Duration, ExitFailure, LaunchFailure } kind = Kind::Duration;
    double duration_s = 0.0;
    int exit_code = 0;
    std::string reason;
  };

  Event next_event(const WorkloadSpec& spec, const std::vector<const WorkloadSpec*>& group,
                   std::size_t slot) {
    auto it = scripts_.find(spec.id);
    if (it != scripts_.end() && !it->second.empty()) {
      Event ev = it->second.front();
      it->second.pop_front();
      return ev;
    }
    if (!synthetic_) {
      throw std::logic_error("FakeRunner: no scripted event left for workload '" + spec.id + "'");
    }
    double factor = 1.0;
    for (std::size_t j = 0; j < group.size(); ++j) {
      if (j == slot) continue;
      factor += load_factor(group[j]->id);
    }
    return {Event::Kind::Duration, base_duration(spec.id) * factor, 0, ""};
  }

  bool synthetic_;
  std::map<std::string, std::deque<Event>> scripts_;
  std::vector<GroupTrace> timeline_;
  double now_ = 0.0;
  int groups_run_ = 0;
};

}  // namespace corun
