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
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "corun/error.hpp"
#include "corun/util.hpp"

namespace corun {

// ---------------------------------------------------------------------------
// Tag types
// ---------------------------------------------------------------------------

/// Where a workload runs: on bare metal or inside a virtualized guest. The
/// toolkit never provisions either; the tag is metadata carried into reports.
enum class EnvironmentKind { Real, Virtual };

inline std::string to_label(EnvironmentKind e) {
  return e == EnvironmentKind::Real ? "real" : "virtual";
}

inline EnvironmentKind parse_environment(std::string_view s) {
  const std::string n = to_lower(trim(s));
  if (n == "real") return EnvironmentKind::Real;
  if (n == "virtual") return EnvironmentKind::Virtual;
  raise(Errc::ParseError, "environment", "expected 'real' or 'virtual', got '" + n + "'");
}

/// Parallelization library a workload is built with. SharedMemory covers
/// OpenMP-style shared-memory runtimes, Heterogeneous covers OpenCL-style
/// device runtimes; anything else is an open label so new libraries can join
/// the matrix without a code change.
class LibraryKind {
 public:
  static LibraryKind shared_memory() { return LibraryKind(Tag::SharedMemory, ""); }
  static LibraryKind heterogeneous() { return LibraryKind(Tag::Heterogeneous, ""); }

  static LibraryKind other(std::string_view name) {
    const std::string n = to_lower(trim(name));
    if (n.empty()) raise(Errc::ParseError, "library", "label must be non-empty");
    if (n == "shared_memory") return shared_memory();
    if (n == "heterogeneous") return heterogeneous();
    return LibraryKind(Tag::Other, n);
  }

  static LibraryKind parse(std::string_view label) { return other(label); }

  std::string label() const {
    switch (tag_) {
      case Tag::SharedMemory: return "shared_memory";
      case Tag::Heterogeneous: return "heterogeneous";
      case Tag::Other: return name_;
    }
    return name_;
  }

  bool is_shared_memory() const { return tag_ == Tag::SharedMemory; }
  bool is_heterogeneous() const { return tag_ == Tag::Heterogeneous; }
  bool is_other() const { return tag_ == Tag::Other; }

  friend bool operator==(const LibraryKind&, const LibraryKind&) = default;
  friend auto operator<=>(const LibraryKind&, const LibraryKind&) = default;

 private:
  enum class Tag { SharedMemory, Heterogeneous, Other };
  LibraryKind(Tag tag, std::string name) : tag_(tag), name_(std::move(name)) {}

  Tag tag_;
  std::string name_;  // set only for Tag::Other, already trimmed + lowercased
};

/// The thirteen Berkeley dwarf classes plus Unclassified for workloads that
/// were never categorized.
enum class DwarfClass {
  DenseLinearAlgebra,
  SparseLinearAlgebra,
  SpectralMethods,
  NBodyMethods,
  StructuredGrid,
  UnstructuredGrid,
  MapReduce,
  CombinationalLogic,
  GraphTraversal,
  DynamicProgramming,
  BacktrackBranchAndBound,
  GraphicalModels,
  FiniteStateMachines,
  Unclassified,
};

namespace detail {
struct DwarfLabel {
  DwarfClass value;
  const char* label;
};
inline constexpr DwarfLabel kDwarfLabels[] = {
    {DwarfClass::DenseLinearAlgebra, "dense_linear_algebra"},
    {DwarfClass::SparseLinearAlgebra, "sparse_linear_algebra"},
    {DwarfClass::SpectralMethods, "spectral_methods"},
    {DwarfClass::NBodyMethods, "n_body_methods"},
    {DwarfClass::StructuredGrid, "structured_grid"},
    {DwarfClass::UnstructuredGrid, "unstructured_grid"},
    {DwarfClass::MapReduce, "map_reduce"},
    {DwarfClass::CombinationalLogic, "combinational_logic"},
    {DwarfClass::GraphTraversal, "graph_traversal"},
    {DwarfClass::DynamicProgramming, "dynamic_programming"},
    {DwarfClass::BacktrackBranchAndBound, "backtrack_branch_and_bound"},
    {DwarfClass::GraphicalModels, "graphical_models"},
    {DwarfClass::FiniteStateMachines, "finite_state_machines"},
    {DwarfClass::Unclassified, "unclassified"},
};
}  // namespace detail

inline std::string to_label(DwarfClass d) {
  for (const auto& e : detail::kDwarfLabels) {
    if (e.value == d) return e.label;
  }
  return "unclassified";
}

inline DwarfClass parse_dwarf(std::string_view s) {
  const std::string n = to_lower(trim(s));
  for (const auto& e : detail::kDwarfLabels) {
    if (n == e.label) return e.value;
  }
  raise(Errc::ParseError, "dwarf", "unknown class label '" + n + "'");
}

// ---------------------------------------------------------------------------
// WorkloadSpec and pair keys
// ---------------------------------------------------------------------------

/// An opaque external command plus the tags the affinity matrix keys reports
/// on. `id` is the sole identity: two specs are the same workload iff their
/// ids match.
struct WorkloadSpec {
  std::string id;
  DwarfClass dwarf = DwarfClass::Unclassified;
  LibraryKind library = LibraryKind::other("unspecified");
  EnvironmentKind environment = EnvironmentKind::Real;
  std::vector<std::string> command;  // program + argument list
  std::optional<std::string> working_dir;
  std::map<std::string, std::string> env_vars;
  std::uint32_t warmup_runs = 1;
  std::uint32_t samples = 20;

  friend bool operator==(const WorkloadSpec&, const WorkloadSpec&) = default;
};

/// Ordered pair of workload ids. (A,B) and (B,A) are distinct keys: the
/// reciprocal co-run generally measures different losses. first == second is
/// a valid self co-run.
struct PairKey {
  std::string first;
  std::string second;

  friend bool operator==(const PairKey&, const PairKey&) = default;
  friend auto operator<=>(const PairKey&, const PairKey&) = default;

  PairKey reversed() const { return {second, first}; }
  std::string to_string() const { return first + "|" + second; }
};

// ---------------------------------------------------------------------------
// Validated workload sets
// ---------------------------------------------------------------------------

/// An id-unique, invariant-checked set of workloads, held sorted by id so
/// every downstream enumeration is deterministic. Immutable once built.
class WorkloadSet {
 public:
  WorkloadSet() = default;

  std::size_t size() const { return specs_.size(); }
  bool empty() const { return specs_.empty(); }
  const std::vector<WorkloadSpec>& specs() const { return specs_; }

  const WorkloadSpec* find(std::string_view id) const {
    auto it = std::lower_bound(specs_.begin(), specs_.end(), id,
                               [](const WorkloadSpec& s, std::string_view v) { return s.id < v; });
    if (it == specs_.end() || it->id != id) return nullptr;
    return &*it;
  }

  bool contains(std::string_view id) const { return find(id) != nullptr; }

  const WorkloadSpec& at(std::string_view id) const {
    const WorkloadSpec* s = find(id);
    if (!s) raise(Errc::UnknownWorkload, std::string(id));
    return *s;
  }

  std::vector<std::string> ids() const {
    std::vector<std::string> out;
    out.reserve(specs_.size());
    for (const auto& s : specs_) out.push_back(s.id);
    return out;
  }

  auto begin() const { return specs_.begin(); }
  auto end() const { return specs_.end(); }

  friend bool operator==(const WorkloadSet&, const WorkloadSet&) = default;

 private:
  friend WorkloadSet validate_workload_set(std::vector<WorkloadSpec> specs);
  explicit WorkloadSet(std::vector<WorkloadSpec> specs) : specs_(std::move(specs)) {}

  std::vector<WorkloadSpec> specs_;  // sorted by id
};

/// Checks ids (non-empty, unique), commands and sample counts; the error
/// names the first offending spec in input order.
inline WorkloadSet validate_workload_set(std::vector<WorkloadSpec> specs) {
  std::vector<std::string> seen;
  for (const auto& s : specs) {
    if (s.id.empty()) raise(Errc::EmptyId, "<unnamed workload>");
    if (std::find(seen.begin(), seen.end(), s.id) != seen.end()) raise(Errc::DuplicateId, s.id);
    seen.push_back(s.id);
    if (s.command.empty() || s.command.front().empty()) raise(Errc::EmptyCommand, s.id);
    if (s.samples == 0) raise(Errc::ZeroSamples, s.id);
  }
  std::sort(specs.begin(), specs.end(),
            [](const WorkloadSpec& a, const WorkloadSpec& b) { return a.id < b.id; });
  return WorkloadSet(std::move(specs));
}

/// All ordered pairs over the set, lexicographic by (first, second):
/// n^2 keys with self pairs, n(n-1) without.
inline std::vector<PairKey> enumerate_pairs(const WorkloadSet& set, bool include_self = true) {
  std::vector<PairKey> out;
  const auto& specs = set.specs();
  out.reserve(specs.size() * specs.size());
  for (const auto& a : specs) {
    for (const auto& b : specs) {
      if (!include_self && a.id == b.id) continue;
      out.push_back({a.id, b.id});
    }
  }
  return out;
}

}  // namespace corun
