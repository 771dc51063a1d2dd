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

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "corun/error.hpp"
#include "corun/model.hpp"

// Workload set file, format version 1:
//
//   {
//     "version": 1,
//     "workloads": [
//       {
//         "id": "lud-ocl-r",
//         "dwarf": "dense_linear_algebra",          // optional, default unclassified
//         "library": "heterogeneous",
//         "environment": "real",
//         "command": ["./lud", "-s", "4096"],
//         "working_dir": "/opt/bench",              // optional
//         "env_vars": {"OMP_NUM_THREADS": "12"},    // optional
//         "warmup_runs": 1,                         // optional, default 1
//         "samples": 20                             // optional, default 20
//       }
//     ]
//   }

namespace corun {

inline constexpr int kWorkloadFileVersion = 1;

namespace detail {

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::IoError, path, "cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(Errc::IoError, path, "cannot open for writing");
  out << content;
  if (!out) raise(Errc::IoError, path, "write failed");
}

inline nlohmann::json parse_json(const std::string& text, const std::string& context) {
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) raise(Errc::ParseError, context, "invalid JSON");
  return j;
}

}  // namespace detail

inline nlohmann::json workload_spec_to_json(const WorkloadSpec& s) {
  nlohmann::json j;
  j["id"] = s.id;
  j["dwarf"] = to_label(s.dwarf);
  j["library"] = s.library.label();
  j["environment"] = to_label(s.environment);
  j["command"] = s.command;
  if (s.working_dir) j["working_dir"] = *s.working_dir;
  if (!s.env_vars.empty()) j["env_vars"] = s.env_vars;
  j["warmup_runs"] = s.warmup_runs;
  j["samples"] = s.samples;
  return j;
}

inline WorkloadSpec workload_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) raise(Errc::ParseError, "workload", "entry must be an object");
  WorkloadSpec s;
  try {
    s.id = j.at("id").get<std::string>();
    s.library = LibraryKind::parse(j.at("library").get<std::string>());
    s.environment = parse_environment(j.at("environment").get<std::string>());
    s.command = j.at("command").get<std::vector<std::string>>();
    if (j.contains("dwarf")) s.dwarf = parse_dwarf(j.at("dwarf").get<std::string>());
    if (j.contains("working_dir")) s.working_dir = j.at("working_dir").get<std::string>();
    if (j.contains("env_vars")) {
      s.env_vars = j.at("env_vars").get<std::map<std::string, std::string>>();
    }
    if (j.contains("warmup_runs")) s.warmup_runs = j.at("warmup_runs").get<std::uint32_t>();
    if (j.contains("samples")) s.samples = j.at("samples").get<std::uint32_t>();
  } catch (const nlohmann::json::exception& e) {
    raise(Errc::ParseError, "workload " + (s.id.empty() ? std::string("<unnamed>") : s.id),
          e.what());
  }
  return s;
}

inline WorkloadSet parse_workload_set(const nlohmann::json& doc, const std::string& context) {
  if (!doc.is_object()) raise(Errc::ParseError, context, "top level must be an object");
  if (!doc.contains("version")) {
    raise(Errc::FormatVersionMismatch, context, "missing required \"version\" field");
  }
  if (!doc["version"].is_number_integer() || doc["version"].get<int>() != kWorkloadFileVersion) {
    raise(Errc::FormatVersionMismatch, context,
          "expected version " + std::to_string(kWorkloadFileVersion));
  }
  if (!doc.contains("workloads") || !doc["workloads"].is_array()) {
    raise(Errc::ParseError, context, "missing \"workloads\" array");
  }
  std::vector<WorkloadSpec> specs;
  for (const auto& e : doc["workloads"]) specs.push_back(workload_spec_from_json(e));
  return validate_workload_set(std::move(specs));
}

inline WorkloadSet load_workload_set(const std::string& path) {
  return parse_workload_set(detail::parse_json(detail::read_text_file(path), path), path);
}

inline void save_workload_set(const WorkloadSet& set, const std::string& path) {
  nlohmann::json doc;
  doc["version"] = kWorkloadFileVersion;
  auto& arr = doc["workloads"] = nlohmann::json::array();
  for (const auto& s : set) arr.push_back(workload_spec_to_json(s));
  detail::write_text_file(path, doc.dump(2) + "\n");
}

}  // namespace corun
