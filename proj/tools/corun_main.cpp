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

// corun: measure co-run interference, consolidate it into an affinity
// matrix, and plan placements with it.
//
//   corun baseline --config cfg.json        solo baselines
//   corun profile  --config cfg.json        synchronized pair co-runs
//   corun matrix   --config cfg.json        consolidate into the matrix
//   corun report   --config cfg.json        re-render a saved matrix
//   corun plan     --config cfg.json REQUESTS HOSTS [--verify]
//
// Exit codes: 0 success, 1 domain failure (runs, feasibility),
// 2 usage/config/data errors.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "corun/corun.hpp"

namespace fs = std::filesystem;

namespace {

struct CliConfig {
  std::string workload_file;
  std::string campaign_dir = "campaign";
  std::string matrix_file = "affinity-matrix.json";
  std::string plan_file = "plan.json";
  corun::ClassificationThresholds thresholds;
  int rounds = 20;
  double skew_bound_s = 0.05;
  double default_penalty = 200.0;
  corun::Objective objective = corun::Objective::min_average_loss();
  bool resume = false;
  bool include_self = true;
  std::string runner = "real";
  double verify_max_ratio = 1.0;
};

CliConfig load_config(const std::string& path) {
  CliConfig cfg;
  if (path.empty()) return cfg;
  const nlohmann::json doc =
      corun::detail::parse_json(corun::detail::read_text_file(path), path);
  try {
    cfg.workload_file = doc.value("workload_file", cfg.workload_file);
    cfg.campaign_dir = doc.value("campaign_dir", cfg.campaign_dir);
    cfg.matrix_file = doc.value("matrix_file", cfg.matrix_file);
    cfg.plan_file = doc.value("plan_file", cfg.plan_file);
    cfg.rounds = doc.value("rounds", cfg.rounds);
    cfg.skew_bound_s = doc.value("skew_bound_s", cfg.skew_bound_s);
    cfg.default_penalty = doc.value("default_penalty", cfg.default_penalty);
    cfg.resume = doc.value("resume", cfg.resume);
    cfg.include_self = doc.value("include_self", cfg.include_self);
    cfg.runner = doc.value("runner", cfg.runner);
    cfg.verify_max_ratio = doc.value("verify_max_ratio", cfg.verify_max_ratio);
    if (doc.contains("objective")) {
      cfg.objective = corun::Objective::parse(doc["objective"].get<std::string>());
    }
    if (doc.contains("thresholds")) {
      const auto& t = doc["thresholds"];
      cfg.thresholds.coexist_max_avg = t.value("coexist_max_avg", cfg.thresholds.coexist_max_avg);
      cfg.thresholds.coexist_max_distance =
          t.value("coexist_max_distance", cfg.thresholds.coexist_max_distance);
      cfg.thresholds.avoid_min_avg = t.value("avoid_min_avg", cfg.thresholds.avoid_min_avg);
    }
  } catch (const nlohmann::json::exception& e) {
    corun::raise(corun::Errc::ParseError, path, e.what());
  }
  if (cfg.rounds < 1) corun::raise(corun::Errc::ParseError, path, "rounds must be >= 1");
  return cfg;
}

// "coexist=A,dist=D,avoid=V" with any subset of the three keys.
void apply_thresholds_flag(CliConfig& cfg, const std::string& flag) {
  std::string rest = flag;
  while (!rest.empty()) {
    const std::size_t comma = rest.find(',');
    const std::string item = rest.substr(0, comma);
    rest = comma == std::string::npos ? "" : rest.substr(comma + 1);
    const std::size_t eq = item.find('=');
    if (eq == std::string::npos) {
      corun::raise(corun::Errc::ParseError, "--thresholds", "expected key=value, got '" + item + "'");
    }
    const std::string key = std::string(corun::trim(item.substr(0, eq)));
    double value = 0;
    try {
      value = std::stod(item.substr(eq + 1));
    } catch (const std::logic_error&) {
      corun::raise(corun::Errc::ParseError, "--thresholds", "bad number in '" + item + "'");
    }
    if (key == "coexist") {
      cfg.thresholds.coexist_max_avg = value;
    } else if (key == "dist") {
      cfg.thresholds.coexist_max_distance = value;
    } else if (key == "avoid") {
      cfg.thresholds.avoid_min_avg = value;
    } else {
      corun::raise(corun::Errc::ParseError, "--thresholds", "unknown key '" + key + "'");
    }
  }
  cfg.thresholds.validate();
}

int exit_code_for(const corun::Error& e) {
  switch (e.code()) {
    // domain failures: measured runs and plan feasibility
    case corun::Errc::LaunchFailure:
    case corun::Errc::NonZeroExit:
    case corun::Errc::SkewExceeded:
    case corun::Errc::InsufficientCapacity:
      return 1;
    default:
      return 2;  // usage / config / data
  }
}

std::unique_ptr<corun::ProcessRunner> make_runner(const CliConfig& cfg) {
  if (cfg.runner == "fake") return std::make_unique<corun::FakeRunner>(/*synthetic=*/true);
  if (cfg.runner == "real") return std::make_unique<corun::RealProcessRunner>();
  corun::raise(corun::Errc::ParseError, "--runner", "expected 'real' or 'fake'");
}

std::string now_iso(const CliConfig& cfg) {
  if (cfg.runner == "fake") return corun::iso8601_utc(corun::FakeRunner::kWallEpoch);
  return corun::iso8601_utc(
      std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch()).count());
}

corun::CampaignManifest manifest_for(const CliConfig& cfg, const corun::WorkloadSet& set) {
  corun::CampaignManifest m;
  m.config_hash = corun::campaign_config_hash(set, cfg.rounds, cfg.include_self, cfg.skew_bound_s);
  m.created_at = now_iso(cfg);
  m.rounds = cfg.rounds;
  m.include_self = cfg.include_self;
  m.skew_bound_s = cfg.skew_bound_s;
  m.workload_count = static_cast<int>(set.size());
  return m;
}

void print_baseline_table(const std::map<std::string, corun::BaselineProfile>& baselines) {
  std::cout << std::left << std::setw(24) << "workload" << std::right << std::setw(12) << "mean s"
            << std::setw(12) << "stddev s" << std::setw(24) << "ci95 s" << "\n";
  for (const auto& [id, p] : baselines) {
    std::ostringstream ci;
    ci << "[" << std::fixed << std::setprecision(4) << p.ci95_s.lo << ", " << p.ci95_s.hi << "]";
    std::cout << std::left << std::setw(24) << id << std::right << std::fixed
              << std::setprecision(4) << std::setw(12) << p.mean_s << std::setw(12) << p.stddev_s
              << std::setw(24) << ci.str() << "\n";
  }
}

int cmd_baseline(const CliConfig& cfg) {
  const corun::WorkloadSet set = corun::load_workload_set(cfg.workload_file);
  corun::CampaignStore store =
      corun::CampaignStore::create_or_validate(cfg.campaign_dir, manifest_for(cfg, set));
  std::set<std::string> completed;
  std::map<std::string, corun::BaselineProfile> known;
  if (cfg.resume) {
    corun::RebuiltCampaign rebuilt = corun::load_campaign_results(store, set);
    completed = rebuilt.completed_units;
    known = std::move(rebuilt.baselines);
  }
  auto runner = make_runner(cfg);
  corun::Harness harness(*runner, {cfg.skew_bound_s}, &store, store.sample_count());
  int failures = 0;
  for (const auto& spec : set) {
    const std::string unit = corun::baseline_unit_key(spec.id);
    if (cfg.resume && completed.count(unit)) {
      std::cout << "baseline " << spec.id << ": already persisted, skipping\n";
      continue;
    }
    try {
      known[spec.id] = harness.run_baseline(spec);
      std::cout << "baseline " << spec.id << ": ok (" << spec.samples << " samples)\n";
    } catch (const corun::Error& e) {
      store.on_error({unit, e.code(), e.what()});
      std::cerr << "baseline " << spec.id << ": " << e.what() << "\n";
      ++failures;
    }
  }
  print_baseline_table(known);
  return failures ? 1 : 0;
}

int cmd_profile(const CliConfig& cfg) {
  const corun::WorkloadSet set = corun::load_workload_set(cfg.workload_file);
  corun::CampaignStore store =
      corun::CampaignStore::create_or_validate(cfg.campaign_dir, manifest_for(cfg, set));
  const corun::RebuiltCampaign rebuilt = corun::load_campaign_results(store, set);
  for (const auto& spec : set) {
    if (!rebuilt.completed_units.count(corun::baseline_unit_key(spec.id))) {
      std::cerr << "no baseline for " << spec.id << " in " << cfg.campaign_dir
                << "; run `corun baseline` first\n";
      return 2;
    }
  }
  auto runner = make_runner(cfg);
  corun::Harness harness(*runner, {cfg.skew_bound_s}, &store, store.sample_count());
  const std::vector<corun::PairKey> pairs = corun::enumerate_pairs(set, cfg.include_self);
  int failures = 0;
  int done = 0;
  for (const auto& key : pairs) {
    ++done;
    const std::string unit = corun::pair_unit_key(key);
    std::cout << "pair " << done << "/" << pairs.size() << " " << key.first << " x " << key.second;
    if (cfg.resume && rebuilt.completed_units.count(unit)) {
      std::cout << ": already persisted, skipping\n";
      continue;
    }
    try {
      harness.run_pair(set.at(key.first), set.at(key.second), cfg.rounds);
      std::cout << ": ok\n";
    } catch (const corun::Error& e) {
      store.on_error({unit, e.code(), e.what()});
      std::cout << ": FAILED (" << e.what() << ")\n";
      ++failures;
    }
  }
  return failures ? 1 : 0;
}

fs::path csv_sibling(const std::string& file) {
  fs::path p(file);
  p.replace_extension(".csv");
  return p;
}

int cmd_matrix(const CliConfig& cfg) {
  const corun::WorkloadSet set = corun::load_workload_set(cfg.workload_file);
  corun::CampaignStore store = corun::CampaignStore::open(cfg.campaign_dir);
  const std::string expected_hash =
      corun::campaign_config_hash(set, cfg.rounds, cfg.include_self, cfg.skew_bound_s);
  if (store.manifest().config_hash != expected_hash) {
    corun::raise(corun::Errc::ManifestMismatch, cfg.campaign_dir,
                 "campaign config hash " + store.manifest().config_hash +
                     " does not match current config " + expected_hash);
  }
  const corun::RebuiltCampaign rebuilt = corun::load_campaign_results(store, set);
  if (rebuilt.observations.empty()) {
    std::cerr << "no completed pair observations in " << cfg.campaign_dir << "\n";
    return 2;
  }
  corun::BuildOptions opts;
  opts.thresholds = cfg.thresholds;
  opts.provenance = store.manifest().config_hash;
  opts.created_at = store.manifest().created_at;
  const corun::AffinityMatrix matrix =
      corun::build_matrix(set, rebuilt.baselines, rebuilt.observations, opts);
  corun::save_matrix(matrix, cfg.matrix_file);
  const corun::RenderedMatrix rendered = corun::render_matrix_table(matrix);
  corun::detail::write_text_file(csv_sibling(cfg.matrix_file).string(),
                                 corun::cells_to_csv(rendered.cells));
  std::cout << rendered.grid;
  const std::vector<corun::PairKey> expected = corun::enumerate_pairs(set, cfg.include_self);
  if (matrix.entries().size() < expected.size()) {
    std::cout << "warning: " << expected.size() - matrix.entries().size() << " of "
              << expected.size() << " pairs have no completed observation:";
    for (const auto& key : expected) {
      if (!matrix.lookup(key)) std::cout << " " << key.first << "x" << key.second;
    }
    std::cout << "\n";
  }
  std::cout << "matrix: " << cfg.matrix_file << " (" << matrix.entries().size() << " entries), "
            << "cells: " << csv_sibling(cfg.matrix_file).string() << "\n";
  return 0;
}

int cmd_report(const CliConfig& cfg) {
  const corun::AffinityMatrix matrix = corun::load_matrix(cfg.matrix_file);
  const corun::RenderedMatrix rendered = corun::render_matrix_table(matrix);
  std::cout << rendered.grid;
  corun::detail::write_text_file(csv_sibling(cfg.matrix_file).string(),
                                 corun::cells_to_csv(rendered.cells));

  // Per-workload impact summary on the 0..9 scale: "suffered" averages the
  // workload's own losses across its entries, "caused" the partners' losses.
  std::map<std::string, std::pair<double, int>> suffered, caused;
  for (const auto& [key, e] : matrix.entries()) {
    suffered[key.first].first += e.loss_first.value;
    suffered[key.first].second += 1;
    suffered[key.second].first += e.loss_second.value;
    suffered[key.second].second += 1;
    caused[key.first].first += e.loss_second.value;
    caused[key.first].second += 1;
    caused[key.second].first += e.loss_first.value;
    caused[key.second].second += 1;
  }
  std::vector<std::string> ids;
  std::vector<double> suffered_means, caused_means;
  for (const auto& [id, acc] : suffered) {
    ids.push_back(id);
    suffered_means.push_back(acc.first / acc.second);
    caused_means.push_back(caused[id].first / caused[id].second);
  }
  if (!ids.empty()) {
    const auto s9 = corun::normalize_scores(suffered_means, 9.0);
    const auto c9 = corun::normalize_scores(caused_means, 9.0);
    std::cout << "\nimpact scores (0 least, 9 most across this matrix)\n";
    std::cout << std::left << std::setw(24) << "workload" << std::right << std::setw(16)
              << "suffered 0-9" << std::setw(16) << "caused 0-9" << "\n";
    for (std::size_t i = 0; i < ids.size(); ++i) {
      std::cout << std::left << std::setw(24) << ids[i] << std::right << std::fixed
                << std::setprecision(2) << std::setw(16) << s9[i] << std::setw(16) << c9[i]
                << "\n";
    }
  }
  int avoid = 0, coexist = 0, conditional = 0;
  for (const auto& [key, e] : matrix.entries()) {
    switch (e.classification) {
      case corun::AffinityClass::Coexist: ++coexist; break;
      case corun::AffinityClass::Conditional: ++conditional; break;
      case corun::AffinityClass::Avoid: ++avoid; break;
    }
  }
  std::cout << "\nclassification: " << coexist << " coexist, " << conditional << " conditional, "
            << avoid << " avoid\n";
  return 0;
}

std::vector<corun::PlacementRequest> load_requests(const std::string& path) {
  const nlohmann::json doc =
      corun::detail::parse_json(corun::detail::read_text_file(path), path);
  if (!doc.contains("version") || doc["version"] != 1) {
    corun::raise(corun::Errc::FormatVersionMismatch, path, "expected version 1");
  }
  std::vector<corun::PlacementRequest> out;
  try {
    for (const auto& r : doc.at("requests")) {
      out.push_back({r.at("request_id").get<std::string>(), r.at("workload_id").get<std::string>()});
    }
  } catch (const nlohmann::json::exception& e) {
    corun::raise(corun::Errc::ParseError, path, e.what());
  }
  return out;
}

std::vector<corun::Host> load_hosts(const std::string& path) {
  const nlohmann::json doc =
      corun::detail::parse_json(corun::detail::read_text_file(path), path);
  if (!doc.contains("version") || doc["version"] != 1) {
    corun::raise(corun::Errc::FormatVersionMismatch, path, "expected version 1");
  }
  std::vector<corun::Host> out;
  try {
    for (const auto& h : doc.at("hosts")) {
      out.push_back({h.at("id").get<std::string>(), h.at("capacity").get<int>()});
    }
  } catch (const nlohmann::json::exception& e) {
    corun::raise(corun::Errc::ParseError, path, e.what());
  }
  return out;
}

int cmd_plan(const CliConfig& cfg, const std::string& requests_file, const std::string& hosts_file,
             bool verify) {
  const corun::AffinityMatrix matrix = corun::load_matrix(cfg.matrix_file);
  const std::vector<corun::PlacementRequest> requests = load_requests(requests_file);
  const std::vector<corun::Host> hosts = load_hosts(hosts_file);

  const corun::PlacementPlan plan =
      corun::plan_greedy(requests, hosts, matrix, cfg.objective, cfg.default_penalty);
  corun::detail::write_text_file(cfg.plan_file, corun::plan_to_json(plan).dump(2) + "\n");
  corun::detail::write_text_file(csv_sibling(cfg.plan_file).string(),
                                 corun::plan_assignment_csv(plan));
  std::cout << corun::explain_plan(plan, matrix);
  std::cout << "plan: " << cfg.plan_file << ", assignment: "
            << csv_sibling(cfg.plan_file).string() << "\n";

  if (verify) {
    corun::ExhaustiveLimits limits;
    double combos = 1.0;
    for (std::size_t i = 0; i < requests.size(); ++i) {
      combos *= static_cast<double>(hosts.size());
    }
    if (combos > static_cast<double>(limits.max_assignments)) {
      std::cout << "verify: instance too large for the exhaustive oracle, skipped\n";
      return 0;
    }
    const corun::PlacementPlan oracle =
        corun::plan_exhaustive(requests, hosts, matrix, cfg.objective, cfg.default_penalty);
    const corun::CostValue greedy_cost =
        corun::objective_cost(cfg.objective, plan.total_average_loss, plan.total_instability);
    const corun::CostValue oracle_cost = corun::objective_cost(
        cfg.objective, oracle.total_average_loss, oracle.total_instability);
    std::cout << "verify: greedy cost " << corun::format_double(greedy_cost.primary)
              << ", exhaustive cost " << corun::format_double(oracle_cost.primary) << "\n";
    if (greedy_cost.primary > oracle_cost.primary * cfg.verify_max_ratio + 1e-9) {
      std::cerr << "verify: greedy exceeded the exhaustive optimum beyond ratio "
                << cfg.verify_max_ratio << "\n";
      return 1;
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"co-run affinity toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string thresholds_flag;
  std::string objective_flag;
  std::string runner_flag;
  int rounds_flag = -1;
  bool resume_flag = false;
  bool include_self_flag = false;
  bool verify_flag = false;
  std::string requests_file, hosts_file;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "configuration file (JSON)");
    cmd->add_option("--runner", runner_flag, "process runner: real|fake");
    cmd->add_option("--rounds", rounds_flag, "co-run rounds per pair");
    cmd->add_option("--thresholds", thresholds_flag, "coexist=A,dist=D,avoid=V");
    cmd->add_option("--objective", objective_flag, "avg|stability|lex|weighted:<alpha>");
    cmd->add_flag("--resume", resume_flag, "skip already-persisted results");
    cmd->add_flag("--include-self", include_self_flag, "include self co-run pairs");
    return cmd;
  };

  CLI::App* baseline = add_common(app.add_subcommand("baseline", "run solo baselines"));
  CLI::App* profile = add_common(app.add_subcommand("profile", "run pair co-runs"));
  CLI::App* matrix = add_common(app.add_subcommand("matrix", "build and save the affinity matrix"));
  CLI::App* report = add_common(app.add_subcommand("report", "render a saved matrix"));
  CLI::App* plan = add_common(app.add_subcommand("plan", "place requests onto hosts"));
  plan->add_option("requests", requests_file, "placement requests (JSON)")->required();
  plan->add_option("hosts", hosts_file, "hosts (JSON)")->required();
  plan->add_flag("--verify", verify_flag, "cross-check greedy against the exhaustive oracle");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    CliConfig cfg = load_config(config_path);
    if (!runner_flag.empty()) cfg.runner = runner_flag;
    if (rounds_flag > 0) cfg.rounds = rounds_flag;
    if (!thresholds_flag.empty()) apply_thresholds_flag(cfg, thresholds_flag);
    if (!objective_flag.empty()) cfg.objective = corun::Objective::parse(objective_flag);
    if (resume_flag) cfg.resume = true;
    if (include_self_flag) cfg.include_self = true;
    if (const char* dir = std::getenv("CORUN_AFFINITY_DIR"); dir && *dir) {
      cfg.campaign_dir = dir;
    }
    cfg.thresholds.validate();

    if (baseline->parsed()) return cmd_baseline(cfg);
    if (profile->parsed()) return cmd_profile(cfg);
    if (matrix->parsed()) return cmd_matrix(cfg);
    if (report->parsed()) return cmd_report(cfg);
    if (plan->parsed()) return cmd_plan(cfg, requests_file, hosts_file, verify_flag);
    return 2;
  } catch (const corun::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
