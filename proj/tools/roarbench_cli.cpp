/*
 * Copyright 2026 The roarbench Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// roarbench command-line front end. Links only the C API.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "roarbench/roarbench.h"

namespace {

int ExitCode(rb_status status) {
  switch (status) {
    case RB_OK: return 0;
    case RB_ERR_CONFIG:
    case RB_ERR_USAGE:
    case RB_ERR_PARSE:
    case RB_ERR_UNSUPPORTED_MEASURE: return 2;
    case RB_ERR_RUN_FAILURES: return 3;
    case RB_ERR_EMPTY_INPUT: return 4;
    case RB_ERR_VALIDATION_FAILED: return 5;
    default: return 1;
  }
}

int Report(rb_status status) {
  if (status != RB_OK) {
    std::fprintf(stderr, "roarbench: %s: %s\n", rb_status_name(status), rb_last_error());
  }
  return ExitCode(status);
}

std::string SeedsJson(const std::vector<std::uint64_t>& seeds) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < seeds.size(); ++i) out << (i ? "," : "") << seeds[i];
  out << ']';
  return out.str();
}

std::string Quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

void LogLine(const char* line, void*) { std::fprintf(stderr, "%s\n", line); }

struct GenArgs {
  std::string kind;
  std::uint64_t seed = 0;
  std::string out = "roarbench_out";
  // Generator parameters as JSON literals, keyed by parameter name.
  std::map<std::string, std::string> params;
};

int RunGen(const GenArgs& args) {
  static const std::map<std::string, std::vector<std::string>> kAllowed = {
      {"keyword", {"n", "classes", "distractors", "redundancy", "length"}},
      {"paired", {"n", "entities", "locations", "statements"}},
      {"leakage", {"n", "distractors", "length", "keyword_rate", "probe_rate_class0",
                   "probe_rate_class1"}},
      {"tabular", {"n"}}};
  const auto allowed = kAllowed.find(args.kind);
  if (allowed == kAllowed.end()) {
    std::fprintf(stderr, "roarbench: usage error: unknown generator '%s'\n", args.kind.c_str());
    return 2;
  }
  std::string params = "{";
  for (const auto& [name, value] : args.params) {
    if (std::find(allowed->second.begin(), allowed->second.end(), name) ==
        allowed->second.end()) {
      std::fprintf(stderr, "roarbench: usage error: --%s does not apply to '%s'\n",
                   name.c_str(), args.kind.c_str());
      return 2;
    }
    params += (params.size() > 1 ? "," : "") + Quote(name) + ":" + value;
  }
  params += "}";

  char hash[65];
  if (args.kind == "tabular") {
    const rb_status s = rb_tabular_generate(params.c_str(), args.seed, args.out.c_str(),
                                            hash, sizeof hash);
    if (s != RB_OK) return Report(s);
  } else {
    rb_dataset* ds = nullptr;
    rb_status s = rb_dataset_generate(args.kind.c_str(), params.c_str(), args.seed, &ds);
    if (s == RB_OK) s = rb_dataset_save(ds, args.out.c_str());
    if (s == RB_OK) s = rb_dataset_hash(ds, hash, sizeof hash);
    rb_dataset_free(ds);
    if (s != RB_OK) return Report(s);
  }
  std::printf("%s\n", hash);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"roarbench: ROAR and Recursive ROAR faithfulness benchmark"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(rb_version()));

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic dataset");
  gen_cmd->add_option("kind", gen.kind, "keyword | paired | leakage | tabular")->required();
  gen_cmd->add_option("--seed", gen.seed, "Generator seed")->required();
  gen_cmd->add_option("--out", gen.out, "Output directory");
  struct ParamFlag {
    const char* flag;
    const char* name;
    const char* help;
    bool real;
  };
  const ParamFlag param_flags[] = {
      {"--n", "n", "Training examples (validation and test get n/4)", false},
      {"--classes", "classes", "Classes (keyword)", false},
      {"--distractors", "distractors", "Distractor vocabulary size", false},
      {"--redundancy", "redundancy", "Evidence copies per sequence (keyword)", false},
      {"--length", "length", "Sequence length including [BOS]/[EOS]", false},
      {"--entities", "entities", "Entities (paired)", false},
      {"--locations", "locations", "Locations (paired)", false},
      {"--statements", "statements", "Statements per story (paired)", false},
      {"--keyword-rate", "keyword_rate", "Keyword planting rate (leakage)", true},
      {"--probe-rate0", "probe_rate_class0", "Probe rate in class 0 (leakage)", true},
      {"--probe-rate1", "probe_rate_class1", "Probe rate in class 1 (leakage)", true},
  };
  std::map<std::string, std::uint64_t> int_values;
  std::map<std::string, double> real_values;
  std::vector<std::pair<const ParamFlag*, CLI::Option*>> param_options;
  for (const ParamFlag& f : param_flags) {
    CLI::Option* opt = f.real ? gen_cmd->add_option(f.flag, real_values[f.name], f.help)
                              : gen_cmd->add_option(f.flag, int_values[f.name], f.help);
    param_options.emplace_back(&f, opt);
  }

  std::string config_path;
  std::optional<std::string> roar_out, roar_mode, roar_metric;
  std::optional<std::size_t> roar_jobs;
  std::vector<std::uint64_t> roar_seeds;
  bool quiet = false;
  auto* roar_cmd = app.add_subcommand("roar", "Run ROAR / Recursive ROAR from a JSON config");
  roar_cmd->add_option("config", config_path, "Pipeline configuration file")
      ->required()
      ->check(CLI::ExistingFile);
  roar_cmd->add_option("--out", roar_out, "Output directory (overrides config)");
  roar_cmd->add_option("--jobs", roar_jobs, "Parallel runs")->check(CLI::PositiveNumber);
  roar_cmd->add_option("--seeds", roar_seeds, "Seeds (overrides config)")->delimiter(',');
  roar_cmd->add_option("--mode", roar_mode, "roar | recursive-roar | both");
  roar_cmd->add_option("--metric", roar_metric, "accuracy | macro-f1 | micro-f1");
  roar_cmd->add_flag("--quiet", quiet, "Suppress per-run progress");

  std::string run_dir;
  std::optional<std::string> report_out;
  auto* report_cmd = app.add_subcommand("report", "Render plots and tables for a run directory");
  report_cmd->add_option("run_dir", run_dir, "Output directory of a roar run")->required();
  report_cmd->add_option("--out", report_out, "Report directory (default: run_dir)");

  std::vector<std::uint64_t> validate_seeds = {1, 2, 3, 4, 5};
  std::string validate_out = "roarbench_out";
  auto* validate_cmd = app.add_subcommand("validate", "Tabular Recursive ROAR validation");
  validate_cmd->add_option("--seeds", validate_seeds, "Seeds")->delimiter(',');
  validate_cmd->add_option("--out", validate_out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (*gen_cmd) {
    for (const auto& [flag, opt] : param_options) {
      if (opt->count() == 0) continue;
      gen.params[flag->name] = flag->real ? std::to_string(real_values[flag->name])
                                          : std::to_string(int_values[flag->name]);
    }
    return RunGen(gen);
  }

  if (*roar_cmd) {
    rb_pipeline* p = nullptr;
    rb_status s = rb_pipeline_from_file(config_path.c_str(), &p);
    if (s == RB_OK && roar_out) s = rb_pipeline_set(p, "out", Quote(*roar_out).c_str());
    if (s == RB_OK && roar_jobs) {
      s = rb_pipeline_set(p, "jobs", std::to_string(*roar_jobs).c_str());
    }
    if (s == RB_OK && !roar_seeds.empty()) {
      s = rb_pipeline_set(p, "seeds", SeedsJson(roar_seeds).c_str());
    }
    if (s == RB_OK && roar_mode) s = rb_pipeline_set(p, "mode", Quote(*roar_mode).c_str());
    if (s == RB_OK && roar_metric) {
      s = rb_pipeline_set(p, "metric", Quote(*roar_metric).c_str());
    }
    std::string cache;
    if (const char* env = std::getenv("ROARBENCH_CACHE"); env != nullptr) cache = env;
    if (s == RB_OK) {
      s = rb_pipeline_run(p, cache.c_str(), quiet ? nullptr : LogLine, nullptr);
    }
    const char* summary = nullptr;
    if (s == RB_OK) s = rb_pipeline_summary_json(p, &summary);
    if (s == RB_OK) std::printf("%s\n", summary);
    rb_pipeline_free(p);
    return Report(s);
  }

  if (*report_cmd) {
    const std::string out = report_out.value_or(run_dir);
    const rb_status s = rb_report(run_dir.c_str(), out.c_str());
    if (s == RB_OK) std::printf("report written to %s\n", out.c_str());
    return Report(s);
  }

  const rb_status s =
      rb_validate(validate_seeds.data(), validate_seeds.size(), validate_out.c_str());
  std::printf("validation verdict: %s (details in %s/validation.json)\n",
              s == RB_OK ? "pass" : "fail", validate_out.c_str());
  return Report(s);
}
