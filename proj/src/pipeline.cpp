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

#include "roarbench/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "roarbench/errors.hpp"
#include "roarbench/svg.hpp"

namespace roarbench::pipeline {

namespace fs = std::filesystem;
using importance::Measure;

namespace {

// Parsed documents hold unsigned numbers; programmatic ones may be signed.
bool IsCount(const Json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

constexpr int kCurveFormatVersion = 1;
constexpr std::string_view kCiMethod =
    "two-sided Student-t 95% interval over seeds";

std::string ReadText(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void WriteText(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

// Strict field access: every key of `doc` must be listed in `allowed`.
class Fields {
 public:
  Fields(const Json& doc, std::string context,
         std::initializer_list<std::string_view> allowed)
      : doc_(doc), context_(std::move(context)) {
    if (!doc.is_object()) throw ConfigError(context_ + " must be an object");
    for (const auto& [key, _] : doc.items()) {
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
        throw ConfigError("unknown field '" + key + "' in " + context_);
      }
    }
  }

  bool Has(std::string_view key) const { return doc_.contains(key); }

  template <typename T>
  T Get(std::string_view key, T fallback) const {
    if (!doc_.contains(key)) return fallback;
    return As<T>(key);
  }

  template <typename T>
  T Require(std::string_view key) const {
    if (!doc_.contains(key)) {
      throw ConfigError("missing field '" + std::string(key) + "' in " + context_);
    }
    return As<T>(key);
  }

  const Json& Raw(std::string_view key) const { return doc_.at(std::string(key)); }

 private:
  template <typename T>
  T As(std::string_view key) const {
    const Json& v = doc_.at(std::string(key));
    const std::string where = "'" + std::string(key) + "' in " + context_;
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(where + " must be a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!IsCount(v)) {
        throw ConfigError(where + " must be a non-negative integer");
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(where + " must be a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(where + " must be a string");
    }
    try {
      return v.get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(where + " has the wrong type");
    }
  }

  const Json& doc_;
  std::string context_;
};

data::SplitSizes ParseSizes(const Fields& f, const std::string& context) {
  if (f.Has("n") && f.Has("sizes")) {
    throw ConfigError(context + ": 'n' and 'sizes' conflict");
  }
  data::SplitSizes sizes;
  if (f.Has("n")) {
    const std::size_t n = f.Require<std::size_t>("n");
    if (n < 1) throw ConfigError(context + ": n must be >= 1");
    sizes = {n, std::max<std::size_t>(1, n / 4), std::max<std::size_t>(1, n / 4)};
  } else if (f.Has("sizes")) {
    Fields s(f.Raw("sizes"), context + ".sizes", {"train", "validation", "test"});
    sizes.train = s.Require<std::size_t>("train");
    sizes.validation = s.Require<std::size_t>("validation");
    sizes.test = s.Require<std::size_t>("test");
  }
  return sizes;
}

double Mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

Json NumberOrNull(double v) {
  return std::isfinite(v) ? Json(v) : Json(nullptr);
}

Json VectorOrNull(const std::vector<double>& v) {
  Json out = Json::array();
  for (double x : v) out.push_back(NumberOrNull(x));
  return out;
}

std::vector<double> FromJsonVector(const Json& v) {
  std::vector<double> out;
  for (const auto& x : v) {
    out.push_back(x.is_null() ? std::numeric_limits<double>::quiet_NaN()
                              : x.get<double>());
  }
  return out;
}

struct Band {
  std::vector<double> mean, low, high;
};

// Pointwise mean and Student-t band over the finite per-seed values.
Band PointwiseBand(const std::vector<std::vector<double>>& per_seed,
                   std::size_t points) {
  Band band;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < points; ++i) {
    std::vector<double> values;
    for (const auto& curve : per_seed) {
      if (std::isfinite(curve[i])) values.push_back(curve[i]);
    }
    if (values.empty()) {
      band.mean.push_back(nan);
      band.low.push_back(nan);
      band.high.push_back(nan);
    } else if (values.size() == 1) {
      band.mean.push_back(values[0]);
      band.low.push_back(values[0]);
      band.high.push_back(values[0]);
    } else {
      const metrics::ConfidenceInterval ci = metrics::StudentTInterval(values);
      band.mean.push_back(ci.mean);
      band.low.push_back(ci.low);
      band.high.push_back(ci.high);
    }
  }
  return band;
}

}  // namespace

bool IsTokenGenerator(std::string_view kind) {
  return kind == "keyword" || kind == "paired" || kind == "leakage";
}

data::TokenDataset GenerateTokens(std::string_view kind, const Json& params,
                                  std::uint64_t seed) {
  const std::string context = "dataset params (" + std::string(kind) + ")";
  if (kind == "keyword") {
    Fields f(params, context,
             {"n", "sizes", "classes", "distractors", "redundancy", "length"});
    data::KeywordParams p;
    p.sizes = ParseSizes(f, context);
    p.classes = f.Get<std::size_t>("classes", p.classes);
    p.distractors = f.Get<std::size_t>("distractors", p.distractors);
    p.redundancy = f.Get<std::size_t>("redundancy", p.redundancy);
    p.length = f.Get<std::size_t>("length", p.length);
    p.seed = seed;
    return data::GenerateKeyword(p);
  }
  if (kind == "paired") {
    Fields f(params, context, {"n", "sizes", "entities", "locations", "statements"});
    data::PairedParams p;
    p.sizes = ParseSizes(f, context);
    p.entities = f.Get<std::size_t>("entities", p.entities);
    p.locations = f.Get<std::size_t>("locations", p.locations);
    p.statements = f.Get<std::size_t>("statements", p.statements);
    p.seed = seed;
    return data::GeneratePaired(p);
  }
  if (kind == "leakage") {
    Fields f(params, context,
             {"n", "sizes", "distractors", "length", "keyword_rate",
              "probe_rate_class0", "probe_rate_class1"});
    data::LeakageParams p;
    p.sizes = ParseSizes(f, context);
    p.distractors = f.Get<std::size_t>("distractors", p.distractors);
    p.length = f.Get<std::size_t>("length", p.length);
    p.keyword_rate = f.Get<double>("keyword_rate", p.keyword_rate);
    p.probe_rate_class0 = f.Get<double>("probe_rate_class0", p.probe_rate_class0);
    p.probe_rate_class1 = f.Get<double>("probe_rate_class1", p.probe_rate_class1);
    p.seed = seed;
    return data::GenerateLeakageProbe(p);
  }
  throw ConfigError("unknown generator '" + std::string(kind) + "'");
}

data::TabularDataset GenerateTabularData(const Json& params,
                                         std::uint64_t seed) {
  Fields f(params, "dataset params (tabular)", {"n", "sizes"});
  return data::GenerateTabular(ParseSizes(f, "tabular"), seed);
}

PipelineConfig ParseConfig(const Json& doc) {
  Fields top(doc, "config",
             {"dataset", "model", "measures", "mode", "schedule", "seeds",
              "metric", "absolute_scores", "ig_steps", "out", "jobs",
              "dump_importance"});
  PipelineConfig c;

  if (!top.Has("dataset")) throw ConfigError("missing field 'dataset'");
  Fields ds(top.Raw("dataset"), "dataset",
            {"name", "generator", "params", "seed", "path"});
  c.dataset.generator = ds.Get<std::string>("generator", "");
  c.dataset.path = ds.Get<std::string>("path", "");
  if (c.dataset.generator.empty() == c.dataset.path.empty()) {
    throw ConfigError("dataset needs exactly one of 'generator' or 'path'");
  }
  if (!c.dataset.generator.empty()) {
    if (!IsTokenGenerator(c.dataset.generator)) {
      throw ConfigError("unknown token generator '" + c.dataset.generator + "'");
    }
    c.dataset.params = ds.Has("params") ? ds.Raw("params") : Json::object();
    c.dataset.seed = ds.Get<std::uint64_t>("seed", 0);
  } else if (ds.Has("params") || ds.Has("seed")) {
    throw ConfigError("'params' and 'seed' apply only to generated datasets");
  }
  c.dataset.name = ds.Get<std::string>(
      "name", c.dataset.generator.empty()
                  ? fs::path(c.dataset.path).filename().string()
                  : c.dataset.generator);
  if (c.dataset.name.empty()) throw ConfigError("dataset name is empty");

  if (top.Has("model")) {
    Fields m(top.Raw("model"), "model",
             {"architecture", "embedding_size", "hidden_size", "max_epochs",
              "batch_size", "learning_rate", "beta1", "beta2", "epsilon",
              "weight_decay", "amsgrad"});
    if (m.Has("architecture")) {
      c.architecture = models::ParseArchitecture(m.Require<std::string>("architecture"));
    }
    c.embedding_size = m.Get<std::size_t>("embedding_size", c.embedding_size);
    c.hidden_size = m.Get<std::size_t>("hidden_size", c.hidden_size);
    c.max_epochs = m.Get<std::size_t>("max_epochs", c.max_epochs);
    c.batch_size = m.Get<std::size_t>("batch_size", c.batch_size);
    c.optimizer.learning_rate = m.Get<double>("learning_rate", c.optimizer.learning_rate);
    c.optimizer.beta1 = m.Get<double>("beta1", c.optimizer.beta1);
    c.optimizer.beta2 = m.Get<double>("beta2", c.optimizer.beta2);
    c.optimizer.epsilon = m.Get<double>("epsilon", c.optimizer.epsilon);
    c.optimizer.weight_decay = m.Get<double>("weight_decay", c.optimizer.weight_decay);
    c.optimizer.amsgrad = m.Get<bool>("amsgrad", c.optimizer.amsgrad);
  }

  if (!top.Has("measures")) throw ConfigError("missing field 'measures'");
  const Json& measures = top.Raw("measures");
  if (!measures.is_array() || measures.empty()) {
    throw ConfigError("'measures' must be a non-empty array");
  }
  for (const auto& m : measures) {
    if (!m.is_string()) throw ConfigError("measure names must be strings");
    c.measures.push_back(importance::ParseMeasure(m.get<std::string>()));
  }

  if (top.Has("mode")) {
    const std::string mode = top.Require<std::string>("mode");
    if (mode == "both") {
      c.modes = {harness::RoarMode::kClassic, harness::RoarMode::kRecursive};
    } else {
      c.modes = {harness::ParseMode(mode)};
    }
  }
  if (top.Has("schedule")) {
    Fields s(top.Raw("schedule"), "schedule",
             {"mode", "relative_step", "tokens_per_step", "max_iterations"});
    if (s.Has("mode")) c.schedule.mode = masking::ParseStepMode(s.Require<std::string>("mode"));
    c.schedule.relative_step = s.Get<double>("relative_step", c.schedule.relative_step);
    c.schedule.tokens_per_step = s.Get<std::size_t>("tokens_per_step", c.schedule.tokens_per_step);
    c.schedule.max_iterations = s.Get<std::size_t>("max_iterations", c.schedule.max_iterations);
  }
  masking::ValidateSchedule(c.schedule);
  if (top.Has("seeds")) {
    const Json& seeds = top.Raw("seeds");
    if (!seeds.is_array() || seeds.empty()) {
      throw ConfigError("'seeds' must be a non-empty array");
    }
    c.seeds.clear();
    for (const auto& s : seeds) {
      if (!IsCount(s)) throw ConfigError("seeds must be non-negative integers");
      c.seeds.push_back(s.get<std::uint64_t>());
    }
    if (std::set(c.seeds.begin(), c.seeds.end()).size() != c.seeds.size()) {
      throw ConfigError("seeds must be distinct");
    }
  }
  if (top.Has("metric")) c.metric = metrics::ParseMetric(top.Require<std::string>("metric"));
  c.absolute_scores = top.Get<bool>("absolute_scores", c.absolute_scores);
  c.ig_steps = top.Get<std::size_t>("ig_steps", c.ig_steps);
  if (c.ig_steps < 1) throw ConfigError("ig_steps must be >= 1");
  c.out = top.Get<std::string>("out", c.out);
  if (c.out.empty()) throw ConfigError("'out' must not be empty");
  c.jobs = top.Get<std::size_t>("jobs", c.jobs);
  if (c.jobs < 1) throw ConfigError("jobs must be >= 1");
  c.dump_importance = top.Get<bool>("dump_importance", c.dump_importance);
  return c;
}

PipelineConfig LoadConfig(const fs::path& path) {
  Json doc;
  try {
    doc = Json::parse(ReadText(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return ParseConfig(doc);
}

Json ConfigToJson(const PipelineConfig& c) {
  Json doc;
  Json ds;
  ds["name"] = c.dataset.name;
  if (c.dataset.path.empty()) {
    ds["generator"] = c.dataset.generator;
    ds["params"] = c.dataset.params;
    ds["seed"] = c.dataset.seed;
  } else {
    ds["path"] = c.dataset.path;
  }
  doc["dataset"] = ds;
  doc["model"] = {{"architecture", models::ArchitectureName(c.architecture)},
                  {"embedding_size", c.embedding_size},
                  {"hidden_size", c.hidden_size},
                  {"max_epochs", c.max_epochs},
                  {"batch_size", c.batch_size},
                  {"learning_rate", c.optimizer.learning_rate},
                  {"beta1", c.optimizer.beta1},
                  {"beta2", c.optimizer.beta2},
                  {"epsilon", c.optimizer.epsilon},
                  {"weight_decay", c.optimizer.weight_decay},
                  {"amsgrad", c.optimizer.amsgrad}};
  Json measures = Json::array();
  for (Measure m : c.measures) measures.push_back(importance::MeasureName(m));
  doc["measures"] = measures;
  doc["mode"] = c.modes.size() == 2 ? std::string("both")
                                    : std::string(harness::ModeName(c.modes.front()));
  doc["schedule"] = {{"mode", masking::StepModeName(c.schedule.mode)},
                     {"relative_step", c.schedule.relative_step},
                     {"tokens_per_step", c.schedule.tokens_per_step},
                     {"max_iterations", c.schedule.max_iterations}};
  doc["seeds"] = c.seeds;
  doc["metric"] = metrics::MetricName(c.metric);
  doc["absolute_scores"] = c.absolute_scores;
  doc["ig_steps"] = c.ig_steps;
  doc["out"] = c.out;
  doc["jobs"] = c.jobs;
  doc["dump_importance"] = c.dump_importance;
  return doc;
}

void ApplyOverride(PipelineConfig& config, std::string_view field,
                   const Json& value) {
  static constexpr std::string_view kOverridable[] = {"out", "jobs", "seeds",
                                                      "mode", "metric", "measures"};
  if (std::find(std::begin(kOverridable), std::end(kOverridable), field) ==
      std::end(kOverridable)) {
    throw UsageError("field '" + std::string(field) + "' cannot be overridden");
  }
  Json doc = ConfigToJson(config);
  doc[std::string(field)] = value;
  config = ParseConfig(doc);
}

LoadedDataset LoadPipelineDataset(const DatasetSpec& spec) {
  LoadedDataset out;
  out.name = spec.name;
  if (!spec.path.empty()) {
    out.dataset = std::make_shared<data::TokenDataset>(data::LoadDataset(spec.path));
  } else {
    out.dataset = std::make_shared<data::TokenDataset>(
        GenerateTokens(spec.generator, spec.params, spec.seed));
  }
  return out;
}

harness::ExperimentPlan MakePlan(const PipelineConfig& config,
                                 const LoadedDataset& dataset,
                                 harness::RoarMode mode) {
  harness::ExperimentPlan plan;
  plan.dataset_name = dataset.name;
  plan.dataset = dataset.dataset;
  plan.model.architecture = config.architecture;
  plan.model.vocab_size = dataset.dataset->vocabulary.size();
  plan.model.num_classes = dataset.dataset->num_classes;
  plan.model.embedding_size = config.embedding_size;
  plan.model.hidden_size = config.hidden_size;
  plan.model.max_epochs = config.max_epochs;
  plan.model.batch_size = config.batch_size;
  plan.model.optimizer = config.optimizer;
  plan.measures = config.measures;
  plan.schedule = config.schedule;
  plan.seeds = config.seeds;
  plan.mode = mode;
  plan.metric = config.metric;
  plan.absolute_scores = config.absolute_scores;
  plan.ig_steps = config.ig_steps;
  return plan;
}

Json CurvesJson(const harness::PlanResult& result, const PipelineConfig& config,
                const std::string& label) {
  const std::size_t points = result.ratios.size();
  Json doc;
  doc["format_version"] = kCurveFormatVersion;
  doc["label"] = label;
  doc["dataset"] = result.dataset_name;
  doc["model"] = models::ArchitectureName(config.architecture);
  doc["mode"] = harness::ModeName(result.mode);
  doc["metric"] = metrics::MetricName(config.metric);
  doc["plan_hash"] = result.plan_hash;
  doc["ci_method"] = kCiMethod;
  doc["baseline"] = "random";
  doc["ratios"] = result.ratios;
  doc["seeds"] = result.seeds;
  Json requested = Json::array();
  for (Measure m : config.measures) requested.push_back(importance::MeasureName(m));
  doc["requested_measures"] = requested;

  std::vector<double> lower;
  for (std::uint64_t seed : result.seeds) {
    lower.push_back(result.Curve("random", seed, config.metric).back());
  }
  std::vector<double> finite_lower;
  for (double v : lower) if (std::isfinite(v)) finite_lower.push_back(v);
  doc["lower_bound"] = {{"per_seed", VectorOrNull(lower)},
                        {"mean", finite_lower.empty()
                                     ? Json(nullptr)
                                     : Json(Mean(finite_lower))}};

  Json measures = Json::array();
  for (const std::string& name : result.measures) {
    std::vector<std::vector<double>> per_seed;
    std::vector<double> faith;
    Json faith_per_seed = Json::array();
    Json sparsity_per_seed = Json::array();
    for (std::uint64_t seed : result.seeds) {
      per_seed.push_back(result.Curve(name, seed, config.metric));
      const std::vector<double> baseline = result.Curve("random", seed, config.metric);
      const auto& p = per_seed.back();
      double score = std::numeric_limits<double>::quiet_NaN();
      const bool complete =
          std::all_of(p.begin(), p.end(), [](double v) { return std::isfinite(v); }) &&
          std::all_of(baseline.begin(), baseline.end(),
                      [](double v) { return std::isfinite(v); });
      if (complete) {
        try {
          score = metrics::AreaFaithfulness(result.ratios, p, baseline);
        } catch (const UndefinedScore&) {
        }
      }
      faith_per_seed.push_back(NumberOrNull(score));
      if (std::isfinite(score)) faith.push_back(score);
      for (const harness::RunRecord& r : result.records) {
        if (r.measure == name && r.seed == seed && r.iteration == 1 &&
            !r.sparsity_top_k.empty()) {
          sparsity_per_seed.push_back(r.sparsity_top_k);
        }
      }
    }
    const Band band = PointwiseBand(per_seed, points);
    Json entry;
    entry["measure"] = name;
    Json seeds_json = Json::array();
    for (const auto& c : per_seed) seeds_json.push_back(VectorOrNull(c));
    entry["per_seed"] = seeds_json;
    entry["mean"] = VectorOrNull(band.mean);
    entry["ci_low"] = VectorOrNull(band.low);
    entry["ci_high"] = VectorOrNull(band.high);

    Json f;
    f["per_seed"] = faith_per_seed;
    f["seeds_used"] = faith.size();
    if (faith.empty()) {
      f["mean"] = nullptr;
      f["ci_low"] = nullptr;
      f["ci_high"] = nullptr;
      f["has_interval"] = false;
      f["below_baseline"] = false;
    } else {
      const metrics::FaithfulnessScore s = metrics::AggregateScores(faith);
      f["mean"] = s.mean;
      f["ci_low"] = s.ci_low;
      f["ci_high"] = s.ci_high;
      f["has_interval"] = s.has_interval;
      // The curve lies below the random baseline when the interval excludes 0
      // (or, for a single seed, when the score is positive).
      f["below_baseline"] = s.has_interval ? s.ci_low > 0.0 : s.mean > 0.0;
    }
    entry["faithfulness"] = f;

    if (!sparsity_per_seed.empty()) {
      std::vector<double> mean_top_k(sparsity_per_seed.front().size(), 0.0);
      for (const auto& s : sparsity_per_seed) {
        for (std::size_t k = 0; k < mean_top_k.size(); ++k) {
          mean_top_k[k] += s[k].get<double>() / static_cast<double>(sparsity_per_seed.size());
        }
      }
      entry["sparsity_top_k_mean"] = mean_top_k;
    } else {
      entry["sparsity_top_k_mean"] = nullptr;
    }
    measures.push_back(entry);
  }
  doc["measures"] = measures;

  std::size_t failed = 0;
  for (const auto& r : result.records) failed += r.failed ? 1 : 0;
  doc["failed_runs"] = failed;
  doc["total_runs"] = result.records.size();
  return doc;
}

std::vector<FaithfulnessRow> FaithfulnessRows(const Json& curves) {
  std::vector<FaithfulnessRow> rows;
  std::set<std::string> requested;
  for (const auto& m : curves.at("requested_measures")) requested.insert(m.get<std::string>());
  for (const auto& entry : curves.at("measures")) {
    const std::string name = entry.at("measure").get<std::string>();
    if (!requested.contains(name)) continue;
    const Json& f = entry.at("faithfulness");
    FaithfulnessRow row;
    row.dataset = curves.at("label").get<std::string>();
    row.measure = name;
    if (f.at("mean").is_null()) {
      row.score.mean = row.score.ci_low = row.score.ci_high =
          std::numeric_limits<double>::quiet_NaN();
    } else {
      row.score.mean = f.at("mean").get<double>();
      row.score.ci_low = f.at("ci_low").get<double>();
      row.score.ci_high = f.at("ci_high").get<double>();
      row.score.has_interval = f.at("has_interval").get<bool>();
    }
    row.score.per_seed = FromJsonVector(f.at("per_seed"));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string FaithfulnessCsv(const std::vector<FaithfulnessRow>& rows) {
  std::ostringstream out;
  out.precision(17);
  out << "dataset,measure,mean,ci_low,ci_high\n";
  auto cell = [&](double v) {
    if (std::isfinite(v)) out << v;
  };
  for (const auto& r : rows) {
    out << r.dataset << ',' << r.measure << ',';
    cell(r.score.mean);
    out << ',';
    cell(r.score.ci_low);
    out << ',';
    cell(r.score.ci_high);
    out << '\n';
  }
  return out.str();
}

PipelineOutcome RunPipeline(const PipelineConfig& config, const fs::path& cache_dir,
                            const LogFn& log) {
  const LoadedDataset dataset = LoadPipelineDataset(config.dataset);
  std::vector<harness::ExperimentPlan> plans;
  for (harness::RoarMode mode : config.modes) {
    plans.push_back(MakePlan(config, dataset, mode));
    harness::ValidatePlan(plans.back());
  }

  const fs::path out(config.out);
  fs::create_directories(out);
  WriteText(out / "effective_config.json", ConfigToJson(config).dump(2) + "\n");

  harness::RunCache cache(cache_dir);
  harness::RunOptions options;
  options.store = out / "runs";
  options.cache = &cache;
  options.jobs = config.jobs;
  options.dump_importance = config.dump_importance;
  options.log = log;

  PipelineOutcome outcome;
  std::vector<FaithfulnessRow> rows;
  Json curves_index = Json::array();
  for (const auto& plan : plans) {
    harness::PlanResult result = harness::RunRoar(plan, options);
    const std::string mode(harness::ModeName(plan.mode));
    const std::string label =
        plans.size() > 1 ? dataset.name + "@" + mode : dataset.name;
    const Json curves = CurvesJson(result, config, label);
    const std::string file = dataset.name + "__" + mode + ".json";
    WriteText(out / "curves" / file, curves.dump(2) + "\n");
    const auto plan_rows = FaithfulnessRows(curves);
    rows.insert(rows.end(), plan_rows.begin(), plan_rows.end());
    curves_index.push_back({{"file", "curves/" + file},
                            {"mode", mode},
                            {"plan_hash", result.plan_hash},
                            {"trained_runs", result.trained_runs},
                            {"failed_runs", result.failed_runs},
                            {"total_runs", result.records.size()}});
    outcome.results.push_back(std::move(result));
  }
  WriteText(out / "faithfulness.csv", FaithfulnessCsv(rows));

  Json summary;
  summary["dataset"] = dataset.name;
  summary["dataset_hash"] = data::DatasetHash(*dataset.dataset);
  summary["cache"] = cache_dir.string();
  summary["quarantined_cache_entries"] = cache.quarantined();
  summary["curves"] = curves_index;
  Json faith = Json::array();
  for (const auto& r : rows) {
    faith.push_back({{"dataset", r.dataset},
                     {"measure", r.measure},
                     {"mean", NumberOrNull(r.score.mean)},
                     {"ci_low", NumberOrNull(r.score.ci_low)},
                     {"ci_high", NumberOrNull(r.score.ci_high)}});
  }
  summary["faithfulness"] = faith;
  WriteText(out / "summary.json", summary.dump(2) + "\n");
  outcome.summary = std::move(summary);
  return outcome;
}

Json Report(const fs::path& run_dir, const fs::path& out) {
  const fs::path curves_dir = run_dir / "curves";
  std::vector<fs::path> files;
  if (fs::is_directory(curves_dir)) {
    for (const auto& e : fs::directory_iterator(curves_dir)) {
      if (e.path().extension() == ".json") files.push_back(e.path());
    }
  }
  if (files.empty()) {
    throw EmptyInput("no curve files under " + curves_dir.string());
  }
  std::sort(files.begin(), files.end());

  std::vector<FaithfulnessRow> rows;
  Json index = Json::array();
  for (const fs::path& file : files) {
    Json curves;
    try {
      curves = Json::parse(ReadText(file));
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(file.string() + ": " + e.what());
    }
    const auto file_rows = FaithfulnessRows(curves);
    rows.insert(rows.end(), file_rows.begin(), file_rows.end());

    svg::Chart chart;
    chart.title = curves.at("label").get<std::string>() + " (" +
                  curves.at("model").get<std::string>() + ", " +
                  curves.at("mode").get<std::string>() + ")";
    chart.x_label = "tokens masked";
    chart.y_label = curves.at("metric").get<std::string>();
    chart.x_ticks = curves.at("ratios").get<std::vector<double>>();
    const std::vector<double> ratios = chart.x_ticks;
    for (const auto& entry : curves.at("measures")) {
      svg::Series s;
      s.label = entry.at("measure").get<std::string>();
      s.x = ratios;
      s.y = FromJsonVector(entry.at("mean"));
      s.low = FromJsonVector(entry.at("ci_low"));
      s.high = FromJsonVector(entry.at("ci_high"));
      s.dashed = s.label == "random";
      chart.series.push_back(std::move(s));
    }
    if (const Json& lb = curves.at("lower_bound").at("mean"); !lb.is_null()) {
      chart.rule = lb.get<double>();
      chart.rule_label = "100% masked";
    }
    const fs::path plot = out / "plots" / (file.stem().string() + ".svg");
    WriteText(plot, svg::Render(chart));
    index.push_back({{"curves", file.string()}, {"plot", plot.string()}});
  }
  WriteText(out / "faithfulness.csv", FaithfulnessCsv(rows));
  Json report;
  report["plots"] = index;
  report["faithfulness_rows"] = rows.size();
  WriteText(out / "report.json", report.dump(2) + "\n");
  return report;
}

bool Validate(const harness::ValidationOptions& options, const fs::path& out,
              Json* verdict) {
  const harness::ValidationResult result = harness::RunSyntheticValidation(options);
  const Json doc = harness::ValidationToJson(result);
  WriteText(out / "validation.json", doc.dump(2) + "\n");

  svg::Chart chart;
  chart.title = "Tabular validation: accuracy after removing k features";
  chart.x_label = "features removed";
  chart.y_label = "accuracy";
  chart.x_min = 0.0;
  chart.x_max = static_cast<double>(data::kTabularFeatures);
  chart.x_percent = false;
  for (std::size_t k = 0; k <= data::kTabularFeatures; k += 2) {
    chart.x_ticks.push_back(static_cast<double>(k));
  }
  chart.y_min = 0.4;
  chart.y_ticks = {0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<double> x;
  for (std::size_t k = 0; k <= data::kTabularFeatures; ++k) x.push_back(static_cast<double>(k));
  const std::pair<const char*, std::vector<double> harness::ValidationSeedCurves::*> curves[] = {
      {"ground truth", &harness::ValidationSeedCurves::ground_truth},
      {"worst case", &harness::ValidationSeedCurves::worst_case},
      {"ROAR", &harness::ValidationSeedCurves::classic},
      {"Recursive ROAR", &harness::ValidationSeedCurves::recursive}};
  for (const auto& [label, field] : curves) {
    std::vector<std::vector<double>> per_seed;
    for (const auto& s : result.seeds) per_seed.push_back(s.*field);
    const Band band = PointwiseBand(per_seed, x.size());
    svg::Series s;
    s.label = label;
    s.x = x;
    s.y = band.mean;
    if (result.seeds.size() > 1) {
      s.low = band.low;
      s.high = band.high;
    }
    s.dashed = std::string_view(label) == "Recursive ROAR";
    chart.series.push_back(std::move(s));
  }
  WriteText(out / "validation.svg", svg::Render(chart));
  if (verdict != nullptr) *verdict = doc.at("verdict");
  return result.pass;
}

}  // namespace roarbench::pipeline
