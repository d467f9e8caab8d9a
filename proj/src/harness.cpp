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

#include "roarbench/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "roarbench/errors.hpp"
#include "roarbench/hashing.hpp"
#include "roarbench/rng.hpp"

namespace roarbench::harness {

namespace fs = std::filesystem;
using importance::Measure;
using nlohmann::ordered_json;

namespace {

constexpr std::string_view kKeySalt = "roarbench-run-v1";
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void WriteFile(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

void ParallelFor(std::size_t n, std::size_t jobs,
                 const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < std::min(jobs, n); ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

ordered_json ScheduleJson(const masking::StepSchedule& s) {
  return {{"mode", masking::StepModeName(s.mode)},
          {"relative_step", s.relative_step},
          {"tokens_per_step", s.tokens_per_step},
          {"max_iterations", s.max_iterations}};
}

ordered_json ModelKeyJson(const models::ModelConfig& config) {
  models::ModelConfig c = config;
  c.seed = 0;
  return models::ConfigToJson(c);
}

}  // namespace

std::string_view ModeName(RoarMode mode) {
  return mode == RoarMode::kClassic ? "roar" : "recursive-roar";
}

RoarMode ParseMode(std::string_view name) {
  if (name == "roar") return RoarMode::kClassic;
  if (name == "recursive-roar") return RoarMode::kRecursive;
  throw ConfigError("unknown mode '" + std::string(name) + "'");
}

std::vector<Measure> PlanMeasures(const ExperimentPlan& plan) {
  std::vector<Measure> out = plan.measures;
  if (std::find(out.begin(), out.end(), Measure::kRandom) == out.end()) {
    out.push_back(Measure::kRandom);
  }
  return out;
}

void ValidatePlan(const ExperimentPlan& plan) {
  if (!plan.dataset) throw ConfigError("plan has no dataset");
  const data::TokenDataset& ds = *plan.dataset;
  for (data::SplitKind split : data::kAllSplits) {
    if (ds.split(split).empty()) {
      throw EmptyInput(std::string(data::SplitName(split)) + " split is empty");
    }
  }
  if (plan.seeds.empty()) throw ConfigError("plan needs at least one seed");
  if (std::set<std::uint64_t>(plan.seeds.begin(), plan.seeds.end()).size() !=
      plan.seeds.size()) {
    throw ConfigError("seeds must be distinct");
  }
  if (plan.ig_steps < 1) throw ConfigError("ig_steps must be >= 1");
  masking::ValidateSchedule(plan.schedule);
  models::ValidateConfig(plan.model);
  if (plan.model.vocab_size != ds.vocabulary.size()) {
    throw ConfigError("model vocab_size does not match the dataset");
  }
  if (plan.model.num_classes != ds.num_classes) {
    throw ConfigError("model num_classes does not match the dataset");
  }
  const bool paired_model =
      plan.model.architecture == models::Architecture::kBiLstmAttentionPaired;
  if (paired_model != ds.paired()) {
    throw ConfigError(paired_model
                          ? "paired architecture needs a paired dataset"
                          : "paired dataset needs the paired architecture");
  }
  std::set<Measure> seen;
  for (Measure m : plan.measures) {
    if (!seen.insert(m).second) {
      throw ConfigError("duplicate measure '" +
                        std::string(importance::MeasureName(m)) + "'");
    }
    if (m == Measure::kAttention &&
        plan.model.architecture == models::Architecture::kLinear) {
      throw UnsupportedMeasure("attention measure needs an attention model");
    }
    if (m == Measure::kOracle || m == Measure::kOracleFirst) {
      for (data::SplitKind split : data::kAllSplits) {
        for (const auto& obs : ds.split(split)) {
          if (!obs.evidence) {
            throw ConfigError("oracle measures need evidence annotations");
          }
        }
      }
    }
  }
}

std::string PlanHash(const ExperimentPlan& plan) {
  ordered_json doc;
  doc["salt"] = kKeySalt;
  doc["dataset"] = data::DatasetHash(*plan.dataset);
  doc["model"] = ModelKeyJson(plan.model);
  ordered_json measures = ordered_json::array();
  for (Measure m : PlanMeasures(plan)) measures.push_back(importance::MeasureName(m));
  doc["measures"] = measures;
  doc["schedule"] = ScheduleJson(plan.schedule);
  doc["seeds"] = plan.seeds;
  doc["mode"] = ModeName(plan.mode);
  doc["absolute_scores"] = plan.absolute_scores;
  doc["ig_steps"] = plan.ig_steps;
  return Sha256Hex(doc.dump()).substr(0, 16);
}

double RunRecord::performance(metrics::MetricKind metric) const {
  if (failed) return kNaN;
  switch (metric) {
    case metrics::MetricKind::kAccuracy:
      return accuracy;
    case metrics::MetricKind::kMacroF1:
      return macro_f1;
    case metrics::MetricKind::kMicroF1:
      return micro_f1;
  }
  return kNaN;
}

ordered_json RecordToJson(const RunRecord& r) {
  ordered_json doc;
  doc["key"] = r.key;
  doc["measure"] = r.measure;
  doc["mode"] = r.mode;
  doc["seed"] = r.seed;
  doc["iteration"] = r.iteration;
  doc["ratio"] = r.ratio;
  doc["failed"] = r.failed;
  doc["error"] = r.error;
  doc["attempts"] = r.attempts;
  doc["init_seed"] = r.init_seed;
  if (r.failed) {
    doc["performance"] = nullptr;
  } else {
    doc["performance"] = {{"accuracy", r.accuracy},
                          {"macro-f1", r.macro_f1},
                          {"micro-f1", r.micro_f1}};
  }
  doc["best_epoch"] = r.best_epoch;
  doc["selection"] = "validation-loss";
  doc["masked_share"] = r.masked_share;
  if (r.sparsity_top_k.empty()) {
    doc["sparsity"] = nullptr;
  } else {
    doc["sparsity"] = {{"top_k", r.sparsity_top_k},
                       {"relative", r.sparsity_relative}};
  }
  doc["wall_time_seconds"] = r.wall_time_seconds;
  return doc;
}

RunRecord RecordFromJson(const ordered_json& doc) {
  RunRecord r;
  try {
    r.key = doc.at("key").get<std::string>();
    r.measure = doc.at("measure").get<std::string>();
    r.mode = doc.at("mode").get<std::string>();
    r.seed = doc.at("seed").get<std::uint64_t>();
    r.iteration = doc.at("iteration").get<std::size_t>();
    r.ratio = doc.at("ratio").get<double>();
    r.failed = doc.at("failed").get<bool>();
    r.error = doc.at("error").get<std::string>();
    r.attempts = doc.at("attempts").get<std::size_t>();
    r.init_seed = doc.at("init_seed").get<std::uint64_t>();
    if (!r.failed) {
      const auto& perf = doc.at("performance");
      r.accuracy = perf.at("accuracy").get<double>();
      r.macro_f1 = perf.at("macro-f1").get<double>();
      r.micro_f1 = perf.at("micro-f1").get<double>();
    }
    r.best_epoch = doc.at("best_epoch").get<std::size_t>();
    r.masked_share = doc.at("masked_share").get<double>();
    if (const auto& sp = doc.at("sparsity"); !sp.is_null()) {
      r.sparsity_top_k = sp.at("top_k").get<std::vector<double>>();
      r.sparsity_relative = sp.at("relative").get<std::vector<double>>();
    }
    r.wall_time_seconds = doc.at("wall_time_seconds").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("run record: ") + e.what());
  }
  return r;
}

RunCache::RunCache(fs::path directory) : directory_(std::move(directory)) {
  if (!directory_.empty()) {
    std::error_code ec;
    fs::create_directories(directory_, ec);
    if (ec) throw IoError("cannot create cache directory " + directory_.string());
  }
}

std::size_t RunCache::quarantined() const {
  std::lock_guard lock(mutex_);
  return quarantined_;
}

std::optional<RunCache::Entry> RunCache::Lookup(const std::string& key,
                                                std::size_t expected_masks) {
  {
    std::lock_guard lock(mutex_);
    if (auto it = memory_.find(key); it != memory_.end()) {
      Entry hit = it->second;
      hit.record.from_cache = true;
      return hit;
    }
  }
  if (directory_.empty()) return std::nullopt;
  const fs::path dir = directory_ / key;
  if (!fs::is_directory(dir)) return std::nullopt;
  try {
    Entry entry;
    entry.record =
        RecordFromJson(ordered_json::parse(ReadFile(dir / "record.json")));
    if (entry.record.key != key || entry.record.failed) {
      throw ParseError("cache record does not match its key");
    }
    entry.parameters = grad::CheckpointFromJson(
        ordered_json::parse(ReadFile(dir / "checkpoint.json")));
    entry.masks = masking::StatesFromJsonl(ReadFile(dir / "masks.jsonl"));
    if (entry.masks.size() != expected_masks) {
      throw ParseError("cache mask dump has the wrong length");
    }
    entry.record.from_cache = true;
    return entry;
  } catch (const std::exception&) {
    std::lock_guard lock(mutex_);
    const fs::path quarantine = directory_ / "quarantine";
    std::error_code ec;
    fs::create_directories(quarantine, ec);
    fs::path target = quarantine / key;
    for (int n = 1; fs::exists(target); ++n) {
      target = quarantine / (key + "." + std::to_string(n));
    }
    fs::rename(dir, target, ec);
    if (ec) fs::remove_all(dir, ec);
    ++quarantined_;
    return std::nullopt;
  }
}

void RunCache::Store(const Entry& entry, bool keep_in_memory) {
  if (keep_in_memory) {
    std::lock_guard lock(mutex_);
    memory_[entry.record.key] = entry;
  }
  if (directory_.empty()) return;
  const std::string& key = entry.record.key;
  std::ostringstream tmp_name;
  tmp_name << ".tmp-" << key << '-' << std::this_thread::get_id();
  const fs::path tmp = directory_ / tmp_name.str();
  std::error_code ec;
  fs::remove_all(tmp, ec);
  fs::create_directories(tmp);
  WriteFile(tmp / "record.json", RecordToJson(entry.record).dump(2) + "\n");
  WriteFile(tmp / "checkpoint.json",
            grad::CheckpointToJson(entry.parameters).dump() + "\n");
  WriteFile(tmp / "masks.jsonl", masking::StatesToJsonl(entry.masks));
  fs::rename(tmp, directory_ / key, ec);
  if (ec) fs::remove_all(tmp, ec);
}

std::vector<double> PlanResult::Curve(const std::string& measure,
                                      std::uint64_t seed,
                                      metrics::MetricKind metric) const {
  const std::size_t last = ratios.size() - 1;
  std::vector<double> curve(ratios.size(), kNaN);
  for (const RunRecord& r : records) {
    if (r.seed != seed) continue;
    const bool shared = r.measure == kSharedMeasure;
    if (shared ? (r.iteration == 0 || r.iteration == last)
               : (r.measure == measure && r.iteration > 0 &&
                  r.iteration < last)) {
      curve[r.iteration] = r.performance(metric);
    }
  }
  return curve;
}

namespace {

struct Outcome {
  RunRecord record;
  grad::ParameterSet parameters;
};

// Trains with one retry on a numeric failure and evaluates on the test split.
Outcome TrainAndEvaluate(const ExperimentPlan& plan,
                         std::span<const data::Observation> train,
                         std::span<const data::Observation> validation,
                         std::span<const data::Observation> test,
                         std::uint64_t init_seed) {
  Outcome out;
  RunRecord& r = out.record;
  r.init_seed = init_seed;
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t attempt = 1; attempt <= 2; ++attempt) {
    const std::uint64_t seed =
        attempt == 1 ? init_seed : DeriveSeed({init_seed, HashLabel("retry")});
    r.attempts = attempt;
    try {
      const models::TrainedModel model =
          models::Train(plan.model, train, validation, seed);
      const std::vector<int> predictions = models::Predict(model, test);
      std::vector<int> golds;
      golds.reserve(test.size());
      for (const auto& obs : test) golds.push_back(obs.label);
      const std::size_t c = plan.model.num_classes;
      r.accuracy = metrics::ClassificationMetric(predictions, golds, c,
                                                 metrics::MetricKind::kAccuracy);
      r.macro_f1 = metrics::ClassificationMetric(predictions, golds, c,
                                                 metrics::MetricKind::kMacroF1);
      r.micro_f1 = metrics::ClassificationMetric(predictions, golds, c,
                                                 metrics::MetricKind::kMicroF1);
      r.best_epoch = model.best_epoch;
      r.failed = false;
      r.error.clear();
      out.parameters = model.parameters;
      break;
    } catch (const NumericFailure& e) {
      r.failed = true;
      r.error = e.what();
    }
  }
  r.wall_time_seconds = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - start)
                            .count();
  return out;
}

class Runner {
 public:
  Runner(const ExperimentPlan& plan, const RunOptions& options)
      : plan_(plan), options_(options) {
    const data::TokenDataset& ds = *plan.dataset;
    for (data::SplitKind split : data::kAllSplits) {
      offsets_[static_cast<std::size_t>(split)] = all_.size();
      const auto& obs = ds.split(split);
      all_.insert(all_.end(), obs.begin(), obs.end());
    }
    offsets_[3] = all_.size();
    std::size_t max_maskable = 0;
    for (const auto& obs : all_) {
      const auto flags = data::MaskablePositions(obs);
      const std::size_t m =
          static_cast<std::size_t>(std::count(flags.begin(), flags.end(), true));
      maskable_counts_.push_back(m);
      max_maskable = std::max(max_maskable, m);
    }
    ids_.resize(all_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i) ids_[i] = i;
    ratios_ = masking::CurveRatios(plan.schedule, max_maskable);
    dataset_hash_ = data::DatasetHash(ds);
    plan_hash_ = PlanHash(plan);
    measures_ = PlanMeasures(plan);
  }

  PlanResult Run() {
    const std::size_t last = ratios_.size() - 1;
    total_runs_ = plan_.seeds.size() * (2 + measures_.size() * (last - 1));

    // Shared 0 % and 100 % runs first; every chain starts from iteration 0.
    std::vector<std::pair<std::size_t, bool>> shared_tasks;
    for (std::size_t s = 0; s < plan_.seeds.size(); ++s) {
      shared_tasks.push_back({s, false});
      shared_tasks.push_back({s, true});
    }
    initial_.resize(plan_.seeds.size());
    ParallelFor(shared_tasks.size(), options_.jobs, [&](std::size_t i) {
      RunShared(shared_tasks[i].first, shared_tasks[i].second);
    });

    std::vector<std::pair<std::size_t, std::size_t>> chains;
    for (std::size_t m = 0; m < measures_.size(); ++m) {
      for (std::size_t s = 0; s < plan_.seeds.size(); ++s) chains.push_back({m, s});
    }
    ParallelFor(chains.size(), options_.jobs, [&](std::size_t i) {
      RunChain(measures_[chains[i].first], chains[i].second);
    });

    PlanResult result;
    result.plan_hash = plan_hash_;
    result.dataset_name = plan_.dataset_name;
    result.mode = plan_.mode;
    result.ratios = ratios_;
    for (Measure m : measures_) {
      result.measures.emplace_back(importance::MeasureName(m));
    }
    result.seeds = plan_.seeds;
    result.trained_runs = trained_.load();
    result.failed_runs = failed_.load();
    result.records = std::move(records_);
    auto order = [&](const RunRecord& r) {
      std::size_t m = 0;
      if (r.measure != kSharedMeasure) {
        m = 1 + static_cast<std::size_t>(
                    std::find(result.measures.begin(), result.measures.end(),
                              r.measure) -
                    result.measures.begin());
      }
      return std::tuple(m, r.seed, r.iteration);
    };
    std::sort(result.records.begin(), result.records.end(),
              [&](const RunRecord& a, const RunRecord& b) {
                return order(a) < order(b);
              });
    if (static_cast<double>(result.failed_runs) >
        kMaxFailureShare * static_cast<double>(total_runs_)) {
      throw RunFailures(std::to_string(result.failed_runs) + " of " +
                        std::to_string(total_runs_) + " runs failed");
    }
    return result;
  }

 private:
  std::span<const data::Observation> Split(std::span<const data::Observation> all,
                                           data::SplitKind kind) const {
    const std::size_t k = static_cast<std::size_t>(kind);
    return all.subspan(offsets_[k], offsets_[k + 1] - offsets_[k]);
  }

  std::vector<data::Observation> Masked(
      const std::vector<masking::MaskState>& states) const {
    std::vector<data::Observation> out;
    out.reserve(all_.size());
    for (std::size_t i = 0; i < all_.size(); ++i) {
      out.push_back(masking::ApplyMask(all_[i], states[i]));
    }
    return out;
  }

  double TestMaskedShare(const std::vector<masking::MaskState>& states) const {
    const std::size_t begin = offsets_[2], end = offsets_[3];
    std::size_t masked = 0, maskable = 0;
    for (std::size_t i = begin; i < end; ++i) {
      masked += states[i].masked.size();
      maskable += maskable_counts_[i];
    }
    return maskable == 0 ? 0.0
                         : static_cast<double>(masked) /
                               static_cast<double>(maskable);
  }

  metrics::SparsityCurves TestSparsity(
      const std::vector<importance::ImportanceMap>& maps) const {
    std::vector<std::vector<double>> restricted;
    for (std::size_t i = offsets_[2]; i < offsets_[3]; ++i) {
      std::vector<double> row;
      for (std::size_t t = 0; t < maps[i].scores.size(); ++t) {
        if (maps[i].maskable[t]) row.push_back(maps[i].scores[t]);
      }
      if (!row.empty()) restricted.push_back(std::move(row));
    }
    if (restricted.empty()) return {};
    return metrics::ComputeSparsity(restricted);
  }

  std::string BaseKey(std::uint64_t seed) const {
    ordered_json doc;
    doc["salt"] = kKeySalt;
    doc["dataset"] = dataset_hash_;
    doc["model"] = ModelKeyJson(plan_.model);
    doc["seed"] = seed;
    return doc.dump();
  }

  std::string SharedKey(std::uint64_t seed, bool final) const {
    return Sha256Hex(BaseKey(seed) +
                     (final ? "|all-maskable-masked" : "|iteration-0"));
  }

  std::string ChainKey(Measure measure, std::uint64_t seed,
                       std::size_t iteration) const {
    ordered_json doc;
    doc["measure"] = importance::MeasureName(measure);
    doc["mode"] = ModeName(plan_.mode);
    doc["schedule"] = ScheduleJson(plan_.schedule);
    doc["iteration"] = iteration;
    doc["absolute_scores"] = plan_.absolute_scores;
    if (measure == Measure::kIntegratedGradient) doc["ig_steps"] = plan_.ig_steps;
    return Sha256Hex(BaseKey(seed) + "|" + doc.dump());
  }

  fs::path StoreDir(std::string_view measure, std::uint64_t seed,
                    std::size_t iteration) const {
    return options_.store / plan_hash_ / std::string(measure) /
           std::to_string(seed) / std::to_string(iteration);
  }

  void Log(const std::string& line) {
    if (!options_.log) return;
    std::lock_guard lock(mutex_);
    options_.log(line);
  }

  void WriteStore(const RunRecord& record, const grad::ParameterSet* params,
                  const std::vector<masking::MaskState>& masks,
                  const std::vector<importance::ImportanceMap>* maps) {
    if (options_.store.empty()) return;
    const fs::path dir = StoreDir(record.measure, record.seed, record.iteration);
    fs::create_directories(dir);
    WriteFile(dir / "record.json", RecordToJson(record).dump(2) + "\n");
    if (params != nullptr) {
      WriteFile(dir / "checkpoint.json",
                grad::CheckpointToJson(*params).dump() + "\n");
    }
    WriteFile(dir / "masks.jsonl", masking::StatesToJsonl(masks));
    if (maps != nullptr && options_.dump_importance) {
      WriteFile(dir / "importance.jsonl", importance::MapsToJsonl(*maps));
    }
  }

  void Finish(RunRecord record, const grad::ParameterSet* params,
              const std::vector<masking::MaskState>& masks,
              const std::vector<importance::ImportanceMap>* maps) {
    if (record.failed) ++failed_;
    if (!record.failed && !record.from_cache) ++trained_;
    Log(std::string(record.from_cache ? "cached  " : "run     ") +
        record.measure + " seed=" + std::to_string(record.seed) +
        " iter=" + std::to_string(record.iteration) +
        (record.failed ? " FAILED: " + record.error
                       : " perf=" + std::to_string(record.performance(plan_.metric))));
    WriteStore(record, params, masks, maps);
    std::lock_guard lock(mutex_);
    records_.push_back(std::move(record));
  }

  bool Aborted() const {
    return static_cast<double>(failed_.load()) >
           kMaxFailureShare * static_cast<double>(total_runs_);
  }

  RunRecord FailedRecord(std::string key, std::string measure,
                         std::string mode, std::uint64_t seed,
                         std::size_t iteration, std::string error) const {
    RunRecord r;
    r.key = std::move(key);
    r.measure = std::move(measure);
    r.mode = std::move(mode);
    r.seed = seed;
    r.iteration = iteration;
    r.ratio = ratios_[iteration];
    r.failed = true;
    r.error = std::move(error);
    return r;
  }

  void RunShared(std::size_t seed_index, bool final) {
    const std::uint64_t seed = plan_.seeds[seed_index];
    const std::size_t iteration = final ? ratios_.size() - 1 : 0;
    const std::string key = SharedKey(seed, final);

    std::vector<masking::MaskState> states(all_.size());
    for (std::size_t i = 0; i < all_.size(); ++i) {
      states[i].obs_id = i;
      states[i].iteration = iteration;
      if (final) {
        const auto flags = data::MaskablePositions(all_[i]);
        for (std::size_t t = 0; t < flags.size(); ++t) {
          if (flags[t]) states[i].masked.push_back(t);
        }
        states[i].target = states[i].masked.size();
      }
    }

    RunCache::Entry entry;
    std::optional<RunCache::Entry> hit;
    if (options_.cache != nullptr) hit = options_.cache->Lookup(key, all_.size());
    if (hit) {
      entry = std::move(*hit);
      // Ratios and iteration indices depend on the schedule, not the key.
      entry.record.iteration = iteration;
      entry.record.ratio = ratios_[iteration];
    } else {
      const std::vector<data::Observation> data =
          final ? Masked(states) : all_;
      const std::uint64_t init_seed = DeriveSeed(
          {seed, HashLabel(final ? "shared-final" : "shared-initial")});
      Outcome out =
          TrainAndEvaluate(plan_, Split(data, data::SplitKind::kTrain),
                           Split(data, data::SplitKind::kValidation),
                           Split(data, data::SplitKind::kTest), init_seed);
      entry.record = std::move(out.record);
      entry.record.key = key;
      entry.record.measure = std::string(kSharedMeasure);
      entry.record.mode = std::string(kSharedMeasure);
      entry.record.seed = seed;
      entry.record.iteration = iteration;
      entry.record.ratio = ratios_[iteration];
      entry.record.masked_share = TestMaskedShare(states);
      entry.parameters = std::move(out.parameters);
      entry.masks = states;
      if (!entry.record.failed && options_.cache != nullptr) {
        options_.cache->Store(entry, true);
      }
    }
    if (!final) {
      std::lock_guard lock(mutex_);
      initial_[seed_index] = entry.record.failed
                                 ? std::nullopt
                                 : std::optional(entry.parameters);
    }
    Finish(entry.record, entry.record.failed ? nullptr : &entry.parameters,
           states, nullptr);
  }

  void RunChain(Measure measure, std::size_t seed_index) {
    const std::uint64_t seed = plan_.seeds[seed_index];
    const std::string name(importance::MeasureName(measure));
    const std::string mode(ModeName(plan_.mode));
    const std::size_t last = ratios_.size() - 1;
    const bool recursive = plan_.mode == RoarMode::kRecursive;

    std::optional<grad::ParameterSet> initial;
    {
      std::lock_guard lock(mutex_);
      initial = initial_[seed_index];
    }
    models::TrainedModel previous;
    previous.config = plan_.model;
    std::string upstream_error;
    if (initial) {
      previous.parameters = *initial;
    } else {
      upstream_error = "iteration 0 failed";
    }

    std::vector<masking::MaskState> states(all_.size());
    for (std::size_t i = 0; i < states.size(); ++i) states[i].obs_id = i;
    std::vector<importance::ImportanceMap> frozen;

    for (std::size_t j = 1; j < last; ++j) {
      const std::string key = ChainKey(measure, seed, j);
      if (!upstream_error.empty() || Aborted()) {
        const std::string why =
            upstream_error.empty() ? "plan aborted" : upstream_error;
        Finish(FailedRecord(key, name, mode, seed, j, why), nullptr, states,
               nullptr);
        continue;
      }
      std::optional<RunCache::Entry> hit;
      if (options_.cache != nullptr) hit = options_.cache->Lookup(key, all_.size());
      if (hit) {
        states = std::move(hit->masks);
        previous.parameters = hit->parameters;
        Finish(hit->record, &hit->parameters, states, nullptr);
        continue;
      }

      importance::ImportanceOptions opts;
      opts.ig_steps = plan_.ig_steps;
      opts.seed = seed;
      const models::TrainedModel* model =
          importance::NeedsModel(measure) ? &previous : nullptr;
      std::vector<importance::ImportanceMap> maps;
      if (recursive) {
        opts.iteration = j;
        maps = importance::ComputeImportance(model, measure, Masked(states),
                                             ids_, opts);
      } else {
        if (frozen.empty()) {
          if (model != nullptr) model = &initial_model_for(seed_index, previous);
          opts.iteration = 0;
          frozen = importance::ComputeImportance(model, measure, all_, ids_, opts);
        }
        maps = frozen;
        for (auto& m : maps) m.iteration = j;
      }
      const metrics::SparsityCurves sparsity = TestSparsity(maps);
      for (std::size_t i = 0; i < states.size(); ++i) {
        const std::size_t target =
            masking::CumulativeTarget(plan_.schedule, j, maskable_counts_[i]);
        states[i] =
            masking::ExtendMask(states[i], maps[i], target, plan_.absolute_scores);
        states[i].iteration = j;
      }

      const std::vector<data::Observation> data = Masked(states);
      Outcome out = TrainAndEvaluate(
          plan_, Split(data, data::SplitKind::kTrain),
          Split(data, data::SplitKind::kValidation),
          Split(data, data::SplitKind::kTest),
          DeriveSeed({seed, HashLabel(name), j}));
      RunRecord& r = out.record;
      r.key = key;
      r.measure = name;
      r.mode = mode;
      r.seed = seed;
      r.iteration = j;
      r.ratio = ratios_[j];
      r.masked_share = TestMaskedShare(states);
      r.sparsity_top_k = sparsity.absolute_share;
      r.sparsity_relative = sparsity.relative_share;
      if (r.failed) {
        if (recursive) upstream_error = "iteration " + std::to_string(j) + " failed";
        Finish(r, nullptr, states, &maps);
        continue;
      }
      if (options_.cache != nullptr) {
        options_.cache->Store({r, out.parameters, states}, false);
      }
      previous.parameters = out.parameters;
      Finish(r, &out.parameters, states, &maps);
    }
  }

  // Classic ROAR ranks with the iteration-0 model regardless of where the
  // chain resumed from the cache.
  const models::TrainedModel& initial_model_for(std::size_t seed_index,
                                                models::TrainedModel& scratch) {
    std::lock_guard lock(mutex_);
    scratch.parameters = *initial_[seed_index];
    return scratch;
  }

  const ExperimentPlan& plan_;
  const RunOptions& options_;
  std::vector<data::Observation> all_;
  std::array<std::size_t, 4> offsets_{};
  std::vector<std::size_t> maskable_counts_;
  std::vector<std::size_t> ids_;
  std::vector<double> ratios_;
  std::vector<Measure> measures_;
  std::string dataset_hash_;
  std::string plan_hash_;
  std::size_t total_runs_ = 0;

  std::mutex mutex_;
  std::vector<std::optional<grad::ParameterSet>> initial_;
  std::vector<RunRecord> records_;
  std::atomic<std::size_t> trained_{0};
  std::atomic<std::size_t> failed_{0};
};

}  // namespace

PlanResult RunRoar(const ExperimentPlan& plan, const RunOptions& options) {
  ValidatePlan(plan);
  Runner runner(plan, options);
  return runner.Run();
}

PlanResult RunRecursiveRoar(ExperimentPlan plan, const RunOptions& options) {
  plan.mode = RoarMode::kRecursive;
  return RunRoar(plan, options);
}

PlanResult RunClassicRoar(ExperimentPlan plan, const RunOptions& options) {
  plan.mode = RoarMode::kClassic;
  return RunRoar(plan, options);
}

// Tabular validation.

namespace {

data::TabularSplit MaskSplit(const data::TabularSplit& split,
                             std::span<const std::size_t> masked) {
  data::TabularSplit out;
  out.labels = split.labels;
  out.features.reserve(split.size());
  for (const auto& row : split.features) {
    out.features.push_back(masking::MaskTabular(row, masked));
  }
  return out;
}

struct Fit {
  models::LogisticModel model;
  double accuracy = 0.0;
};

Fit FitMasked(const data::TabularDataset& dataset,
              std::span<const std::size_t> masked, double l2_penalty) {
  Fit fit;
  fit.model = models::FitLogistic(
      MaskSplit(dataset.split(data::SplitKind::kTrain), masked), l2_penalty);
  fit.accuracy = models::LogisticAccuracy(
      fit.model, MaskSplit(dataset.split(data::SplitKind::kTest), masked));
  return fit;
}

// Unmasked features by decreasing |w|, ties to the lower index.
std::vector<std::size_t> RankByWeight(const models::LogisticModel& model,
                                      const std::vector<bool>& masked) {
  std::vector<std::size_t> order;
  for (std::size_t j = 0; j < data::kTabularFeatures; ++j) {
    if (!masked[j]) order.push_back(j);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(model.weights[a]) > std::abs(model.weights[b]);
  });
  return order;
}

std::vector<double> MeanCurve(const std::vector<ValidationSeedCurves>& seeds,
                              std::vector<double> ValidationSeedCurves::*field) {
  std::vector<double> mean(data::kTabularFeatures + 1, 0.0);
  for (const auto& s : seeds) {
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += (s.*field)[k];
  }
  for (double& v : mean) v /= static_cast<double>(seeds.size());
  return mean;
}

}  // namespace

std::vector<std::size_t> GroundTruthOrder(const data::TabularDataset& dataset) {
  std::vector<std::size_t> order(data::kTabularInformative);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(dataset.a[a]) > std::abs(dataset.a[b]);
  });
  for (std::size_t j = data::kTabularInformative; j < data::kTabularFeatures; ++j) {
    order.push_back(j);
  }
  return order;
}

std::vector<std::size_t> WorstCaseOrder(const data::TabularDataset& dataset) {
  std::vector<std::size_t> order;
  for (std::size_t j = data::kTabularInformative; j < data::kTabularFeatures; ++j) {
    order.push_back(j);
  }
  std::vector<std::size_t> informative(data::kTabularInformative);
  std::iota(informative.begin(), informative.end(), std::size_t{0});
  std::stable_sort(informative.begin(), informative.end(),
                   [&](std::size_t a, std::size_t b) {
                     return std::abs(dataset.a[a]) < std::abs(dataset.a[b]);
                   });
  order.insert(order.end(), informative.begin(), informative.end());
  return order;
}

std::vector<double> RemovalCurve(const data::TabularDataset& dataset,
                                 const std::vector<std::size_t>& order,
                                 double l2_penalty) {
  Require(order.size() == data::kTabularFeatures,
          "removal order must name every feature");
  std::vector<double> curve;
  for (std::size_t k = 0; k <= order.size(); ++k) {
    curve.push_back(
        FitMasked(dataset, std::span(order).first(k), l2_penalty).accuracy);
  }
  return curve;
}

ValidationResult RunSyntheticValidation(const ValidationOptions& options) {
  if (options.seeds.empty()) throw ConfigError("validation needs a seed");
  ValidationResult result;
  result.tolerance = options.tolerance;
  result.classic_margin = options.classic_margin;
  for (std::uint64_t seed : options.seeds) {
    const data::TabularDataset dataset = data::GenerateTabular(options.sizes, seed);
    ValidationSeedCurves c;
    c.seed = seed;
    c.ground_truth_order = GroundTruthOrder(dataset);
    c.ground_truth = RemovalCurve(dataset, c.ground_truth_order, options.l2_penalty);
    c.worst_case = RemovalCurve(dataset, WorstCaseOrder(dataset), options.l2_penalty);

    const Fit initial = FitMasked(dataset, {}, options.l2_penalty);
    c.classic_order =
        RankByWeight(initial.model, std::vector<bool>(data::kTabularFeatures));
    c.classic = RemovalCurve(dataset, c.classic_order, options.l2_penalty);

    std::vector<bool> masked(data::kTabularFeatures, false);
    Fit current = initial;
    c.recursive.push_back(current.accuracy);
    for (std::size_t k = 1; k <= data::kTabularFeatures; ++k) {
      const std::size_t pick = RankByWeight(current.model, masked).front();
      masked[pick] = true;
      c.recursive_order.push_back(pick);
      current = FitMasked(dataset, c.recursive_order, options.l2_penalty);
      c.recursive.push_back(current.accuracy);
    }

    c.classic_max_excess = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < data::kTabularFeatures; ++k) {
      c.classic_max_excess =
          std::max(c.classic_max_excess, c.classic[k] - c.ground_truth[k]);
    }
    if (c.classic_max_excess >= options.classic_margin - 1e-12) {
      ++result.classic_exceeding_seeds;
    }
    result.seeds.push_back(std::move(c));
  }
  result.mean_ground_truth = MeanCurve(result.seeds, &ValidationSeedCurves::ground_truth);
  result.mean_worst_case = MeanCurve(result.seeds, &ValidationSeedCurves::worst_case);
  result.mean_classic = MeanCurve(result.seeds, &ValidationSeedCurves::classic);
  result.mean_recursive = MeanCurve(result.seeds, &ValidationSeedCurves::recursive);
  for (std::size_t k = 0; k < result.mean_recursive.size(); ++k) {
    result.max_recursive_deviation =
        std::max(result.max_recursive_deviation,
                 std::abs(result.mean_recursive[k] - result.mean_ground_truth[k]));
  }
  result.pass = result.max_recursive_deviation <= options.tolerance + 1e-12;
  return result;
}

ordered_json ValidationToJson(const ValidationResult& result) {
  ordered_json doc;
  std::vector<std::size_t> removed(data::kTabularFeatures + 1);
  std::iota(removed.begin(), removed.end(), std::size_t{0});
  doc["features_removed"] = removed;
  ordered_json seeds = ordered_json::array();
  for (const auto& s : result.seeds) {
    seeds.push_back({{"seed", s.seed},
                     {"ground_truth", s.ground_truth},
                     {"worst_case", s.worst_case},
                     {"classic_roar", s.classic},
                     {"recursive_roar", s.recursive},
                     {"ground_truth_order", s.ground_truth_order},
                     {"classic_order", s.classic_order},
                     {"recursive_order", s.recursive_order},
                     {"classic_max_excess", s.classic_max_excess}});
  }
  doc["per_seed"] = seeds;
  doc["mean"] = {{"ground_truth", result.mean_ground_truth},
                 {"worst_case", result.mean_worst_case},
                 {"classic_roar", result.mean_classic},
                 {"recursive_roar", result.mean_recursive}};
  doc["verdict"] = {{"criterion", "recursive ROAR within tolerance of ground truth at every step"},
                    {"tolerance", result.tolerance},
                    {"max_recursive_deviation", result.max_recursive_deviation},
                    {"pass", result.pass},
                    {"classic_margin", result.classic_margin},
                    {"classic_exceeding_seeds", result.classic_exceeding_seeds},
                    {"seeds", result.seeds.size()}};
  return doc;
}

}  // namespace roarbench::harness
