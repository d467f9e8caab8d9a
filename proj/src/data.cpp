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

#include "roarbench/data.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include "roarbench/errors.hpp"
#include "roarbench/hashing.hpp"
#include "roarbench/rng.hpp"

namespace roarbench::data {

namespace {

using Json = nlohmann::ordered_json;

constexpr std::array<const char*, kNumReserved> kReservedTokens = {
    "[PAD]", "[MASK]", "[BOS]", "[EOS]", "[SEP]"};

std::uint64_t SplitSeed(std::uint64_t seed, std::string_view kind,
                        SplitKind split) {
  return DeriveSeed(
      {seed, HashLabel(kind), static_cast<std::uint64_t>(split) + 1});
}

std::size_t SplitSize(const SplitSizes& sizes, SplitKind split) {
  switch (split) {
    case SplitKind::kTrain:
      return sizes.train;
    case SplitKind::kValidation:
      return sizes.validation;
    case SplitKind::kTest:
      return sizes.test;
  }
  return 0;
}

Json SizesJson(const SplitSizes& sizes) {
  return {{"train", sizes.train},
          {"validation", sizes.validation},
          {"test", sizes.test}};
}

void RequireSizes(const SplitSizes& sizes) {
  if (sizes.train == 0 || sizes.validation == 0 || sizes.test == 0) {
    throw ConfigError("every split needs at least one observation");
  }
}

// Draws `count` distinct positions from [first, first + span), sorted.
std::vector<int> DrawPositions(Rng& rng, std::size_t first, std::size_t span,
                               std::size_t count) {
  std::vector<int> slots(span);
  std::iota(slots.begin(), slots.end(), static_cast<int>(first));
  rng.Shuffle(slots);
  slots.resize(count);
  std::sort(slots.begin(), slots.end());
  return slots;
}

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void WriteFile(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

}  // namespace

Vocabulary::Vocabulary() {
  for (const char* token : kReservedTokens) Add(token);
}

int Vocabulary::Add(const std::string& token) {
  if (auto existing = Find(token)) return *existing;
  const int id = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
  index_.emplace(token, id);
  return id;
}

std::optional<int> Vocabulary::Find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocabulary::Token(int id) const {
  Require(id >= 0 && static_cast<std::size_t>(id) < tokens_.size(),
          "token id " + std::to_string(id) + " outside vocabulary");
  return tokens_[static_cast<std::size_t>(id)];
}

Vocabulary Vocabulary::FromTokens(const std::vector<std::string>& tokens) {
  if (tokens.size() < kNumReserved) {
    throw ParseError("vocabulary is missing the reserved tokens");
  }
  for (int i = 0; i < kNumReserved; ++i) {
    if (tokens[static_cast<std::size_t>(i)] != kReservedTokens[i]) {
      throw ParseError("vocabulary entry " + std::to_string(i) +
                       " must be " + kReservedTokens[i]);
    }
  }
  Vocabulary vocab;
  for (std::size_t i = kNumReserved; i < tokens.size(); ++i) {
    if (vocab.Find(tokens[i])) {
      throw ParseError("duplicate vocabulary token '" + tokens[i] + "'");
    }
    vocab.Add(tokens[i]);
  }
  return vocab;
}

std::string_view SplitName(SplitKind split) {
  switch (split) {
    case SplitKind::kTrain:
      return "train";
    case SplitKind::kValidation:
      return "validation";
    case SplitKind::kTest:
      return "test";
  }
  return "unknown";
}

bool TokenDataset::paired() const {
  for (const auto& split : splits) {
    if (!split.empty()) return split.front().aux_tokens.has_value();
  }
  return false;
}

std::vector<bool> MaskablePositions(const Observation& obs) {
  std::vector<bool> maskable(obs.tokens.size());
  for (std::size_t i = 0; i < obs.tokens.size(); ++i) {
    maskable[i] = !IsStructural(obs.tokens[i]);
  }
  return maskable;
}

namespace {

void CheckSequence(const std::vector<int>& tokens, std::size_t vocab_size,
                   std::string_view what) {
  if (tokens.size() < 2 || tokens.front() != kBos || tokens.back() != kEos) {
    throw ContractViolation(std::string(what) +
                            " must start with [BOS] and end with [EOS]");
  }
  for (int id : tokens) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_size) {
      throw ContractViolation(std::string(what) + " holds token id " +
                              std::to_string(id) + " outside the vocabulary");
    }
  }
}

}  // namespace

void CheckObservation(const Observation& obs, std::size_t vocab_size,
                      std::size_t num_classes) {
  CheckSequence(obs.tokens, vocab_size, "tokens");
  if (obs.aux_tokens) CheckSequence(*obs.aux_tokens, vocab_size, "aux_tokens");
  if (obs.label < 0 || static_cast<std::size_t>(obs.label) >= num_classes) {
    throw ContractViolation("label " + std::to_string(obs.label) +
                            " outside [0, " + std::to_string(num_classes) +
                            ")");
  }
  if (obs.evidence) {
    for (int p : *obs.evidence) {
      if (p < 0 || static_cast<std::size_t>(p) >= obs.tokens.size() ||
          IsStructural(obs.tokens[static_cast<std::size_t>(p)])) {
        throw ContractViolation("evidence position " + std::to_string(p) +
                                " is not a content position");
      }
    }
  }
}

TokenDataset GenerateKeyword(const KeywordParams& params) {
  RequireSizes(params.sizes);
  if (params.classes < 2) throw ConfigError("keyword task needs >= 2 classes");
  if (params.distractors < 1) throw ConfigError("need >= 1 distractor token");
  if (params.redundancy < 1) throw ConfigError("redundancy must be >= 1");
  if (params.length < params.redundancy + 2) {
    throw ConfigError("length " + std::to_string(params.length) +
                      " cannot hold " + std::to_string(params.redundancy) +
                      " keyword copies plus [BOS]/[EOS]");
  }

  TokenDataset ds;
  ds.num_classes = params.classes;
  std::vector<int> keywords, distractors;
  for (std::size_t c = 0; c < params.classes; ++c) {
    keywords.push_back(ds.vocabulary.Add("key_" + std::to_string(c)));
  }
  for (std::size_t i = 0; i < params.distractors; ++i) {
    distractors.push_back(ds.vocabulary.Add("w_" + std::to_string(i)));
  }
  ds.generator.kind = "keyword";
  ds.generator.seed = params.seed;
  ds.generator.params = {{"sizes", SizesJson(params.sizes)},
                         {"classes", params.classes},
                         {"distractors", params.distractors},
                         {"redundancy", params.redundancy},
                         {"length", params.length}};

  const std::size_t content = params.length - 2;
  for (SplitKind split : kAllSplits) {
    Rng rng(SplitSeed(params.seed, "keyword", split));
    auto& out = ds.split(split);
    const std::size_t n = SplitSize(params.sizes, split);
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      Observation obs;
      obs.label = static_cast<int>(rng.Below(params.classes));
      obs.tokens.assign(params.length, kPad);
      obs.tokens.front() = kBos;
      obs.tokens.back() = kEos;
      for (std::size_t t = 1; t <= content; ++t) {
        obs.tokens[t] = distractors[rng.Below(distractors.size())];
      }
      std::vector<int> evidence =
          DrawPositions(rng, 1, content, params.redundancy);
      for (int p : evidence) {
        obs.tokens[static_cast<std::size_t>(p)] =
            keywords[static_cast<std::size_t>(obs.label)];
      }
      obs.evidence = std::move(evidence);
      out.push_back(std::move(obs));
    }
  }
  return ds;
}

TokenDataset GeneratePaired(const PairedParams& params) {
  RequireSizes(params.sizes);
  if (params.entities < 2 || params.locations < 2) {
    throw ConfigError("paired task needs >= 2 entities and >= 2 locations");
  }
  if (params.statements < 1 || params.statements > params.entities) {
    throw ConfigError("statements must be in [1, entities]");
  }

  TokenDataset ds;
  ds.num_classes = params.locations;
  std::vector<int> entities, locations;
  for (std::size_t i = 0; i < params.entities; ++i) {
    entities.push_back(ds.vocabulary.Add("ent_" + std::to_string(i)));
  }
  for (std::size_t i = 0; i < params.locations; ++i) {
    locations.push_back(ds.vocabulary.Add("loc_" + std::to_string(i)));
  }
  const int in = ds.vocabulary.Add("in");
  ds.generator.kind = "paired";
  ds.generator.seed = params.seed;
  ds.generator.params = {{"sizes", SizesJson(params.sizes)},
                         {"entities", params.entities},
                         {"locations", params.locations},
                         {"statements", params.statements}};

  for (SplitKind split : kAllSplits) {
    Rng rng(SplitSeed(params.seed, "paired", split));
    auto& out = ds.split(split);
    const std::size_t n = SplitSize(params.sizes, split);
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::size_t> order(params.entities);
      std::iota(order.begin(), order.end(), std::size_t{0});
      rng.Shuffle(order);
      const std::size_t queried = rng.Below(params.statements);

      Observation obs;
      obs.tokens.push_back(kBos);
      for (std::size_t s = 0; s < params.statements; ++s) {
        if (s > 0) obs.tokens.push_back(kSep);
        const std::size_t loc = rng.Below(params.locations);
        obs.tokens.push_back(entities[order[s]]);
        obs.tokens.push_back(in);
        if (s == queried) {
          obs.label = static_cast<int>(loc);
          obs.evidence = std::vector<int>{static_cast<int>(obs.tokens.size())};
        }
        obs.tokens.push_back(locations[loc]);
      }
      obs.tokens.push_back(kEos);
      obs.aux_tokens = std::vector<int>{kBos, entities[order[queried]], kEos};
      out.push_back(std::move(obs));
    }
  }
  return ds;
}

TokenDataset GenerateLeakageProbe(const LeakageParams& params) {
  RequireSizes(params.sizes);
  if (params.length < 4) throw ConfigError("leakage task needs length >= 4");
  if (params.distractors < 1) throw ConfigError("need >= 1 distractor token");
  for (double r : {params.keyword_rate, params.probe_rate_class0,
                   params.probe_rate_class1}) {
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("rates must be in [0, 1]");
  }

  TokenDataset ds;
  ds.num_classes = 2;
  const std::array<int, 2> keywords = {ds.vocabulary.Add("key_0"),
                                       ds.vocabulary.Add("key_1")};
  const int probe = ds.vocabulary.Add("probe");
  std::vector<int> distractors;
  for (std::size_t i = 0; i < params.distractors; ++i) {
    distractors.push_back(ds.vocabulary.Add("w_" + std::to_string(i)));
  }
  ds.generator.kind = "leakage";
  ds.generator.seed = params.seed;
  ds.generator.params = {{"sizes", SizesJson(params.sizes)},
                         {"distractors", params.distractors},
                         {"length", params.length},
                         {"keyword_rate", params.keyword_rate},
                         {"probe_rate_class0", params.probe_rate_class0},
                         {"probe_rate_class1", params.probe_rate_class1}};

  const std::size_t content = params.length - 2;
  for (SplitKind split : kAllSplits) {
    Rng rng(SplitSeed(params.seed, "leakage", split));
    auto& out = ds.split(split);
    const std::size_t n = SplitSize(params.sizes, split);
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      Observation obs;
      obs.label = static_cast<int>(rng.Below(2));
      obs.tokens.assign(params.length, kPad);
      obs.tokens.front() = kBos;
      obs.tokens.back() = kEos;
      for (std::size_t t = 1; t <= content; ++t) {
        obs.tokens[t] = distractors[rng.Below(distractors.size())];
      }
      const std::vector<int> slots = DrawPositions(rng, 1, content, 2);
      const bool has_keyword = rng.Uniform() < params.keyword_rate;
      const double probe_rate =
          obs.label == 0 ? params.probe_rate_class0 : params.probe_rate_class1;
      const bool has_probe = rng.Uniform() < probe_rate;
      obs.evidence = std::vector<int>{};
      if (has_keyword) {
        obs.tokens[static_cast<std::size_t>(slots[0])] =
            keywords[static_cast<std::size_t>(obs.label)];
        obs.evidence->push_back(slots[0]);
      }
      if (has_probe) obs.tokens[static_cast<std::size_t>(slots[1])] = probe;
      out.push_back(std::move(obs));
    }
  }
  return ds;
}

namespace {

Json TokensJson(const std::vector<int>& ids, const Vocabulary& vocab) {
  Json arr = Json::array();
  for (int id : ids) arr.push_back(vocab.Token(id));
  return arr;
}

}  // namespace

std::string SplitToJsonl(const TokenDataset& dataset, SplitKind split) {
  std::string out;
  for (const Observation& obs : dataset.split(split)) {
    Json record;
    record["tokens"] = TokensJson(obs.tokens, dataset.vocabulary);
    record["aux_tokens"] = obs.aux_tokens
                               ? TokensJson(*obs.aux_tokens, dataset.vocabulary)
                               : Json(nullptr);
    record["label"] = obs.label;
    record["evidence"] = obs.evidence ? Json(*obs.evidence) : Json(nullptr);
    out += record.dump();
    out += '\n';
  }
  return out;
}

Json MetadataJson(const TokenDataset& dataset) {
  Json meta;
  meta["format_version"] = 1;
  meta["generator"] = dataset.generator.kind;
  meta["params"] = dataset.generator.params;
  meta["seed"] = dataset.generator.seed;
  meta["num_classes"] = dataset.num_classes;
  meta["vocabulary"] = dataset.vocabulary.tokens();
  Json files;
  for (SplitKind split : kAllSplits) {
    files[std::string(SplitName(split))] = std::string(SplitName(split)) + ".jsonl";
  }
  meta["splits"] = files;
  return meta;
}

std::string DatasetHash(const TokenDataset& dataset) {
  Sha256 h;
  h.Update(MetadataJson(dataset).dump());
  for (SplitKind split : kAllSplits) {
    h.Update("\n");
    h.Update(SplitToJsonl(dataset, split));
  }
  return h.HexDigest();
}

void SaveDataset(const TokenDataset& dataset,
                 const std::filesystem::path& directory) {
  std::filesystem::create_directories(directory);
  WriteFile(directory / "metadata.json", MetadataJson(dataset).dump(2) + "\n");
  for (SplitKind split : kAllSplits) {
    WriteFile(directory / (std::string(SplitName(split)) + ".jsonl"),
              SplitToJsonl(dataset, split));
  }
}

namespace {

std::vector<int> ParseTokens(const Json& value, const Vocabulary& vocab,
                             std::string_view field, std::size_t line) {
  if (!value.is_array()) {
    throw ParseError(std::string(field) + " must be an array", line);
  }
  std::vector<int> ids;
  ids.reserve(value.size());
  for (const Json& token : value) {
    if (!token.is_string()) {
      throw ParseError(std::string(field) + " entries must be strings", line);
    }
    const auto id = vocab.Find(token.get<std::string>());
    if (!id) {
      throw ParseError("unknown token '" + token.get<std::string>() + "'",
                       line);
    }
    ids.push_back(*id);
  }
  return ids;
}

}  // namespace

std::vector<Observation> ParseJsonl(std::string_view text,
                                    const Vocabulary& vocabulary,
                                    std::size_t num_classes) {
  std::vector<Observation> out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;

    Json record;
    try {
      record = Json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(e.what(), line_no);
    }
    if (!record.is_object()) throw ParseError("record is not an object", line_no);
    for (const auto& [key, value] : record.items()) {
      if (key != "tokens" && key != "aux_tokens" && key != "label" &&
          key != "evidence") {
        throw ParseError("unknown field '" + key + "'", line_no);
      }
    }
    if (!record.contains("tokens")) throw ParseError("missing tokens", line_no);
    if (!record.contains("label") || !record["label"].is_number_integer()) {
      throw ParseError("missing or non-integer label", line_no);
    }

    Observation obs;
    obs.tokens = ParseTokens(record["tokens"], vocabulary, "tokens", line_no);
    if (record.contains("aux_tokens") && !record["aux_tokens"].is_null()) {
      obs.aux_tokens =
          ParseTokens(record["aux_tokens"], vocabulary, "aux_tokens", line_no);
    }
    obs.label = record["label"].get<int>();
    if (record.contains("evidence") && !record["evidence"].is_null()) {
      try {
        obs.evidence = record["evidence"].get<std::vector<int>>();
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("evidence: ") + e.what(), line_no);
      }
    }
    try {
      CheckObservation(obs, vocabulary.size(), num_classes);
    } catch (const ContractViolation& e) {
      throw ParseError(e.what(), line_no);
    }
    out.push_back(std::move(obs));
  }
  return out;
}

TokenDataset LoadDataset(const std::filesystem::path& directory) {
  const std::filesystem::path meta_path = directory / "metadata.json";
  Json meta;
  try {
    meta = Json::parse(ReadFile(meta_path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(meta_path.string() + ": " + e.what());
  }
  TokenDataset ds;
  try {
    ds.vocabulary = Vocabulary::FromTokens(
        meta.at("vocabulary").get<std::vector<std::string>>());
    ds.num_classes = meta.at("num_classes").get<std::size_t>();
    ds.generator.kind = meta.at("generator").get<std::string>();
    ds.generator.params = meta.at("params");
    ds.generator.seed = meta.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(meta_path.string() + ": " + e.what());
  }
  if (ds.num_classes < 2) throw ParseError("num_classes must be >= 2");
  for (SplitKind split : kAllSplits) {
    const auto path = directory / (std::string(SplitName(split)) + ".jsonl");
    try {
      ds.split(split) =
          ParseJsonl(ReadFile(path), ds.vocabulary, ds.num_classes);
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ": " + e.what());
    }
  }
  return ds;
}

TabularSplit SampleTabular(const TabularDataset& dataset, std::size_t n,
                           std::uint64_t seed) {
  Rng rng(seed);
  TabularSplit out;
  out.features.resize(n);
  out.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = rng.Normal();
    const double eta = rng.Normal();
    for (std::size_t j = 0; j < kTabularFeatures; ++j) {
      const double eps = rng.Normal();
      out.features[i][j] =
          dataset.a[j] * z / 10.0 + dataset.d[j] * eta + eps / 10.0;
    }
    out.labels[i] = z > 0.0 ? 1 : 0;
  }
  return out;
}

TabularDataset GenerateTabular(const SplitSizes& sizes, std::uint64_t seed) {
  RequireSizes(sizes);
  TabularDataset ds;
  ds.seed = seed;
  Rng rng(DeriveSeed({seed, HashLabel("tabular")}));
  for (std::size_t j = 0; j < kTabularFeatures; ++j) {
    ds.a[j] = j < kTabularInformative ? rng.Normal() : 0.0;
  }
  for (std::size_t j = 0; j < kTabularFeatures; ++j) ds.d[j] = rng.Normal();
  for (SplitKind split : kAllSplits) {
    ds.splits[static_cast<std::size_t>(split)] = SampleTabular(
        ds, SplitSize(sizes, split), SplitSeed(seed, "tabular", split));
  }
  return ds;
}

namespace {

std::string TabularJsonl(const TabularSplit& split) {
  std::string out;
  for (std::size_t i = 0; i < split.size(); ++i) {
    Json record;
    record["features"] = split.features[i];
    record["label"] = split.labels[i];
    out += record.dump();
    out += '\n';
  }
  return out;
}

Json TabularMetadata(const TabularDataset& dataset) {
  Json meta;
  meta["format_version"] = 1;
  meta["generator"] = "tabular";
  meta["seed"] = dataset.seed;
  meta["features"] = kTabularFeatures;
  meta["informative"] = kTabularInformative;
  meta["a"] = dataset.a;
  meta["d"] = dataset.d;
  Json sizes;
  for (SplitKind split : kAllSplits) {
    sizes[std::string(SplitName(split))] = dataset.split(split).size();
  }
  meta["sizes"] = sizes;
  return meta;
}

}  // namespace

void SaveTabular(const TabularDataset& dataset,
                 const std::filesystem::path& directory) {
  std::filesystem::create_directories(directory);
  WriteFile(directory / "metadata.json",
            TabularMetadata(dataset).dump(2) + "\n");
  for (SplitKind split : kAllSplits) {
    WriteFile(directory / (std::string(SplitName(split)) + ".jsonl"),
              TabularJsonl(dataset.split(split)));
  }
}

std::string TabularHash(const TabularDataset& dataset) {
  Sha256 h;
  h.Update(TabularMetadata(dataset).dump());
  for (SplitKind split : kAllSplits) {
    h.Update("\n");
    h.Update(TabularJsonl(dataset.split(split)));
  }
  return h.HexDigest();
}

}  // namespace roarbench::data
