// Copyright 2026 The sktod Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sktod/corpus.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "json_util.hpp"
#include "sktod/error.hpp"
#include "sktod/text.hpp"

namespace sktod {

using ordered_json = nlohmann::ordered_json;

std::string_view to_string(Speaker speaker) {
  return speaker == Speaker::kUser ? "U" : "S";
}

std::string_view to_string(Domain domain) {
  return domain == Domain::kHotel ? "hotel" : "restaurant";
}

Domain parse_domain(std::string_view text) {
  if (text == "hotel") return Domain::kHotel;
  if (text == "restaurant") return Domain::kRestaurant;
  throw DataError("unknown domain '" + std::string(text) + "'");
}

std::string_view to_string(SplitName name) {
  switch (name) {
    case SplitName::kTrain: return "train";
    case SplitName::kVal: return "val";
    case SplitName::kTest: return "test";
  }
  return "train";
}

SplitName parse_split_name(std::string_view text) {
  if (text == "train") return SplitName::kTrain;
  if (text == "val" || text == "validation") return SplitName::kVal;
  if (text == "test") return SplitName::kTest;
  throw UsageError("unknown split '" + std::string(text) +
                   "' (expected train, val or test)");
}

std::string to_string(const SnippetRef& ref) {
  return std::string(to_string(ref.domain)) + "/" + ref.entity_id + "/" +
         ref.review_id + "/" + ref.sentence_id;
}

void sort_by_score(std::vector<ScoredSnippet>& scored) {
  std::sort(scored.begin(), scored.end(),
            [](const ScoredSnippet& a, const ScoredSnippet& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.ref < b.ref;
            });
}

const Utterance& DialogueContext::last_user_turn() const {
  if (utterances.empty() || utterances.back().speaker != Speaker::kUser) {
    throw PreconditionError("dialogue context '" + instance_id +
                            "' does not end with a user turn");
  }
  return utterances.back();
}

const Utterance* DialogueContext::previous_system_turn() const {
  if (utterances.size() < 2) return nullptr;
  const Utterance& prev = utterances[utterances.size() - 2];
  return prev.speaker == Speaker::kSystem ? &prev : nullptr;
}

void validate_context(const DialogueContext& context) {
  const auto& turns = context.utterances;
  if (turns.empty()) {
    throw DataError("instance '" + context.instance_id + "': empty dialogue");
  }
  for (std::size_t i = 0; i < turns.size(); ++i) {
    if (trim(turns[i].text).empty()) {
      throw DataError("instance '" + context.instance_id + "': turn " +
                      std::to_string(i) + " has empty text");
    }
    if (i > 0) {
      if (turns[i].speaker == turns[i - 1].speaker) {
        throw DataError("instance '" + context.instance_id + "': turns " +
                        std::to_string(i - 1) + " and " + std::to_string(i) +
                        " have the same speaker");
      }
      if (turns[i].turn_index <= turns[i - 1].turn_index) {
        throw DataError("instance '" + context.instance_id +
                        "': turn indices must increase");
      }
    }
  }
  if (turns.back().speaker != Speaker::kUser) {
    throw DataError("instance '" + context.instance_id +
                    "': last turn must be a user turn");
  }
}

// --- KnowledgeBase ---------------------------------------------------------

namespace {

std::string snippet_key(const SnippetRef& ref) {
  std::string key(to_string(ref.domain));
  key += '\x1f';
  key += ref.entity_id;
  key += '\x1f';
  key += ref.review_id;
  key += '\x1f';
  key += ref.sentence_id;
  return key;
}

}  // namespace

void KnowledgeBase::add_entity(Entity entity) {
  if (trim(entity.name).empty()) {
    throw DataError("entity " + std::string(to_string(entity.domain)) + "/" +
                    entity.entity_id + " has an empty name");
  }
  EntityKey key = entity.key();
  if (entity_index_.contains(key)) {
    throw IntegrityError("duplicate entity " +
                         std::string(to_string(key.domain)) + "/" +
                         key.entity_id);
  }
  entity_index_.emplace(key, entities_.size());
  entities_.push_back(std::move(entity));
  reviews_.emplace_back();
}

void KnowledgeBase::add_review(
    const EntityKey& entity, std::string review_id,
    const std::vector<std::pair<std::string, std::string>>& sentences) {
  std::size_t e = find_entity(entity);
  if (e == npos) {
    throw IntegrityError("review for unknown entity " + entity.entity_id);
  }
  for (const Review& existing : reviews_[e]) {
    if (existing.review_id == review_id) {
      throw IntegrityError("duplicate review " + entity.entity_id + "/" +
                           review_id);
    }
  }
  Review review;
  review.review_id = std::move(review_id);
  for (const auto& [sentence_id, text] : sentences) {
    SnippetRef ref{entity.domain, entity.entity_id, review.review_id,
                   sentence_id};
    if (trim(text).empty()) {
      throw DataError("snippet " + to_string(ref) + " has empty text");
    }
    auto [it, inserted] = snippet_index_.emplace(snippet_key(ref),
                                                 snippets_.size());
    if (!inserted) {
      throw IntegrityError("duplicate snippet " + to_string(ref));
    }
    review.snippets.push_back(snippets_.size());
    snippets_.push_back({std::move(ref), text});
  }
  reviews_[e].push_back(std::move(review));
}

std::size_t KnowledgeBase::review_count() const {
  std::size_t total = 0;
  for (const auto& r : reviews_) total += r.size();
  return total;
}

std::size_t KnowledgeBase::find_entity(const EntityKey& key) const {
  auto it = entity_index_.find(key);
  return it == entity_index_.end() ? npos : it->second;
}

std::size_t KnowledgeBase::find_snippet(const SnippetRef& ref) const {
  auto it = snippet_index_.find(snippet_key(ref));
  return it == snippet_index_.end() ? npos : it->second;
}

const Entity& KnowledgeBase::entity(const EntityKey& key) const {
  std::size_t i = find_entity(key);
  if (i == npos) {
    throw NotFoundError("unknown entity " + std::string(to_string(key.domain)) +
                        "/" + key.entity_id);
  }
  return entities_[i];
}

const KnowledgeSnippet& KnowledgeBase::snippet(const SnippetRef& ref) const {
  std::size_t i = find_snippet(ref);
  if (i == npos) throw NotFoundError("unknown snippet " + to_string(ref));
  return snippets_[i];
}

std::vector<std::size_t> KnowledgeBase::entity_snippets(
    std::size_t entity_index) const {
  std::vector<std::size_t> out;
  for (const Review& review : reviews_.at(entity_index)) {
    out.insert(out.end(), review.snippets.begin(), review.snippets.end());
  }
  return out;
}

std::vector<EntityKey> InstanceLabel::gold_entities() const {
  std::vector<EntityKey> out;
  for (const auto& ref : gold_snippets) out.push_back(entity_of(ref));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::size_t Split::target_count() const {
  return static_cast<std::size_t>(
      std::count_if(instances.begin(), instances.end(),
                    [](const Instance& i) { return i.label.target; }));
}

// --- Parsing ---------------------------------------------------------------

namespace {

ordered_json parse_document(std::string_view text, const std::string& origin) {
  try {
    return ordered_json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(origin, e.byte, e.what());
  }
}

// Reviews and sentences are keyed maps in the release; arrays are accepted
// and keyed by position.
template <typename Fn>
void for_each_keyed(const ordered_json& node, const std::string& where,
                    Fn&& fn) {
  if (node.is_object()) {
    for (const auto& [key, value] : node.items()) fn(key, value);
  } else if (node.is_array()) {
    for (std::size_t i = 0; i < node.size(); ++i) {
      fn(std::to_string(i), node[i]);
    }
  } else {
    throw DataError(where + ": expected an object or array");
  }
}

}  // namespace

KnowledgeBase parse_knowledge_base(std::string_view json,
                                   const std::string& origin) {
  ordered_json doc = parse_document(json, origin);
  if (!doc.is_object()) {
    throw DataError(origin + ": top level must be an object of domains");
  }
  KnowledgeBase kb;
  for (const auto& [domain_name, entities] : doc.items()) {
    if (domain_name != "hotel" && domain_name != "restaurant") {
      spdlog::warn("{}: skipping unsupported domain '{}'", origin, domain_name);
      continue;
    }
    Domain domain = parse_domain(domain_name);
    if (!entities.is_object()) {
      throw DataError(origin + ": domain '" + domain_name +
                      "' must map entity ids to entities");
    }
    for (const auto& [entity_id, body] : entities.items()) {
      std::string where = origin + ": " + domain_name + "/" + entity_id;
      if (!body.is_object() || !body.contains("name") ||
          !body["name"].is_string()) {
        throw DataError(where + ": entity needs a string 'name'");
      }
      kb.add_entity({domain, entity_id, body["name"].get<std::string>()});
      if (!body.contains("reviews")) continue;
      EntityKey key{domain, entity_id};
      for_each_keyed(body["reviews"], where + "/reviews",
                     [&](const std::string& review_id, const ordered_json& r) {
        std::string rwhere = where + "/reviews/" + review_id;
        if (!r.is_object() || !r.contains("sentences")) {
          throw DataError(rwhere + ": review needs 'sentences'");
        }
        std::vector<std::pair<std::string, std::string>> sentences;
        for_each_keyed(r["sentences"], rwhere + "/sentences",
                       [&](const std::string& sid, const ordered_json& s) {
          if (!s.is_string()) {
            throw DataError(rwhere + "/sentences/" + sid +
                            ": sentence must be a string");
          }
          sentences.emplace_back(sid, s.get<std::string>());
        });
        kb.add_review(key, review_id, sentences);
      });
    }
  }
  return kb;
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

Speaker parse_speaker(const ordered_json& node, const std::string& where) {
  if (!node.is_string()) throw DataError(where + ": speaker must be a string");
  std::string s = node.get<std::string>();
  if (s == "U" || s == "user" || s == "User") return Speaker::kUser;
  if (s == "S" || s == "system" || s == "System") return Speaker::kSystem;
  throw DataError(where + ": unknown speaker '" + s + "'");
}

std::optional<SnippetRef> parse_knowledge_ref(const ordered_json& item,
                                              const std::string& where,
                                              std::size_t& skipped) {
  if (!item.is_object()) throw DataError(where + ": knowledge item not object");
  if (item.contains("doc_type") && item["doc_type"] != "review") {
    ++skipped;
    return std::nullopt;
  }
  auto field = [&](std::initializer_list<const char*> names) -> std::string {
    for (const char* name : names) {
      if (item.contains(name)) return json_id(item[name], where);
    }
    throw DataError(where + ": knowledge item is missing '" +
                    std::string(*names.begin()) + "'");
  };
  if (!item.contains("domain") || !item["domain"].is_string()) {
    throw DataError(where + ": knowledge item needs a 'domain'");
  }
  SnippetRef ref;
  ref.domain = parse_domain(item["domain"].get<std::string>());
  ref.entity_id = field({"entity_id"});
  ref.review_id = field({"doc_id", "review_id"});
  ref.sentence_id = field({"sent_id", "sentence_id"});
  return ref;
}

}  // namespace

Split parse_split(std::string_view logs_json, std::string_view labels_json,
                  SplitName name) {
  const std::string split_name(to_string(name));
  ordered_json logs = parse_document(logs_json, split_name + "/logs.json");
  ordered_json labels = parse_document(labels_json, split_name + "/labels.json");
  if (!logs.is_array()) throw DataError(split_name + "/logs.json: not an array");
  if (!labels.is_array()) {
    throw DataError(split_name + "/labels.json: not an array");
  }
  if (logs.size() != labels.size()) {
    throw AlignmentError(split_name + ": logs has " +
                         std::to_string(logs.size()) + " dialogues but labels has " +
                         std::to_string(labels.size()) + " entries");
  }

  Split split;
  split.name = name;
  split.instances.reserve(logs.size());
  std::size_t skipped_refs = 0;
  for (std::size_t i = 0; i < logs.size(); ++i) {
    std::string where = split_name + "[" + std::to_string(i) + "]";
    Instance instance;
    instance.context.instance_id = split_name + "-" + std::to_string(i);
    if (!logs[i].is_array()) throw DataError(where + ": dialogue not an array");
    for (std::size_t t = 0; t < logs[i].size(); ++t) {
      const auto& turn = logs[i][t];
      if (!turn.is_object() || !turn.contains("text") ||
          !turn["text"].is_string() || !turn.contains("speaker")) {
        throw DataError(where + " turn " + std::to_string(t) +
                        ": needs 'speaker' and 'text'");
      }
      instance.context.utterances.push_back(
          {parse_speaker(turn["speaker"], where), turn["text"].get<std::string>(),
           static_cast<int>(t)});
    }
    validate_context(instance.context);

    const auto& label = labels[i];
    if (!label.is_object() || !label.contains("target") ||
        !label["target"].is_boolean()) {
      throw DataError(where + ": label needs a boolean 'target'");
    }
    instance.label.target = label["target"].get<bool>();
    if (label.contains("knowledge")) {
      if (!label["knowledge"].is_array()) {
        throw DataError(where + ": 'knowledge' must be an array");
      }
      for (const auto& item : label["knowledge"]) {
        if (auto ref = parse_knowledge_ref(item, where, skipped_refs)) {
          instance.label.gold_snippets.push_back(std::move(*ref));
        }
      }
    }
    auto& gold = instance.label.gold_snippets;
    std::sort(gold.begin(), gold.end());
    gold.erase(std::unique(gold.begin(), gold.end()), gold.end());
    if (label.contains("response")) {
      if (!label["response"].is_string()) {
        throw DataError(where + ": 'response' must be a string");
      }
      instance.label.reference_response = label["response"].get<std::string>();
    }
    split.instances.push_back(std::move(instance));
  }
  if (skipped_refs > 0) {
    spdlog::warn("{}: ignored {} non-review knowledge references", split_name,
                 skipped_refs);
  }
  return split;
}

KnowledgeBase load_knowledge_base(const std::filesystem::path& path) {
  std::filesystem::path file = path;
  if (std::filesystem::is_directory(path)) file = path / "knowledge.json";
  return parse_knowledge_base(read_file(file), file.string());
}

Split load_split(const std::filesystem::path& data_dir, SplitName name) {
  auto dir = data_dir / std::string(to_string(name));
  return parse_split(read_file(dir / "logs.json"), read_file(dir / "labels.json"),
                     name);
}

// --- Serialization ---------------------------------------------------------

std::string serialize_knowledge_base(const KnowledgeBase& kb) {
  ordered_json doc = ordered_json::object();
  for (std::size_t e = 0; e < kb.entity_count(); ++e) {
    const Entity& entity = kb.entities()[e];
    ordered_json reviews = ordered_json::object();
    for (const Review& review : kb.reviews(e)) {
      ordered_json sentences = ordered_json::object();
      for (std::size_t s : review.snippets) {
        const auto& snippet = kb.snippets()[s];
        sentences[snippet.ref.sentence_id] = snippet.text;
      }
      reviews[review.review_id] = {{"sentences", std::move(sentences)}};
    }
    doc[std::string(to_string(entity.domain))][entity.entity_id] = {
        {"name", entity.name}, {"reviews", std::move(reviews)}};
  }
  return doc.dump(1);
}

std::string serialize_logs(const Split& split) {
  ordered_json doc = ordered_json::array();
  for (const auto& instance : split.instances) {
    ordered_json dialogue = ordered_json::array();
    for (const auto& u : instance.context.utterances) {
      dialogue.push_back(
          {{"speaker", std::string(to_string(u.speaker))}, {"text", u.text}});
    }
    doc.push_back(std::move(dialogue));
  }
  return doc.dump(1);
}

std::string serialize_labels(const Split& split) {
  ordered_json doc = ordered_json::array();
  for (const auto& instance : split.instances) {
    ordered_json label = {{"target", instance.label.target}};
    if (!instance.label.gold_snippets.empty()) {
      ordered_json knowledge = ordered_json::array();
      for (const auto& ref : instance.label.gold_snippets) {
        knowledge.push_back(ref_to_json(ref));
      }
      label["knowledge"] = std::move(knowledge);
    }
    if (instance.label.reference_response) {
      label["response"] = *instance.label.reference_response;
    }
    doc.push_back(std::move(label));
  }
  return doc.dump(1);
}

void write_knowledge_base(const KnowledgeBase& kb,
                          const std::filesystem::path& data_dir) {
  write_file(data_dir / "knowledge.json", serialize_knowledge_base(kb));
}

void write_split(const Split& split, const std::filesystem::path& data_dir) {
  auto dir = data_dir / std::string(to_string(split.name));
  write_file(dir / "logs.json", serialize_logs(split));
  write_file(dir / "labels.json", serialize_labels(split));
}

// --- Checks and statistics -------------------------------------------------

IntegrityReport check_integrity(const Split& split, const KnowledgeBase& kb) {
  IntegrityReport report;
  report.instances = split.instances.size();
  auto note = [&](std::string message) {
    if (report.messages.size() < 20) report.messages.push_back(std::move(message));
  };
  for (const auto& instance : split.instances) {
    const auto& label = instance.label;
    const bool has_gold = !label.gold_snippets.empty();
    const bool has_response = label.reference_response.has_value();
    if (label.target != has_gold || label.target != has_response) {
      ++report.label_violations;
      note(instance.context.instance_id +
           ": target/knowledge/response presence disagree");
    }
    for (const auto& ref : label.gold_snippets) {
      if (kb.find_snippet(ref) == KnowledgeBase::npos) {
        ++report.dangling_refs;
        note(instance.context.instance_id + ": unknown snippet " +
             to_string(ref));
      }
    }
  }
  return report;
}

CorpusStats corpus_stats(const Split& split, const KnowledgeBase* kb) {
  CorpusStats stats;
  stats.instances = split.instances.size();
  double snippets = 0, utterances = 0, request_tokens = 0, response_tokens = 0;
  double snippet_tokens = 0, snippet_count = 0;
  for (const auto& instance : split.instances) {
    if (!instance.label.target) continue;
    ++stats.target_instances;
    snippets += static_cast<double>(instance.label.gold_snippets.size());
    utterances += static_cast<double>(instance.context.utterances.size());
    request_tokens += static_cast<double>(
        tokenize(instance.context.utterances.back().text).size());
    if (instance.label.reference_response) {
      response_tokens += static_cast<double>(
          tokenize(*instance.label.reference_response).size());
    }
    if (instance.label.gold_entities().size() > 1) {
      ++stats.multi_entity_instances;
    }
    if (kb != nullptr) {
      for (const auto& ref : instance.label.gold_snippets) {
        std::size_t s = kb->find_snippet(ref);
        if (s == KnowledgeBase::npos) continue;
        snippet_tokens +=
            static_cast<double>(tokenize(kb->snippets()[s].text).size());
        ++snippet_count;
      }
    }
  }
  if (stats.target_instances > 0) {
    const auto n = static_cast<double>(stats.target_instances);
    stats.avg_snippets_per_instance = snippets / n;
    stats.avg_utterances_per_instance = utterances / n;
    stats.avg_tokens_per_request = request_tokens / n;
    stats.avg_tokens_per_response = response_tokens / n;
  }
  if (snippet_count > 0) stats.avg_tokens_per_snippet = snippet_tokens / snippet_count;
  return stats;
}

}  // namespace sktod
