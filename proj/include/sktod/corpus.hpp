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

#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace sktod {

enum class Speaker { kUser, kSystem };
enum class Domain { kHotel, kRestaurant };

std::string_view to_string(Speaker speaker);  // "U" / "S"
std::string_view to_string(Domain domain);    // "hotel" / "restaurant"
Domain parse_domain(std::string_view text);   // throws DataError

struct Utterance {
  Speaker speaker = Speaker::kUser;
  std::string text;
  int turn_index = 0;
};

// Alternating user/system turns ending in the user request being answered.
struct DialogueContext {
  std::string instance_id;
  std::vector<Utterance> utterances;

  // Last utterance; throws PreconditionError unless it is a user turn.
  const Utterance& last_user_turn() const;
  // System turn immediately before the final user turn, if any.
  const Utterance* previous_system_turn() const;
};

// Validates the context invariants; throws DataError.
void validate_context(const DialogueContext& context);

// Addresses one review sentence. Ordering is lexicographic over
// (domain, entity_id, review_id, sentence_id) and is the engine-wide
// tie-break for equal scores.
struct SnippetRef {
  Domain domain = Domain::kHotel;
  std::string entity_id;
  std::string review_id;
  std::string sentence_id;

  auto operator<=>(const SnippetRef&) const = default;
  bool operator==(const SnippetRef&) const = default;
};

std::string to_string(const SnippetRef& ref);  // "hotel/11/0/3"

struct EntityKey {
  Domain domain = Domain::kHotel;
  std::string entity_id;

  auto operator<=>(const EntityKey&) const = default;
  bool operator==(const EntityKey&) const = default;
};

inline EntityKey entity_of(const SnippetRef& ref) {
  return {ref.domain, ref.entity_id};
}

// A snippet reference with a relevance score. Rankings sort by descending
// score, ties broken by ascending ref.
struct ScoredSnippet {
  SnippetRef ref;
  double score = 0.0;
};

void sort_by_score(std::vector<ScoredSnippet>& scored);

struct KnowledgeSnippet {
  SnippetRef ref;
  std::string text;
};

struct Entity {
  Domain domain = Domain::kHotel;
  std::string entity_id;
  std::string name;

  EntityKey key() const { return {domain, entity_id}; }
};

struct Review {
  std::string review_id;
  std::vector<std::size_t> snippets;  // indices into KnowledgeBase::snippets()
};

// Entities, their reviews and review sentences. Immutable after loading;
// snippets are addressed either by SnippetRef or by a dense index in file
// order.
class KnowledgeBase {
 public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  KnowledgeBase() = default;

  // Appends an entity; throws IntegrityError on a duplicate key.
  void add_entity(Entity entity);
  // Appends a review with its sentences (in order) to an existing entity.
  void add_review(const EntityKey& entity, std::string review_id,
                  const std::vector<std::pair<std::string, std::string>>&
                      sentences);

  const std::vector<Entity>& entities() const { return entities_; }
  const std::vector<KnowledgeSnippet>& snippets() const { return snippets_; }
  const std::vector<Review>& reviews(std::size_t entity_index) const {
    return reviews_[entity_index];
  }

  std::size_t entity_count() const { return entities_.size(); }
  std::size_t review_count() const;
  std::size_t snippet_count() const { return snippets_.size(); }

  std::size_t find_entity(const EntityKey& key) const;
  std::size_t find_snippet(const SnippetRef& ref) const;
  const Entity& entity(const EntityKey& key) const;  // throws NotFoundError
  const KnowledgeSnippet& snippet(const SnippetRef& ref) const;

  // Snippet indices of one entity, in review/sentence order.
  std::vector<std::size_t> entity_snippets(std::size_t entity_index) const;

 private:
  std::vector<Entity> entities_;
  std::vector<std::vector<Review>> reviews_;
  std::vector<KnowledgeSnippet> snippets_;
  std::map<EntityKey, std::size_t> entity_index_;
  std::unordered_map<std::string, std::size_t> snippet_index_;
};

struct InstanceLabel {
  bool target = false;
  std::vector<SnippetRef> gold_snippets;  // sorted, unique
  std::optional<std::string> reference_response;

  std::vector<EntityKey> gold_entities() const;  // sorted, unique
};

struct Instance {
  DialogueContext context;
  InstanceLabel label;
};

enum class SplitName { kTrain, kVal, kTest };
std::string_view to_string(SplitName name);
SplitName parse_split_name(std::string_view text);  // throws UsageError

struct Split {
  SplitName name = SplitName::kTrain;
  std::vector<Instance> instances;

  std::size_t target_count() const;
};

// Loads `<dir>/knowledge.json`, or the file itself when `path` is a file.
KnowledgeBase load_knowledge_base(const std::filesystem::path& path);
KnowledgeBase parse_knowledge_base(std::string_view json,
                                   const std::string& origin = "knowledge");

// Loads `<data_dir>/<name>/logs.json` and `<data_dir>/<name>/labels.json`.
Split load_split(const std::filesystem::path& data_dir, SplitName name);
Split parse_split(std::string_view logs_json, std::string_view labels_json,
                  SplitName name);

std::string serialize_knowledge_base(const KnowledgeBase& kb);
std::string serialize_logs(const Split& split);
std::string serialize_labels(const Split& split);

// Writes knowledge.json and <split>/{logs,labels}.json under `data_dir`.
void write_knowledge_base(const KnowledgeBase& kb,
                          const std::filesystem::path& data_dir);
void write_split(const Split& split, const std::filesystem::path& data_dir);

struct IntegrityReport {
  std::size_t instances = 0;
  std::size_t dangling_refs = 0;        // gold refs missing from the KB
  std::size_t label_violations = 0;     // target/gold/response mismatch
  std::vector<std::string> messages;    // first few problems, for humans

  bool ok() const { return dangling_refs == 0 && label_violations == 0; }
};

IntegrityReport check_integrity(const Split& split, const KnowledgeBase& kb);

struct CorpusStats {
  std::size_t instances = 0;
  std::size_t target_instances = 0;
  std::size_t multi_entity_instances = 0;
  double avg_snippets_per_instance = 0.0;  // over target instances
  double avg_tokens_per_snippet = 0.0;     // over gold snippets (needs KB)
  double avg_utterances_per_instance = 0.0;
  double avg_tokens_per_request = 0.0;
  double avg_tokens_per_response = 0.0;
};

// Split summary. Averages are over target instances; `kb` is optional and
// only needed for tokens per snippet.
CorpusStats corpus_stats(const Split& split, const KnowledgeBase* kb = nullptr);

}  // namespace sktod
