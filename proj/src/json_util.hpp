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

// JSON helpers shared by the loaders, the prediction files and the wire
// protocols. Private to the library.

#include <string>

#include "json.hpp"
#include "sktod/corpus.hpp"
#include "sktod/error.hpp"

namespace sktod {

// Ids in the release are integers in labels and strings in knowledge.json.
inline std::string json_id(const nlohmann::ordered_json& node,
                           const std::string& where) {
  if (node.is_string()) return node.get<std::string>();
  if (node.is_number_integer()) return std::to_string(node.get<long long>());
  throw DataError(where + ": id must be a string or integer");
}

inline nlohmann::ordered_json id_to_json(const std::string& id) {
  bool numeric = !id.empty() && id.size() < 18 &&
                 id.find_first_not_of("0123456789") == std::string::npos &&
                 (id == "0" || id[0] != '0');
  if (numeric) return std::stoll(id);
  return id;
}

inline nlohmann::ordered_json ref_to_json(const SnippetRef& ref) {
  return {{"domain", std::string(to_string(ref.domain))},
          {"entity_id", id_to_json(ref.entity_id)},
          {"doc_type", "review"},
          {"doc_id", id_to_json(ref.review_id)},
          {"sent_id", id_to_json(ref.sentence_id)}};
}

inline SnippetRef ref_from_json(const nlohmann::ordered_json& node,
                                const std::string& where) {
  if (!node.is_object() || !node.contains("domain") ||
      !node.contains("entity_id")) {
    throw DataError(where + ": malformed snippet reference");
  }
  SnippetRef ref;
  ref.domain = parse_domain(node["domain"].get<std::string>());
  ref.entity_id = json_id(node["entity_id"], where);
  ref.review_id =
      json_id(node.contains("doc_id") ? node["doc_id"] : node.at("review_id"),
              where);
  ref.sentence_id = json_id(
      node.contains("sent_id") ? node["sent_id"] : node.at("sentence_id"),
      where);
  return ref;
}

inline nlohmann::ordered_json context_to_json(const DialogueContext& context) {
  nlohmann::ordered_json turns = nlohmann::ordered_json::array();
  for (const auto& u : context.utterances) {
    turns.push_back({{"speaker", std::string(to_string(u.speaker))},
                     {"text", u.text}});
  }
  return turns;
}

}  // namespace sktod
