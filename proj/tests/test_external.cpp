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

#include "doctest.h"
#include "mock_service.hpp"
#include "sktod/absa.hpp"
#include "sktod/detect.hpp"
#include "sktod/error.hpp"
#include "sktod/external.hpp"
#include "sktod/generate.hpp"
#include "sktod/select.hpp"
#include "synthetic.hpp"

using namespace sktod;
using nlohmann::json;

namespace {

EndpointConfig endpoint(const std::string& url) {
  EndpointConfig c;
  c.url = url;
  c.timeout = std::chrono::milliseconds(2000);
  c.max_retries = 0;
  c.retry_backoff = std::chrono::milliseconds(1);
  return c;
}

DialogueContext request(const std::string& text) {
  DialogueContext c;
  c.instance_id = "e-1";
  c.utterances.push_back({Speaker::kUser, text, 0});
  return c;
}

}  // namespace

TEST_CASE("endpoint url validation") {
  CHECK_THROWS_AS(JsonServiceClient(endpoint("localhost:80")), UsageError);
  CHECK_THROWS_AS(JsonServiceClient(endpoint("https://example.com/x")), UsageError);
  CHECK_NOTHROW(JsonServiceClient(endpoint("http://127.0.0.1:9")));
}

TEST_CASE("post and batch round trips") {
  testing::MockService mock([](const json& body) { return json{{"echo", body["n"]}}; });
  EndpointConfig config = endpoint(mock.url("/score"));
  config.batch_size = 3;
  config.max_in_flight = 2;
  JsonServiceClient client(config);
  CHECK(client.post(json{{"n", 5}})["echo"] == 5);

  std::vector<json> bodies;
  for (int i = 0; i < 10; ++i) bodies.push_back(json{{"n", i}});
  auto replies = client.post_all(bodies);
  REQUIRE(replies.size() == 10);
  for (int i = 0; i < 10; ++i) CHECK(replies[i]["echo"] == i);
  CHECK(mock.batches() == 4);
  CHECK(client.post_all({}).empty());
}

TEST_CASE("transport and protocol failures") {
  testing::MockService mock([](const json&) { return json::object(); });
  JsonServiceClient client(endpoint(mock.url()));

  mock.fail_with(503);
  try {
    client.post(json::object());
    FAIL("expected TransportError");
  } catch (const TransportError& e) {
    CHECK_FALSE(e.connection_refused());
  }
  mock.fail_with(0);
  mock.reply_raw("not json");
  CHECK_THROWS_AS(client.post(json::object()), ProtocolError);
  mock.reply_raw("[1]");
  CHECK_THROWS_AS(client.post_all({json::object(), json::object()}), ProtocolError);

  JsonServiceClient nowhere(endpoint("http://127.0.0.1:" + std::to_string(testing::unused_port())));
  try {
    nowhere.post(json::object());
    FAIL("expected TransportError");
  } catch (const TransportError& e) {
    CHECK(e.connection_refused());
  }
}

TEST_CASE("failed posts are retried") {
  testing::MockService mock([](const json&) { return json{{"ok", true}}; });
  EndpointConfig config = endpoint(mock.url());
  config.max_retries = 2;
  JsonServiceClient client(config);
  mock.fail_with(500);
  CHECK_THROWS_AS(client.post(json::object()), TransportError);
  CHECK(mock.requests() == 3);
  mock.fail_with(0);
  CHECK(client.post(json::object())["ok"] == true);
}

TEST_CASE("external detector") {
  testing::MockService mock([](const json& body) {
    CHECK(body["task"] == "ktd");
    std::string text = body["context"].back()["text"];
    return json{{"logit", text.find("wifi") != std::string::npos ? 2.5 : -1.0}};
  });
  JsonServiceClient client(endpoint(mock.url()));
  CHECK(external_detect(client, request("Is the wifi good?")).decision);
  CHECK_FALSE(external_detect(client, request("Book it.")).decision);
  CHECK(external_detect(client, request("Is the wifi good?"), 3.0).decision == false);

  testing::MockService broken([](const json&) { return json{{"score", 1}}; });
  JsonServiceClient bad(endpoint(broken.url()));
  CHECK_THROWS_AS(external_detect(bad, request("hi")), ProtocolError);
}

TEST_CASE("external scorer") {
  KnowledgeBase kb = testing::synthetic_kb();
  testing::MockService mock([](const json& body) {
    CHECK(body["task"] == "ks");
    std::string snippet = body["snippet"];
    return json{{"logit", snippet.find("wifi") != std::string::npos ? 1.0 : -1.0}};
  });
  EndpointConfig config = endpoint(mock.url());
  config.batch_size = 4;
  JsonServiceClient client(config);
  auto scorer = make_external_scorer(client, kb);
  CHECK(scorer->kind() == ScorerKind::kExternal);
  auto candidates = candidate_snippets(kb, {{Domain::kHotel, "11"}});
  auto scores = scorer->score(request("wifi?"), candidates);
  REQUIRE(scores.size() == candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    bool wifi = kb.snippets()[candidates[i]].text.find("wifi") != std::string::npos;
    CHECK(scores[i] == (wifi ? 1.0 : -1.0));
  }
  CHECK(external_score(client, request("wifi?"), "Great wifi.") == 1.0);
}

TEST_CASE("external tagger") {
  KnowledgeBase kb = testing::synthetic_kb();
  testing::MockService mock([](const json& body) {
    std::string s = body["sentence"];
    if (s.find("wifi") != std::string::npos) return json{{"aspect", "wifi"}, {"polarity", "positive"}};
    return json{{"aspect", ""}, {"polarity", "none"}};
  });
  JsonServiceClient client(endpoint(mock.url()));
  const KnowledgeSnippet* wifi = nullptr;
  const KnowledgeSnippet* other = nullptr;
  for (const auto& s : kb.snippets()) {
    if (!wifi && s.text.find("wifi") != std::string::npos) wifi = &s;
    if (!other && s.text.find("wifi") == std::string::npos) other = &s;
  }
  SentimentAnnotation a = external_tag(client, *wifi);
  CHECK(a.polarity == Polarity::kPositive);
  CHECK(a.aspect_term == "wifi");
  CHECK(a.ref == wifi->ref);
  SentimentAnnotation b = external_tag(client, *other);
  CHECK(b.polarity == Polarity::kNone);
  CHECK_FALSE(b.aspect_term.has_value());

  auto all = external_tag_all(client, {wifi, other, wifi});
  REQUIRE(all.size() == 3);
  CHECK(all[2].ref == wifi->ref);

  testing::MockService broken([](const json&) { return json{{"aspect", ""}, {"polarity", "positive"}}; });
  JsonServiceClient bad(endpoint(broken.url()));
  CHECK_THROWS_AS(external_tag(bad, *wifi), ProtocolError);
}

TEST_CASE("external generator") {
  KnowledgeBase kb = testing::synthetic_kb();
  testing::MockService mock([](const json& body) {
    return json{{"response", "Guests said: " + body["snippets"][0].get<std::string>()}};
  });
  JsonServiceClient client(endpoint(mock.url()));
  SnippetSelection selection;
  const auto& s = kb.snippets()[0];
  selection.selected.push_back({s.ref, 1.0});
  AnnotationMap annotations = {{s.ref, SentimentAnnotation{s.ref, std::nullopt, Polarity::kNone}}};
  GenerationInput input = build_generation_input(request("How is it?"), selection, annotations, kb, false);
  Response r = external_generate(client, input);
  CHECK(r.text == "Guests said: " + s.text);
  REQUIRE(r.provenance.size() == 1);
  CHECK(r.provenance[0].ref == s.ref);

  testing::MockService empty([](const json&) { return json{{"response", ""}}; });
  JsonServiceClient bad(endpoint(empty.url()));
  CHECK_THROWS_AS(external_generate(bad, input), ProtocolError);
}
