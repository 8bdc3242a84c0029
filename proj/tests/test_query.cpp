#include <doctest.h>

#include <set>

#include "fixtures.hpp"
#include "sinr/common.hpp"
#include "sinr/engine.hpp"

using namespace sinr;
using sinr::testing::TempDir;
using sinr::testing::make_paragraph_doc;

namespace {

EngineConfig brute_config() {
    EngineConfig cfg;
    cfg.backend = IndexBackend::kBruteForce;
    return cfg;
}

}  // namespace

TEST_CASE("query against an empty index returns empty, not an error") {
    TempDir tmp("q_empty");
    Engine engine = Engine::build({}, brute_config(), tmp.path());
    auto res = engine.retrieve({.text = "anything", .k = 20});
    CHECK(res.parents.empty());
    CHECK(res.trace.hits.empty());
    CHECK(res.total_context_tokens == 0);
}

TEST_CASE("sibling hits consolidate to one parent") {
    // One 350-token paragraph: 4 search chunks, 1 parent.
    TempDir tmp("q_consol");
    Engine engine =
        Engine::build({make_paragraph_doc("d.txt", {350})}, brute_config(), tmp.path());
    auto res = engine.retrieve({.text = "p0w10 p0w11 p0w12", .k = 4});
    CHECK(res.trace.hits.size() == 4);
    REQUIRE(res.parents.size() == 1);  // 4 -> 1 consolidation
    CHECK(res.parents[0].span == TokenSpan{0, 350});
    for (const auto& h : res.trace.hits)
        CHECK(h.parent_id == res.parents[0].retrieve_id);
}

TEST_CASE("dedup law and parent ordering over a multi-doc corpus") {
    TempDir tmp("q_dedup");
    std::vector<Document> corpus;
    for (int d = 0; d < 6; ++d)
        corpus.push_back(make_paragraph_doc("doc" + std::to_string(d) + ".txt",
                                            {400, 350, 500}));
    Engine engine = Engine::build(corpus, brute_config(), tmp.path());
    for (const char* q : {"p0w1 p1w2", "p2w40 p2w41 p0w9", "p1w300"}) {
        auto res = engine.retrieve({.text = q, .k = 20});
        CHECK(res.parents.size() <= res.trace.hits.size());
        std::set<std::string> unique;
        for (const auto& p : res.parents) CHECK(unique.insert(p.retrieve_id).second);
        // Pre-cap aggregation is sorted by best child score, ties by id.
        for (std::size_t i = 0; i + 1 < res.trace.parents.size(); ++i) {
            const auto& a = res.trace.parents[i];
            const auto& b = res.trace.parents[i + 1];
            CHECK((a.best_child_score > b.best_child_score ||
                   (a.best_child_score == b.best_child_score &&
                    a.retrieve_id < b.retrieve_id)));
        }
        // Subset: every returned parent traceable to >= 1 hit.
        std::set<std::string> hit_parents;
        for (const auto& h : res.trace.hits) hit_parents.insert(h.parent_id);
        for (const auto& p : res.parents) CHECK(hit_parents.count(p.retrieve_id) == 1);
    }
}

TEST_CASE("max_parents caps the result") {
    TempDir tmp("q_cap");
    std::vector<Document> corpus;
    for (int d = 0; d < 5; ++d)
        corpus.push_back(make_paragraph_doc("doc" + std::to_string(d) + ".txt", {300}));
    Engine engine = Engine::build(corpus, brute_config(), tmp.path());
    auto res = engine.retrieve({.text = "p0w5 p0w6", .k = 20, .max_parents = 2u});
    CHECK(res.parents.size() <= 2);
    CHECK(res.trace.parents.size() >= res.parents.size());  // trace is pre-cap
}

TEST_CASE("context budget admits greedily and flags the over-budget case") {
    TempDir tmp("q_budget");
    // 700 + 600 tokens exceeds max_retrieve when merged, so two parents.
    Engine engine = Engine::build({make_paragraph_doc("a.txt", {700, 600})},
                                  brute_config(), tmp.path());
    // Budget covers the best parent only.
    auto res = engine.retrieve(
        {.text = "p0w1 p1w1", .k = 20, .max_context_tokens = 750u});
    CHECK(res.total_context_tokens <= 750);
    CHECK_FALSE(res.budget_exceeded_by_single_parent);
    CHECK(!res.parents.empty());

    // Budget smaller than any single parent: the best one is returned flagged.
    auto tiny = engine.retrieve(
        {.text = "p0w1 p1w1", .k = 20, .max_context_tokens = 10u});
    REQUIRE(tiny.parents.size() == 1);
    CHECK(tiny.budget_exceeded_by_single_parent);
    CHECK(tiny.total_context_tokens > 10);
}

TEST_CASE("invalid requests are contract errors") {
    TempDir tmp("q_bad");
    Engine engine = Engine::build({}, brute_config(), tmp.path());
    CHECK_THROWS_AS(engine.retrieve({.text = "x", .k = 0}), ContractError);
    CHECK_THROWS_AS(engine.retrieve({.text = "x", .k = 5, .max_context_tokens = 0u}),
                    ContractError);
}

TEST_CASE("fingerprint mismatch is rejected with a dedicated error") {
    TempDir tmp("q_fp");
    Engine engine =
        Engine::build({make_paragraph_doc("a.txt", {200})}, brute_config(), tmp.path());
    LocalHashEmbedder other(128);  // different dim, different fingerprint
    CHECK_THROWS_AS(run_query({.text = "p0w1", .k = 5}, other, engine.index(),
                              engine.mapping(), engine.docs(), engine.manifest()),
                    FingerprintMismatch);
}

TEST_CASE("trace line record round trips; explain is stable") {
    TempDir tmp("q_trace");
    Engine engine = Engine::build({make_paragraph_doc("a.txt", {350})},
                                  brute_config(), tmp.path());
    auto res = engine.retrieve({.text = "p0w2 p0w3", .k = 4});
    const std::string line = trace_to_json_line(res.trace);
    QueryTrace back = trace_from_json_line(line);
    CHECK(trace_to_json_line(back) == line);
    CHECK(explain(back) == explain(res.trace));

    QueryTrace empty;
    CHECK(explain(empty).find("hits: 0") != std::string::npos);
}

TEST_CASE("identical request twice gives identical results") {
    TempDir tmp("q_det");
    std::vector<Document> corpus;
    for (int d = 0; d < 4; ++d)
        corpus.push_back(make_paragraph_doc("doc" + std::to_string(d) + ".txt",
                                            {300, 250}));
    Engine engine = Engine::build(corpus, brute_config(), tmp.path());
    auto a = engine.retrieve({.text = "p1w7 p0w8", .k = 10});
    auto b = engine.retrieve({.text = "p1w7 p0w8", .k = 10});
    REQUIRE(a.parents.size() == b.parents.size());
    for (std::size_t i = 0; i < a.parents.size(); ++i)
        CHECK(a.parents[i].retrieve_id == b.parents[i].retrieve_id);
    CHECK(trace_to_json_line(a.trace, false) == trace_to_json_line(b.trace, false));
}
