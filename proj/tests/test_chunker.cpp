#include <doctest.h>

#include <random>
#include <set>
#include <unordered_map>

#include "fixtures.hpp"
#include "sinr/chunk.hpp"
#include "sinr/common.hpp"
#include "sinr/text.hpp"

using namespace sinr;
using sinr::testing::make_paragraph_doc;
using sinr::testing::make_tokens;

namespace {
const ChunkingConfig kCfg;  // defaults: w=150 tau=100 min=64 max=1000 tail=32
}

TEST_CASE("retrieve chunks: greedy accumulation merges paragraphs") {
    // 300/400/500 with max 1000: 300+400 fit, adding 500 would overflow.
    auto doc = make_paragraph_doc("d", {300, 400, 500});
    auto chunks = create_retrieve_chunks(doc, kCfg);
    REQUIRE(chunks.size() == 2);
    CHECK(chunks[0].span == TokenSpan{0, 700});
    CHECK(chunks[1].span == TokenSpan{700, 1200});
    CHECK(chunks[0].ordinal == 0);
    CHECK(chunks[1].ordinal == 1);
}

TEST_CASE("retrieve chunks: empty document") {
    auto doc = make_document("d", "", "");
    CHECK(create_retrieve_chunks(doc, kCfg).empty());
}

TEST_CASE("retrieve chunks: oversized paragraph hard-split") {
    auto doc = make_paragraph_doc("d", {2500});
    auto chunks = create_retrieve_chunks(doc, kCfg);
    REQUIRE(chunks.size() == 3);
    CHECK(chunks[0].span.length() == 1000);
    CHECK(chunks[1].span.length() == 1000);
    CHECK(chunks[2].span.length() == 500);
}

TEST_CASE("retrieve chunks: partition and size bounds (property)") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> n_paras(1, 12);
    std::uniform_int_distribution<std::size_t> para_len(1, 1400);
    for (int trial = 0; trial < 60; ++trial) {
        std::vector<std::size_t> sizes(n_paras(rng));
        std::size_t total = 0;
        for (auto& s : sizes) total += (s = para_len(rng));
        auto doc = make_paragraph_doc("d", sizes);
        auto chunks = create_retrieve_chunks(doc, kCfg);
        REQUIRE(!chunks.empty());
        std::uint32_t cursor = 0;
        for (const auto& c : chunks) {
            CHECK(c.span.start == cursor);  // contiguous partition
            cursor = c.span.end;
            CHECK(c.span.length() <= kCfg.max_retrieve_tokens);
            if (chunks.size() > 1) CHECK(c.span.length() >= kCfg.min_retrieve_tokens);
        }
        CHECK(cursor == total);
    }
}

TEST_CASE("retrieve chunk text matches its span") {
    auto doc = make_paragraph_doc("d", {300, 400, 500});
    auto toks = tokenize(doc.text);
    for (const auto& c : create_retrieve_chunks(doc, kCfg))
        CHECK(c.text == detokenize(doc.text, toks, c.span));
}

TEST_CASE("search chunks: 350-token parent yields 4 windows") {
    auto doc = make_paragraph_doc("d", {350});
    auto parents = create_retrieve_chunks(doc, kCfg);
    REQUIRE(parents.size() == 1);
    auto wins = create_search_chunks(parents[0], kCfg);
    REQUIRE(wins.size() == 4);
    CHECK(wins[0].span == TokenSpan{0, 150});
    CHECK(wins[1].span == TokenSpan{100, 250});
    CHECK(wins[2].span == TokenSpan{200, 350});
    CHECK(wins[3].span == TokenSpan{300, 350});  // 50-token tail >= min_tail, kept
    for (std::size_t i = 0; i < wins.size(); ++i) {
        CHECK(wins[i].window_ordinal == i);
        CHECK(wins[i].retrieve_id == parents[0].retrieve_id);
    }
}

TEST_CASE("search chunks: parent of exactly w tokens is one window") {
    auto doc = make_paragraph_doc("d", {150});
    auto wins = create_search_chunks(create_retrieve_chunks(doc, kCfg)[0], kCfg);
    REQUIRE(wins.size() == 1);
    CHECK(wins[0].span == TokenSpan{0, 150});
}

TEST_CASE("search chunks: tiny parent keeps its only window") {
    RetrieveChunk parent;
    parent.doc_id = "d";
    parent.span = TokenSpan{0, 20};
    parent.text = make_tokens(20);
    parent.retrieve_id = make_chunk_id('r', "d", parent.span, parent.text);
    auto wins = create_search_chunks(parent, kCfg);
    REQUIRE(wins.size() == 1);
    CHECK(wins[0].span == TokenSpan{0, 20});
}

TEST_CASE("search chunks: coverage and overlap (property)") {
    std::mt19937_64 rng(23);
    std::uniform_int_distribution<std::uint32_t> len(1, 1000);
    for (int trial = 0; trial < 200; ++trial) {
        const std::uint32_t n = len(rng);
        RetrieveChunk parent;
        parent.doc_id = "d";
        parent.span = TokenSpan{0, n};
        parent.text = make_tokens(n);
        parent.retrieve_id = make_chunk_id('r', "d", parent.span, parent.text);
        auto wins = create_search_chunks(parent, kCfg);
        REQUIRE(!wins.empty());
        // Coverage: every parent token in >= 1 window.
        std::uint32_t covered = 0;
        for (const auto& w : wins) {
            CHECK(parent.span.contains(w.span));
            CHECK(w.span.length() <= kCfg.window_tokens);
            covered = std::max(covered, w.span.end);
            CHECK(w.span.start <= covered);  // no gaps
        }
        CHECK(covered == n);
        // Overlap: exactly w - tau between consecutive full windows.
        for (std::size_t i = 0; i + 1 < wins.size(); ++i) {
            CHECK(wins[i + 1].span.start - wins[i].span.start == kCfg.stride_tokens);
            if (wins[i + 1].span.length() == kCfg.window_tokens)
                CHECK(wins[i].span.end - wins[i + 1].span.start ==
                      kCfg.window_tokens - kCfg.stride_tokens);
        }
        // Tail rule: a sub-min_tail final window appears only when uncovered
        // content forces it (never, given w - tau >= min_tail) or it is the
        // only window.
        if (wins.size() > 1)
            CHECK(wins.back().span.length() >= kCfg.min_tail_tokens);
    }
}

TEST_CASE("chunk_document composes the layers") {
    auto doc = make_paragraph_doc("d", {350});
    auto out = chunk_document(doc, kCfg);
    CHECK(out.retrieve_chunks.size() == 1);
    CHECK(out.search_chunks.size() == 4);
    REQUIRE(out.mapping.size() == 4);
    for (const auto& [sid, rid] : out.mapping)
        CHECK(rid == out.retrieve_chunks[0].retrieve_id);

    auto empty = chunk_document(make_document("e", "", ""), kCfg);
    CHECK(empty.retrieve_chunks.empty());
    CHECK(empty.search_chunks.empty());
    CHECK(empty.mapping.empty());
}

TEST_CASE("chunk_document: every search chunk has exactly one parent") {
    auto doc = make_paragraph_doc("d", {300, 900, 77, 450});
    auto out = chunk_document(doc, kCfg);
    std::set<std::string> seen;
    for (const auto& [sid, rid] : out.mapping) {
        CHECK(seen.insert(sid).second);  // appears exactly once
    }
    CHECK(out.mapping.size() == out.search_chunks.size());
    // Each search span sits inside its parent's span.
    std::unordered_map<std::string, TokenSpan> parent_span;
    for (const auto& r : out.retrieve_chunks) parent_span[r.retrieve_id] = r.span;
    for (const auto& s : out.search_chunks)
        CHECK(parent_span.at(s.retrieve_id).contains(s.span));
}

TEST_CASE("content-addressed ids are deterministic and layer-distinct") {
    auto id1 = make_chunk_id('r', "doc", TokenSpan{0, 10}, "some text");
    auto id2 = make_chunk_id('r', "doc", TokenSpan{0, 10}, "some text");
    auto id3 = make_chunk_id('s', "doc", TokenSpan{0, 10}, "some text");
    auto id4 = make_chunk_id('r', "doc", TokenSpan{0, 10}, "other text");
    CHECK(id1 == id2);
    CHECK(id1 != id3);
    CHECK(id1 != id4);
    CHECK(id1.substr(0, 2) == "r_");
    CHECK(id3.substr(0, 2) == "s_");

    auto doc = make_paragraph_doc("d", {300, 400});
    auto a = chunk_document(doc, kCfg);
    auto b = chunk_document(doc, kCfg);
    REQUIRE(a.search_chunks.size() == b.search_chunks.size());
    for (std::size_t i = 0; i < a.search_chunks.size(); ++i)
        CHECK(a.search_chunks[i].search_id == b.search_chunks[i].search_id);
}

TEST_CASE("config validation") {
    ChunkingConfig bad = kCfg;
    bad.stride_tokens = 0;
    CHECK_THROWS_AS(bad.validate(), ContractError);
    bad = kCfg;
    bad.stride_tokens = bad.window_tokens + 1;  // tau > w
    CHECK_THROWS_AS(bad.validate(), ContractError);
    bad = kCfg;
    bad.min_retrieve_tokens = bad.max_retrieve_tokens;
    CHECK_THROWS_AS(bad.validate(), ContractError);
    CHECK_NOTHROW(kCfg.validate());
}
