#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "fixtures.hpp"
#include "sinr/chunk.hpp"
#include "sinr/common.hpp"
#include "sinr/store.hpp"

using namespace sinr;
using sinr::testing::TempDir;

namespace {

std::unordered_map<std::uint64_t, std::string> name_table(
    const std::vector<std::string>& ids) {
    std::unordered_map<std::uint64_t, std::string> t;
    for (const auto& id : ids) t[id_hash64(id)] = id;
    return t;
}

std::uint64_t fsize(const std::filesystem::path& p) {
    return std::filesystem::file_size(p);
}

}  // namespace

TEST_CASE("parent map: forward/reverse bookkeeping") {
    ParentMap m;
    m.put({{"s_0001", "r_004"}, {"s_0002", "r_004"}, {"s_0003", "r_004"}});
    CHECK(m.size() == 3);
    CHECK(m.lookup_parent("s_0002") == "r_004");
    CHECK(m.children("r_004").size() == 3);
    CHECK(m.children("r_unknown").empty());

    m.put({});  // no-op
    CHECK(m.size() == 3);

    // Idempotent on identical pairs.
    m.put({{"s_0001", "r_004"}});
    CHECK(m.size() == 3);
    CHECK(m.children("r_004").size() == 3);

    // Re-parenting is a conflict.
    CHECK_THROWS_AS(m.put({{"s_0001", "r_005"}}), ConflictError);
}

TEST_CASE("parent map: unknown lookup and erase") {
    ParentMap m;
    CHECK_THROWS_AS(m.lookup_parent("s_x"), NotFoundError);
    m.put({{"s_a", "r_1"}, {"s_b", "r_1"}});
    m.erase("s_a");
    CHECK(m.size() == 1);
    CHECK_THROWS_AS(m.lookup_parent("s_a"), NotFoundError);
    CHECK(m.children("r_1").size() == 1);
    CHECK(m.children("r_1")[0] == "s_b");
}

TEST_CASE("parent map: reverse rebuilt from forward matches") {
    ParentMap m;
    for (int i = 0; i < 200; ++i)
        m.put({{"s_" + std::to_string(i), "r_" + std::to_string(i % 17)}});
    std::unordered_map<std::string, std::vector<std::string>> rebuilt;
    for (const auto& [sid, rid] : m.forward()) rebuilt[rid].push_back(sid);
    CHECK(rebuilt.size() == m.reverse().size());
    std::size_t total = 0;
    for (const auto& [rid, kids] : m.reverse()) {
        total += kids.size();
        auto it = rebuilt.find(rid);
        REQUIRE(it != rebuilt.end());
        CHECK(it->second.size() == kids.size());
        for (const auto& sid : kids) CHECK(m.lookup_parent(sid) == rid);
    }
    CHECK(total == m.size());
}

TEST_CASE("parent map: payload is 16 bytes per entry plus fixed header") {
    TempDir tmp("pmap");
    ParentMap m;
    const auto path = tmp.path() / "mapping.log";
    m.save(path);
    CHECK(fsize(path) == ParentMap::kHeaderBytes);  // n = 0

    std::vector<std::string> sids, rids{"r_0"};
    for (int i = 0; i < 1000; ++i) {
        sids.push_back("s_" + std::to_string(i));
        m.put({{sids.back(), "r_0"}});
    }
    m.save(path);
    CHECK(m.payload_bytes() == 16000);
    CHECK(fsize(path) == 16000 + ParentMap::kHeaderBytes);
}

TEST_CASE("parent map: save/load round trip") {
    TempDir tmp("pmap2");
    ParentMap m;
    std::vector<std::string> sids, rids;
    for (int i = 0; i < 50; ++i) {
        std::string s = "s_" + std::to_string(i), r = "r_" + std::to_string(i / 5);
        sids.push_back(s);
        if (i % 5 == 0) rids.push_back(r);
        m.put({{s, r}});
    }
    const auto path = tmp.path() / "mapping.log";
    m.save(path);
    auto loaded = ParentMap::load(path, name_table(sids), name_table(rids));
    CHECK(loaded.size() == m.size());
    for (const auto& s : sids) CHECK(loaded.lookup_parent(s) == m.lookup_parent(s));

    // Serialization order is stable: save -> load -> save is byte-identical.
    const auto path2 = tmp.path() / "mapping2.log";
    loaded.save(path2);
    std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
    std::string ba((std::istreambuf_iterator<char>(a)), {});
    std::string bb((std::istreambuf_iterator<char>(b)), {});
    CHECK(ba == bb);
}

TEST_CASE("doc store: put/get preserves input order and reports missing") {
    DocStore d;
    CHECK(d.get({}).found.empty());
    StoredRetrieveChunk c1{"r_1", "doc_a", TokenSpan{0, 10}, "alpha text", 2};
    StoredRetrieveChunk c2{"r_2", "doc_a", TokenSpan{10, 30}, "beta text", 3};
    d.put(c1);
    d.put(c2);
    auto got = d.get({"r_2", "r_missing", "r_1", "r_2"});
    REQUIRE(got.found.size() == 3);
    CHECK(got.found[0].retrieve_id == "r_2");
    CHECK(got.found[1].retrieve_id == "r_1");
    CHECK(got.found[2].retrieve_id == "r_2");  // one instance per input position
    REQUIRE(got.missing.size() == 1);
    CHECK(got.missing[0] == "r_missing");
}

TEST_CASE("doc store: text round trip is byte-identical through compression") {
    TempDir tmp("dstore");
    DocStore d;
    std::mt19937_64 rng(21);
    std::vector<std::string> texts;
    for (int i = 0; i < 40; ++i) {
        std::string t;
        int len = 1 + int(rng() % 4000);
        for (int j = 0; j < len; ++j)
            t += char("abcdef \n\t"[rng() % 9]);
        texts.push_back(t);
        d.put({"r_" + std::to_string(i), "doc", TokenSpan{0, 1}, t, 1});
    }
    d.save(tmp.path() / "docstore.dat", tmp.path() / "docstore.idx");
    auto loaded = DocStore::load(tmp.path() / "docstore.dat", tmp.path() / "docstore.idx");
    REQUIRE(loaded.size() == d.size());
    for (int i = 0; i < 40; ++i)
        CHECK(loaded.at("r_" + std::to_string(i)).text == texts[i]);
}

TEST_CASE("doc store: per-document id listing and erase") {
    DocStore d;
    d.put({"r_b", "doc2", TokenSpan{0, 5}, "x", 1});
    d.put({"r_a", "doc1", TokenSpan{0, 5}, "y", 1});
    d.put({"r_c", "doc1", TokenSpan{5, 9}, "z", 1});
    auto ids = d.ids_for_doc("doc1");
    REQUIRE(ids.size() == 2);
    CHECK(ids[0] == "r_a");
    CHECK(ids[1] == "r_c");
    d.erase("r_a");
    CHECK(d.ids_for_doc("doc1").size() == 1);
    CHECK_FALSE(d.contains("r_a"));
    auto all = d.all_ids();
    CHECK(all == std::vector<std::string>{"r_b", "r_c"});
}

TEST_CASE("zlib helpers round trip") {
    std::string data(5000, 'q');
    data += "tail";
    auto packed = zlib_compress(data);
    CHECK(packed.size() < data.size());
    CHECK(zlib_decompress(packed, data.size()) == data);
    CHECK(zlib_decompress(zlib_compress(""), 0) == "");
}

TEST_CASE("manifest json round trip is deterministic") {
    Manifest m;
    m.chunking.window_tokens = 120;
    m.embedder = EmbedderSpec::local_hash(128);
    m.embedder.fingerprint = "local-hash/fnv1a64/v1/d128";
    m.backend = IndexBackend::kBruteForce;
    m.search_chunk_count = 42;
    m.retrieve_chunk_count = 7;
    m.corpus_hash = "deadbeef";
    const std::string j = m.to_json();
    Manifest back = Manifest::from_json(j);
    CHECK(back.to_json() == j);
    CHECK(back.chunking == m.chunking);
    CHECK(back.embedder.dim == 128);
    CHECK(back.backend == IndexBackend::kBruteForce);
    CHECK(back.search_chunk_count == 42);
    CHECK(back.corpus_hash == "deadbeef");
}

TEST_CASE("index lock admits one writer") {
    TempDir tmp("lock");
    IndexLock first(tmp.path());
    CHECK_THROWS_AS(IndexLock{tmp.path()}, ConflictError);
    first.release();
    CHECK_NOTHROW(IndexLock{tmp.path()});
}
