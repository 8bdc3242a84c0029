#include <doctest.h>

#include <cmath>

#include "sinr/common.hpp"
#include "sinr/embed.hpp"

using namespace sinr;

TEST_CASE("empty text embeds to the zero vector") {
    LocalHashEmbedder e(64);
    auto v = e.embed("");
    CHECK(v.size() == 64);
    CHECK(v.norm() == 0.0f);
    auto ws = e.embed("   \t\n ");
    CHECK(ws.norm() == 0.0f);
}

TEST_CASE("non-empty outputs are unit norm") {
    LocalHashEmbedder e(256);
    for (const char* t : {"a", "warranty claim process", "x y z w q"})
        CHECK(std::abs(e.embed(t).norm() - 1.0f) < 1e-6f);
}

TEST_CASE("embedding is deterministic") {
    LocalHashEmbedder e(256);
    auto a = e.embed("some stable text here");
    auto b = e.embed("some stable text here");
    CHECK(a == b);
    LocalHashEmbedder e2(256);
    CHECK(a == e2.embed("some stable text here"));
}

TEST_CASE("case folding: tokens are lowercased before hashing") {
    LocalHashEmbedder e(256);
    CHECK(e.embed("Warranty CLAIM") == e.embed("warranty claim"));
}

TEST_CASE("related text scores above unrelated text") {
    LocalHashEmbedder e(256);
    auto base = e.embed("warranty claim process");
    float near = similarity(base, e.embed("warranty claim process extra"));
    float far = similarity(base, e.embed("orbital mechanics launch window"));
    CHECK(near > far);
}

TEST_CASE("batch equals elementwise loop") {
    LocalHashEmbedder e(128);
    CHECK(e.embed_batch({}).empty());

    std::vector<std::string> texts;
    for (int i = 0; i < 1000; ++i)
        texts.push_back("token" + std::to_string(i % 37) + " filler " +
                        std::to_string(i));
    auto batch = e.embed_batch(texts);
    REQUIRE(batch.size() == texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) CHECK(batch[i] == e.embed(texts[i]));
}

TEST_CASE("similarity basics") {
    EmbeddingVector e1 = EmbeddingVector::Zero(4), e2 = EmbeddingVector::Zero(4);
    e1(0) = 1.0f;
    e2(1) = 1.0f;
    CHECK(similarity(e1, e1) == doctest::Approx(1.0));
    CHECK(similarity(e1, -e1) == doctest::Approx(-1.0));
    CHECK(similarity(e1, e2) == doctest::Approx(0.0));
    CHECK(similarity(e1, e2) == similarity(e2, e1));

    EmbeddingVector zero = EmbeddingVector::Zero(4);
    CHECK(similarity(e1, zero) == 0.0f);

    EmbeddingVector wrong = EmbeddingVector::Zero(5);
    CHECK_THROWS_AS(similarity(e1, wrong), ContractError);
}

TEST_CASE("fingerprint names provider, scheme and dimension") {
    LocalHashEmbedder e(256);
    CHECK(e.fingerprint() == "local-hash/fnv1a64/v1/d256");
    LocalHashEmbedder e2(64);
    CHECK(e2.fingerprint() == "local-hash/fnv1a64/v1/d64");
    CHECK(e.dim() == 256);
}

TEST_CASE("make_embedder dispatches on provider") {
    auto local = make_embedder(EmbedderSpec::local_hash(32));
    CHECK(local->dim() == 32);
    CHECK(local->embed("abc").size() == 32);

    // Remote client against an unreachable endpoint: transport error.
    auto remote = make_embedder(EmbedderSpec::remote("http://127.0.0.1:1", 32));
    CHECK_THROWS_AS(remote->embed("abc"), TransportError);
}
