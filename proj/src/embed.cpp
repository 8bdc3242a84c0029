#include "sinr/embed.hpp"

#include <algorithm>
#include <cmath>

#include "sinr/common.hpp"
#include "sinr/text.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace sinr {

namespace {
constexpr std::uint64_t kSignSeed = 0x74e9c1f5a0b3d287ull;
}

EmbedderSpec EmbedderSpec::local_hash(int dim) {
    EmbedderSpec spec;
    spec.provider = EmbedProvider::kLocalHash;
    spec.dim = dim;
    spec.fingerprint = "local-hash/fnv1a64/v1/d" + std::to_string(dim);
    return spec;
}

EmbedderSpec EmbedderSpec::remote(std::string endpoint, int dim) {
    EmbedderSpec spec;
    spec.provider = EmbedProvider::kRemote;
    spec.dim = dim;
    spec.endpoint = std::move(endpoint);
    return spec;
}

std::vector<EmbeddingVector> Embedder::embed_batch(
    const std::vector<std::string>& texts) const {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed(t));
    return out;
}

LocalHashEmbedder::LocalHashEmbedder(int dim)
    : Embedder(EmbedderSpec::local_hash(dim)) {
    if (dim <= 0) throw ContractError("embedder dim must be positive");
}

EmbeddingVector LocalHashEmbedder::embed(std::string_view text) const {
    const int dim = spec_.dim;
    // Accumulate in double, in token order, then normalize once; this keeps
    // float rounding identical across platforms and batch shapes.
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(dim);
    std::string tok;
    for (const Token& t : tokenize(text)) {
        tok.assign(text.substr(t.begin, t.end - t.begin));
        for (char& c : tok)
            if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        const std::uint64_t h = fnv1a64(tok);
        const auto bucket = static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dim));
        const double sign = (splitmix64(h ^ kSignSeed) & 1) ? 1.0 : -1.0;
        acc[bucket] += sign;
    }
    const double norm = acc.norm();
    EmbeddingVector v(dim);
    if (norm == 0.0) {
        v.setZero();
    } else {
        v = (acc / norm).cast<float>();
    }
    return v;
}

RemoteEmbedder::RemoteEmbedder(EmbedderSpec spec) : Embedder(std::move(spec)) {
    if (spec_.endpoint.empty())
        throw ContractError("remote embedder requires an endpoint");
    if (spec_.dim <= 0) throw ContractError("embedder dim must be positive");
}

std::vector<EmbeddingVector> RemoteEmbedder::embed_batch(
    const std::vector<std::string>& texts) const {
    nlohmann::json body;
    body["texts"] = texts;
    body["dim"] = spec_.dim;

    httplib::Client client(spec_.endpoint);
    client.set_connection_timeout(5, 0);
    client.set_read_timeout(30, 0);
    auto res = client.Post("/embed", body.dump(), "application/json");
    if (!res) {
        throw TransportError("embed endpoint unreachable: " + spec_.endpoint,
                             /*retryable=*/true);
    }
    if (res->status != 200) {
        throw TransportError("embed endpoint returned status " +
                                 std::to_string(res->status),
                             res->status >= 500);
    }

    nlohmann::json reply;
    try {
        reply = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
        throw ContractError(std::string("embed response is not valid JSON: ") + e.what());
    }
    if (!reply.contains("vectors") || !reply.contains("fingerprint"))
        throw ContractError("embed response missing vectors/fingerprint");

    const auto& vectors = reply["vectors"];
    if (vectors.size() != texts.size())
        throw ContractError("embed response count mismatch");

    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& row : vectors) {
        if (static_cast<int>(row.size()) != spec_.dim)
            throw ContractError("embed response dimension mismatch: expected " +
                                std::to_string(spec_.dim) + ", got " +
                                std::to_string(row.size()));
        EmbeddingVector v(spec_.dim);
        for (int i = 0; i < spec_.dim; ++i) v[i] = row[static_cast<std::size_t>(i)].get<float>();
        out.push_back(std::move(v));
    }
    // First successful reply pins the fingerprint for this client.
    spec_.fingerprint = reply["fingerprint"].get<std::string>();
    return out;
}

EmbeddingVector RemoteEmbedder::embed(std::string_view text) const {
    return embed_batch({std::string(text)}).front();
}

std::unique_ptr<Embedder> make_embedder(const EmbedderSpec& spec) {
    switch (spec.provider) {
        case EmbedProvider::kLocalHash:
            return std::make_unique<LocalHashEmbedder>(spec.dim);
        case EmbedProvider::kRemote:
            return std::make_unique<RemoteEmbedder>(spec);
    }
    throw ContractError("unknown embed provider");
}

float similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.size() != b.size())
        throw ContractError("similarity: dimension mismatch " +
                            std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    const double na = a.cast<double>().norm();
    const double nb = b.cast<double>().norm();
    if (na == 0.0 || nb == 0.0) return 0.0f;
    const double cos = a.cast<double>().dot(b.cast<double>()) / (na * nb);
    return static_cast<float>(std::clamp(cos, -1.0, 1.0));
}

}  // namespace sinr
