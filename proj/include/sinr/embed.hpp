#pragma once

#include <Eigen/Core>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace sinr {

using EmbeddingVector = Eigen::VectorXf;

enum class EmbedProvider { kLocalHash, kRemote };

struct EmbedderSpec {
    EmbedProvider provider = EmbedProvider::kLocalHash;
    int dim = 256;
    std::string fingerprint;   // filled in by the provider
    std::string endpoint;      // remote only, e.g. http://host:port

    static EmbedderSpec local_hash(int dim = 256);
    static EmbedderSpec remote(std::string endpoint, int dim);
};

class Embedder {
public:
    virtual ~Embedder() = default;

    // Unit-norm vector for non-empty text; the zero vector for empty text.
    virtual EmbeddingVector embed(std::string_view text) const = 0;

    // Elementwise embed, order preserved. Atomic for the remote provider.
    virtual std::vector<EmbeddingVector> embed_batch(
        const std::vector<std::string>& texts) const;

    const EmbedderSpec& spec() const { return spec_; }
    int dim() const { return spec_.dim; }
    const std::string& fingerprint() const { return spec_.fingerprint; }
    void set_fingerprint(std::string fp) { spec_.fingerprint = std::move(fp); }

protected:
    explicit Embedder(EmbedderSpec spec) : spec_(std::move(spec)) {}
    mutable EmbedderSpec spec_;
};

// Signed feature hashing over lowercased whitespace tokens. Fixed hash, fixed
// seed, fixed accumulation order: byte-identical output on every platform.
class LocalHashEmbedder : public Embedder {
public:
    explicit LocalHashEmbedder(int dim = 256);
    EmbeddingVector embed(std::string_view text) const override;
};

// Client for the fixed wire contract: POST /embed with
// {"texts": [...], "dim": d} -> {"vectors": [[...]...], "fingerprint": s}.
class RemoteEmbedder : public Embedder {
public:
    explicit RemoteEmbedder(EmbedderSpec spec);
    EmbeddingVector embed(std::string_view text) const override;
    std::vector<EmbeddingVector> embed_batch(
        const std::vector<std::string>& texts) const override;
};

std::unique_ptr<Embedder> make_embedder(const EmbedderSpec& spec);

// Cosine similarity in [-1, 1]. Throws ContractError on dimension mismatch.
float similarity(const EmbeddingVector& a, const EmbeddingVector& b);

}  // namespace sinr
