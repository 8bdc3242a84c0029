#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "sinr/chunk.hpp"
#include "sinr/document.hpp"
#include "sinr/query.hpp"
#include "sinr/store.hpp"
#include "sinr/update.hpp"

namespace sinr {

struct EngineConfig {
    ChunkingConfig chunking;
    EmbedderSpec embedder = EmbedderSpec::local_hash();
    HnswParams hnsw;
    IndexBackend backend = IndexBackend::kHnsw;
};

struct EngineStats {
    std::uint64_t search_chunks = 0;    // n
    std::uint64_t retrieve_chunks = 0;  // m
    std::uint64_t embedding_bytes = 0;
    std::uint64_t mapping_payload_bytes = 0;
    std::uint64_t mapping_file_bytes = 0;
    std::uint64_t text_bytes = 0;  // compressed
};

// Single-process engine over one index directory: manifest + mapping log +
// doc store + vector segment, all committed together via a rename journal.
class Engine {
public:
    // Full indexing pipeline over an in-memory corpus; persists into dir.
    static Engine build(const std::vector<Document>& corpus, EngineConfig config,
                        const std::filesystem::path& dir);
    static Engine open(const std::filesystem::path& dir, bool writable = false);

    RetrievalResult retrieve(const QueryRequest& req) const;
    EngineStats stats() const;

    // Throws ContractError naming the first violated storage invariant.
    void audit() const;

    // Persist current in-memory state atomically (tmp files + journal + rename).
    void save();
    // Drop in-memory state and reread the last committed snapshot.
    void reload();

    const Manifest& manifest() const { return manifest_; }
    const std::filesystem::path& dir() const { return dir_; }
    const ParentMap& mapping() const { return mapping_; }
    const DocStore& docs() const { return docs_; }
    const VectorIndex& index() const { return *index_; }
    const Embedder& embedder() const { return *embedder_; }

    static std::string corpus_content_hash(const std::vector<Document>& corpus);

private:
    friend UpdatePlan plan_update(const Engine&, const Document&);
    friend UpdateReport apply_update(Engine&, const UpdatePlan&,
                                     const FailureInjector&);

    Engine() = default;

    std::filesystem::path dir_;
    Manifest manifest_;
    ParentMap mapping_;
    DocStore docs_;
    std::unique_ptr<VectorIndex> index_;
    std::unique_ptr<Embedder> embedder_;
    IndexLock lock_;
    bool writable_ = false;
};

// Completes a half-done commit (rename journal) if one is present.
void recover_index_dir(const std::filesystem::path& dir);

}  // namespace sinr
