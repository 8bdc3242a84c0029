#include "sinr/engine.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "sinr/common.hpp"

namespace sinr {

namespace {

constexpr const char* kManifestFile = "manifest.json";
constexpr const char* kMappingFile = "mapping.log";
constexpr const char* kDocDatFile = "docstore.dat";
constexpr const char* kDocIdxFile = "docstore.idx";
constexpr const char* kVectorFile = "vectors.seg";
constexpr const char* kJournalFile = "commit.journal";

const std::vector<std::string>& store_files() {
    static const std::vector<std::string> files{
        kManifestFile, kMappingFile, kDocDatFile, kDocIdxFile, kVectorFile};
    return files;
}

}  // namespace

void recover_index_dir(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    const fs::path journal = dir / kJournalFile;
    if (fs::exists(journal)) {
        // The journal is written after every tmp file is complete, so a
        // present journal means roll forward.
        std::ifstream in(journal);
        std::string name;
        while (std::getline(in, name)) {
            if (name.empty()) continue;
            const fs::path tmp = dir / (name + ".tmp");
            if (fs::exists(tmp)) fs::rename(tmp, dir / name);
        }
        in.close();
        fs::remove(journal);
    }
    // Stray tmp files from an aborted write before the commit point.
    for (const auto& name : store_files()) {
        std::error_code ec;
        fs::remove(dir / (name + ".tmp"), ec);
    }
}

std::string Engine::corpus_content_hash(const std::vector<Document>& corpus) {
    std::uint64_t h = kFnv64Offset;
    for (const auto& doc : corpus) {
        h = fnv1a64(doc.doc_id, h);
        h = fnv1a64(std::string_view("\0", 1), h);
        h = fnv1a64(doc.text, h);
        h = fnv1a64(std::string_view("\0", 1), h);
    }
    return to_hex16(h);
}

Engine Engine::build(const std::vector<Document>& corpus, EngineConfig config,
                     const std::filesystem::path& dir) {
    config.chunking.validate();
    config.hnsw.validate();
    std::filesystem::create_directories(dir);

    Engine engine;
    engine.dir_ = dir;
    engine.lock_ = IndexLock(dir);
    engine.writable_ = true;
    engine.embedder_ = make_embedder(config.embedder);

    engine.index_ = std::make_unique<VectorIndex>(
        config.backend, engine.embedder_->dim(), config.hnsw,
        engine.embedder_->fingerprint());

    for (const auto& doc : corpus) {
        ChunkedDocument chunked = chunk_document(doc, config.chunking);
        std::unordered_map<std::string, std::uint32_t> siblings;
        for (const auto& [sid, rid] : chunked.mapping) siblings[rid]++;
        for (const auto& rc : chunked.retrieve_chunks) {
            StoredRetrieveChunk stored{rc.retrieve_id, rc.doc_id, rc.span, rc.text,
                                       siblings[rc.retrieve_id]};
            engine.docs_.put(std::move(stored));
        }
        engine.mapping_.put(chunked.mapping);

        std::vector<std::string> texts;
        texts.reserve(chunked.search_chunks.size());
        for (const auto& sc : chunked.search_chunks) texts.push_back(sc.text);
        auto vectors = engine.embedder_->embed_batch(texts);
        for (std::size_t i = 0; i < chunked.search_chunks.size(); ++i) {
            engine.index_->insert(IndexedVector{
                chunked.search_chunks[i].search_id, std::move(vectors[i]), false});
        }
    }

    engine.manifest_.chunking = config.chunking;
    engine.manifest_.embedder = engine.embedder_->spec();
    engine.manifest_.hnsw = config.hnsw;
    engine.manifest_.backend = config.backend;
    engine.manifest_.search_chunk_count = engine.mapping_.size();
    engine.manifest_.retrieve_chunk_count = engine.docs_.size();
    engine.manifest_.corpus_hash = corpus_content_hash(corpus);
    engine.save();
    return engine;
}

Engine Engine::open(const std::filesystem::path& dir, bool writable) {
    if (!std::filesystem::exists(dir / kManifestFile) &&
        !std::filesystem::exists(dir / kJournalFile))
        throw NotFoundError("no index at " + dir.string());
    recover_index_dir(dir);

    Engine engine;
    engine.dir_ = dir;
    if (writable) {
        engine.lock_ = IndexLock(dir);
        engine.writable_ = true;
    }
    engine.manifest_ = Manifest::load(dir / kManifestFile);
    engine.embedder_ = make_embedder(engine.manifest_.embedder);
    if (engine.manifest_.embedder.provider == EmbedProvider::kRemote) {
        // The manifest pins the fingerprint the index was built with.
        engine.embedder_->set_fingerprint(engine.manifest_.embedder.fingerprint);
    } else if (engine.embedder_->fingerprint() !=
               engine.manifest_.embedder.fingerprint) {
        throw FingerprintMismatch("index built with embedder '" +
                            engine.manifest_.embedder.fingerprint +
                            "' but this build provides '" +
                            engine.embedder_->fingerprint() + "'");
    }

    engine.index_ = std::make_unique<VectorIndex>(
        VectorIndex::load((dir / kVectorFile).string()));
    engine.docs_ = DocStore::load(dir / kDocDatFile, dir / kDocIdxFile);

    std::unordered_map<std::uint64_t, std::string> search_names;
    for (const auto& sid : engine.index_->live_ids())
        search_names.emplace(id_hash64(sid), sid);
    std::unordered_map<std::uint64_t, std::string> retrieve_names;
    for (const auto& rid : engine.docs_.all_ids())
        retrieve_names.emplace(id_hash64(rid), rid);
    engine.mapping_ =
        ParentMap::load(dir / kMappingFile, search_names, retrieve_names);
    return engine;
}

void Engine::save() {
    namespace fs = std::filesystem;
    manifest_.save(dir_ / (std::string(kManifestFile) + ".tmp"));
    mapping_.save(dir_ / (std::string(kMappingFile) + ".tmp"));
    docs_.save(dir_ / (std::string(kDocDatFile) + ".tmp"),
               dir_ / (std::string(kDocIdxFile) + ".tmp"));
    index_->save((dir_ / (std::string(kVectorFile) + ".tmp")).string());

    // Commit point: once the journal exists, recovery rolls forward.
    {
        std::ofstream journal(dir_ / kJournalFile, std::ios::trunc);
        for (const auto& name : store_files()) journal << name << "\n";
        if (!journal) throw IoError("cannot write commit journal");
    }
    for (const auto& name : store_files())
        fs::rename(dir_ / (name + ".tmp"), dir_ / name);
    fs::remove(dir_ / kJournalFile);
}

void Engine::reload() {
    Engine fresh = open(dir_, false);
    manifest_ = std::move(fresh.manifest_);
    mapping_ = std::move(fresh.mapping_);
    docs_ = std::move(fresh.docs_);
    index_ = std::move(fresh.index_);
    // embedder and lock are unchanged
}

RetrievalResult Engine::retrieve(const QueryRequest& req) const {
    return run_query(req, *embedder_, *index_, mapping_, docs_, manifest_);
}

EngineStats Engine::stats() const {
    EngineStats s;
    s.search_chunks = mapping_.size();
    s.retrieve_chunks = docs_.size();
    s.embedding_bytes = index_->vector_bytes();
    s.mapping_payload_bytes = mapping_.payload_bytes();
    s.mapping_file_bytes = mapping_.file_bytes();
    s.text_bytes = docs_.compressed_text_bytes();
    return s;
}

void Engine::audit() const {
    // Totality: every live indexed search id has exactly one forward entry.
    for (const auto& sid : index_->live_ids()) {
        if (!mapping_.contains(sid))
            throw ContractError("audit: indexed search chunk " + sid +
                                " has no parent mapping");
    }
    if (index_->live_count() != mapping_.size())
        throw ContractError("audit: mapping has " + std::to_string(mapping_.size()) +
                            " entries but index has " +
                            std::to_string(index_->live_count()) + " live vectors");

    // Reverse map must be the exact inverse of forward.
    std::unordered_map<std::string, std::vector<std::string>> rebuilt;
    for (const auto& [sid, rid] : mapping_.forward()) rebuilt[rid].push_back(sid);
    if (rebuilt.size() != mapping_.reverse().size())
        throw ContractError("audit: reverse map parent count mismatch");
    for (auto& [rid, kids] : rebuilt) {
        auto it = mapping_.reverse().find(rid);
        if (it == mapping_.reverse().end())
            throw ContractError("audit: reverse map missing parent " + rid);
        auto stored = it->second;
        std::sort(kids.begin(), kids.end());
        std::sort(stored.begin(), stored.end());
        if (kids != stored)
            throw ContractError("audit: reverse map children mismatch for " + rid);
    }

    // No dangling parents; sibling counts accurate.
    for (const auto& [rid, kids] : mapping_.reverse()) {
        if (!docs_.contains(rid))
            throw ContractError("audit: mapping references missing retrieve chunk " + rid);
        if (docs_.at(rid).sibling_count != kids.size())
            throw ContractError("audit: sibling_count stale for " + rid);
    }

    if (manifest_.search_chunk_count != mapping_.size() ||
        manifest_.retrieve_chunk_count != docs_.size())
        throw ContractError("audit: manifest counts do not match store contents");
}

}  // namespace sinr
