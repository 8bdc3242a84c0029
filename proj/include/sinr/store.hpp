#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sinr/chunk.hpp"
#include "sinr/embed.hpp"
#include "sinr/index.hpp"

namespace sinr {

struct StoredRetrieveChunk {
    std::string retrieve_id;
    std::string doc_id;
    TokenSpan span;
    std::string text;
    std::uint32_t sibling_count = 0;
};

// f_parent and its inverse. Forward lookups are plain hash-table hits; the
// serialized form is 16 bytes per entry (two 8-byte id hashes) after a
// fixed 16-byte header.
class ParentMap {
public:
    static constexpr std::uint64_t kHeaderBytes = 16;

    ParentMap() = default;
    ParentMap(const ParentMap& other);
    ParentMap& operator=(const ParentMap& other);
    ParentMap(ParentMap&&) = default;
    ParentMap& operator=(ParentMap&&) = default;

    // Idempotent for identical pairs; re-parenting an id is a conflict.
    void put(const std::vector<std::pair<std::string, std::string>>& pairs);
    void erase(const std::string& search_id);

    const std::string& lookup_parent(const std::string& search_id) const;
    // Null if absent. Pairs with prefetch_lookup for batched lookups: warm
    // the slots for a whole batch first so the memory stalls overlap instead
    // of serializing one per lookup.
    const std::string* find_parent(const std::string& search_id) const noexcept;
    void prefetch_lookup(const std::string& search_id) const noexcept;
    bool contains(const std::string& search_id) const;
    // Children of a parent in insertion order; empty list for unknown parents.
    const std::vector<std::string>& children(const std::string& retrieve_id) const;

    std::size_t size() const { return forward_.size(); }
    std::uint64_t payload_bytes() const { return 16 * static_cast<std::uint64_t>(size()); }
    std::uint64_t file_bytes() const { return kHeaderBytes + payload_bytes(); }

    const std::unordered_map<std::string, std::string>& forward() const { return forward_; }
    const std::unordered_map<std::string, std::vector<std::string>>& reverse() const {
        return reverse_;
    }

    void save(const std::filesystem::path& path) const;
    // The log stores 8-byte hashes; resolve resolves them back to string ids.
    static ParentMap load(
        const std::filesystem::path& path,
        const std::unordered_map<std::uint64_t, std::string>& search_names,
        const std::unordered_map<std::uint64_t, std::string>& retrieve_names);

private:
    std::unordered_map<std::string, std::string> forward_;
    std::unordered_map<std::string, std::vector<std::string>> reverse_;
    std::vector<std::string> insertion_order_;  // search ids, for stable serialization
    std::unordered_map<std::uint64_t, std::string> hash_names_;  // collision guard

    // Flat open-addressed table over the collision-checked 8-byte id hashes.
    // Forward lookups take one expected cache miss independent of map size,
    // which keeps the parent-expansion stage flat as the index grows.
    struct ProbeSlot {
        std::uint64_t hash = 0;
        const std::string* parent = nullptr;  // null = empty slot
    };
    std::vector<ProbeSlot> probe_;
    std::size_t probe_mask_ = 0;

    void probe_insert(std::uint64_t h, const std::string* parent);
    void rebuild_probe();
    void check_hash(const std::string& id);
};

// Retrieve-chunk store. Text is zlib-compressed at rest; the in-memory copy
// keeps plain text for the query path.
class DocStore {
public:
    void put(StoredRetrieveChunk chunk);  // upsert
    void erase(const std::string& retrieve_id);
    bool contains(const std::string& retrieve_id) const;

    struct GetResult {
        std::vector<StoredRetrieveChunk> found;  // in input order
        std::vector<std::string> missing;
    };
    GetResult get(const std::vector<std::string>& ids) const;
    const StoredRetrieveChunk& at(const std::string& retrieve_id) const;

    std::vector<std::string> ids_for_doc(const std::string& doc_id) const;  // sorted
    std::vector<std::string> all_ids() const;                               // sorted
    std::size_t size() const { return chunks_.size(); }
    void set_sibling_count(const std::string& retrieve_id, std::uint32_t count);

    std::uint64_t compressed_text_bytes() const;

    void save(const std::filesystem::path& dat_path,
              const std::filesystem::path& idx_path) const;
    static DocStore load(const std::filesystem::path& dat_path,
                         const std::filesystem::path& idx_path);

private:
    std::unordered_map<std::string, StoredRetrieveChunk> chunks_;
    std::vector<std::string> insertion_order_;
};

struct Manifest {
    static constexpr std::uint32_t kFormatVersion = 1;

    std::uint32_t format_version = kFormatVersion;
    ChunkingConfig chunking;
    EmbedderSpec embedder;
    HnswParams hnsw;
    IndexBackend backend = IndexBackend::kHnsw;
    std::uint64_t search_chunk_count = 0;    // n
    std::uint64_t retrieve_chunk_count = 0;  // m
    std::string corpus_hash;

    std::string to_json() const;  // deterministic (sorted keys)
    static Manifest from_json(const std::string& json);
    void save(const std::filesystem::path& path) const;
    static Manifest load(const std::filesystem::path& path);
};

// Advisory single-writer lock on an index directory.
class IndexLock {
public:
    IndexLock() = default;
    explicit IndexLock(const std::filesystem::path& dir);
    ~IndexLock();
    IndexLock(IndexLock&& other) noexcept;
    IndexLock& operator=(IndexLock&& other) noexcept;
    IndexLock(const IndexLock&) = delete;
    IndexLock& operator=(const IndexLock&) = delete;
    void release();

private:
    std::filesystem::path path_;
    bool held_ = false;
};

// zlib helpers used by the doc store.
std::string zlib_compress(std::string_view data);
std::string zlib_decompress(std::string_view data, std::size_t raw_size);

}  // namespace sinr
