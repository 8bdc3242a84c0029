#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "sinr/embed.hpp"

namespace sinr {

struct HnswParams {
    std::uint32_t max_links = 16;        // M; level 0 uses 2M
    std::uint32_t ef_construction = 200;
    std::uint32_t ef_search = 100;
    std::uint64_t level_seed = 0x51e4a7d39b06c8f2ull;

    void validate() const;
    friend bool operator==(const HnswParams&, const HnswParams&) = default;
};

enum class IndexBackend : std::uint8_t { kBruteForce = 0, kHnsw = 1 };

struct IndexedVector {
    std::string search_id;
    EmbeddingVector vector;
    bool tombstone = false;
};

struct ScoredHit {
    std::string search_id;
    float score = 0.0f;  // cosine similarity
};

// Search-chunk vector store with two interchangeable backends: an exact
// brute-force scan (the oracle) and an HNSW graph. Levels are assigned from a
// hash of the id and level_seed, so builds are fully deterministic.
//
// Deletion tombstones entries; the graph is rebuilt from live entries once
// tombstones exceed kCompactionThreshold of the total.
class VectorIndex {
public:
    static constexpr double kCompactionThreshold = 0.2;

    VectorIndex(IndexBackend backend, int dim, HnswParams params,
                std::string fingerprint);

    static VectorIndex build(IndexBackend backend,
                             const std::vector<IndexedVector>& entries,
                             HnswParams params, std::string fingerprint);

    void insert(const IndexedVector& entry);
    void remove(const std::string& search_id);
    bool contains(const std::string& search_id) const;

    // Up to k live hits, score descending, ties by id ascending.
    std::vector<ScoredHit> query(const EmbeddingVector& q, int k) const;

    std::size_t live_count() const { return id_to_node_.size(); }
    std::size_t total_count() const { return ids_.size(); }
    double tombstone_fraction() const;
    void compact();

    int dim() const { return dim_; }
    IndexBackend backend() const { return backend_; }
    const HnswParams& params() const { return params_; }
    const std::string& fingerprint() const { return fingerprint_; }
    std::vector<std::string> live_ids() const;  // sorted
    std::uint64_t vector_bytes() const;

    void serialize(std::string& out) const;
    static VectorIndex deserialize(std::string_view data);
    void save(const std::string& path) const;
    static VectorIndex load(const std::string& path);

private:
    struct Node {
        std::uint8_t level = 0;
        // neighbors[l] = adjacency at layer l, l <= level
        std::vector<std::vector<std::uint32_t>> neighbors;
    };

    float dist(std::uint32_t node, const float* q) const;
    std::uint8_t level_for(const std::string& id) const;
    void link_into_graph(std::uint32_t node);
    std::vector<std::uint32_t> search_layer(const float* q, std::uint32_t entry,
                                            std::uint32_t ef, std::uint8_t layer) const;
    std::vector<std::uint32_t> select_neighbors(const float* q,
                                                std::vector<std::uint32_t> candidates,
                                                std::uint32_t m) const;
    std::vector<ScoredHit> query_brute(const EmbeddingVector& q, int k) const;
    std::vector<ScoredHit> query_hnsw(const EmbeddingVector& q, int k) const;
    const float* vec(std::uint32_t node) const { return data_.col(node).data(); }

    IndexBackend backend_;
    int dim_;
    HnswParams params_;
    std::string fingerprint_;

    std::vector<std::string> ids_;       // by node, insertion order
    Eigen::MatrixXf data_;               // dim x capacity, one column per node
    std::vector<std::uint8_t> tombstone_;
    std::vector<float> inv_norm_;        // 0 for zero vectors
    std::unordered_map<std::string, std::uint32_t> id_to_node_;  // live only

    // HNSW state
    std::vector<Node> nodes_;
    std::int64_t entry_point_ = -1;
    std::uint8_t top_level_ = 0;
};

}  // namespace sinr
