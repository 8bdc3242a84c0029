#include "sinr/index.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <sstream>

#include "sinr/binio.hpp"
#include "sinr/chunk.hpp"
#include "sinr/common.hpp"

namespace sinr {

namespace {
constexpr char kMagic[9] = "SINRVEC1";
constexpr std::uint32_t kFormatVersion = 1;

using Cand = std::pair<float, std::uint32_t>;  // (distance, node); ties on node
}  // namespace

void HnswParams::validate() const {
    if (max_links < 2) throw ContractError("hnsw params: require M >= 2");
    if (ef_construction == 0 || ef_search == 0)
        throw ContractError("hnsw params: ef values must be positive");
}

VectorIndex::VectorIndex(IndexBackend backend, int dim, HnswParams params,
                         std::string fingerprint)
    : backend_(backend), dim_(dim), params_(params),
      fingerprint_(std::move(fingerprint)) {
    if (dim <= 0) throw ContractError("index dim must be positive");
    params_.validate();
    data_.resize(dim_, 0);
}

VectorIndex VectorIndex::build(IndexBackend backend,
                               const std::vector<IndexedVector>& entries,
                               HnswParams params, std::string fingerprint) {
    int dim = entries.empty() ? 1 : static_cast<int>(entries.front().vector.size());
    VectorIndex idx(backend, dim, params, std::move(fingerprint));
    for (const auto& e : entries) idx.insert(e);
    for (const auto& e : entries)
        if (e.tombstone) idx.remove(e.search_id);
    return idx;
}

float VectorIndex::dist(std::uint32_t node, const float* q) const {
    // q is pre-normalized; stored vectors carry their inverse norm.
    const float dot = data_.col(node).dot(Eigen::Map<const Eigen::VectorXf>(q, dim_));
    return 1.0f - dot * inv_norm_[node];
}

std::uint8_t VectorIndex::level_for(const std::string& id) const {
    const std::uint64_t h = splitmix64(id_hash64(id) ^ params_.level_seed);
    // map to (0, 1]; h >> 11 gives 53 uniform bits
    const double u = (static_cast<double>(h >> 11) + 1.0) / 9007199254740993.0;
    const double ml = 1.0 / std::log(static_cast<double>(params_.max_links));
    int level = static_cast<int>(std::floor(-std::log(u) * ml));
    return static_cast<std::uint8_t>(std::clamp(level, 0, 31));
}

std::vector<std::uint32_t> VectorIndex::search_layer(const float* q,
                                                     std::uint32_t entry,
                                                     std::uint32_t ef,
                                                     std::uint8_t layer) const {
    std::priority_queue<Cand, std::vector<Cand>, std::greater<>> candidates;
    std::priority_queue<Cand> best;  // max-heap over distance
    std::vector<std::uint8_t> visited(ids_.size(), 0);

    const float d0 = dist(entry, q);
    candidates.emplace(d0, entry);
    best.emplace(d0, entry);
    visited[entry] = 1;

    while (!candidates.empty()) {
        auto [d, node] = candidates.top();
        candidates.pop();
        if (d > best.top().first && best.size() >= ef) break;
        for (std::uint32_t nb : nodes_[node].neighbors[layer]) {
            if (visited[nb]) continue;
            visited[nb] = 1;
            const float dn = dist(nb, q);
            if (best.size() < ef || dn < best.top().first) {
                candidates.emplace(dn, nb);
                best.emplace(dn, nb);
                if (best.size() > ef) best.pop();
            }
        }
    }

    std::vector<Cand> out;
    out.reserve(best.size());
    while (!best.empty()) {
        out.push_back(best.top());
        best.pop();
    }
    std::sort(out.begin(), out.end());
    std::vector<std::uint32_t> result;
    result.reserve(out.size());
    for (const auto& [d, n] : out) result.push_back(n);
    return result;
}

std::vector<std::uint32_t> VectorIndex::select_neighbors(
    const float* q, std::vector<std::uint32_t> candidates, std::uint32_t m) const {
    std::vector<Cand> ordered;
    ordered.reserve(candidates.size());
    for (std::uint32_t c : candidates) ordered.emplace_back(dist(c, q), c);
    std::sort(ordered.begin(), ordered.end());

    // Relative-neighborhood pruning: keep a candidate only if it is closer to
    // the query than to every already-kept neighbor.
    std::vector<std::uint32_t> kept;
    for (const auto& [dq, c] : ordered) {
        if (kept.size() >= m) break;
        bool ok = true;
        for (std::uint32_t k : kept) {
            const float dck = 1.0f - data_.col(c).dot(data_.col(k)) *
                                          inv_norm_[c] * inv_norm_[k];
            if (dck < dq) {
                ok = false;
                break;
            }
        }
        if (ok) kept.push_back(c);
    }
    // Backfill so low-degree nodes stay connected.
    if (kept.size() < m) {
        for (const auto& [dq, c] : ordered) {
            if (kept.size() >= m) break;
            if (std::find(kept.begin(), kept.end(), c) == kept.end())
                kept.push_back(c);
        }
    }
    return kept;
}

void VectorIndex::link_into_graph(std::uint32_t node) {
    Node& n = nodes_[node];
    const float* q = vec(node);
    // The query side of every distance here is the normalized new vector;
    // dist() divides by the stored norm, so normalize q once via inv_norm_.
    // dist(node_x, q_raw) uses q as-is; scale by this node's inv norm:
    // equivalently search with the normalized vector.
    Eigen::VectorXf qn = data_.col(node) * inv_norm_[node];

    if (entry_point_ < 0) {
        entry_point_ = node;
        top_level_ = n.level;
        return;
    }

    auto ep = static_cast<std::uint32_t>(entry_point_);
    // Greedy descent through layers above the node's level.
    for (int layer = top_level_; layer > n.level; --layer) {
        bool improved = true;
        float d = dist(ep, qn.data());
        while (improved) {
            improved = false;
            for (std::uint32_t nb : nodes_[ep].neighbors[static_cast<std::size_t>(layer)]) {
                const float dn = dist(nb, qn.data());
                if (dn < d || (dn == d && nb < ep)) {
                    d = dn;
                    ep = nb;
                    improved = true;
                }
            }
        }
    }

    const std::uint32_t m = params_.max_links;
    for (int layer = std::min<int>(n.level, top_level_); layer >= 0; --layer) {
        auto found = search_layer(qn.data(), ep, params_.ef_construction,
                                  static_cast<std::uint8_t>(layer));
        const std::uint32_t m_layer = (layer == 0) ? 2 * m : m;
        auto neighbors = select_neighbors(qn.data(), found, m_layer);
        n.neighbors[static_cast<std::size_t>(layer)] = neighbors;
        for (std::uint32_t nb : neighbors) {
            auto& back = nodes_[nb].neighbors[static_cast<std::size_t>(layer)];
            back.push_back(node);
            const std::uint32_t cap = (layer == 0) ? 2 * m : m;
            if (back.size() > cap) {
                Eigen::VectorXf nbn = data_.col(nb) * inv_norm_[nb];
                back = select_neighbors(nbn.data(), back, cap);
            }
        }
        if (!found.empty()) ep = found.front();
    }

    if (n.level > top_level_) {
        top_level_ = n.level;
        entry_point_ = node;
    }
}

void VectorIndex::insert(const IndexedVector& entry) {
    if (entry.vector.size() != dim_)
        throw ContractError("index insert: dimension mismatch, expected " +
                            std::to_string(dim_) + ", got " +
                            std::to_string(entry.vector.size()));
    if (id_to_node_.count(entry.search_id))
        throw ConflictError("index insert: duplicate live id " + entry.search_id);

    const auto node = static_cast<std::uint32_t>(ids_.size());
    if (data_.cols() <= node) {
        Eigen::Index cap = std::max<Eigen::Index>(16, data_.cols() * 2);
        data_.conservativeResize(Eigen::NoChange, cap);
    }
    data_.col(node) = entry.vector;
    const float norm = entry.vector.norm();
    inv_norm_.push_back(norm > 0.0f ? 1.0f / norm : 0.0f);
    ids_.push_back(entry.search_id);
    tombstone_.push_back(0);
    id_to_node_[entry.search_id] = node;

    Node n;
    n.level = level_for(entry.search_id);
    n.neighbors.resize(static_cast<std::size_t>(n.level) + 1);
    nodes_.push_back(std::move(n));
    if (backend_ == IndexBackend::kHnsw) link_into_graph(node);
}

void VectorIndex::remove(const std::string& search_id) {
    auto it = id_to_node_.find(search_id);
    if (it == id_to_node_.end())
        throw NotFoundError("index remove: unknown id " + search_id);
    tombstone_[it->second] = 1;
    id_to_node_.erase(it);
    if (tombstone_fraction() > kCompactionThreshold) compact();
}

bool VectorIndex::contains(const std::string& search_id) const {
    return id_to_node_.count(search_id) > 0;
}

double VectorIndex::tombstone_fraction() const {
    if (ids_.empty()) return 0.0;
    return static_cast<double>(ids_.size() - id_to_node_.size()) /
           static_cast<double>(ids_.size());
}

void VectorIndex::compact() {
    std::vector<IndexedVector> live;
    live.reserve(id_to_node_.size());
    for (std::uint32_t node = 0; node < ids_.size(); ++node) {
        if (tombstone_[node]) continue;
        live.push_back(IndexedVector{ids_[node], data_.col(node), false});
    }
    VectorIndex rebuilt(backend_, dim_, params_, fingerprint_);
    for (const auto& e : live) rebuilt.insert(e);
    *this = std::move(rebuilt);
}

std::vector<ScoredHit> VectorIndex::query_brute(const EmbeddingVector& q,
                                                int k) const {
    const float qnorm = q.norm();
    const float qinv = qnorm > 0.0f ? 1.0f / qnorm : 0.0f;
    // Score by node index; ids are only materialized for the final k.
    std::vector<std::pair<float, std::uint32_t>> scored;
    scored.reserve(id_to_node_.size());
    for (std::uint32_t node = 0; node < ids_.size(); ++node) {
        if (tombstone_[node]) continue;
        scored.emplace_back(data_.col(node).dot(q) * inv_norm_[node] * qinv, node);
    }
    const auto cmp = [this](const std::pair<float, std::uint32_t>& a,
                            const std::pair<float, std::uint32_t>& b) {
        if (a.first != b.first) return a.first > b.first;
        return ids_[a.second] < ids_[b.second];
    };
    const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k),
                                                   scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take),
                      scored.end(), cmp);
    std::vector<ScoredHit> hits;
    hits.reserve(take);
    for (std::size_t i = 0; i < take; ++i)
        hits.push_back(ScoredHit{ids_[scored[i].second], scored[i].first});
    return hits;
}

std::vector<ScoredHit> VectorIndex::query_hnsw(const EmbeddingVector& q,
                                               int k) const {
    if (entry_point_ < 0) return {};
    const float qnorm = q.norm();
    Eigen::VectorXf qn = qnorm > 0.0f ? (q / qnorm).eval() : q;

    auto ep = static_cast<std::uint32_t>(entry_point_);
    for (int layer = top_level_; layer > 0; --layer) {
        bool improved = true;
        float d = dist(ep, qn.data());
        while (improved) {
            improved = false;
            for (std::uint32_t nb : nodes_[ep].neighbors[static_cast<std::size_t>(layer)]) {
                const float dn = dist(nb, qn.data());
                if (dn < d || (dn == d && nb < ep)) {
                    d = dn;
                    ep = nb;
                    improved = true;
                }
            }
        }
    }

    std::uint32_t ef = std::max<std::uint32_t>(params_.ef_search,
                                               static_cast<std::uint32_t>(k));
    // Tombstoned nodes stay in the graph until compaction; widen the beam so
    // k live results still surface.
    ef += static_cast<std::uint32_t>(ids_.size() - id_to_node_.size());
    auto found = search_layer(qn.data(), ep, ef, 0);

    std::vector<ScoredHit> hits;
    for (std::uint32_t node : found) {
        if (tombstone_[node]) continue;
        hits.push_back(ScoredHit{ids_[node], 1.0f - dist(node, qn.data())});
    }
    std::sort(hits.begin(), hits.end(), [](const ScoredHit& a, const ScoredHit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.search_id < b.search_id;
    });
    if (static_cast<int>(hits.size()) > k) hits.resize(static_cast<std::size_t>(k));
    return hits;
}

std::vector<ScoredHit> VectorIndex::query(const EmbeddingVector& q, int k) const {
    if (k < 1) throw ContractError("index query: k must be >= 1");
    if (id_to_node_.empty()) return {};
    if (q.size() != dim_)
        throw ContractError("index query: dimension mismatch, expected " +
                            std::to_string(dim_) + ", got " + std::to_string(q.size()));
    return backend_ == IndexBackend::kBruteForce ? query_brute(q, k)
                                                 : query_hnsw(q, k);
}

std::vector<std::string> VectorIndex::live_ids() const {
    std::vector<std::string> out;
    out.reserve(id_to_node_.size());
    for (const auto& [id, node] : id_to_node_) out.push_back(id);
    std::sort(out.begin(), out.end());
    return out;
}

std::uint64_t VectorIndex::vector_bytes() const {
    return static_cast<std::uint64_t>(ids_.size()) *
           static_cast<std::uint64_t>(dim_) * sizeof(float);
}

void VectorIndex::serialize(std::string& out) const {
    out.append(kMagic, 8);
    binio::put_u32(out, kFormatVersion);
    binio::put_u8(out, static_cast<std::uint8_t>(backend_));
    binio::put_u32(out, static_cast<std::uint32_t>(dim_));
    binio::put_u64(out, ids_.size());
    binio::put_u32(out, params_.max_links);
    binio::put_u32(out, params_.ef_construction);
    binio::put_u32(out, params_.ef_search);
    binio::put_u64(out, params_.level_seed);
    binio::put_string(out, fingerprint_);

    for (const auto& id : ids_) binio::put_string(out, id);

    // vector block: float32, one row of `dim` values per node
    for (std::uint32_t node = 0; node < ids_.size(); ++node)
        for (int i = 0; i < dim_; ++i) binio::put_f32(out, data_(i, node));

    // tombstone bitmap
    for (std::size_t i = 0; i < ids_.size(); i += 8) {
        std::uint8_t byte = 0;
        for (std::size_t b = 0; b < 8 && i + b < ids_.size(); ++b)
            if (tombstone_[i + b]) byte |= static_cast<std::uint8_t>(1u << b);
        binio::put_u8(out, byte);
    }

    // graph block: adjacency as sorted varint deltas
    binio::put_u8(out, backend_ == IndexBackend::kHnsw ? 1 : 0);
    if (backend_ == IndexBackend::kHnsw) {
        binio::put_u64(out, static_cast<std::uint64_t>(entry_point_ + 1));
        binio::put_u8(out, top_level_);
        for (const auto& node : nodes_) {
            binio::put_u8(out, node.level);
            for (const auto& adj : node.neighbors) {
                binio::put_varint(out, adj.size());
                auto sorted = adj;
                std::sort(sorted.begin(), sorted.end());
                std::uint32_t prev = 0;
                for (std::size_t i = 0; i < sorted.size(); ++i) {
                    binio::put_varint(out, sorted[i] - (i ? prev : 0));
                    prev = sorted[i];
                }
            }
        }
    }
}

VectorIndex VectorIndex::deserialize(std::string_view raw) {
    binio::Reader r(raw);
    if (r.raw(8) != std::string_view(kMagic, 8))
        throw IoError("vector segment: bad magic");
    if (r.u32() != kFormatVersion) throw IoError("vector segment: unsupported version");
    auto backend = static_cast<IndexBackend>(r.u8());
    int dim = static_cast<int>(r.u32());
    std::uint64_t count = r.u64();
    HnswParams params;
    params.max_links = r.u32();
    params.ef_construction = r.u32();
    params.ef_search = r.u32();
    params.level_seed = r.u64();
    std::string fingerprint = r.str();

    VectorIndex idx(backend, dim, params, fingerprint);
    idx.ids_.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) idx.ids_.push_back(r.str());

    idx.data_.resize(dim, static_cast<Eigen::Index>(count));
    idx.inv_norm_.resize(count);
    for (std::uint64_t node = 0; node < count; ++node) {
        for (int i = 0; i < dim; ++i)
            idx.data_(i, static_cast<Eigen::Index>(node)) = r.f32();
        const float norm = idx.data_.col(static_cast<Eigen::Index>(node)).norm();
        idx.inv_norm_[node] = norm > 0.0f ? 1.0f / norm : 0.0f;
    }

    idx.tombstone_.resize(count, 0);
    for (std::uint64_t i = 0; i < count; i += 8) {
        std::uint8_t byte = r.u8();
        for (std::uint64_t b = 0; b < 8 && i + b < count; ++b)
            idx.tombstone_[i + b] = (byte >> b) & 1;
    }
    for (std::uint64_t node = 0; node < count; ++node)
        if (!idx.tombstone_[node])
            idx.id_to_node_[idx.ids_[node]] = static_cast<std::uint32_t>(node);

    const bool has_graph = r.u8() != 0;
    if (has_graph) {
        idx.entry_point_ = static_cast<std::int64_t>(r.u64()) - 1;
        idx.top_level_ = r.u8();
        idx.nodes_.resize(count);
        for (std::uint64_t n = 0; n < count; ++n) {
            Node& node = idx.nodes_[n];
            node.level = r.u8();
            node.neighbors.resize(static_cast<std::size_t>(node.level) + 1);
            for (auto& adj : node.neighbors) {
                std::uint64_t deg = r.varint();
                adj.resize(deg);
                std::uint32_t prev = 0;
                for (std::uint64_t i = 0; i < deg; ++i) {
                    prev = (i ? prev : 0) + static_cast<std::uint32_t>(r.varint());
                    adj[i] = prev;
                }
            }
        }
    } else {
        // brute-force backend still tracks levels so re-serialization round-trips
        idx.nodes_.resize(count);
        for (std::uint64_t n = 0; n < count; ++n) {
            idx.nodes_[n].level = idx.level_for(idx.ids_[n]);
            idx.nodes_[n].neighbors.resize(static_cast<std::size_t>(idx.nodes_[n].level) + 1);
        }
    }
    if (!r.done()) throw IoError("vector segment: trailing bytes");
    return idx;
}

void VectorIndex::save(const std::string& path) const {
    std::string blob;
    serialize(blob);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw IoError("short write to " + path);
}

VectorIndex VectorIndex::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return deserialize(buf.str());
}

}  // namespace sinr
