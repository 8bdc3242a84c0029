#include "sinr/store.hpp"

#include <fcntl.h>
#include <unistd.h>
#include <zlib.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "sinr/binio.hpp"
#include "sinr/common.hpp"

#include <nlohmann/json.hpp>

namespace sinr {

namespace {
constexpr char kMapMagic[9] = "SINRMAP1";
constexpr char kIdxMagic[9] = "SINRDIX1";
constexpr char kDatMagic[9] = "SINRDAT1";
constexpr std::uint32_t kStoreVersion = 1;

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::filesystem::path& path, std::string_view data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw IoError("short write to " + path.string());
}
}  // namespace

// ---------------------------------------------------------------------------
// ParentMap

ParentMap::ParentMap(const ParentMap& other) { *this = other; }

ParentMap& ParentMap::operator=(const ParentMap& other) {
    if (this == &other) return *this;
    forward_ = other.forward_;
    reverse_ = other.reverse_;
    insertion_order_ = other.insertion_order_;
    hash_names_ = other.hash_names_;
    rebuild_probe();  // probe slots point into forward_ nodes, never shared
    return *this;
}

void ParentMap::probe_insert(std::uint64_t h, const std::string* parent) {
    std::size_t idx = h & probe_mask_;
    while (probe_[idx].parent != nullptr) idx = (idx + 1) & probe_mask_;
    probe_[idx] = ProbeSlot{h, parent};
}

void ParentMap::rebuild_probe() {
    std::size_t cap = 16;
    while (cap < forward_.size() * 2) cap <<= 1;
    probe_.assign(cap, ProbeSlot{});
    probe_mask_ = cap - 1;
    for (const auto& [sid, rid] : forward_) probe_insert(id_hash64(sid), &rid);
}

void ParentMap::check_hash(const std::string& id) {
    const std::uint64_t h = id_hash64(id);
    auto [it, inserted] = hash_names_.emplace(h, id);
    if (!inserted && it->second != id)
        throw ConflictError("8-byte id hash collision between " + it->second +
                            " and " + id);
}

void ParentMap::put(const std::vector<std::pair<std::string, std::string>>& pairs) {
    for (const auto& [sid, rid] : pairs) {
        auto it = forward_.find(sid);
        if (it != forward_.end()) {
            if (it->second != rid)
                throw ConflictError("search chunk " + sid + " already mapped to " +
                                    it->second + ", cannot re-parent to " + rid);
            continue;  // idempotent
        }
        check_hash(sid);
        check_hash(rid);
        auto fit = forward_.emplace(sid, rid).first;
        reverse_[rid].push_back(sid);
        insertion_order_.push_back(sid);
        if (forward_.size() * 2 >= probe_.size())
            rebuild_probe();
        else
            probe_insert(id_hash64(sid), &fit->second);
    }
}

void ParentMap::erase(const std::string& search_id) {
    auto it = forward_.find(search_id);
    if (it == forward_.end()) return;
    auto& siblings = reverse_[it->second];
    siblings.erase(std::remove(siblings.begin(), siblings.end(), search_id),
                   siblings.end());
    if (siblings.empty()) reverse_.erase(it->second);
    forward_.erase(it);
    insertion_order_.erase(
        std::remove(insertion_order_.begin(), insertion_order_.end(), search_id),
        insertion_order_.end());
    rebuild_probe();
}

const std::string* ParentMap::find_parent(
    const std::string& search_id) const noexcept {
    if (probe_.empty()) return nullptr;
    const std::uint64_t h = id_hash64(search_id);
    std::size_t idx = h & probe_mask_;
    while (probe_[idx].parent != nullptr) {
        // Hash equality is identity: every stored id passed the collision
        // guard, and the on-disk format identifies ids the same way.
        if (probe_[idx].hash == h) return probe_[idx].parent;
        idx = (idx + 1) & probe_mask_;
    }
    return nullptr;
}

void ParentMap::prefetch_lookup(const std::string& search_id) const noexcept {
    if (probe_.empty()) return;
    __builtin_prefetch(&probe_[id_hash64(search_id) & probe_mask_]);
}

const std::string& ParentMap::lookup_parent(const std::string& search_id) const {
    const std::string* parent = find_parent(search_id);
    if (parent == nullptr)
        throw NotFoundError("no parent mapping for " + search_id);
    return *parent;
}

bool ParentMap::contains(const std::string& search_id) const {
    return forward_.count(search_id) > 0;
}

const std::vector<std::string>& ParentMap::children(
    const std::string& retrieve_id) const {
    static const std::vector<std::string> kEmpty;
    auto it = reverse_.find(retrieve_id);
    return it == reverse_.end() ? kEmpty : it->second;
}

void ParentMap::save(const std::filesystem::path& path) const {
    std::string out;
    out.reserve(kHeaderBytes + 16 * forward_.size());
    out.append(kMapMagic, 8);
    binio::put_u32(out, kStoreVersion);
    binio::put_u32(out, 0);  // reserved
    for (const auto& sid : insertion_order_) {
        binio::put_u64(out, id_hash64(sid));
        binio::put_u64(out, id_hash64(forward_.at(sid)));
    }
    write_file(path, out);
}

ParentMap ParentMap::load(
    const std::filesystem::path& path,
    const std::unordered_map<std::uint64_t, std::string>& search_names,
    const std::unordered_map<std::uint64_t, std::string>& retrieve_names) {
    const std::string raw = read_file(path);
    binio::Reader r(raw);
    if (r.raw(8) != std::string_view(kMapMagic, 8))
        throw IoError("mapping log: bad magic");
    if (r.u32() != kStoreVersion) throw IoError("mapping log: unsupported version");
    r.u32();  // reserved

    ParentMap map;
    std::vector<std::pair<std::string, std::string>> pairs;
    while (!r.done()) {
        const std::uint64_t sh = r.u64();
        const std::uint64_t rh = r.u64();
        auto sit = search_names.find(sh);
        auto rit = retrieve_names.find(rh);
        if (sit == search_names.end() || rit == retrieve_names.end())
            throw IoError("mapping log references unknown chunk ids");
        pairs.emplace_back(sit->second, rit->second);
    }
    map.put(pairs);
    return map;
}

// ---------------------------------------------------------------------------
// DocStore

void DocStore::put(StoredRetrieveChunk chunk) {
    auto it = chunks_.find(chunk.retrieve_id);
    if (it == chunks_.end()) {
        insertion_order_.push_back(chunk.retrieve_id);
        chunks_.emplace(chunk.retrieve_id, std::move(chunk));
    } else {
        it->second = std::move(chunk);
    }
}

void DocStore::erase(const std::string& retrieve_id) {
    if (chunks_.erase(retrieve_id) > 0) {
        insertion_order_.erase(
            std::remove(insertion_order_.begin(), insertion_order_.end(), retrieve_id),
            insertion_order_.end());
    }
}

bool DocStore::contains(const std::string& retrieve_id) const {
    return chunks_.count(retrieve_id) > 0;
}

DocStore::GetResult DocStore::get(const std::vector<std::string>& ids) const {
    GetResult result;
    for (const auto& id : ids) {
        auto it = chunks_.find(id);
        if (it == chunks_.end())
            result.missing.push_back(id);
        else
            result.found.push_back(it->second);
    }
    return result;
}

const StoredRetrieveChunk& DocStore::at(const std::string& retrieve_id) const {
    auto it = chunks_.find(retrieve_id);
    if (it == chunks_.end())
        throw NotFoundError("no retrieve chunk " + retrieve_id);
    return it->second;
}

std::vector<std::string> DocStore::ids_for_doc(const std::string& doc_id) const {
    std::vector<std::string> out;
    for (const auto& [id, chunk] : chunks_)
        if (chunk.doc_id == doc_id) out.push_back(id);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::string> DocStore::all_ids() const {
    std::vector<std::string> out;
    out.reserve(chunks_.size());
    for (const auto& [id, chunk] : chunks_) out.push_back(id);
    std::sort(out.begin(), out.end());
    return out;
}

void DocStore::set_sibling_count(const std::string& retrieve_id, std::uint32_t count) {
    auto it = chunks_.find(retrieve_id);
    if (it == chunks_.end())
        throw NotFoundError("no retrieve chunk " + retrieve_id);
    it->second.sibling_count = count;
}

std::uint64_t DocStore::compressed_text_bytes() const {
    std::uint64_t total = 0;
    for (const auto& [id, chunk] : chunks_)
        total += zlib_compress(chunk.text).size();
    return total;
}

void DocStore::save(const std::filesystem::path& dat_path,
                    const std::filesystem::path& idx_path) const {
    std::string dat;
    dat.append(kDatMagic, 8);
    std::string idx;
    idx.append(kIdxMagic, 8);
    binio::put_u32(idx, kStoreVersion);
    binio::put_u64(idx, chunks_.size());

    for (const auto& id : insertion_order_) {
        const StoredRetrieveChunk& c = chunks_.at(id);
        const std::string compressed = zlib_compress(c.text);
        binio::put_string(idx, c.retrieve_id);
        binio::put_string(idx, c.doc_id);
        binio::put_u32(idx, c.span.start);
        binio::put_u32(idx, c.span.end);
        binio::put_u32(idx, c.sibling_count);
        binio::put_u64(idx, dat.size());
        binio::put_u64(idx, compressed.size());
        binio::put_u64(idx, c.text.size());
        dat += compressed;
    }
    write_file(dat_path, dat);
    write_file(idx_path, idx);
}

DocStore DocStore::load(const std::filesystem::path& dat_path,
                        const std::filesystem::path& idx_path) {
    const std::string dat = read_file(dat_path);
    if (dat.size() < 8 || std::string_view(dat).substr(0, 8) != std::string_view(kDatMagic, 8))
        throw IoError("doc store data file: bad magic");
    const std::string idx = read_file(idx_path);
    binio::Reader r(idx);
    if (r.raw(8) != std::string_view(kIdxMagic, 8))
        throw IoError("doc store index file: bad magic");
    if (r.u32() != kStoreVersion) throw IoError("doc store: unsupported version");
    const std::uint64_t count = r.u64();

    DocStore store;
    for (std::uint64_t i = 0; i < count; ++i) {
        StoredRetrieveChunk c;
        c.retrieve_id = r.str();
        c.doc_id = r.str();
        c.span.start = r.u32();
        c.span.end = r.u32();
        c.sibling_count = r.u32();
        const std::uint64_t offset = r.u64();
        const std::uint64_t clen = r.u64();
        const std::uint64_t raw_len = r.u64();
        if (offset + clen > dat.size()) throw IoError("doc store: record out of range");
        c.text = zlib_decompress(std::string_view(dat).substr(offset, clen),
                                 raw_len);
        store.put(std::move(c));
    }
    if (!r.done()) throw IoError("doc store index: trailing bytes");
    return store;
}

// ---------------------------------------------------------------------------
// Manifest

namespace {
std::string backend_name(IndexBackend b) {
    return b == IndexBackend::kBruteForce ? "brute-force" : "hnsw";
}
IndexBackend backend_from_name(const std::string& s) {
    if (s == "brute-force") return IndexBackend::kBruteForce;
    if (s == "hnsw") return IndexBackend::kHnsw;
    throw IoError("manifest: unknown index backend " + s);
}
std::string provider_name(EmbedProvider p) {
    return p == EmbedProvider::kLocalHash ? "local-hash" : "remote";
}
EmbedProvider provider_from_name(const std::string& s) {
    if (s == "local-hash") return EmbedProvider::kLocalHash;
    if (s == "remote") return EmbedProvider::kRemote;
    throw IoError("manifest: unknown embed provider " + s);
}
}  // namespace

std::string Manifest::to_json() const {
    nlohmann::json j;
    j["format_version"] = format_version;
    j["chunking"]["window_tokens"] = chunking.window_tokens;
    j["chunking"]["stride_tokens"] = chunking.stride_tokens;
    j["chunking"]["min_retrieve_tokens"] = chunking.min_retrieve_tokens;
    j["chunking"]["max_retrieve_tokens"] = chunking.max_retrieve_tokens;
    j["chunking"]["min_tail_tokens"] = chunking.min_tail_tokens;
    j["embedder"]["provider"] = provider_name(embedder.provider);
    j["embedder"]["dim"] = embedder.dim;
    j["embedder"]["fingerprint"] = embedder.fingerprint;
    j["embedder"]["endpoint"] = embedder.endpoint;
    j["index"]["backend"] = backend_name(backend);
    j["index"]["max_links"] = hnsw.max_links;
    j["index"]["ef_construction"] = hnsw.ef_construction;
    j["index"]["ef_search"] = hnsw.ef_search;
    j["index"]["level_seed"] = hnsw.level_seed;
    j["counts"]["search_chunks"] = search_chunk_count;
    j["counts"]["retrieve_chunks"] = retrieve_chunk_count;
    j["corpus_hash"] = corpus_hash;
    return j.dump(2) + "\n";
}

Manifest Manifest::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("manifest parse error: ") + e.what());
    }
    Manifest m;
    m.format_version = j.at("format_version").get<std::uint32_t>();
    if (m.format_version != kFormatVersion)
        throw IoError("manifest: unsupported format_version " +
                      std::to_string(m.format_version));
    const auto& c = j.at("chunking");
    m.chunking.window_tokens = c.at("window_tokens").get<std::uint32_t>();
    m.chunking.stride_tokens = c.at("stride_tokens").get<std::uint32_t>();
    m.chunking.min_retrieve_tokens = c.at("min_retrieve_tokens").get<std::uint32_t>();
    m.chunking.max_retrieve_tokens = c.at("max_retrieve_tokens").get<std::uint32_t>();
    m.chunking.min_tail_tokens = c.at("min_tail_tokens").get<std::uint32_t>();
    const auto& e = j.at("embedder");
    m.embedder.provider = provider_from_name(e.at("provider").get<std::string>());
    m.embedder.dim = e.at("dim").get<int>();
    m.embedder.fingerprint = e.at("fingerprint").get<std::string>();
    m.embedder.endpoint = e.at("endpoint").get<std::string>();
    const auto& ix = j.at("index");
    m.backend = backend_from_name(ix.at("backend").get<std::string>());
    m.hnsw.max_links = ix.at("max_links").get<std::uint32_t>();
    m.hnsw.ef_construction = ix.at("ef_construction").get<std::uint32_t>();
    m.hnsw.ef_search = ix.at("ef_search").get<std::uint32_t>();
    m.hnsw.level_seed = ix.at("level_seed").get<std::uint64_t>();
    m.search_chunk_count = j.at("counts").at("search_chunks").get<std::uint64_t>();
    m.retrieve_chunk_count = j.at("counts").at("retrieve_chunks").get<std::uint64_t>();
    m.corpus_hash = j.at("corpus_hash").get<std::string>();
    return m;
}

void Manifest::save(const std::filesystem::path& path) const {
    write_file(path, to_json());
}

Manifest Manifest::load(const std::filesystem::path& path) {
    return from_json(read_file(path));
}

// ---------------------------------------------------------------------------
// IndexLock

IndexLock::IndexLock(const std::filesystem::path& dir) : path_(dir / ".lock") {
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0)
        throw ConflictError("index directory is locked by another writer: " +
                            dir.string());
    ::close(fd);
    held_ = true;
}

IndexLock::~IndexLock() { release(); }

IndexLock::IndexLock(IndexLock&& other) noexcept
    : path_(std::move(other.path_)), held_(other.held_) {
    other.held_ = false;
}

IndexLock& IndexLock::operator=(IndexLock&& other) noexcept {
    if (this != &other) {
        release();
        path_ = std::move(other.path_);
        held_ = other.held_;
        other.held_ = false;
    }
    return *this;
}

void IndexLock::release() {
    if (held_) {
        std::error_code ec;
        std::filesystem::remove(path_, ec);
        held_ = false;
    }
}

// ---------------------------------------------------------------------------
// zlib helpers

std::string zlib_compress(std::string_view data) {
    uLongf bound = compressBound(static_cast<uLong>(data.size()));
    std::string out(bound, '\0');
    if (compress2(reinterpret_cast<Bytef*>(out.data()), &bound,
                  reinterpret_cast<const Bytef*>(data.data()),
                  static_cast<uLong>(data.size()), 6) != Z_OK)
        throw IoError("zlib compression failed");
    out.resize(bound);
    return out;
}

std::string zlib_decompress(std::string_view data, std::size_t raw_size) {
    std::string out(raw_size, '\0');
    uLongf size = static_cast<uLongf>(raw_size);
    if (raw_size == 0 && data.empty()) return out;
    if (uncompress(reinterpret_cast<Bytef*>(out.data()), &size,
                   reinterpret_cast<const Bytef*>(data.data()),
                   static_cast<uLong>(data.size())) != Z_OK ||
        size != raw_size)
        throw IoError("zlib decompression failed");
    return out;
}

}  // namespace sinr
