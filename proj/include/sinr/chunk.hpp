#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sinr/document.hpp"

namespace sinr {

struct ChunkingConfig {
    std::uint32_t window_tokens = 150;      // w
    std::uint32_t stride_tokens = 100;      // tau
    std::uint32_t min_retrieve_tokens = 64;
    std::uint32_t max_retrieve_tokens = 1000;
    std::uint32_t min_tail_tokens = 32;

    void validate() const;
    friend bool operator==(const ChunkingConfig&, const ChunkingConfig&) = default;
};

// Coarse contextual unit; the unit returned to callers. Spans partition the
// document.
struct RetrieveChunk {
    std::string retrieve_id;
    std::string doc_id;
    TokenSpan span;     // in document token coordinates
    std::string text;
    std::uint32_t ordinal = 0;
};

// Fine overlapping window inside one retrieve chunk; the unit that is
// embedded and indexed.
struct SearchChunk {
    std::string search_id;
    std::string retrieve_id;
    std::string doc_id;
    TokenSpan span;     // in document token coordinates
    std::string text;
    std::uint32_t window_ordinal = 0;
};

// Content-addressed id: layer prefix + hex hash of (doc_id, span, layer,
// text). Identical content always produces the identical id, which is what
// makes incremental updates idempotent.
std::string make_chunk_id(char layer, std::string_view doc_id, TokenSpan span,
                          std::string_view text);

// Fixed 8-byte key for the mapping log.
std::uint64_t id_hash64(std::string_view chunk_id);

// Greedy structural segmentation: merge consecutive structural segments until
// the next would exceed max_retrieve, hard-split oversized segments. Output
// partitions the document.
std::vector<RetrieveChunk> create_retrieve_chunks(const Document& doc,
                                                  const ChunkingConfig& cfg);

// Sliding windows of w tokens at stride tau inside one parent. A parent no
// longer than w yields exactly one window. A final window shorter than
// min_tail is dropped when the previous window already covers it.
std::vector<SearchChunk> create_search_chunks(const RetrieveChunk& parent,
                                              const ChunkingConfig& cfg);

struct ChunkedDocument {
    std::vector<RetrieveChunk> retrieve_chunks;
    std::vector<SearchChunk> search_chunks;
    std::vector<std::pair<std::string, std::string>> mapping;  // (search_id, retrieve_id)
};

ChunkedDocument chunk_document(const Document& doc, const ChunkingConfig& cfg);

}  // namespace sinr
