#include "sinr/chunk.hpp"

#include <algorithm>
#include <cassert>

#include "sinr/common.hpp"

namespace sinr {

void ChunkingConfig::validate() const {
    if (stride_tokens == 0 || stride_tokens > window_tokens)
        throw ContractError("chunking config: require 0 < stride <= window");
    if (min_tail_tokens >= window_tokens)
        throw ContractError("chunking config: require min_tail < window");
    if (min_retrieve_tokens >= max_retrieve_tokens)
        throw ContractError("chunking config: require min_retrieve < max_retrieve");
}

std::string make_chunk_id(char layer, std::string_view doc_id, TokenSpan span,
                          std::string_view text) {
    std::uint64_t h = fnv1a64(doc_id);
    h = fnv1a64(std::string_view("\0", 1), h);
    char buf[17];
    buf[0] = layer;
    std::uint64_t content = fnv1a64(text);
    for (int i = 0; i < 4; ++i) buf[1 + i] = static_cast<char>((span.start >> (8 * i)) & 0xff);
    for (int i = 0; i < 4; ++i) buf[5 + i] = static_cast<char>((span.end >> (8 * i)) & 0xff);
    for (int i = 0; i < 8; ++i) buf[9 + i] = static_cast<char>((content >> (8 * i)) & 0xff);
    h = fnv1a64(std::string_view(buf, sizeof(buf)), h);
    std::string id;
    id.push_back(layer);
    id.push_back('_');
    id += to_hex16(h);
    return id;
}

std::uint64_t id_hash64(std::string_view chunk_id) { return fnv1a64(chunk_id); }

namespace {

// Greedy accumulation over structural segments, then a repair pass that
// merges or rebalances undersized chunks.
std::vector<TokenSpan> retrieve_spans(std::uint32_t n_tokens,
                                      const std::vector<BoundaryMarker>& markers,
                                      const ChunkingConfig& cfg) {
    std::vector<std::uint32_t> cuts{0};
    for (const auto& m : markers) {
        if (m.token_offset > 0 && m.token_offset < n_tokens &&
            m.token_offset != cuts.back())
            cuts.push_back(m.token_offset);
    }
    cuts.push_back(n_tokens);

    const std::uint32_t max = cfg.max_retrieve_tokens;
    std::vector<TokenSpan> spans;
    std::uint32_t acc_start = 0, acc_end = 0;
    auto flush = [&] {
        if (acc_end > acc_start) spans.push_back({acc_start, acc_end});
        acc_start = acc_end;
    };
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        std::uint32_t seg_start = cuts[i], seg_end = cuts[i + 1];
        std::uint32_t seg_len = seg_end - seg_start;
        if (seg_len > max) {
            flush();
            // hard split at max-token intervals
            for (std::uint32_t s = seg_start; s < seg_end; s += max)
                spans.push_back({s, std::min(s + max, seg_end)});
            acc_start = acc_end = seg_end;
            continue;
        }
        if (acc_end - acc_start + seg_len > max) flush();
        acc_end = seg_end;
    }
    flush();

    // Repair: no chunk may fall below min_retrieve unless it is the only one.
    const std::uint32_t min = cfg.min_retrieve_tokens;
    bool changed = true;
    while (changed && spans.size() > 1) {
        changed = false;
        for (std::size_t i = 0; i < spans.size(); ++i) {
            if (spans[i].length() >= min) continue;
            std::size_t j = (i + 1 < spans.size()) ? i + 1 : i - 1;
            std::size_t lo = std::min(i, j), hi = std::max(i, j);
            std::uint32_t combined = spans[lo].length() + spans[hi].length();
            if (combined <= max) {
                spans[lo].end = spans[hi].end;
                spans.erase(spans.begin() + static_cast<std::ptrdiff_t>(hi));
            } else {
                std::uint32_t half = combined / 2;
                std::uint32_t mid = spans[lo].start + half;
                spans[lo].end = mid;
                spans[hi].start = mid;
            }
            changed = true;
            break;
        }
    }
    return spans;
}

}  // namespace

std::vector<RetrieveChunk> create_retrieve_chunks(const Document& doc,
                                                  const ChunkingConfig& cfg) {
    cfg.validate();
    const auto tokens = tokenize(doc.text);
    if (tokens.empty()) return {};

    auto spans = retrieve_spans(static_cast<std::uint32_t>(tokens.size()),
                                doc.structure_hints, cfg);
    std::vector<RetrieveChunk> chunks;
    chunks.reserve(spans.size());
    std::uint32_t ordinal = 0;
    for (const auto& span : spans) {
        RetrieveChunk c;
        c.doc_id = doc.doc_id;
        c.span = span;
        c.text = detokenize(doc.text, tokens, span);
        c.ordinal = ordinal++;
        c.retrieve_id = make_chunk_id('r', doc.doc_id, span, c.text);
        chunks.push_back(std::move(c));
    }
    return chunks;
}

std::vector<SearchChunk> create_search_chunks(const RetrieveChunk& parent,
                                              const ChunkingConfig& cfg) {
    cfg.validate();
    const auto tokens = tokenize(parent.text);
    const auto len = static_cast<std::uint32_t>(tokens.size());
    if (len == 0) return {};
    assert(len == parent.span.length());

    const std::uint32_t w = cfg.window_tokens;
    const std::uint32_t tau = cfg.stride_tokens;

    std::vector<TokenSpan> windows;
    if (len <= w) {
        windows.push_back({0, len});
    } else {
        for (std::uint32_t start = 0; start < len; start += tau)
            windows.push_back({start, std::min(start + w, len)});
        // Drop a degenerate tail that the previous window already covers.
        if (windows.size() > 1) {
            const TokenSpan& tail = windows.back();
            const TokenSpan& prev = windows[windows.size() - 2];
            if (tail.length() < cfg.min_tail_tokens && prev.end >= tail.end)
                windows.pop_back();
        }
    }

    std::vector<SearchChunk> out;
    out.reserve(windows.size());
    std::uint32_t ordinal = 0;
    for (const auto& local : windows) {
        SearchChunk s;
        s.retrieve_id = parent.retrieve_id;
        s.doc_id = parent.doc_id;
        s.span = {parent.span.start + local.start, parent.span.start + local.end};
        s.text = detokenize(parent.text, tokens, local);
        s.window_ordinal = ordinal++;
        s.search_id = make_chunk_id('s', parent.doc_id, s.span, s.text);
        out.push_back(std::move(s));
    }
    return out;
}

ChunkedDocument chunk_document(const Document& doc, const ChunkingConfig& cfg) {
    ChunkedDocument result;
    result.retrieve_chunks = create_retrieve_chunks(doc, cfg);
    for (const auto& parent : result.retrieve_chunks) {
        auto windows = create_search_chunks(parent, cfg);
        for (auto& s : windows) {
            result.mapping.emplace_back(s.search_id, s.retrieve_id);
            result.search_chunks.push_back(std::move(s));
        }
    }
    return result;
}

}  // namespace sinr
