#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace sinr {

// Byte range of one token inside normalized text.
struct Token {
    std::uint32_t begin = 0;  // inclusive byte offset
    std::uint32_t end = 0;    // exclusive byte offset
};

// Half-open token-index range [start, end).
struct TokenSpan {
    std::uint32_t start = 0;
    std::uint32_t end = 0;

    std::uint32_t length() const { return end - start; }
    bool contains(const TokenSpan& other) const {
        return start <= other.start && other.end <= end;
    }
    bool overlaps(const TokenSpan& other) const {
        return start < other.end && other.start < end;
    }
    friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
};

// Canonical text form for the whole project: UTF-8 with CR and CRLF line
// endings folded to LF. Every ingested document passes through this before
// tokenization, so chunk boundaries are byte-stable across platforms.
std::string normalize_text(std::string_view raw);

// Tokens are maximal runs of non-whitespace bytes. Pure and deterministic.
std::vector<Token> tokenize(std::string_view text);

// Slice of the source text covering [span.start, span.end) tokens, including
// the whitespace between them. Throws RangeError on an empty or out-of-bounds
// span.
std::string detokenize(std::string_view text, const std::vector<Token>& tokens,
                       TokenSpan span);

}  // namespace sinr
