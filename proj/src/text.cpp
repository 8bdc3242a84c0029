#include "sinr/text.hpp"

#include <cctype>

#include "sinr/common.hpp"

namespace sinr {

std::string to_hex16(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return s;
}

std::string normalize_text(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        char c = raw[i];
        if (c == '\r') {
            if (i + 1 < raw.size() && raw[i + 1] == '\n') continue;  // CRLF -> LF
            out.push_back('\n');
        } else {
            out.push_back(c);
        }
    }
    return out;
}

namespace {
inline bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}
}  // namespace

std::vector<Token> tokenize(std::string_view text) {
    std::vector<Token> tokens;
    std::uint32_t i = 0;
    const auto n = static_cast<std::uint32_t>(text.size());
    while (i < n) {
        while (i < n && is_space(text[i])) ++i;
        if (i >= n) break;
        std::uint32_t begin = i;
        while (i < n && !is_space(text[i])) ++i;
        tokens.push_back(Token{begin, i});
    }
    return tokens;
}

std::string detokenize(std::string_view text, const std::vector<Token>& tokens,
                       TokenSpan span) {
    if (span.start >= span.end || span.end > tokens.size()) {
        throw RangeError("detokenize: span [" + std::to_string(span.start) + "," +
                         std::to_string(span.end) + ") out of bounds for " +
                         std::to_string(tokens.size()) + " tokens");
    }
    const std::uint32_t begin = tokens[span.start].begin;
    const std::uint32_t end = tokens[span.end - 1].end;
    return std::string(text.substr(begin, end - begin));
}

}  // namespace sinr
