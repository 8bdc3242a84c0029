#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sinr/text.hpp"

namespace sinr {

enum class MarkerKind { kHeading, kParagraphBreak, kHardBreak };

struct BoundaryMarker {
    MarkerKind kind = MarkerKind::kParagraphBreak;
    std::uint32_t token_offset = 0;
    friend bool operator==(const BoundaryMarker&, const BoundaryMarker&) = default;
};

struct Document {
    std::string doc_id;
    std::string source_path;
    std::string text;  // normalized
    std::vector<BoundaryMarker> structure_hints;  // strictly increasing offsets
};

// Normalizes the raw text and extracts structural markers: markdown headings,
// thematic breaks (---, ***, ___) and blank-line paragraph breaks.
Document make_document(std::string doc_id, std::string source_path,
                       std::string_view raw_text);

struct CorpusFileError {
    std::string path;
    std::string message;
};

struct CorpusLoadResult {
    std::vector<Document> documents;  // sorted by doc_id
    std::vector<CorpusFileError> errors;
};

// Loads every .txt / .md file under root. doc_id is the relative path with
// '/' separators. Unreadable files are collected as errors, not thrown.
CorpusLoadResult load_corpus(const std::filesystem::path& root);

}  // namespace sinr
