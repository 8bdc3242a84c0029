#include "sinr/document.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "sinr/common.hpp"

namespace sinr {

namespace {

bool is_blank(std::string_view line) {
    for (char c : line)
        if (c != ' ' && c != '\t') return false;
    return true;
}

bool is_heading(std::string_view line) {
    std::size_t i = 0;
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    return i < line.size() && line[i] == '#';
}

bool is_thematic_break(std::string_view line) {
    std::size_t i = 0, j = line.size();
    while (i < j && (line[i] == ' ' || line[i] == '\t')) ++i;
    while (j > i && (line[j - 1] == ' ' || line[j - 1] == '\t')) --j;
    if (j - i < 3) return false;
    char c = line[i];
    if (c != '-' && c != '*' && c != '_') return false;
    for (std::size_t k = i; k < j; ++k)
        if (line[k] != c) return false;
    return true;
}

std::size_t count_tokens(std::string_view line) {
    return tokenize(line).size();
}

void push_marker(std::vector<BoundaryMarker>& markers, MarkerKind kind,
                 std::uint32_t offset) {
    if (!markers.empty() && markers.back().token_offset == offset) {
        // Collapse same-offset markers; the stronger signal wins.
        if (kind == MarkerKind::kHeading) markers.back().kind = kind;
        return;
    }
    markers.push_back(BoundaryMarker{kind, offset});
}

}  // namespace

Document make_document(std::string doc_id, std::string source_path,
                       std::string_view raw_text) {
    Document doc;
    doc.doc_id = std::move(doc_id);
    doc.source_path = std::move(source_path);
    doc.text = normalize_text(raw_text);

    std::vector<BoundaryMarker> markers;
    std::uint32_t tokens_so_far = 0;
    bool pending_paragraph_break = false;
    bool seen_content = false;

    std::size_t pos = 0;
    while (pos <= doc.text.size()) {
        std::size_t eol = doc.text.find('\n', pos);
        std::string_view line(doc.text.data() + pos,
                              (eol == std::string::npos ? doc.text.size() : eol) - pos);
        if (is_blank(line)) {
            if (seen_content) pending_paragraph_break = true;
        } else {
            if (pending_paragraph_break) {
                push_marker(markers, MarkerKind::kParagraphBreak, tokens_so_far);
                pending_paragraph_break = false;
            }
            if (is_heading(line)) {
                push_marker(markers, MarkerKind::kHeading, tokens_so_far);
            } else if (is_thematic_break(line)) {
                push_marker(markers, MarkerKind::kHardBreak, tokens_so_far);
            }
            tokens_so_far += static_cast<std::uint32_t>(count_tokens(line));
            seen_content = true;
        }
        if (eol == std::string::npos) break;
        pos = eol + 1;
    }

    doc.structure_hints = std::move(markers);
    return doc;
}

CorpusLoadResult load_corpus(const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    CorpusLoadResult result;
    if (!fs::exists(root) || !fs::is_directory(root)) {
        throw IoError("corpus root not readable: " + root.string());
    }

    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file()) continue;
        auto ext = entry.path().extension().string();
        if (ext == ".txt" || ext == ".md") files.push_back(entry.path());
    }

    for (const auto& path : files) {
        std::string rel = fs::relative(path, root).generic_string();
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            result.errors.push_back({path.string(), "unreadable file"});
            continue;
        }
        std::ostringstream buf;
        buf << in.rdbuf();
        if (in.bad()) {
            result.errors.push_back({path.string(), "read failure"});
            continue;
        }
        result.documents.push_back(make_document(rel, path.string(), buf.str()));
    }

    std::sort(result.documents.begin(), result.documents.end(),
              [](const Document& a, const Document& b) { return a.doc_id < b.doc_id; });
    return result;
}

}  // namespace sinr
