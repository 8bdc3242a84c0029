#pragma once

// Shared helpers for building synthetic documents and corpora in tests.

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <random>

#include <unistd.h>
#include <string>
#include <vector>

#include "sinr/document.hpp"

namespace sinr::testing {

// count tokens named "<tag>0 <tag>1 ...".
inline std::string make_tokens(std::size_t count, const std::string& tag = "tok") {
    std::string out;
    for (std::size_t i = 0; i < count; ++i) {
        if (i) out += ' ';
        out += tag + std::to_string(i);
    }
    return out;
}

// One paragraph per entry, sized in tokens, separated by blank lines.
inline Document make_paragraph_doc(const std::string& doc_id,
                                   const std::vector<std::size_t>& para_tokens) {
    std::string text;
    for (std::size_t p = 0; p < para_tokens.size(); ++p) {
        if (p) text += "\n\n";
        text += make_tokens(para_tokens[p], "p" + std::to_string(p) + "w");
    }
    return make_document(doc_id, "", text);
}

// Deterministic synthetic corpus: ndocs documents of roughly tokens_per_doc
// whitespace tokens split into paragraphs, drawn from a small shared
// vocabulary so queries have non-trivial neighbors.
inline std::vector<Document> make_synth_corpus(int ndocs, int tokens_per_doc,
                                               std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> word(0, 799);
    std::uniform_int_distribution<int> para_len(80, 240);
    std::vector<Document> corpus;
    corpus.reserve(ndocs);
    for (int d = 0; d < ndocs; ++d) {
        std::string text;
        int remaining = tokens_per_doc;
        while (remaining > 0) {
            int n = std::min(remaining, para_len(rng));
            remaining -= n;
            if (!text.empty()) text += "\n\n";
            for (int i = 0; i < n; ++i) {
                if (i) text += ' ';
                text += "w" + std::to_string(word(rng));
            }
        }
        char name[32];
        std::snprintf(name, sizeof(name), "doc%05d.txt", d);
        corpus.push_back(make_document(name, "", text));
    }
    return corpus;
}

// Unique scratch directory under the system temp root, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("sinr_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace sinr::testing
