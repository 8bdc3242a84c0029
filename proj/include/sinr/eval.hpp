#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sinr/document.hpp"
#include "sinr/embed.hpp"
#include "sinr/engine.hpp"
#include "sinr/index.hpp"

namespace sinr {

// Single-layer fixed-window comparison system: every window is both searched
// and returned, no parent layer.
struct BaselineConfig {
    std::uint32_t chunk_tokens = 500;
    std::uint32_t overlap_tokens = 50;

    void validate() const;
    std::uint32_t stride() const { return chunk_tokens - overlap_tokens; }
};

struct BaselineChunk {
    std::string chunk_id;
    std::string doc_id;
    TokenSpan span;
    std::string text;
};

struct BaselineHit {
    const BaselineChunk* chunk = nullptr;
    float score = 0.0f;
};

class BaselineIndex {
public:
    static BaselineIndex build(const std::vector<Document>& corpus,
                               const BaselineConfig& cfg, const Embedder& embedder,
                               IndexBackend backend, const HnswParams& params);

    std::vector<BaselineHit> query(const std::string& text, int k) const;

    std::size_t chunk_count() const { return chunks_.size(); }
    const std::string& fingerprint() const { return index_->fingerprint(); }
    const std::string& corpus_hash() const { return corpus_hash_; }

    // Fixed windows of chunk_tokens at stride chunk_tokens - overlap_tokens;
    // enumeration stops once a window reaches the end of the document.
    static std::vector<TokenSpan> window_spans(std::uint32_t n_tokens,
                                               const BaselineConfig& cfg);

private:
    std::vector<BaselineChunk> chunks_;
    std::unordered_map<std::string, std::size_t> by_id_;
    std::unique_ptr<VectorIndex> index_;
    const Embedder* embedder_ = nullptr;
    std::string corpus_hash_;
};

struct NeedleCase {
    std::string case_id;
    std::string query;
    std::string gold_text;
    std::string doc_id;
    TokenSpan gold_span;  // document token coordinates
    bool straddles_boundary = false;
};

struct NeedleSpec {
    int cases = 50;
    int filler_docs = 20;
    // Straddling gold spans cross token offset 500 of their document at a
    // position no fixed 500/50 window fully contains.
    double straddle_fraction = 0.5;
};

std::pair<std::vector<Document>, std::vector<NeedleCase>> generate_needle_corpus(
    const NeedleSpec& spec, std::uint64_t seed);

struct CaseResult {
    std::string case_id;
    bool straddles = false;
    bool sinr_hit = false;       // some returned parent fully contains the gold span
    bool baseline_hit = false;
    bool sinr_fragmented = false;
    bool baseline_fragmented = false;
    std::size_t sinr_unique_parents = 0;   // at the search k, pre-cap
    std::uint32_t sinr_context_tokens = 0;
    std::uint32_t baseline_context_tokens = 0;
};

struct EvalReport {
    int k = 5;
    int search_k = 20;
    std::vector<CaseResult> cases;
    double sinr_hit_rate = 0.0;
    double baseline_hit_rate = 0.0;
    double sinr_fragmentation_rate = 0.0;      // over straddling cases
    double baseline_fragmentation_rate = 0.0;  // over straddling cases
    double mean_unique_parents = 0.0;
    double mean_sinr_context_tokens = 0.0;
    double mean_baseline_context_tokens = 0.0;
    double sinr_query_ms = 0.0;
    double baseline_query_ms = 0.0;

    std::vector<std::string> to_line_records(bool include_timings = true) const;
    std::string summary_table() const;  // timing-free, deterministic
};

// hit@k = some returned chunk fully contains the gold span; fragmentation =
// >= 2 returned chunks overlap the gold span but none contains it.
EvalReport run_eval(const Engine& engine, const BaselineIndex& baseline,
                    const std::vector<NeedleCase>& cases, int k, int search_k = 20);

}  // namespace sinr
