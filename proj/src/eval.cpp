#include "sinr/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <random>

#include "sinr/common.hpp"

#include <nlohmann/json.hpp>

namespace sinr {

void BaselineConfig::validate() const {
    if (overlap_tokens >= chunk_tokens)
        throw ContractError("baseline config: require overlap < chunk_tokens");
    if (chunk_tokens == 0) throw ContractError("baseline config: chunk_tokens must be positive");
}

std::vector<TokenSpan> BaselineIndex::window_spans(std::uint32_t n_tokens,
                                                   const BaselineConfig& cfg) {
    cfg.validate();
    std::vector<TokenSpan> spans;
    if (n_tokens == 0) return spans;
    const std::uint32_t stride = cfg.stride();
    for (std::uint32_t start = 0; start < n_tokens; start += stride) {
        const std::uint32_t end = std::min(start + cfg.chunk_tokens, n_tokens);
        spans.push_back({start, end});
        if (end == n_tokens) break;
    }
    return spans;
}

BaselineIndex BaselineIndex::build(const std::vector<Document>& corpus,
                                   const BaselineConfig& cfg,
                                   const Embedder& embedder, IndexBackend backend,
                                   const HnswParams& params) {
    BaselineIndex baseline;
    baseline.embedder_ = &embedder;
    baseline.corpus_hash_ = Engine::corpus_content_hash(corpus);
    baseline.index_ = std::make_unique<VectorIndex>(backend, embedder.dim(), params,
                                                    embedder.fingerprint());
    for (const auto& doc : corpus) {
        const auto tokens = tokenize(doc.text);
        for (const auto& span :
             window_spans(static_cast<std::uint32_t>(tokens.size()), cfg)) {
            BaselineChunk chunk;
            chunk.doc_id = doc.doc_id;
            chunk.span = span;
            chunk.text = detokenize(doc.text, tokens, span);
            chunk.chunk_id = make_chunk_id('b', doc.doc_id, span, chunk.text);
            baseline.by_id_[chunk.chunk_id] = baseline.chunks_.size();
            baseline.index_->insert(
                IndexedVector{chunk.chunk_id, embedder.embed(chunk.text), false});
            baseline.chunks_.push_back(std::move(chunk));
        }
    }
    return baseline;
}

std::vector<BaselineHit> BaselineIndex::query(const std::string& text, int k) const {
    const EmbeddingVector q = embedder_->embed(text);
    std::vector<BaselineHit> out;
    for (const auto& hit : index_->query(q, k)) {
        out.push_back(BaselineHit{&chunks_[by_id_.at(hit.search_id)], hit.score});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Needle corpus

namespace {

std::string filler_word(std::mt19937_64& rng) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "w%03d", static_cast<int>(rng() % 500));
    return buf;
}

// Appends `count` filler tokens to the paragraph.
void fill(std::vector<std::string>& para, std::mt19937_64& rng, int count) {
    for (int i = 0; i < count; ++i) para.push_back(filler_word(rng));
}

std::string join_paragraphs(const std::vector<std::vector<std::string>>& paragraphs) {
    std::string text;
    for (std::size_t p = 0; p < paragraphs.size(); ++p) {
        if (p) text += "\n\n";
        for (std::size_t i = 0; i < paragraphs[p].size(); ++i) {
            if (i) text += ' ';
            text += paragraphs[p][i];
        }
    }
    text += '\n';
    return text;
}

}  // namespace

std::pair<std::vector<Document>, std::vector<NeedleCase>> generate_needle_corpus(
    const NeedleSpec& spec, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<Document> corpus;
    std::vector<NeedleCase> cases;

    const int straddling = static_cast<int>(spec.cases * spec.straddle_fraction);
    for (int i = 0; i < spec.cases; ++i) {
        const bool straddle = i < straddling;
        char docname[32];
        std::snprintf(docname, sizeof(docname), "needle_%04d.txt", i);

        const int gold_len = straddle ? 100 : 60;
        std::vector<std::string> gold;
        gold.reserve(static_cast<std::size_t>(gold_len));
        for (int j = 0; j < gold_len; ++j)
            gold.push_back("needle" + std::to_string(i) + "tok" + std::to_string(j));

        std::vector<std::vector<std::string>> paragraphs;
        NeedleCase c;
        if (straddle) {
            // Gold spans tokens [420, 520): it crosses offset 500 and no
            // 500-token window at stride 450 fully contains it.
            std::vector<std::string> a;
            fill(a, rng, 400);
            paragraphs.push_back(std::move(a));
            std::vector<std::string> b;
            fill(b, rng, 20);
            b.insert(b.end(), gold.begin(), gold.end());
            fill(b, rng, 80);
            paragraphs.push_back(std::move(b));
            c.gold_span = {420, 520};
        } else {
            // Gold fully inside the second paragraph, tokens [100, 160).
            std::vector<std::string> a;
            fill(a, rng, 80);
            paragraphs.push_back(std::move(a));
            std::vector<std::string> b;
            fill(b, rng, 20);
            b.insert(b.end(), gold.begin(), gold.end());
            fill(b, rng, 40);
            paragraphs.push_back(std::move(b));
            c.gold_span = {100, 160};
        }
        std::vector<std::string> tail1, tail2;
        fill(tail1, rng, 150);
        fill(tail2, rng, 150);
        paragraphs.push_back(std::move(tail1));
        paragraphs.push_back(std::move(tail2));

        std::string gold_text;
        for (std::size_t j = 0; j < gold.size(); ++j) {
            if (j) gold_text += ' ';
            gold_text += gold[j];
        }
        c.case_id = "case_" + std::to_string(i);
        c.doc_id = docname;
        c.query = gold_text;
        c.gold_text = std::move(gold_text);
        c.straddles_boundary = straddle;
        cases.push_back(std::move(c));

        corpus.push_back(make_document(docname, docname, join_paragraphs(paragraphs)));
    }

    for (int i = 0; i < spec.filler_docs; ++i) {
        char docname[32];
        std::snprintf(docname, sizeof(docname), "filler_%04d.txt", i);
        std::vector<std::vector<std::string>> paragraphs;
        const int n_paras = 3 + static_cast<int>(rng() % 3);
        for (int p = 0; p < n_paras; ++p) {
            std::vector<std::string> para;
            fill(para, rng, 100 + static_cast<int>(rng() % 100));
            paragraphs.push_back(std::move(para));
        }
        corpus.push_back(make_document(docname, docname, join_paragraphs(paragraphs)));
    }

    std::sort(corpus.begin(), corpus.end(),
              [](const Document& a, const Document& b) { return a.doc_id < b.doc_id; });
    return {std::move(corpus), std::move(cases)};
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

struct Containment {
    bool hit = false;
    bool fragmented = false;
};

// hit: some chunk (same doc) fully contains gold; fragmented: >=2 chunks
// overlap gold but none contains it.
template <typename SpanOf>
Containment check_containment(const NeedleCase& c, std::size_t count, SpanOf span_of) {
    Containment result;
    int overlapping = 0;
    for (std::size_t i = 0; i < count; ++i) {
        auto [doc_id, span] = span_of(i);
        if (doc_id != c.doc_id) continue;
        if (span.contains(c.gold_span)) result.hit = true;
        if (span.overlaps(c.gold_span)) ++overlapping;
    }
    result.fragmented = !result.hit && overlapping >= 2;
    return result;
}

}  // namespace

EvalReport run_eval(const Engine& engine, const BaselineIndex& baseline,
                    const std::vector<NeedleCase>& cases, int k, int search_k) {
    if (engine.manifest().embedder.fingerprint != baseline.fingerprint())
        throw ContractError("eval: systems use different embedders");
    if (engine.manifest().corpus_hash != baseline.corpus_hash())
        throw ContractError("eval: systems were built over different corpora");

    EvalReport report;
    report.k = k;
    report.search_k = search_k;

    using clock = std::chrono::steady_clock;
    int straddle_cases = 0;

    for (const auto& c : cases) {
        CaseResult row;
        row.case_id = c.case_id;
        row.straddles = c.straddles_boundary;

        QueryRequest req;
        req.text = c.query;
        req.k = search_k;
        req.max_parents = static_cast<std::uint32_t>(k);

        auto t0 = clock::now();
        const RetrievalResult sinr = engine.retrieve(req);
        report.sinr_query_ms +=
            std::chrono::duration<double, std::milli>(clock::now() - t0).count();

        t0 = clock::now();
        const auto base_hits = baseline.query(c.query, k);
        report.baseline_query_ms +=
            std::chrono::duration<double, std::milli>(clock::now() - t0).count();

        auto sinr_check = check_containment(
            c, sinr.parents.size(), [&](std::size_t i) {
                return std::pair<const std::string&, TokenSpan>(
                    sinr.parents[i].doc_id, sinr.parents[i].span);
            });
        auto base_check = check_containment(
            c, base_hits.size(), [&](std::size_t i) {
                return std::pair<const std::string&, TokenSpan>(
                    base_hits[i].chunk->doc_id, base_hits[i].chunk->span);
            });

        row.sinr_hit = sinr_check.hit;
        row.baseline_hit = base_check.hit;
        row.sinr_fragmented = sinr_check.fragmented;
        row.baseline_fragmented = base_check.fragmented;
        row.sinr_unique_parents = sinr.trace.parents.size();
        row.sinr_context_tokens = sinr.total_context_tokens;
        for (const auto& h : base_hits)
            row.baseline_context_tokens += h.chunk->span.length();

        report.sinr_hit_rate += row.sinr_hit ? 1.0 : 0.0;
        report.baseline_hit_rate += row.baseline_hit ? 1.0 : 0.0;
        if (row.straddles) {
            ++straddle_cases;
            report.sinr_fragmentation_rate += row.sinr_fragmented ? 1.0 : 0.0;
            report.baseline_fragmentation_rate += row.baseline_fragmented ? 1.0 : 0.0;
        }
        report.mean_unique_parents += static_cast<double>(row.sinr_unique_parents);
        report.mean_sinr_context_tokens += row.sinr_context_tokens;
        report.mean_baseline_context_tokens += row.baseline_context_tokens;
        report.cases.push_back(std::move(row));
    }

    const double n = std::max<std::size_t>(cases.size(), 1);
    report.sinr_hit_rate /= n;
    report.baseline_hit_rate /= n;
    report.mean_unique_parents /= n;
    report.mean_sinr_context_tokens /= n;
    report.mean_baseline_context_tokens /= n;
    if (straddle_cases > 0) {
        report.sinr_fragmentation_rate /= straddle_cases;
        report.baseline_fragmentation_rate /= straddle_cases;
    }
    return report;
}

std::vector<std::string> EvalReport::to_line_records(bool include_timings) const {
    std::vector<std::string> lines;
    for (const auto& c : cases) {
        nlohmann::json j;
        j["type"] = "case";
        j["case_id"] = c.case_id;
        j["straddles_boundary"] = c.straddles;
        j["sinr_hit"] = c.sinr_hit;
        j["baseline_hit"] = c.baseline_hit;
        j["sinr_fragmented"] = c.sinr_fragmented;
        j["baseline_fragmented"] = c.baseline_fragmented;
        j["sinr_unique_parents"] = c.sinr_unique_parents;
        j["sinr_context_tokens"] = c.sinr_context_tokens;
        j["baseline_context_tokens"] = c.baseline_context_tokens;
        lines.push_back(j.dump());
    }
    nlohmann::json s;
    s["type"] = "summary";
    s["cases"] = cases.size();
    s["k"] = k;
    s["search_k"] = search_k;
    s["sinr_hit_rate"] = sinr_hit_rate;
    s["baseline_hit_rate"] = baseline_hit_rate;
    s["sinr_fragmentation_rate"] = sinr_fragmentation_rate;
    s["baseline_fragmentation_rate"] = baseline_fragmentation_rate;
    s["mean_unique_parents"] = mean_unique_parents;
    s["mean_sinr_context_tokens"] = mean_sinr_context_tokens;
    s["mean_baseline_context_tokens"] = mean_baseline_context_tokens;
    if (include_timings) {
        s["sinr_query_ms"] = sinr_query_ms;
        s["baseline_query_ms"] = baseline_query_ms;
    }
    lines.push_back(s.dump());
    return lines;
}

std::string EvalReport::summary_table() const {
    char buf[256];
    std::string out;
    out += "metric                          sinr      baseline\n";
    // hit@k here is full-containment of the gold span, a machine-checkable
    // stand-in for contextual recall.
    std::snprintf(buf, sizeof(buf), "hit@%-2d (containment)       %8.4f      %8.4f\n",
                  k, sinr_hit_rate, baseline_hit_rate);
    out += buf;
    std::snprintf(buf, sizeof(buf), "fragmentation (straddle)   %8.4f      %8.4f\n",
                  sinr_fragmentation_rate, baseline_fragmentation_rate);
    out += buf;
    std::snprintf(buf, sizeof(buf), "mean context tokens        %8.1f      %8.1f\n",
                  mean_sinr_context_tokens, mean_baseline_context_tokens);
    out += buf;
    std::snprintf(buf, sizeof(buf), "mean unique parents @k=%-3d %8.2f\n", search_k,
                  mean_unique_parents);
    out += buf;
    return out;
}

}  // namespace sinr
