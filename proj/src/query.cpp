#include "sinr/query.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <unordered_map>

#include "sinr/common.hpp"
#include "sinr/embed.hpp"

#include <nlohmann/json.hpp>

namespace sinr {

namespace {

double elapsed_us(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double, std::micro>(
               std::chrono::steady_clock::now() - start)
        .count();
}

std::string fmt_score(float v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", static_cast<double>(v));
    return buf;
}

}  // namespace

RetrievalResult run_query(const QueryRequest& req, const Embedder& embedder,
                          const VectorIndex& index, const ParentMap& mapping,
                          const DocStore& docs, const Manifest& manifest) {
    if (req.k < 1) throw ContractError("query: k must be >= 1");
    if (req.max_context_tokens && *req.max_context_tokens == 0)
        throw ContractError("query: max_context_tokens must be positive");
    if (req.max_parents && *req.max_parents == 0)
        throw ContractError("query: max_parents must be positive");
    if (embedder.fingerprint() != manifest.embedder.fingerprint)
        throw FingerprintMismatch("embedder fingerprint mismatch: index built with '" +
                            manifest.embedder.fingerprint + "', query uses '" +
                            embedder.fingerprint() + "'");

    RetrievalResult result;
    QueryTrace& trace = result.trace;
    trace.query = req.text;
    trace.embedder_fingerprint = embedder.fingerprint();

    auto t0 = std::chrono::steady_clock::now();
    const EmbeddingVector q = embedder.embed(req.text);
    trace.timings.embed_us = elapsed_us(t0);

    t0 = std::chrono::steady_clock::now();
    const auto hits = index.query(q, req.k);
    trace.timings.search_us = elapsed_us(t0);

    // Map stage: one forward lookup per hit, batched so the independent
    // memory accesses overlap instead of stalling one after another.
    t0 = std::chrono::steady_clock::now();
    for (const auto& hit : hits) mapping.prefetch_lookup(hit.search_id);
    std::vector<const std::string*> parent_ids;
    parent_ids.reserve(hits.size());
    for (const auto& hit : hits) {
        const std::string* parent = mapping.find_parent(hit.search_id);
        if (parent == nullptr)
            throw NotFoundError("no parent mapping for " + hit.search_id);
        parent_ids.push_back(parent);
        __builtin_prefetch(parent);
    }
    for (const std::string* parent : parent_ids) __builtin_prefetch(parent->data());
    trace.hits.reserve(hits.size());
    for (std::size_t i = 0; i < hits.size(); ++i) {
        trace.hits.push_back(
            TraceHit{hits[i].search_id, hits[i].score, *parent_ids[i]});
    }
    trace.timings.map_us = elapsed_us(t0);

    // Aggregate: best child score per parent, rank by (score desc, id asc).
    std::unordered_map<std::string, float> best;
    for (const auto& h : trace.hits) {
        auto [it, inserted] = best.emplace(h.parent_id, h.score);
        if (!inserted && h.score > it->second) it->second = h.score;
    }
    trace.parents.reserve(best.size());
    for (const auto& [rid, score] : best)
        trace.parents.push_back(TraceParent{rid, score});
    std::sort(trace.parents.begin(), trace.parents.end(),
              [](const TraceParent& a, const TraceParent& b) {
                  if (a.best_child_score != b.best_child_score)
                      return a.best_child_score > b.best_child_score;
                  return a.retrieve_id < b.retrieve_id;
              });

    std::vector<std::string> admitted;
    for (const auto& p : trace.parents) {
        if (req.max_parents && admitted.size() >= *req.max_parents) break;
        admitted.push_back(p.retrieve_id);
    }

    t0 = std::chrono::steady_clock::now();
    auto fetched = docs.get(admitted);
    if (!fetched.missing.empty())
        throw NotFoundError("dangling parent id " + fetched.missing.front());

    if (req.max_context_tokens) {
        std::vector<StoredRetrieveChunk> within;
        std::uint32_t total = 0;
        for (auto& chunk : fetched.found) {
            const std::uint32_t len = chunk.span.length();
            if (total + len > *req.max_context_tokens) break;
            total += len;
            within.push_back(std::move(chunk));
        }
        if (within.empty() && !fetched.found.empty()) {
            // A single parent alone exceeds the budget; return it flagged
            // rather than hiding the evidence.
            within.push_back(std::move(fetched.found.front()));
            total = within.front().span.length();
            result.budget_exceeded_by_single_parent = true;
        }
        result.parents = std::move(within);
        result.total_context_tokens = total;
    } else {
        result.parents = std::move(fetched.found);
        for (const auto& c : result.parents)
            result.total_context_tokens += c.span.length();
    }
    trace.timings.fetch_us = elapsed_us(t0);
    return result;
}

std::string trace_to_json_line(const QueryTrace& trace, bool include_timings) {
    nlohmann::json j;
    j["query"] = trace.query;
    j["fingerprint"] = trace.embedder_fingerprint;
    auto& hits = j["hits"] = nlohmann::json::array();
    for (const auto& h : trace.hits) {
        nlohmann::json hj;
        hj["search_id"] = h.search_id;
        hj["score"] = h.score;
        hj["parent_id"] = h.parent_id;
        hits.push_back(hj);
    }
    auto& parents = j["parents"] = nlohmann::json::array();
    for (const auto& p : trace.parents) {
        nlohmann::json pj;
        pj["retrieve_id"] = p.retrieve_id;
        pj["best_score"] = p.best_child_score;
        parents.push_back(pj);
    }
    if (include_timings) {
        j["timings_us"]["embed"] = trace.timings.embed_us;
        j["timings_us"]["search"] = trace.timings.search_us;
        j["timings_us"]["map"] = trace.timings.map_us;
        j["timings_us"]["fetch"] = trace.timings.fetch_us;
    }
    return j.dump();
}

QueryTrace trace_from_json_line(const std::string& line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("trace parse error: ") + e.what());
    }
    QueryTrace trace;
    trace.query = j.at("query").get<std::string>();
    trace.embedder_fingerprint = j.at("fingerprint").get<std::string>();
    for (const auto& hj : j.at("hits")) {
        trace.hits.push_back(TraceHit{hj.at("search_id").get<std::string>(),
                                      hj.at("score").get<float>(),
                                      hj.at("parent_id").get<std::string>()});
    }
    for (const auto& pj : j.at("parents")) {
        trace.parents.push_back(TraceParent{pj.at("retrieve_id").get<std::string>(),
                                            pj.at("best_score").get<float>()});
    }
    if (j.contains("timings_us")) {
        trace.timings.embed_us = j["timings_us"].value("embed", 0.0);
        trace.timings.search_us = j["timings_us"].value("search", 0.0);
        trace.timings.map_us = j["timings_us"].value("map", 0.0);
        trace.timings.fetch_us = j["timings_us"].value("fetch", 0.0);
    }
    return trace;
}

std::string explain(const QueryTrace& trace) {
    std::string out;
    out += "query: " + trace.query + "\n";
    out += "embedder: " + trace.embedder_fingerprint + "\n";
    out += "hits: " + std::to_string(trace.hits.size()) + "\n";
    int rank = 1;
    for (const auto& h : trace.hits) {
        out += "  " + std::to_string(rank++) + ". " + h.search_id +
               " score=" + fmt_score(h.score) + " parent=" + h.parent_id + "\n";
    }
    out += "parents: " + std::to_string(trace.parents.size()) + " (consolidated from " +
           std::to_string(trace.hits.size()) + " hits)\n";
    rank = 1;
    for (const auto& p : trace.parents) {
        out += "  " + std::to_string(rank++) + ". " + p.retrieve_id +
               " best_child_score=" + fmt_score(p.best_child_score) + "\n";
    }
    return out;
}

}  // namespace sinr
