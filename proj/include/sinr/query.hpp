#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sinr/store.hpp"

namespace sinr {

struct QueryRequest {
    std::string text;
    int k = 20;
    std::optional<std::uint32_t> max_context_tokens;
    std::optional<std::uint32_t> max_parents;
};

struct TraceHit {
    std::string search_id;
    float score = 0.0f;
    std::string parent_id;
};

struct TraceParent {
    std::string retrieve_id;
    float best_child_score = 0.0f;
};

struct StageTimings {
    double embed_us = 0.0;
    double search_us = 0.0;
    double map_us = 0.0;
    double fetch_us = 0.0;
};

// The full q -> S_top -> R_top chain for one query.
struct QueryTrace {
    std::string query;
    std::string embedder_fingerprint;
    std::vector<TraceHit> hits;
    std::vector<TraceParent> parents;  // pre-cap aggregation order
    StageTimings timings;
};

struct RetrievalResult {
    std::vector<StoredRetrieveChunk> parents;  // distinct, ranked
    QueryTrace trace;
    std::uint32_t total_context_tokens = 0;
    // Set when a single parent alone exceeds max_context_tokens and is
    // returned anyway.
    bool budget_exceeded_by_single_parent = false;
};

class Embedder;

// Alg-style read path: embed, top-k search, one parent lookup per hit,
// dedup + rank parents by best child score (ties by parent id).
RetrievalResult run_query(const QueryRequest& req, const Embedder& embedder,
                          const VectorIndex& index, const ParentMap& mapping,
                          const DocStore& docs, const Manifest& manifest);

// One JSON object, single line, stable field order. Timings in microseconds.
std::string trace_to_json_line(const QueryTrace& trace, bool include_timings = true);
QueryTrace trace_from_json_line(const std::string& line);

// Human-readable report with stable field order (timings excluded so the
// output is diffable).
std::string explain(const QueryTrace& trace);

}  // namespace sinr
