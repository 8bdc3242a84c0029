#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "sinr/chunk.hpp"

namespace sinr {

class Engine;

struct UpdatePlan {
    std::string doc_id;
    std::vector<std::string> stale_retrieve_ids;
    std::vector<std::string> stale_search_ids;
    std::vector<RetrieveChunk> new_retrieve_chunks;
    std::vector<SearchChunk> new_search_chunks;
    std::vector<std::pair<std::string, std::string>> new_mapping;

    bool is_noop() const {
        return stale_retrieve_ids.empty() && stale_search_ids.empty() &&
               new_retrieve_chunks.empty() && new_search_chunks.empty();
    }
};

enum class UpdateStage {
    kRemoveStaleVectors,
    kDeleteStaleRecords,
    kInsertDocEntries,
    kInsertMappings,
    kInsertVectors,
    kCommit,
};

const char* update_stage_name(UpdateStage stage);

// Called at the start of every stage; a throwing injector simulates a
// mid-apply failure, which must roll the engine back to the committed state.
using FailureInjector = std::function<void(UpdateStage)>;

struct UpdateReport {
    std::string doc_id;
    bool noop = false;
    std::size_t removed_search_chunks = 0;
    std::size_t removed_retrieve_chunks = 0;
    std::size_t added_search_chunks = 0;
    std::size_t added_retrieve_chunks = 0;
    // (stage name, milliseconds), in execution order
    std::vector<std::pair<std::string, double>> stage_ms;
    double total_ms = 0.0;

    std::string to_line_record() const;  // one JSON object
};

// Computes the delta without mutating anything. Content-addressed ids make
// unchanged chunks drop out of both the stale and new sets.
UpdatePlan plan_update(const Engine& engine, const Document& doc);

UpdateReport apply_update(Engine& engine, const UpdatePlan& plan,
                          const FailureInjector& inject = nullptr);

// Equivalent to applying a plan with empty new sets. Idempotent.
UpdateReport delete_document(Engine& engine, const std::string& doc_id);

}  // namespace sinr
