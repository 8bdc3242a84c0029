#include "sinr/update.hpp"

#include <algorithm>
#include <chrono>
#include <unordered_set>

#include "sinr/common.hpp"
#include "sinr/engine.hpp"

#include <nlohmann/json.hpp>

namespace sinr {

const char* update_stage_name(UpdateStage stage) {
    switch (stage) {
        case UpdateStage::kRemoveStaleVectors: return "remove_stale_vectors";
        case UpdateStage::kDeleteStaleRecords: return "delete_stale_records";
        case UpdateStage::kInsertDocEntries: return "insert_doc_entries";
        case UpdateStage::kInsertMappings: return "insert_mappings";
        case UpdateStage::kInsertVectors: return "insert_vectors";
        case UpdateStage::kCommit: return "commit";
    }
    return "unknown";
}

std::string UpdateReport::to_line_record() const {
    nlohmann::json j;
    j["doc_id"] = doc_id;
    j["noop"] = noop;
    j["removed_search_chunks"] = removed_search_chunks;
    j["removed_retrieve_chunks"] = removed_retrieve_chunks;
    j["added_search_chunks"] = added_search_chunks;
    j["added_retrieve_chunks"] = added_retrieve_chunks;
    auto& stages = j["stages_ms"] = nlohmann::json::array();
    for (const auto& [name, ms] : stage_ms) {
        nlohmann::json s;
        s["stage"] = name;
        s["ms"] = ms;
        stages.push_back(s);
    }
    j["total_ms"] = total_ms;
    return j.dump();
}

UpdatePlan plan_update(const Engine& engine, const Document& doc) {
    UpdatePlan plan;
    plan.doc_id = doc.doc_id;

    std::vector<std::string> existing_retrieve = engine.docs_.ids_for_doc(doc.doc_id);
    std::unordered_set<std::string> existing_retrieve_set(existing_retrieve.begin(),
                                                          existing_retrieve.end());
    std::unordered_set<std::string> existing_search;
    for (const auto& rid : existing_retrieve)
        for (const auto& sid : engine.mapping_.children(rid))
            existing_search.insert(sid);

    ChunkedDocument chunked = chunk_document(doc, engine.manifest_.chunking);

    std::unordered_set<std::string> new_retrieve_ids, new_search_ids;
    for (const auto& rc : chunked.retrieve_chunks) {
        new_retrieve_ids.insert(rc.retrieve_id);
        if (!existing_retrieve_set.count(rc.retrieve_id))
            plan.new_retrieve_chunks.push_back(rc);
    }
    for (const auto& sc : chunked.search_chunks) {
        bool keep = existing_search.count(sc.search_id) > 0;
        if (keep) {
            // Same window content under a different parent must be re-added.
            if (engine.mapping_.lookup_parent(sc.search_id) != sc.retrieve_id)
                keep = false;
        }
        if (!keep) {
            plan.new_search_chunks.push_back(sc);
            plan.new_mapping.emplace_back(sc.search_id, sc.retrieve_id);
        }
        new_search_ids.insert(sc.search_id);
    }
    std::unordered_set<std::string> reparented;
    for (const auto& sc : plan.new_search_chunks) reparented.insert(sc.search_id);

    for (const auto& rid : existing_retrieve)
        if (!new_retrieve_ids.count(rid)) plan.stale_retrieve_ids.push_back(rid);
    for (const auto& sid : existing_search)
        if (!new_search_ids.count(sid) || reparented.count(sid))
            plan.stale_search_ids.push_back(sid);
    std::sort(plan.stale_retrieve_ids.begin(), plan.stale_retrieve_ids.end());
    std::sort(plan.stale_search_ids.begin(), plan.stale_search_ids.end());
    return plan;
}

UpdateReport apply_update(Engine& engine, const UpdatePlan& plan,
                          const FailureInjector& inject) {
    if (!engine.writable_)
        throw ContractError("apply_update requires a writable engine");

    UpdateReport report;
    report.doc_id = plan.doc_id;
    if (plan.is_noop()) {
        report.noop = true;
        return report;
    }

    using clock = std::chrono::steady_clock;
    const auto overall_start = clock::now();
    auto stage_start = overall_start;
    auto finish_stage = [&](const char* name) {
        const auto now = clock::now();
        report.stage_ms.emplace_back(
            name, std::chrono::duration<double, std::milli>(now - stage_start).count());
        stage_start = now;
    };
    auto checkpoint = [&](UpdateStage stage) {
        if (inject) inject(stage);
    };

    try {
        checkpoint(UpdateStage::kRemoveStaleVectors);
        for (const auto& sid : plan.stale_search_ids)
            if (engine.index_->contains(sid)) engine.index_->remove(sid);

        checkpoint(UpdateStage::kDeleteStaleRecords);
        for (const auto& sid : plan.stale_search_ids) engine.mapping_.erase(sid);
        for (const auto& rid : plan.stale_retrieve_ids) engine.docs_.erase(rid);
        finish_stage("delete_stale");

        checkpoint(UpdateStage::kInsertDocEntries);
        for (const auto& rc : plan.new_retrieve_chunks) {
            engine.docs_.put(StoredRetrieveChunk{rc.retrieve_id, rc.doc_id, rc.span,
                                                 rc.text, 0});
        }

        checkpoint(UpdateStage::kInsertMappings);
        engine.mapping_.put(plan.new_mapping);

        checkpoint(UpdateStage::kInsertVectors);
        std::vector<std::string> texts;
        texts.reserve(plan.new_search_chunks.size());
        for (const auto& sc : plan.new_search_chunks) texts.push_back(sc.text);
        auto vectors = engine.embedder_->embed_batch(texts);
        finish_stage("resegment_reembed");
        for (std::size_t i = 0; i < plan.new_search_chunks.size(); ++i) {
            engine.index_->insert(IndexedVector{plan.new_search_chunks[i].search_id,
                                                std::move(vectors[i]), false});
        }

        // Sibling counts for every parent this document still owns.
        for (const auto& rid : engine.docs_.ids_for_doc(plan.doc_id)) {
            engine.docs_.set_sibling_count(
                rid, static_cast<std::uint32_t>(engine.mapping_.children(rid).size()));
        }

        checkpoint(UpdateStage::kCommit);
        engine.manifest_.search_chunk_count = engine.mapping_.size();
        engine.manifest_.retrieve_chunk_count = engine.docs_.size();
        engine.save();
        finish_stage("update_stores_commit");
    } catch (...) {
        // Nothing was persisted before the commit stage completed; the last
        // committed snapshot on disk is still the pre-update state.
        engine.reload();
        throw;
    }

    report.removed_search_chunks = plan.stale_search_ids.size();
    report.removed_retrieve_chunks = plan.stale_retrieve_ids.size();
    report.added_search_chunks = plan.new_search_chunks.size();
    report.added_retrieve_chunks = plan.new_retrieve_chunks.size();
    report.total_ms = std::chrono::duration<double, std::milli>(clock::now() -
                                                                overall_start)
                          .count();
    return report;
}

UpdateReport delete_document(Engine& engine, const std::string& doc_id) {
    UpdatePlan plan;
    plan.doc_id = doc_id;
    for (const auto& rid : engine.docs().ids_for_doc(doc_id)) {
        plan.stale_retrieve_ids.push_back(rid);
        for (const auto& sid : engine.mapping().children(rid))
            plan.stale_search_ids.push_back(sid);
    }
    std::sort(plan.stale_search_ids.begin(), plan.stale_search_ids.end());
    return apply_update(engine, plan);
}

}  // namespace sinr
