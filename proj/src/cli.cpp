#include "sinr/cli.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <unistd.h>

#include "sinr/common.hpp"
#include "sinr/engine.hpp"
#include "sinr/eval.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

namespace sinr {

namespace {

namespace fs = std::filesystem;

struct GlobalOpts {
    std::string config_path;
    std::string format = "text";  // text | line-records
    bool verbose = false;

    bool line_records() const { return format == "line-records"; }
};

// Flat key=value config file mirroring the manifest field names.
std::map<std::string, std::string> read_config_file(const std::string& path) {
    std::map<std::string, std::string> kv;
    if (path.empty()) return kv;
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config file " + path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw IoError("config file: expected key=value, got: " + line);
        auto trim = [](std::string s) {
            s.erase(0, s.find_first_not_of(" \t"));
            s.erase(s.find_last_not_of(" \t") + 1);
            return s;
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

EngineConfig config_from_kv(const std::map<std::string, std::string>& kv) {
    EngineConfig cfg;
    auto u32 = [&](const char* key, std::uint32_t& out) {
        auto it = kv.find(key);
        if (it != kv.end()) out = static_cast<std::uint32_t>(std::stoul(it->second));
    };
    u32("window_tokens", cfg.chunking.window_tokens);
    u32("stride_tokens", cfg.chunking.stride_tokens);
    u32("min_retrieve_tokens", cfg.chunking.min_retrieve_tokens);
    u32("max_retrieve_tokens", cfg.chunking.max_retrieve_tokens);
    u32("min_tail_tokens", cfg.chunking.min_tail_tokens);
    u32("max_links", cfg.hnsw.max_links);
    u32("ef_construction", cfg.hnsw.ef_construction);
    u32("ef_search", cfg.hnsw.ef_search);
    if (auto it = kv.find("level_seed"); it != kv.end())
        cfg.hnsw.level_seed = std::stoull(it->second);
    if (auto it = kv.find("index_backend"); it != kv.end()) {
        if (it->second == "brute-force") cfg.backend = IndexBackend::kBruteForce;
        else if (it->second == "hnsw") cfg.backend = IndexBackend::kHnsw;
        else throw ContractError("config: unknown index_backend " + it->second);
    }
    int dim = cfg.embedder.dim;
    if (auto it = kv.find("embedder_dim"); it != kv.end()) dim = std::stoi(it->second);
    std::string provider = "local-hash";
    if (auto it = kv.find("embedder_provider"); it != kv.end()) provider = it->second;
    if (provider == "local-hash") {
        cfg.embedder = EmbedderSpec::local_hash(dim);
    } else if (provider == "remote") {
        auto it = kv.find("embedder_endpoint");
        if (it == kv.end())
            throw ContractError("config: remote embedder needs embedder_endpoint");
        cfg.embedder = EmbedderSpec::remote(it->second, dim);
    } else {
        throw ContractError("config: unknown embedder_provider " + provider);
    }
    return cfg;
}

std::string resolve_index_dir(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("SINR_INDEX_DIR"); env && *env) return env;
    throw ContractError("no index directory: pass --index-dir or set SINR_INDEX_DIR");
}

bool dir_nonempty(const fs::path& dir) {
    return fs::exists(dir) && !fs::is_empty(dir);
}

int cmd_index(const GlobalOpts& g, const std::string& corpus_dir,
              const std::string& index_dir_flag, bool force,
              const std::map<std::string, std::string>& overrides) {
    const fs::path index_dir = resolve_index_dir(index_dir_flag);
    if (dir_nonempty(index_dir)) {
        if (!force) {
            std::cerr << "index directory " << index_dir
                      << " is not empty (use --force to overwrite)\n";
            return 2;
        }
        fs::remove_all(index_dir);
    }

    auto kv = read_config_file(g.config_path);
    for (const auto& [k, v] : overrides) kv[k] = v;
    EngineConfig cfg = config_from_kv(kv);

    auto loaded = load_corpus(corpus_dir);
    for (const auto& err : loaded.errors)
        std::cerr << "ingest error: " << err.path << ": " << err.message << "\n";

    Engine engine = Engine::build(loaded.documents, cfg, index_dir);
    const EngineStats s = engine.stats();
    if (g.line_records()) {
        nlohmann::json j;
        j["search_chunks"] = s.search_chunks;
        j["retrieve_chunks"] = s.retrieve_chunks;
        j["embedding_bytes"] = s.embedding_bytes;
        j["mapping_bytes"] = s.mapping_file_bytes;
        j["text_bytes"] = s.text_bytes;
        std::cout << j.dump() << "\n";
    } else {
        std::cout << "indexed " << loaded.documents.size() << " documents\n"
                  << "search chunks (n):   " << s.search_chunks << "\n"
                  << "retrieve chunks (m): " << s.retrieve_chunks << "\n"
                  << "embedding bytes:     " << s.embedding_bytes << "\n"
                  << "mapping bytes:       " << s.mapping_file_bytes << "\n"
                  << "text bytes:          " << s.text_bytes << "\n";
    }
    return loaded.errors.empty() ? 0 : 1;
}

int cmd_query(const GlobalOpts& g, const std::string& index_dir_flag,
              const std::string& text, int k,
              std::optional<std::uint32_t> max_context_tokens,
              std::optional<std::uint32_t> max_parents,
              const std::string& trace_path) {
    const fs::path index_dir = resolve_index_dir(index_dir_flag);
    Engine engine = Engine::open(index_dir);

    QueryRequest req;
    req.text = text;
    req.k = k;
    req.max_context_tokens = max_context_tokens;
    req.max_parents = max_parents;
    const RetrievalResult result = engine.retrieve(req);

    if (!trace_path.empty()) {
        std::ofstream out(trace_path, std::ios::app);
        if (!out) throw IoError("cannot write trace file " + trace_path);
        out << trace_to_json_line(result.trace) << "\n";
    }

    if (g.line_records()) {
        for (std::size_t i = 0; i < result.parents.size(); ++i) {
            const auto& p = result.parents[i];
            nlohmann::json j;
            j["rank"] = i + 1;
            j["retrieve_id"] = p.retrieve_id;
            j["doc_id"] = p.doc_id;
            j["score"] = result.trace.parents[i].best_child_score;
            j["tokens"] = p.span.length();
            j["text"] = p.text;
            std::cout << j.dump() << "\n";
        }
    } else {
        std::cout << result.parents.size() << " results ("
                  << result.trace.hits.size() << " hits, "
                  << result.total_context_tokens << " context tokens)\n";
        for (std::size_t i = 0; i < result.parents.size(); ++i) {
            const auto& p = result.parents[i];
            char score[32];
            std::snprintf(score, sizeof(score), "%.6f",
                          static_cast<double>(result.trace.parents[i].best_child_score));
            std::cout << (i + 1) << ". " << p.retrieve_id << " doc=" << p.doc_id
                      << " score=" << score << " tokens=" << p.span.length() << "\n";
        }
        if (result.budget_exceeded_by_single_parent)
            std::cout << "note: single parent exceeds the context budget\n";
    }
    return 0;
}

int cmd_update(const GlobalOpts& g, const std::string& index_dir_flag,
               const std::string& file_path, const std::string& delete_doc_id,
               const std::string& doc_id_flag) {
    const fs::path index_dir = resolve_index_dir(index_dir_flag);
    Engine engine = Engine::open(index_dir, /*writable=*/true);

    UpdateReport report;
    double identify_ms = 0.0;
    if (!delete_doc_id.empty()) {
        report = delete_document(engine, delete_doc_id);
    } else {
        std::ifstream in(file_path, std::ios::binary);
        if (!in) throw IoError("cannot read " + file_path);
        std::ostringstream buf;
        buf << in.rdbuf();
        std::string doc_id = doc_id_flag.empty()
                                 ? fs::path(file_path).filename().string()
                                 : doc_id_flag;
        Document doc = make_document(doc_id, file_path, buf.str());

        const auto t0 = std::chrono::steady_clock::now();
        UpdatePlan plan = plan_update(engine, doc);
        identify_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
        report = apply_update(engine, plan);
    }
    report.stage_ms.insert(report.stage_ms.begin(), {"identify", identify_ms});

    if (g.line_records()) {
        std::cout << report.to_line_record() << "\n";
    } else if (report.noop) {
        std::cout << "no-op\n";
    } else {
        std::cout << "updated " << report.doc_id << ": -" << report.removed_search_chunks
                  << "/+" << report.added_search_chunks << " search chunks, -"
                  << report.removed_retrieve_chunks << "/+"
                  << report.added_retrieve_chunks << " retrieve chunks\n";
        for (const auto& [name, ms] : report.stage_ms) {
            char line[96];
            std::snprintf(line, sizeof(line), "  %-22s %8.2f ms\n", name.c_str(), ms);
            std::cout << line;
        }
    }
    return 0;
}

int cmd_stats(const GlobalOpts& g, const std::string& index_dir_flag) {
    const fs::path index_dir = resolve_index_dir(index_dir_flag);
    if (!fs::exists(index_dir / "manifest.json")) {
        std::cerr << "no index at " << index_dir << "\n";
        return 2;
    }
    Engine engine = Engine::open(index_dir);
    const EngineStats s = engine.stats();
    const double ratio = s.retrieve_chunks
                             ? static_cast<double>(s.search_chunks) /
                                   static_cast<double>(s.retrieve_chunks)
                             : 0.0;
    const double overhead = s.embedding_bytes
                                ? static_cast<double>(s.mapping_payload_bytes) /
                                      static_cast<double>(s.embedding_bytes)
                                : 0.0;
    if (g.line_records()) {
        nlohmann::json j;
        j["search_chunks"] = s.search_chunks;
        j["retrieve_chunks"] = s.retrieve_chunks;
        j["chunk_ratio"] = ratio;
        j["embedding_bytes"] = s.embedding_bytes;
        j["mapping_payload_bytes"] = s.mapping_payload_bytes;
        j["mapping_file_bytes"] = s.mapping_file_bytes;
        j["text_bytes"] = s.text_bytes;
        j["mapping_embedding_ratio"] = overhead;
        std::cout << j.dump() << "\n";
    } else {
        char buf[64];
        std::cout << "search chunks (n):       " << s.search_chunks << "\n"
                  << "retrieve chunks (m):     " << s.retrieve_chunks << "\n";
        std::snprintf(buf, sizeof(buf), "%.2f", ratio);
        std::cout << "n/m ratio:               " << buf << "\n"
                  << "embedding bytes:         " << s.embedding_bytes << "\n"
                  << "mapping payload bytes:   " << s.mapping_payload_bytes << "\n"
                  << "mapping file bytes:      " << s.mapping_file_bytes << "\n"
                  << "text bytes (compressed): " << s.text_bytes << "\n";
        std::snprintf(buf, sizeof(buf), "%.4f%%", overhead * 100.0);
        std::cout << "mapping/embedding ratio: " << buf << "\n";
    }
    return 0;
}

int cmd_eval(const GlobalOpts& g, const std::string& index_dir_flag,
             std::uint64_t seed, int cases, int k, int search_k) {
    NeedleSpec spec;
    spec.cases = cases;

    auto [corpus, needle_cases] = generate_needle_corpus(spec, seed);

    fs::path build_dir;
    bool scratch = index_dir_flag.empty() && !std::getenv("SINR_INDEX_DIR");
    if (scratch) {
        build_dir = fs::temp_directory_path() /
                    ("sinr_eval_" + std::to_string(::getpid()) + "_" +
                     std::to_string(seed));
    } else {
        build_dir = resolve_index_dir(index_dir_flag);
    }
    fs::remove_all(build_dir);

    EngineConfig cfg;  // defaults: local-hash d256, hnsw
    Engine engine = Engine::build(corpus, cfg, build_dir);

    BaselineConfig base_cfg;
    BaselineIndex baseline = BaselineIndex::build(corpus, base_cfg, engine.embedder(),
                                                  cfg.backend, cfg.hnsw);

    EvalReport report = run_eval(engine, baseline, needle_cases, k, search_k);

    for (const auto& line : report.to_line_records(/*include_timings=*/false))
        std::cout << line << "\n";
    if (!g.line_records()) std::cout << "\n" << report.summary_table();
    if (g.verbose) {
        std::cerr << "sinr query ms total: " << report.sinr_query_ms
                  << ", baseline query ms total: " << report.baseline_query_ms << "\n";
    }
    if (scratch) fs::remove_all(build_dir);
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"SINR dual-layer retrieval engine"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--config", g.config_path, "flat key=value config file");
    app.add_option("--format", g.format, "output format: text | line-records")
        ->check(CLI::IsMember({"text", "line-records"}));
    app.add_flag("--verbose", g.verbose, "diagnostics to stderr");

    // index
    auto* index_cmd = app.add_subcommand("index", "build an index from a corpus directory");
    std::string corpus_dir, index_dir;
    bool force = false;
    std::map<std::string, std::string> overrides;
    index_cmd->add_option("corpus_dir", corpus_dir, "corpus root")->required();
    index_cmd->add_option("--index-dir", index_dir, "index directory");
    index_cmd->add_flag("--force", force, "overwrite an existing index");
    index_cmd->add_option_function<std::uint32_t>(
        "--window-tokens", [&](std::uint32_t v) { overrides["window_tokens"] = std::to_string(v); });
    index_cmd->add_option_function<std::uint32_t>(
        "--stride-tokens", [&](std::uint32_t v) { overrides["stride_tokens"] = std::to_string(v); });
    index_cmd->add_option_function<std::uint32_t>(
        "--min-retrieve-tokens", [&](std::uint32_t v) { overrides["min_retrieve_tokens"] = std::to_string(v); });
    index_cmd->add_option_function<std::uint32_t>(
        "--max-retrieve-tokens", [&](std::uint32_t v) { overrides["max_retrieve_tokens"] = std::to_string(v); });
    index_cmd->add_option_function<std::uint32_t>(
        "--min-tail-tokens", [&](std::uint32_t v) { overrides["min_tail_tokens"] = std::to_string(v); });
    index_cmd->add_option_function<std::string>(
        "--backend", [&](std::string v) { overrides["index_backend"] = v; });
    index_cmd->add_option_function<int>(
        "--dim", [&](int v) { overrides["embedder_dim"] = std::to_string(v); });

    // query
    auto* query_cmd = app.add_subcommand("query", "retrieve context for a query");
    std::string query_text, trace_path;
    std::string q_index_dir;
    int k = 20;
    std::optional<std::uint32_t> max_context_tokens, max_parents;
    std::uint32_t mct = 0, mp = 0;
    query_cmd->add_option("text", query_text, "query text")->required();
    query_cmd->add_option("--index-dir", q_index_dir, "index directory");
    query_cmd->add_option("--k", k, "top-k search chunks");
    auto* mct_opt = query_cmd->add_option("--max-context-tokens", mct, "context token budget");
    auto* mp_opt = query_cmd->add_option("--max-parents", mp, "cap on returned parents");
    query_cmd->add_option("--trace", trace_path, "append the query trace to this file");

    // update
    auto* update_cmd = app.add_subcommand("update", "apply an incremental document update");
    std::string u_index_dir, update_file, delete_doc, doc_id_flag;
    update_cmd->add_option("file", update_file, "document file to insert/update");
    update_cmd->add_option("--index-dir", u_index_dir, "index directory");
    update_cmd->add_option("--delete", delete_doc, "delete this doc_id instead");
    update_cmd->add_option("--doc-id", doc_id_flag, "doc id (default: file name)");

    // stats
    auto* stats_cmd = app.add_subcommand("stats", "print index statistics");
    std::string s_index_dir;
    stats_cmd->add_option("--index-dir", s_index_dir, "index directory");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "run the synthetic needle evaluation");
    std::string e_index_dir;
    std::uint64_t seed = 7;
    int cases = 50, eval_k = 5, search_k = 20;
    eval_cmd->add_option("--index-dir", e_index_dir, "scratch index directory");
    eval_cmd->add_option("--seed", seed, "corpus generation seed");
    eval_cmd->add_option("--cases", cases, "number of needle cases");
    eval_cmd->add_option("--k", eval_k, "hit@k cutoff");
    eval_cmd->add_option("--search-k", search_k, "search-layer top-k");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (index_cmd->parsed())
            return cmd_index(g, corpus_dir, index_dir, force, overrides);
        if (query_cmd->parsed()) {
            if (mct_opt->count()) max_context_tokens = mct;
            if (mp_opt->count()) max_parents = mp;
            return cmd_query(g, q_index_dir, query_text, k, max_context_tokens,
                             max_parents, trace_path);
        }
        if (update_cmd->parsed()) {
            if (update_file.empty() && delete_doc.empty()) {
                std::cerr << "update: pass a file or --delete doc_id\n";
                return 2;
            }
            return cmd_update(g, u_index_dir, update_file, delete_doc, doc_id_flag);
        }
        if (stats_cmd->parsed()) return cmd_stats(g, s_index_dir);
        if (eval_cmd->parsed())
            return cmd_eval(g, e_index_dir, seed, cases, eval_k, search_k);
        return 2;
    } catch (const FingerprintMismatch& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const NotFoundError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ConflictError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace sinr
