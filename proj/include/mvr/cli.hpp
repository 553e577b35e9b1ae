// Copyright 2026 The MVR Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

/** \file cli.hpp
 *  \brief The `mvr` command-line pipeline.
 *
 * Exit codes: 0 success, 1 completed with warnings, 2 input or config error,
 * 3 service error.
 */

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mvr/ablation.hpp"
#include "mvr/cache.hpp"
#include "mvr/compensate.hpp"
#include "mvr/config.hpp"
#include "mvr/drift.hpp"
#include "mvr/embed_client.hpp"
#include "mvr/evaluate.hpp"
#include "mvr/keywords.hpp"
#include "mvr/reformulate.hpp"
#include "mvr/retrieve.hpp"
#include "mvr/store.hpp"
#include "mvr/synth.hpp"

namespace mvr::cli {

enum ExitCode : int { kOk = 0, kPartial = 1, kInputError = 2, kServiceError = 3 };

struct CommandResult {
    int exit_code = kOk;
    std::vector<std::string> warnings;

    void warn(std::string w) {
        warnings.push_back(std::move(w));
        if (exit_code == kOk) {
            exit_code = kPartial;
        }
    }
};

// ---------------------------------------------------------------------------
// File helpers

inline void write_keyword_file(const std::vector<KeywordResult>& results, const std::filesystem::path& path) {
    std::string out;
    for (const auto& r : results) {
        out += nlohmann::json{{"caption_id", r.caption_id}, {"keywords", r.keywords}, {"scores", r.scores}}.dump();
        out += '\n';
    }
    detail::write_file_bytes(path, out);
}

inline KeywordTable read_keyword_table(const std::filesystem::path& path) {
    KeywordTable table;
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::Io, "cannot open keyword file '" + path.string() + "'");
    }
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        try {
            const auto j = nlohmann::json::parse(line);
            table[j.at("caption_id").get<std::string>()] = j.at("keywords").get<std::vector<std::string>>();
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::Format, "bad keyword record in '" + path.string() + "': " + e.what());
        }
    }
    return table;
}

inline std::filesystem::path output_path(const RunConfig& c, const std::string& name) {
    std::filesystem::create_directories(c.output_dir);
    return c.output_dir / name;
}

inline std::filesystem::path keywords_path(const RunConfig& c) {
    return c.paths.keywords ? *c.paths.keywords : output_path(c, "keywords.jsonl");
}

inline std::filesystem::path cache_path(const RunConfig& c) {
    return c.paths.cache ? *c.paths.cache : output_path(c, "reformulations.jsonl");
}

inline std::filesystem::path view_store_path(const RunConfig& c, bool query) {
    const auto& p = query ? c.paths.query_view_store : c.paths.gallery_view_store;
    return p ? *p : output_path(c, query ? "query_views.mvre" : "gallery_views.mvre");
}

inline std::filesystem::path sets_sidecar(const std::filesystem::path& view_store) {
    auto p = view_store;
    p += ".sets.json";
    return p;
}

/// Timestamps live only in the log so that every other output is reproducible.
inline void log_line(const RunConfig& c, const std::string& message) {
    std::filesystem::create_directories(c.output_dir);
    std::ofstream log(c.output_dir / "mvr.log", std::ios::app);
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    log << stamp << ' ' << message << '\n';
}

inline std::map<std::string, std::string> identity_map(const std::vector<CaptionRecord>& captions) {
    std::map<std::string, std::string> m;
    for (const auto& c : captions) {
        m[c.id] = c.person_id;
    }
    return m;
}

/// Loads a view bank and marks sets that exist but ended up empty.
inline ViewBank load_view_bank(const std::filesystem::path& path) {
    auto bank = views_from_store(read_store(path));
    if (const auto side = sets_sidecar(path); std::filesystem::exists(side)) {
        const auto j = nlohmann::json::parse(detail::read_file_bytes(side));
        for (const auto& [source, counts] : j.items()) {
            auto& sv = bank[source];
            if (counts.contains("key") && !sv.key) {
                sv.key.emplace();
            }
            if (counts.contains("diverse") && !sv.diverse) {
                sv.diverse.emplace();
            }
        }
    }
    return bank;
}

inline PipelineInputs load_pipeline_inputs(const RunConfig& c, bool need_query_views, bool need_gallery_views) {
    PipelineInputs in;
    const auto qstore = read_store(c.require(c.paths.query_store, "query_store"));
    const auto gstore = read_store(c.require(c.paths.gallery_store, "gallery_store"));
    const auto qcaps = read_captions(c.require(c.paths.query_captions, "query_captions"), CaptionKind::query);
    const auto gcaps =
        read_captions(c.require(c.paths.gallery_captions, "gallery_captions"), CaptionKind::gallery_caption);
    const auto qpid = identity_map(qcaps);
    const auto gpid = identity_map(gcaps);
    for (const auto& [id, v] : qstore.records()) {
        auto it = qpid.find(id);
        if (it == qpid.end()) {
            throw Error(ErrorKind::Data, "query '" + id + "' has no caption record");
        }
        in.query_ids.push_back(id);
        in.query_pids.push_back(it->second);
        in.query_base.push_back(v);
    }
    for (const auto& [id, v] : gstore.records()) {
        auto it = gpid.find(id);
        if (it == gpid.end()) {
            throw Error(ErrorKind::Data, "gallery item '" + id + "' has no caption record");
        }
        in.gallery_ids.push_back(id);
        in.gallery_pids.push_back(it->second);
        in.gallery_base.push_back(v);
    }
    if (need_query_views) {
        in.query_views = load_view_bank(view_store_path(c, true));
    }
    if (need_gallery_views) {
        in.gallery_views = load_view_bank(view_store_path(c, false));
    }
    return in;
}

inline PipelineInputs load_for_flags(const RunConfig& c, const AblationFlags& f) {
    return load_pipeline_inputs(c, f.query_key || f.query_diverse, f.gallery_key || f.gallery_diverse);
}

inline void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
    detail::write_file_bytes(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Commands

inline CommandResult cmd_keywords(const RunConfig& c) {
    CommandResult res;
    std::vector<KeywordResult> results;
    const auto& stop = c.stopwords ? *c.stopwords : default_stopwords();

    auto run_side = [&](const std::optional<std::filesystem::path>& captions_path,
                        const std::optional<std::filesystem::path>& bundles_path,
                        const std::optional<std::filesystem::path>& tokens_path,
                        const std::optional<std::filesystem::path>& sentences_path, CaptionKind kind,
                        const char* side) {
        if (!captions_path || !bundles_path) {
            return;
        }
        const auto captions = read_captions(c.require(captions_path, side), kind);
        const auto bundles = read_token_bundles(c.require(bundles_path, side));
        if (bundles.empty()) {
            return;
        }
        const auto tokens = read_store(c.require(tokens_path, side));
        const auto sentences = read_store(c.require(sentences_path, side));
        std::map<std::string, const CaptionRecord*> by_id;
        for (const auto& cap : captions) {
            by_id[cap.id] = &cap;
        }
        for (const auto& b : bundles) {
            auto it = by_id.find(b.caption_id);
            if (it == by_id.end()) {
                res.warn("token bundle '" + b.caption_id + "' has no caption record");
                continue;
            }
            const auto tc = assemble_tokenized(*it->second, b, tokens, sentences);
            try {
                results.push_back(extract_keywords(tc, c.delta, stop));
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::EmptyKeywordSet) {
                    throw;
                }
                res.warn(e.what());
            }
        }
    };
    run_side(c.paths.query_captions, c.paths.query_token_bundles, c.paths.query_token_store, c.paths.query_store,
             CaptionKind::query, "query token inputs");
    run_side(c.paths.gallery_captions, c.paths.gallery_token_bundles, c.paths.gallery_token_store,
             c.paths.gallery_caption_store, CaptionKind::gallery_caption, "gallery token inputs");
    write_keyword_file(results, keywords_path(c));
    log_line(c, "keywords: " + std::to_string(results.size()) + " captions");
    return res;
}

inline std::vector<CaptionRecord> all_captions(const RunConfig& c) {
    std::vector<CaptionRecord> caps;
    if (c.paths.query_captions) {
        caps = read_captions(c.require(c.paths.query_captions, "query_captions"), CaptionKind::query);
    }
    if (c.paths.gallery_captions) {
        auto g = read_captions(c.require(c.paths.gallery_captions, "gallery_captions"), CaptionKind::gallery_caption);
        caps.insert(caps.end(), g.begin(), g.end());
    }
    return caps;
}

inline PromptTemplates templates_for(const RunConfig& c) {
    PromptTemplates t = c.paths.templates ? load_templates(c.require(c.paths.templates, "templates")) : PromptTemplates{};
    if (!c.paths.templates) {
        t.set_requested_count(c.requested_count);
    }
    return t;
}

inline CommandResult cmd_reformulate(const RunConfig& c, ChatBackend& backend, BatchStats* stats_out = nullptr) {
    CommandResult res;
    if (c.providers.empty()) {
        throw Error(ErrorKind::Config, "no LLM providers configured");
    }
    const auto captions = all_captions(c);
    KeywordTable keywords;
    if (const auto kp = keywords_path(c); std::filesystem::exists(kp)) {
        keywords = read_keyword_table(kp);
    }
    ReformulationCache cache(cache_path(c));
    if (cache.skipped_lines() > 0) {
        res.warn("skipped " + std::to_string(cache.skipped_lines()) + " unreadable cache line(s)");
    }
    ReformulateOptions opts;
    opts.concurrency = c.llm_concurrency;
    opts.templates = templates_for(c);
    const auto batch = reformulate_batch(captions, keywords, c.strategies, c.providers, cache, backend, opts);

    std::size_t failures = 0;
    for (const auto& o : batch.outcomes) {
        for (const auto& w : o.warnings) {
            res.warn(o.source_id + " [" + std::string(to_string(o.strategy)) + "]: " + w);
        }
        for (const auto& e : o.errors) {
            std::cerr << e << '\n';
            ++failures;
        }
    }
    const auto& s = batch.stats;
    std::cerr << "reformulate: " << captions.size() << " captions, " << s.requests << " requests, " << s.cache_hits
              << " cache hits, " << s.generated << " variants kept, " << s.dropped_invalid
              << " key-consistent variants dropped, " << s.provider_failures << " provider failures\n";
    log_line(c, "reformulate: requests=" + std::to_string(s.requests) + " hits=" + std::to_string(s.cache_hits) +
                    " kept=" + std::to_string(s.generated) + " dropped=" + std::to_string(s.dropped_invalid));
    if (stats_out != nullptr) {
        *stats_out = s;
    }
    if (failures > 0) {
        res.exit_code = kServiceError;
    }
    return res;
}

/// Embeds any cached reformulation not yet in the view stores, then writes
/// compensated query and gallery stores.
inline CommandResult cmd_compensate(const RunConfig& c) {
    CommandResult res;
    const auto templates = templates_for(c);
    KeywordTable keywords;
    if (const auto kp = keywords_path(c); std::filesystem::exists(kp)) {
        keywords = read_keyword_table(kp);
    }
    const auto cache_file = cache_path(c);
    if (!std::filesystem::exists(cache_file) && !c.paths.query_view_store) {
        throw Error(ErrorKind::Io, "no reformulation cache at '" + cache_file.string() + "'");
    }

    auto refresh_views = [&](bool query) {
        const auto& caps_path = query ? c.paths.query_captions : c.paths.gallery_captions;
        if (!caps_path || !std::filesystem::exists(cache_file)) {
            return;
        }
        const auto caps = read_captions(*caps_path, query ? CaptionKind::query : CaptionKind::gallery_caption);
        ReformulationCache cache(cache_file);
        const auto vpath = view_store_path(c, query);
        std::optional<EmbeddingStore> store;
        if (std::filesystem::exists(vpath)) {
            store = read_store(vpath);
        }
        nlohmann::json sets = nlohmann::json::object();
        std::vector<std::string> ids;
        std::vector<std::string> texts;
        for (const auto& cap : caps) {
            for (Strategy s : c.strategies) {
                const auto kw_it = keywords.find(cap.id);
                if (s == Strategy::key_consistent && kw_it == keywords.end()) {
                    continue;
                }
                const auto set = cached_set(cache, cap, s, s == Strategy::key_consistent ? kw_it->second
                                                                                          : std::vector<std::string>{},
                                            c.providers, templates);
                if (!set) {
                    continue;
                }
                sets[cap.id][std::string(short_tag(s))] = set->texts.size();
                for (std::size_t i = 0; i < set->texts.size(); ++i) {
                    auto id = view_store_id(cap.id, s, i);
                    if (!store || !store->contains(id)) {
                        ids.push_back(std::move(id));
                        texts.push_back(set->texts[i]);
                    }
                }
            }
        }
        if (!texts.empty()) {
            auto cfg = c.embed;
            if (store) {
                cfg.expected_dim = store->dim();
            }
            const auto vectors = embed_remote(texts, cfg);
            if (!store) {
                store.emplace(static_cast<std::uint32_t>(vectors.front().dim()));
            }
            for (std::size_t i = 0; i < ids.size(); ++i) {
                store->insert(ids[i], vectors[i]);
            }
        }
        if (store) {
            write_store(*store, vpath);
            write_json(sets, sets_sidecar(vpath));
        }
        std::cerr << (query ? "query" : "gallery") << " views: embedded " << texts.size() << " new text(s)\n";
    };
    refresh_views(true);
    refresh_views(false);

    const auto in = load_for_flags(c, c.flags);
    const auto sides = compensate_inputs(in, c.flags, c.compensation);
    for (const auto& w : sides.warnings) {
        res.warn(w);
    }
    const auto write_side = [&](const std::vector<std::string>& ids, const std::vector<EmbeddingVector>& vs,
                                const char* name) {
        if (ids.empty()) {
            return;
        }
        EmbeddingStore out(static_cast<std::uint32_t>(vs.front().dim()), c.compensation.renormalize_output);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            out.insert(ids[i], vs[i]);
        }
        write_store(out, output_path(c, name));
    };
    write_side(in.query_ids, sides.queries, "compensated_query.mvre");
    write_side(in.gallery_ids, sides.gallery, "compensated_gallery.mvre");
    log_line(c, "compensate: done");
    return res;
}

inline CommandResult cmd_index(const RunConfig& c) {
    CommandResult res;
    auto export_run = [&](const AblationFlags& flags, const std::string& name) {
        const auto in = load_for_flags(c, flags);
        const auto sides = compensate_inputs(in, flags, c.compensation);
        for (const auto& w : sides.warnings) {
            res.warn(w);
        }
        const auto index = GalleryIndex::from_vectors(in.gallery_ids, in.gallery_pids, sides.gallery);
        std::vector<RankedResult> ranked;
        for (std::size_t i = 0; i < in.query_ids.size(); ++i) {
            ranked.push_back(search(index, sides.queries[i], static_cast<std::int64_t>(c.top_k), in.query_ids[i]));
        }
        write_rankings(ranked, output_path(c, name));
    };
    export_run(AblationFlags::all_off(), "rankings_baseline.jsonl");
    if (c.flags.any()) {
        export_run(c.flags, "rankings_compensated.jsonl");
    }
    log_line(c, "index: rankings exported");
    return res;
}

inline CommandResult cmd_evaluate(const RunConfig& c, MetricsReport* baseline_out = nullptr,
                                  MetricsReport* compensated_out = nullptr) {
    CommandResult res;
    const auto in = load_for_flags(c, c.flags);
    const auto baseline = run_baseline(in, c.compensation);
    const auto compensated = run_ablation(in, c.flags, c.compensation);
    for (const auto& w : compensated.warnings) {
        res.warn(w);
    }
    write_json(baseline.to_json(), output_path(c, "report_baseline.json"));
    write_json(compensated.to_json(), output_path(c, "report_compensated.json"));
    const auto table = render_table({{"baseline", baseline}, {"compensated " + c.flags.label(), compensated}});
    detail::write_file_bytes(output_path(c, "report.txt"), table);
    std::cout << table;
    log_line(c, "evaluate: done");
    if (baseline_out != nullptr) {
        *baseline_out = baseline;
    }
    if (compensated_out != nullptr) {
        *compensated_out = compensated;
    }
    return res;
}

inline CommandResult cmd_ablate(const RunConfig& c) {
    CommandResult res;
    const auto in = load_for_flags(c, AblationFlags::all_on());
    const auto runs = run_ablation_matrix(in, c.compensation);
    nlohmann::json j = nlohmann::json::array();
    std::vector<std::pair<std::string, MetricsReport>> rows;
    for (const auto& [flags, report] : runs) {
        j.push_back(report.to_json());
        rows.emplace_back(flags.label(), report);
    }
    write_json(j, output_path(c, "ablation.json"));
    const auto table = render_table(rows);
    detail::write_file_bytes(output_path(c, "ablation.txt"), table);
    std::cout << table;
    log_line(c, "ablate: 16 runs");
    return res;
}

inline CommandResult cmd_sweep(const RunConfig& c) {
    CommandResult res;
    const auto in = load_for_flags(c, c.flags);
    const auto grid = sweep_grid(in, c.sweep_alphas, c.sweep_betas, c.flags, c.compensation);
    write_grid_csv(grid, output_path(c, "grid.csv"));
    write_grid_matrix_csv(grid, output_path(c, "grid_r1.csv"), &MetricsReport::r1);
    write_grid_matrix_csv(grid, output_path(c, "grid_map.csv"), &MetricsReport::map);
    if (c.flags.query_key || c.flags.query_diverse) {
        const auto scale = sweep_scale(in, c.sweep_scales, c.flags, c.compensation);
        write_scale_csv(c.sweep_scales, scale, output_path(c, "scale.csv"));
    }
    log_line(c, "sweep: done");
    return res;
}

inline CommandResult cmd_drift(const RunConfig& c) {
    CommandResult res;
    const auto qstore = read_store(c.require(c.paths.query_store, "query_store"));
    const auto bank = load_view_bank(view_store_path(c, true));
    std::map<std::string, TokenizedCaption> tokens;
    if (c.paths.query_token_bundles && c.paths.query_token_store && c.paths.query_captions) {
        const auto caps = read_captions(c.require(c.paths.query_captions, "query_captions"));
        const auto bundles = read_token_bundles(c.require(c.paths.query_token_bundles, "query_token_bundles"));
        const auto tstore = read_store(c.require(c.paths.query_token_store, "query_token_store"));
        std::map<std::string, CaptionRecord> by_id;
        for (const auto& cap : caps) {
            by_id[cap.id] = cap;
        }
        for (const auto& b : bundles) {
            if (auto it = by_id.find(b.caption_id); it != by_id.end()) {
                tokens.emplace(b.caption_id, assemble_tokenized(it->second, b, tstore, qstore));
            }
        }
    }
    std::vector<CaptionDrift> drifts;
    for (const auto& [id, v] : qstore.records()) {
        auto it = bank.find(id);
        if (it == bank.end()) {
            res.warn("no views for '" + id + "'");
            continue;
        }
        std::vector<EmbeddingVector> views;
        if (c.flags.query_key && it->second.key) {
            views.insert(views.end(), it->second.key->begin(), it->second.key->end());
        }
        if (c.flags.query_diverse && it->second.diverse) {
            views.insert(views.end(), it->second.diverse->begin(), it->second.diverse->end());
        }
        std::optional<TokenizedCaption> tc;
        if (auto t = tokens.find(id); t != tokens.end()) {
            tc = t->second;
        }
        drifts.push_back(measure_drift(id, v, views, tc));
    }
    write_json(drift_report(drifts), output_path(c, "drift.json"));
    log_line(c, "drift: " + std::to_string(drifts.size()) + " captions");
    return res;
}

/// Writes a synthetic echo dataset and a ready-to-run config into `dir`.
inline CommandResult cmd_synth(const SynthConfig& sc, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto ds = make_synthetic_dataset(sc);
    const auto& in = ds.inputs;
    const auto dim = static_cast<std::uint32_t>(sc.dim);
    auto write_base = [&](const std::vector<std::string>& ids, const std::vector<EmbeddingVector>& vs,
                          const char* name) {
        EmbeddingStore s(dim, true, "synthetic");
        for (std::size_t i = 0; i < ids.size(); ++i) {
            s.insert(ids[i], vs[i]);
        }
        write_store(s, dir / name);
    };
    auto write_views = [&](const ViewBank& bank, const char* name) {
        EmbeddingStore s(dim, true, "synthetic");
        for (const auto& [source, sv] : bank) {
            for (std::size_t i = 0; sv.key && i < sv.key->size(); ++i) {
                s.insert(view_store_id(source, Strategy::key_consistent, i), (*sv.key)[i]);
            }
            for (std::size_t i = 0; sv.diverse && i < sv.diverse->size(); ++i) {
                s.insert(view_store_id(source, Strategy::diverse, i), (*sv.diverse)[i]);
            }
        }
        write_store(s, dir / name);
    };
    write_base(in.query_ids, in.query_base, "query.mvre");
    write_base(in.gallery_ids, in.gallery_base, "gallery.mvre");
    write_views(in.query_views, "query_views.mvre");
    write_views(in.gallery_views, "gallery_views.mvre");
    write_captions(ds.query_captions, dir / "queries.jsonl");
    write_captions(ds.gallery_captions, dir / "gallery.jsonl");
    const nlohmann::json cfg = {
        {"query_store", "query.mvre"},
        {"gallery_store", "gallery.mvre"},
        {"query_captions", "queries.jsonl"},
        {"gallery_captions", "gallery.jsonl"},
        {"query_view_store", "query_views.mvre"},
        {"gallery_view_store", "gallery_views.mvre"},
        {"output_dir", "out"},
        {"seed", sc.seed},
        {"compensation", {{"alpha", 0.75}, {"beta", 0.3}, {"max_views", 30}, {"renormalize_output", true}}},
    };
    write_json(cfg, dir / "config.json");
    std::cerr << "synth: " << in.query_ids.size() << " queries, " << in.gallery_ids.size() << " gallery items in "
              << dir.string() << '\n';
    return {};
}

// ---------------------------------------------------------------------------
// Entry point

struct Overrides {
    std::optional<double> alpha;
    std::optional<double> beta;
    std::optional<std::size_t> max_views;
    std::optional<std::string> strategies;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> llm_endpoint;
    std::optional<std::string> embed_endpoint;
    std::optional<std::string> output_dir;
};

inline void apply_overrides(RunConfig& c, const Overrides& o) {
    if (o.alpha) {
        c.compensation.alpha = *o.alpha;
    }
    if (o.beta) {
        c.compensation.beta = *o.beta;
    }
    if (o.max_views) {
        c.compensation.max_views = *o.max_views;
    }
    if (o.seed) {
        c.seed = *o.seed;
    }
    if (o.llm_endpoint) {
        for (auto& p : c.providers) {
            p.endpoint = *o.llm_endpoint;
        }
    }
    if (o.embed_endpoint) {
        c.embed.endpoint = *o.embed_endpoint;
    }
    if (o.output_dir) {
        c.output_dir = *o.output_dir;
    }
    if (o.strategies) {
        c.strategies.clear();
        std::stringstream ss(*o.strategies);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (!item.empty()) {
                c.strategies.push_back(parse_strategy(item));
            }
        }
        const bool key = std::find(c.strategies.begin(), c.strategies.end(), Strategy::key_consistent) !=
                         c.strategies.end();
        const bool diverse =
            std::find(c.strategies.begin(), c.strategies.end(), Strategy::diverse) != c.strategies.end();
        c.flags.query_key = c.flags.query_key && key;
        c.flags.gallery_key = c.flags.gallery_key && key;
        c.flags.query_diverse = c.flags.query_diverse && diverse;
        c.flags.gallery_diverse = c.flags.gallery_diverse && diverse;
    }
    c.compensation.validate();
}

inline int exit_code_for(const Error& e) {
    return e.kind() == ErrorKind::Service || e.kind() == ErrorKind::Provider ? kServiceError : kInputError;
}

inline int run(int argc, char** argv, ChatBackend* backend_override = nullptr) {
    CLI::App app{"mvr: multi-view reformulation retrieval engine"};
    app.require_subcommand(1);
    std::string config_path;
    Overrides o;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", config_path, "Run configuration (JSON)")->required();
        sub->add_option("--alpha", o.alpha, "Query compensation weight");
        sub->add_option("--beta", o.beta, "Gallery compensation weight");
        sub->add_option("--max-views", o.max_views, "Cap on views per source");
        sub->add_option("--strategies", o.strategies, "Comma list: key_consistent,diverse");
        sub->add_option("--seed", o.seed, "Random seed");
        sub->add_option("--endpoint,--llm-endpoint", o.llm_endpoint, "Chat-completion endpoint override");
        sub->add_option("--embed-endpoint", o.embed_endpoint, "Embedding service endpoint override");
        sub->add_option("-o,--output-dir", o.output_dir, "Output directory override");
    };
    std::map<std::string, CLI::App*> subs;
    for (const char* name : {"keywords", "reformulate", "compensate", "index", "evaluate", "ablate", "sweep", "drift"}) {
        static const std::map<std::string, std::string> help = {
            {"keywords", "Extract keywords from token bundles"},
            {"reformulate", "Generate and cache LLM reformulations"},
            {"compensate", "Embed reformulations and write compensated features"},
            {"index", "Rank the gallery for every query and export top-k lists"},
            {"evaluate", "Baseline and compensated Rank-k / mAP reports"},
            {"ablate", "All 16 query/gallery x strategy combinations"},
            {"sweep", "Alpha/beta grid and view-scale sweeps"},
            {"drift", "Embedding drift between captions and their reformulations"},
        };
        subs[name] = app.add_subcommand(name, help.at(name));
        add_common(subs[name]);
    }
    SynthConfig sc;
    std::string synth_out = "synthetic";
    auto* synth = app.add_subcommand("synth", "Generate a synthetic echo dataset");
    synth->add_option("-o,--out", synth_out, "Output directory");
    synth->add_option("--seed", sc.seed, "Random seed");
    synth->add_option("--identities", sc.identities, "Number of identities");
    synth->add_option("--queries-per-identity", sc.queries_per_identity);
    synth->add_option("--gallery-per-identity", sc.gallery_per_identity);
    synth->add_option("--dim", sc.dim);
    synth->add_option("--epsilon", sc.epsilon, "Perturbation scale");
    synth->add_option("--spread", sc.identity_spread, "Identity spread around the shared direction");
    synth->add_option("--views", sc.views_per_strategy, "Views per strategy");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kInputError;
    }

    try {
        CommandResult result;
        if (synth->parsed()) {
            result = cmd_synth(sc, synth_out);
        } else {
            auto cfg = load_run_config(config_path);
            apply_overrides(cfg, o);
            HttpChatBackend http;
            ChatBackend& backend = backend_override != nullptr ? *backend_override : http;
            if (subs["keywords"]->parsed()) {
                result = cmd_keywords(cfg);
            } else if (subs["reformulate"]->parsed()) {
                result = cmd_reformulate(cfg, backend);
            } else if (subs["compensate"]->parsed()) {
                result = cmd_compensate(cfg);
            } else if (subs["index"]->parsed()) {
                result = cmd_index(cfg);
            } else if (subs["evaluate"]->parsed()) {
                result = cmd_evaluate(cfg);
            } else if (subs["ablate"]->parsed()) {
                result = cmd_ablate(cfg);
            } else if (subs["sweep"]->parsed()) {
                result = cmd_sweep(cfg);
            } else if (subs["drift"]->parsed()) {
                result = cmd_drift(cfg);
            }
        }
        for (const auto& w : result.warnings) {
            std::cerr << "warning: " << w << '\n';
        }
        return result.exit_code;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e);
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInputError;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInputError;
    }
}

}  // namespace mvr::cli
