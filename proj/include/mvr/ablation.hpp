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

/** \file ablation.hpp
 *  \brief End-to-end compensated retrieval runs, ablations and sweeps.
 *
 * Views are precomputed embeddings grouped by source id and strategy. For a
 * given flag tuple each side concatenates its enabled strategies
 * (key-consistent first, then diverse) and compensates with that list.
 */

#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvr/compensate.hpp"
#include "mvr/evaluate.hpp"
#include "mvr/retrieve.hpp"
#include "mvr/store.hpp"

namespace mvr {

struct StrategyViews {
    std::optional<std::vector<EmbeddingVector>> key;
    std::optional<std::vector<EmbeddingVector>> diverse;
};

/// Per source id (query id or gallery image id).
using ViewBank = std::map<std::string, StrategyViews>;

struct PipelineInputs {
    std::vector<std::string> query_ids;
    std::vector<std::string> query_pids;
    std::vector<EmbeddingVector> query_base;

    std::vector<std::string> gallery_ids;
    std::vector<std::string> gallery_pids;
    std::vector<EmbeddingVector> gallery_base;

    ViewBank query_views;
    ViewBank gallery_views;

    void validate() const {
        if (query_ids.size() != query_pids.size() || query_ids.size() != query_base.size()) {
            throw Error(ErrorKind::Data, "query ids, identities and vectors differ in length");
        }
        if (gallery_ids.size() != gallery_pids.size() || gallery_ids.size() != gallery_base.size()) {
            throw Error(ErrorKind::Data, "gallery ids, identities and vectors differ in length");
        }
    }
};

struct AblationFlags {
    bool query_key = false;
    bool query_diverse = false;
    bool gallery_key = false;
    bool gallery_diverse = false;

    static AblationFlags all_on() { return {true, true, true, true}; }
    static AblationFlags all_off() { return {}; }

    [[nodiscard]] bool any() const { return query_key || query_diverse || gallery_key || gallery_diverse; }

    [[nodiscard]] nlohmann::json to_json() const {
        return {{"query_key", query_key},
                {"query_diverse", query_diverse},
                {"gallery_key", gallery_key},
                {"gallery_diverse", gallery_diverse}};
    }

    [[nodiscard]] std::string label() const {
        auto mark = [](bool b) { return b ? 'x' : '.'; };
        return std::string("Q[") + mark(query_key) + mark(query_diverse) + "] G[" + mark(gallery_key) +
               mark(gallery_diverse) + "]";
    }
};

/// Optional per-run overrides used by sweeps.
struct RunOptions {
    /// Keep only the first m query views (after concatenation); 0 disables
    /// query compensation.
    std::optional<std::size_t> query_scale;
    ScanOptions scan{};
};

namespace detail {

inline std::vector<EmbeddingVector> gather_views(const ViewBank& bank, const std::string& id, bool use_key,
                                                 bool use_diverse, std::vector<std::string>& missing,
                                                 std::vector<std::string>& warnings) {
    std::vector<EmbeddingVector> views;
    if (!use_key && !use_diverse) {
        return views;
    }
    const auto it = bank.find(id);
    auto take = [&](bool enabled, const std::optional<std::vector<EmbeddingVector>> StrategyViews::*field,
                    const char* tag) {
        if (!enabled) {
            return;
        }
        if (it == bank.end() || !(it->second.*field)) {
            missing.push_back(id + "#" + tag);
            return;
        }
        const auto& vs = *(it->second.*field);
        views.insert(views.end(), vs.begin(), vs.end());
    };
    take(use_key, &StrategyViews::key, "key");
    take(use_diverse, &StrategyViews::diverse, "diverse");
    if (views.empty() && missing.empty()) {
        warnings.push_back("'" + id + "' has no views; using its base feature");
    }
    return views;
}

}  // namespace detail

/// Compensated features for both sides under one flag tuple.
struct CompensatedSides {
    std::vector<EmbeddingVector> queries;
    std::vector<EmbeddingVector> gallery;
    std::vector<std::string> warnings;
};

inline CompensatedSides compensate_inputs(const PipelineInputs& in, const AblationFlags& flags,
                                          const CompensationConfig& config, const RunOptions& options = {}) {
    in.validate();
    config.validate();
    CompensatedSides out;
    std::vector<std::string> missing;

    std::size_t max_available = 0;
    std::vector<std::vector<EmbeddingVector>> qviews(in.query_ids.size());
    for (std::size_t i = 0; i < in.query_ids.size(); ++i) {
        qviews[i] = detail::gather_views(in.query_views, in.query_ids[i], flags.query_key, flags.query_diverse,
                                         missing, out.warnings);
        max_available = std::max(max_available, qviews[i].size());
    }
    std::vector<std::vector<EmbeddingVector>> gviews(in.gallery_ids.size());
    for (std::size_t i = 0; i < in.gallery_ids.size(); ++i) {
        gviews[i] = detail::gather_views(in.gallery_views, in.gallery_ids[i], flags.gallery_key,
                                         flags.gallery_diverse, missing, out.warnings);
    }
    if (!missing.empty()) {
        throw CacheMissError(std::move(missing));
    }
    if (options.query_scale && *options.query_scale > max_available && !in.query_ids.empty() &&
        (flags.query_key || flags.query_diverse)) {
        throw Error(ErrorKind::Range, "scale " + std::to_string(*options.query_scale) + " exceeds the " +
                                          std::to_string(max_available) + " available query views");
    }

    out.queries.reserve(in.query_ids.size());
    for (std::size_t i = 0; i < in.query_ids.size(); ++i) {
        std::span<const EmbeddingVector> views = qviews[i];
        std::size_t cap = config.max_views;
        if (options.query_scale) {
            cap = std::min(cap, *options.query_scale);
        }
        views = views.first(std::min(views.size(), cap));
        out.queries.push_back(residual_compensate(in.query_base[i], views, config.alpha, config.max_views,
                                                  config.renormalize_output));
    }
    out.gallery.reserve(in.gallery_ids.size());
    for (std::size_t i = 0; i < in.gallery_ids.size(); ++i) {
        out.gallery.push_back(
            compensate_image(in.gallery_base[i], gviews[i], config, in.gallery_ids[i]).output);
    }
    return out;
}

inline nlohmann::json config_snapshot(const CompensationConfig& config, const AblationFlags& flags,
                                      const RunOptions& options) {
    nlohmann::json j = {{"alpha", config.alpha},
                        {"beta", config.beta},
                        {"max_views", config.max_views},
                        {"renormalize_output", config.renormalize_output},
                        {"flags", flags.to_json()}};
    if (options.query_scale) {
        j["query_scale"] = *options.query_scale;
    }
    return j;
}

inline MetricsReport run_ablation(const PipelineInputs& in, const AblationFlags& flags,
                                  const CompensationConfig& config, const RunOptions& options = {}) {
    auto sides = compensate_inputs(in, flags, config, options);
    const auto index = GalleryIndex::from_vectors(in.gallery_ids, in.gallery_pids, sides.gallery);
    const auto m = similarity_matrix(index, sides.queries, options.scan);
    auto report = evaluate_matrix(m, {in.query_pids, in.query_ids}, {index.person_ids(), index.ids()});
    report.config_snapshot = config_snapshot(config, flags, options);
    report.warnings = std::move(sides.warnings);
    return report;
}

/// The uncompensated reference run.
inline MetricsReport run_baseline(const PipelineInputs& in, const CompensationConfig& config = {},
                                  const RunOptions& options = {}) {
    return run_ablation(in, AblationFlags::all_off(), config, options);
}

/// Every one of the 16 flag combinations, all-off first.
inline std::vector<std::pair<AblationFlags, MetricsReport>> run_ablation_matrix(const PipelineInputs& in,
                                                                                const CompensationConfig& config,
                                                                                const RunOptions& options = {}) {
    std::vector<std::pair<AblationFlags, MetricsReport>> out;
    for (unsigned bits = 0; bits < 16; ++bits) {
        const AblationFlags f{(bits & 1U) != 0, (bits & 2U) != 0, (bits & 4U) != 0, (bits & 8U) != 0};
        out.emplace_back(f, run_ablation(in, f, config, options));
    }
    return out;
}

struct GridResult {
    std::vector<double> alphas;
    std::vector<double> betas;
    /// reports[i][j] is alpha = alphas[i], beta = betas[j].
    std::vector<std::vector<MetricsReport>> reports;
};

inline GridResult sweep_grid(const PipelineInputs& in, const std::vector<double>& alphas,
                             const std::vector<double>& betas, const AblationFlags& flags = AblationFlags::all_on(),
                             CompensationConfig base = {}, const RunOptions& options = {}) {
    if (alphas.empty() || betas.empty()) {
        throw Error(ErrorKind::Config, "sweep grid needs at least one alpha and one beta");
    }
    GridResult g{alphas, betas, {}};
    for (double a : alphas) {
        auto& row = g.reports.emplace_back();
        for (double b : betas) {
            base.alpha = a;
            base.beta = b;
            row.push_back(run_ablation(in, flags, base, options));
        }
    }
    return g;
}

inline std::vector<MetricsReport> sweep_scale(const PipelineInputs& in, const std::vector<std::size_t>& scales,
                                              const AblationFlags& flags = AblationFlags::all_on(),
                                              const CompensationConfig& config = {}, RunOptions options = {}) {
    std::vector<MetricsReport> out;
    out.reserve(scales.size());
    for (std::size_t m : scales) {
        options.query_scale = m;
        out.push_back(run_ablation(in, flags, config, options));
    }
    return out;
}

/// Long form: alpha,beta,r1,r5,r10,map.
inline void write_grid_csv(const GridResult& g, const std::filesystem::path& path) {
    std::string out = "alpha,beta,r1,r5,r10,map\n";
    char buf[200];
    for (std::size_t i = 0; i < g.alphas.size(); ++i) {
        for (std::size_t j = 0; j < g.betas.size(); ++j) {
            const auto& r = g.reports[i][j];
            std::snprintf(buf, sizeof buf, "%g,%g,%.6f,%.6f,%.6f,%.6f\n", g.alphas[i], g.betas[j], r.r1, r.r5,
                          r.r10, r.map);
            out += buf;
        }
    }
    detail::write_file_bytes(path, out);
}

/// Heatmap form for one metric: rows alpha, columns beta, header "alpha\beta,b1,b2,...".
inline void write_grid_matrix_csv(const GridResult& g, const std::filesystem::path& path,
                                  double MetricsReport::*metric) {
    std::string out = "alpha\\beta";
    char buf[64];
    for (double b : g.betas) {
        std::snprintf(buf, sizeof buf, ",%g", b);
        out += buf;
    }
    out += '\n';
    for (std::size_t i = 0; i < g.alphas.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%g", g.alphas[i]);
        out += buf;
        for (std::size_t j = 0; j < g.betas.size(); ++j) {
            std::snprintf(buf, sizeof buf, ",%.6f", g.reports[i][j].*metric);
            out += buf;
        }
        out += '\n';
    }
    detail::write_file_bytes(path, out);
}

inline void write_scale_csv(const std::vector<std::size_t>& scales, const std::vector<MetricsReport>& reports,
                            const std::filesystem::path& path) {
    std::string out = "scale,r1,r5,r10,map\n";
    char buf[160];
    for (std::size_t i = 0; i < scales.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6f,%.6f\n", scales[i], reports[i].r1, reports[i].r5,
                      reports[i].r10, reports[i].map);
        out += buf;
    }
    detail::write_file_bytes(path, out);
}

/// Groups a view store with ids "<source>#<key|diverse>#<index>" into a bank.
inline ViewBank views_from_store(const EmbeddingStore& store) {
    std::map<std::string, std::map<std::string, std::map<std::size_t, EmbeddingVector>>> grouped;
    for (const auto& [id, v] : store.records()) {
        const auto last = id.rfind('#');
        const auto mid = last == std::string::npos || last == 0 ? std::string::npos : id.rfind('#', last - 1);
        if (mid == 0) {
            throw Error(ErrorKind::Format, "view id '" + id + "' has an empty source");
        }
        if (mid == std::string::npos) {
            throw Error(ErrorKind::Format, "view id '" + id + "' is not <source>#<strategy>#<index>");
        }
        const std::string source = id.substr(0, mid);
        const std::string tag = id.substr(mid + 1, last - mid - 1);
        std::size_t index = 0;
        try {
            index = std::stoul(id.substr(last + 1));
        } catch (const std::exception&) {
            throw Error(ErrorKind::Format, "view id '" + id + "' has a non-numeric index");
        }
        grouped[source][std::string(short_tag(parse_strategy(tag)))].emplace(index, v);
    }
    ViewBank bank;
    for (auto& [source, by_tag] : grouped) {
        auto& sv = bank[source];
        for (auto& [tag, by_index] : by_tag) {
            std::vector<EmbeddingVector> vs;
            for (auto& [_, v] : by_index) {
                vs.push_back(std::move(v));
            }
            (tag == "key" ? sv.key : sv.diverse) = std::move(vs);
        }
    }
    return bank;
}

inline std::string view_store_id(const std::string& source, Strategy s, std::size_t index) {
    return source + "#" + std::string(short_tag(s)) + "#" + std::to_string(index);
}

}  // namespace mvr
