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

/** \file evaluate.hpp
 *  \brief Rank-k (CMC) and mAP over a query x gallery similarity matrix.
 *
 * Every gallery item sharing the query's person id is relevant; there is no
 * camera or junk filtering. Gallery order per query follows the retrieval
 * tie rule (descending score, then ascending gallery id).
 */

#include <cstdio>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvr/parallel.hpp"
#include "mvr/retrieve.hpp"

namespace mvr {

struct QueryLabels {
    std::vector<std::string> person_ids;
    /// Optional; used only to name queries in error messages.
    std::vector<std::string> ids;
};

struct GalleryLabels {
    std::vector<std::string> person_ids;
    /// Optional tie-break key; column order is used when empty.
    std::vector<std::string> ids;
};

/// Per-query ranking outcome.
struct QueryOutcome {
    /// 1-based rank of the first relevant gallery item.
    std::size_t first_hit = 0;
    double average_precision = 0.0;
};

namespace detail {

inline void check_shapes(const SimilarityMatrix& m, const QueryLabels& q, const GalleryLabels& g) {
    if (m.rows != q.person_ids.size() || m.cols != g.person_ids.size()) {
        throw Error(ErrorKind::DimMismatch, "similarity matrix is " + std::to_string(m.rows) + "x" +
                                                std::to_string(m.cols) + " but labels are " +
                                                std::to_string(q.person_ids.size()) + "x" +
                                                std::to_string(g.person_ids.size()));
    }
    if (!g.ids.empty() && g.ids.size() != g.person_ids.size()) {
        throw Error(ErrorKind::DimMismatch, "gallery ids and person ids differ in length");
    }
}

}  // namespace detail

inline std::vector<QueryOutcome> rank_queries(const SimilarityMatrix& m, const QueryLabels& q,
                                              const GalleryLabels& g, std::size_t threads = default_parallelism()) {
    detail::check_shapes(m, q, g);
    std::vector<QueryOutcome> out(m.rows);
    const auto* tie_ids = g.ids.empty() ? nullptr : &g.ids;
    for_each_bounded(m.rows, threads, [&](std::size_t r) {
        const auto order = rank_columns(m.row(r), tie_ids);
        const auto& pid = q.person_ids[r];
        std::size_t relevant = 0;
        double precision_sum = 0.0;
        for (std::size_t pos = 0; pos < order.size(); ++pos) {
            if (g.person_ids[order[pos]] == pid) {
                ++relevant;
                if (relevant == 1) {
                    out[r].first_hit = pos + 1;
                }
                precision_sum += static_cast<double>(relevant) / static_cast<double>(pos + 1);
            }
        }
        if (relevant == 0) {
            const std::string name = r < q.ids.size() ? q.ids[r] : "#" + std::to_string(r);
            throw Error(ErrorKind::Data, "query '" + name + "' has no relevant gallery item");
        }
        out[r].average_precision = precision_sum / static_cast<double>(relevant);
    });
    return out;
}

inline double rank_k_from(const std::vector<QueryOutcome>& outcomes, std::size_t k) {
    if (outcomes.empty()) {
        return 0.0;
    }
    std::size_t hits = 0;
    for (const auto& o : outcomes) {
        hits += o.first_hit <= k ? 1 : 0;
    }
    return 100.0 * static_cast<double>(hits) / static_cast<double>(outcomes.size());
}

inline double mean_ap_from(const std::vector<QueryOutcome>& outcomes) {
    if (outcomes.empty()) {
        return 0.0;
    }
    double sum = 0.0;
    for (const auto& o : outcomes) {
        sum += o.average_precision;
    }
    return 100.0 * sum / static_cast<double>(outcomes.size());
}

/// Percentage of queries with a relevant item in the top k.
inline double rank_k(const SimilarityMatrix& m, const QueryLabels& q, const GalleryLabels& g, std::size_t k) {
    if (k == 0) {
        throw Error(ErrorKind::Range, "k must be positive");
    }
    return rank_k_from(rank_queries(m, q, g), k);
}

inline double mean_ap(const SimilarityMatrix& m, const QueryLabels& q, const GalleryLabels& g) {
    return mean_ap_from(rank_queries(m, q, g));
}

struct MetricsReport {
    double r1 = 0.0;
    double r5 = 0.0;
    double r10 = 0.0;
    double map = 0.0;
    std::size_t query_count = 0;
    std::vector<double> per_query_ap;
    nlohmann::json config_snapshot = nlohmann::json::object();
    std::vector<std::string> warnings;

    [[nodiscard]] nlohmann::json to_json() const {
        return {{"r1", r1},
                {"r5", r5},
                {"r10", r10},
                {"map", map},
                {"query_count", query_count},
                {"per_query_ap", per_query_ap},
                {"config", config_snapshot},
                {"warnings", warnings}};
    }

    static MetricsReport from_json(const nlohmann::json& j) {
        MetricsReport r;
        r.r1 = j.at("r1").get<double>();
        r.r5 = j.at("r5").get<double>();
        r.r10 = j.at("r10").get<double>();
        r.map = j.at("map").get<double>();
        r.query_count = j.at("query_count").get<std::size_t>();
        r.per_query_ap = j.at("per_query_ap").get<std::vector<double>>();
        r.config_snapshot = j.value("config", nlohmann::json::object());
        r.warnings = j.value("warnings", std::vector<std::string>{});
        return r;
    }

    /// Same metrics, ignoring snapshot and warnings.
    [[nodiscard]] bool same_metrics(const MetricsReport& o) const {
        return r1 == o.r1 && r5 == o.r5 && r10 == o.r10 && map == o.map && per_query_ap == o.per_query_ap;
    }
};

inline MetricsReport make_report(const std::vector<QueryOutcome>& outcomes) {
    MetricsReport r;
    r.r1 = rank_k_from(outcomes, 1);
    r.r5 = rank_k_from(outcomes, 5);
    r.r10 = rank_k_from(outcomes, 10);
    r.map = mean_ap_from(outcomes);
    r.query_count = outcomes.size();
    r.per_query_ap.reserve(outcomes.size());
    for (const auto& o : outcomes) {
        r.per_query_ap.push_back(o.average_precision);
    }
    return r;
}

inline MetricsReport evaluate_matrix(const SimilarityMatrix& m, const QueryLabels& q, const GalleryLabels& g) {
    return make_report(rank_queries(m, q, g));
}

/// Fixed-width table: one row per labeled report.
inline std::string render_table(const std::vector<std::pair<std::string, MetricsReport>>& rows) {
    std::size_t width = 6;
    for (const auto& [label, _] : rows) {
        width = std::max(width, label.size());
    }
    std::string out;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-*s | %6s | %6s | %6s | %6s\n", static_cast<int>(width), "Method", "R1", "R5",
                  "R10", "mAP");
    out += buf;
    out += std::string(width, '-') + "-+--------+--------+--------+-------\n";
    for (const auto& [label, r] : rows) {
        std::snprintf(buf, sizeof buf, "%-*s | %6.2f | %6.2f | %6.2f | %6.2f\n", static_cast<int>(width),
                      label.c_str(), r.r1, r.r5, r.r10, r.map);
        out += buf;
    }
    return out;
}

}  // namespace mvr
