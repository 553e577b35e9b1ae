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

/** \file drift.hpp
 *  \brief Diagnostics for how far paraphrases move a caption's embedding.
 */

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvr/core.hpp"

namespace mvr {

struct CaptionDrift {
    std::string caption_id;
    /// Aligned with the view list.
    std::vector<double> l2_distances;
    std::vector<double> cosines;
    /// word_cosines[w][0] is word w against the original sentence vector;
    /// word_cosines[w][1 + i] is against view i. Empty without tokens.
    std::vector<std::string> words;
    std::vector<std::vector<double>> word_cosines;
};

struct DistributionSummary {
    std::size_t count = 0;
    double mean = 0.0;
    double p10 = 0.0;
    double p50 = 0.0;
    double p90 = 0.0;
    double max = 0.0;

    [[nodiscard]] nlohmann::json to_json() const {
        return {{"count", count}, {"mean", mean}, {"p10", p10}, {"p50", p50}, {"p90", p90}, {"max", max}};
    }
};

/// Linear interpolation between closest ranks.
inline double percentile(std::vector<double> sorted_or_not, double q) {
    if (sorted_or_not.empty()) {
        return 0.0;
    }
    std::sort(sorted_or_not.begin(), sorted_or_not.end());
    const double pos = q * static_cast<double>(sorted_or_not.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = static_cast<std::size_t>(std::ceil(pos));
    return sorted_or_not[lo] + (pos - static_cast<double>(lo)) * (sorted_or_not[hi] - sorted_or_not[lo]);
}

inline DistributionSummary summarize(const std::vector<double>& xs) {
    DistributionSummary s;
    s.count = xs.size();
    if (xs.empty()) {
        return s;
    }
    double sum = 0.0;
    for (double x : xs) {
        sum += x;
    }
    s.mean = sum / static_cast<double>(xs.size());
    s.p10 = percentile(xs, 0.10);
    s.p50 = percentile(xs, 0.50);
    s.p90 = percentile(xs, 0.90);
    s.max = *std::max_element(xs.begin(), xs.end());
    return s;
}

/// Distances are between unit-normalized embeddings so they are comparable
/// across encoders; for unit vectors d^2 = 2 - 2 cos.
inline CaptionDrift measure_drift(const std::string& caption_id, const EmbeddingVector& original,
                                  const std::vector<EmbeddingVector>& views,
                                  const std::optional<TokenizedCaption>& tokens = std::nullopt) {
    CaptionDrift d;
    d.caption_id = caption_id;
    const auto base = l2_normalize(original);
    std::vector<EmbeddingVector> units;
    units.reserve(views.size());
    for (const auto& v : views) {
        units.push_back(l2_normalize(v));
        d.l2_distances.push_back(l2_distance(base, units.back()));
        d.cosines.push_back(cosine_similarity(base, units.back()));
    }
    if (tokens) {
        tokens->validate();
        d.words = tokens->words;
        for (const auto& t : tokens->token_vectors) {
            std::vector<double> row;
            row.push_back(cosine_similarity(t, original));
            for (const auto& u : units) {
                row.push_back(cosine_similarity(t, u));
            }
            d.word_cosines.push_back(std::move(row));
        }
    }
    return d;
}

inline nlohmann::json drift_report(const std::vector<CaptionDrift>& drifts) {
    nlohmann::json captions = nlohmann::json::array();
    std::vector<double> all_l2;
    std::vector<double> all_cos;
    for (const auto& d : drifts) {
        nlohmann::json c = {{"caption_id", d.caption_id}, {"l2", d.l2_distances}, {"cosine", d.cosines}};
        if (!d.words.empty()) {
            c["words"] = d.words;
            c["word_cosines"] = d.word_cosines;
        }
        captions.push_back(std::move(c));
        all_l2.insert(all_l2.end(), d.l2_distances.begin(), d.l2_distances.end());
        all_cos.insert(all_cos.end(), d.cosines.begin(), d.cosines.end());
    }
    return {{"captions", captions},
            {"aggregate", {{"l2", summarize(all_l2).to_json()}, {"cosine", summarize(all_cos).to_json()}}}};
}

}  // namespace mvr
