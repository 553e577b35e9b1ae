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

/** \file compensate.hpp
 *  \brief Residual mean-pool compensation of query and gallery features.
 *
 *      output = base + weight * mean(views[0 .. min(|views|, max_views)))
 *
 * with weight = alpha for query text and beta for gallery images, whose views
 * are text embeddings of reformulated image captions. The output is
 * L2-normalized when the config asks for it.
 */

#include <span>
#include <string>
#include <vector>

#include "mvr/core.hpp"

namespace mvr {

enum class FeatureSide { query_text, gallery_image };

struct CompensatedFeature {
    std::string source_id;
    EmbeddingVector base;
    std::size_t views_used = 0;
    EmbeddingVector output;
    FeatureSide side = FeatureSide::query_text;
};

inline EmbeddingVector residual_compensate(const EmbeddingVector& base, std::span<const EmbeddingVector> views,
                                           double weight, std::size_t max_views, bool renormalize,
                                           std::size_t* views_used = nullptr) {
    for (const auto& v : views) {
        if (v.dim() != base.dim()) {
            throw Error(ErrorKind::DimMismatch, "view dim " + std::to_string(v.dim()) + " differs from base dim " +
                                                    std::to_string(base.dim()));
        }
    }
    const std::size_t used = std::min(views.size(), max_views);
    if (views_used != nullptr) {
        *views_used = used;
    }
    if (used == 0 || weight == 0.0) {
        return renormalize ? as_unit(base) : base;
    }
    const auto mean = mean_pool(views.first(used));
    std::vector<double> out(base.values().begin(), base.values().end());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] += weight * mean[i];
    }
    EmbeddingVector combined(std::move(out));
    return renormalize ? l2_normalize(combined) : combined;
}

inline CompensatedFeature compensate_text(const EmbeddingVector& base, std::span<const EmbeddingVector> views,
                                          const CompensationConfig& config, std::string source_id = {}) {
    config.validate();
    CompensatedFeature f{std::move(source_id), base, 0, {}, FeatureSide::query_text};
    f.output = residual_compensate(base, views, config.alpha, config.max_views, config.renormalize_output,
                                   &f.views_used);
    return f;
}

inline CompensatedFeature compensate_image(const EmbeddingVector& base,
                                           std::span<const EmbeddingVector> caption_views,
                                           const CompensationConfig& config, std::string source_id = {}) {
    config.validate();
    CompensatedFeature f{std::move(source_id), base, 0, {}, FeatureSide::gallery_image};
    f.output = residual_compensate(base, caption_views, config.beta, config.max_views, config.renormalize_output,
                                   &f.views_used);
    return f;
}

/// Stable prefix of the first m texts, so scale sweeps are nested.
inline ReformulationSet truncate_views(const ReformulationSet& set, std::size_t m) {
    if (m > set.texts.size()) {
        throw Error(ErrorKind::Range, "cannot keep " + std::to_string(m) + " of " + std::to_string(set.texts.size()) +
                                          " views");
    }
    ReformulationSet out = set;
    out.texts.resize(m);
    return out;
}

}  // namespace mvr
