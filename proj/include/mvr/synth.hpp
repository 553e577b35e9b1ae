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

/** \file synth.hpp
 *  \brief Synthetic "echo" datasets with a known latent meaning per identity.
 *
 * Every identity p owns a latent unit vector u_p. Each observed feature
 * (query text, gallery image, and every reformulation view of either) is
 * normalize(u_p + epsilon * g) with an independent Gaussian perturbation g
 * whose expected squared norm is 1. Identities share a common direction so
 * that retrieval is hard enough for the baseline to make mistakes.
 */

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mvr/ablation.hpp"
#include "mvr/core.hpp"

namespace mvr {

struct SynthConfig {
    std::size_t identities = 100;
    std::size_t queries_per_identity = 2;
    std::size_t gallery_per_identity = 2;
    std::size_t dim = 64;
    double epsilon = 0.5;
    /// Spread of identity latents around the shared direction; smaller is harder.
    double identity_spread = 0.35;
    std::size_t views_per_strategy = 15;
    std::uint64_t seed = 0;
};

/// Gaussian vector with E[|g|^2] = 1.
inline std::vector<double> gaussian_direction(std::mt19937_64& rng, std::size_t dim) {
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(dim)));
    std::vector<double> g(dim);
    for (double& x : g) {
        x = normal(rng);
    }
    return g;
}

inline EmbeddingVector perturbed_unit(const EmbeddingVector& latent, double epsilon, std::mt19937_64& rng) {
    auto g = gaussian_direction(rng, latent.dim());
    for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] = latent[i] + epsilon * g[i];
    }
    return l2_normalize(EmbeddingVector(std::move(g)));
}

struct SynthDataset {
    PipelineInputs inputs;
    std::vector<EmbeddingVector> latents;
    std::vector<CaptionRecord> query_captions;
    std::vector<CaptionRecord> gallery_captions;
};

inline std::string synth_id(char prefix, std::size_t n) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%c%06zu", prefix, n);
    return buf;
}

inline SynthDataset make_synthetic_dataset(const SynthConfig& cfg) {
    if (cfg.identities == 0 || cfg.dim == 0 || cfg.queries_per_identity == 0 || cfg.gallery_per_identity == 0) {
        throw Error(ErrorKind::Config, "synthetic dataset sizes must be positive");
    }
    std::mt19937_64 rng(cfg.seed);
    SynthDataset ds;

    const auto common = l2_normalize(EmbeddingVector(gaussian_direction(rng, cfg.dim)));
    for (std::size_t p = 0; p < cfg.identities; ++p) {
        auto h = gaussian_direction(rng, cfg.dim);
        for (std::size_t i = 0; i < cfg.dim; ++i) {
            h[i] = common[i] + cfg.identity_spread * h[i];
        }
        ds.latents.push_back(l2_normalize(EmbeddingVector(std::move(h))));
    }

    auto make_views = [&](const EmbeddingVector& u) {
        StrategyViews sv;
        sv.key.emplace();
        sv.diverse.emplace();
        for (std::size_t i = 0; i < cfg.views_per_strategy; ++i) {
            sv.key->push_back(perturbed_unit(u, cfg.epsilon, rng));
        }
        for (std::size_t i = 0; i < cfg.views_per_strategy; ++i) {
            sv.diverse->push_back(perturbed_unit(u, cfg.epsilon, rng));
        }
        return sv;
    };

    auto& in = ds.inputs;
    std::size_t qn = 0;
    std::size_t gn = 0;
    for (std::size_t p = 0; p < cfg.identities; ++p) {
        const auto& u = ds.latents[p];
        const std::string pid = synth_id('p', p);
        for (std::size_t k = 0; k < cfg.queries_per_identity; ++k) {
            const std::string id = synth_id('q', qn++);
            in.query_ids.push_back(id);
            in.query_pids.push_back(pid);
            in.query_base.push_back(perturbed_unit(u, cfg.epsilon, rng));
            in.query_views[id] = make_views(u);
            ds.query_captions.push_back({id, pid, "synthetic query " + id + " of " + pid, CaptionKind::query});
        }
        for (std::size_t k = 0; k < cfg.gallery_per_identity; ++k) {
            const std::string id = synth_id('g', gn++);
            in.gallery_ids.push_back(id);
            in.gallery_pids.push_back(pid);
            in.gallery_base.push_back(perturbed_unit(u, cfg.epsilon, rng));
            in.gallery_views[id] = make_views(u);
            ds.gallery_captions.push_back(
                {id, pid, "synthetic caption " + id + " of " + pid, CaptionKind::gallery_caption});
        }
    }
    return ds;
}

}  // namespace mvr
