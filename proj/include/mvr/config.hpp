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

/** \file config.hpp
 *  \brief Run configuration: one JSON file, environment overrides, CLI overrides.
 *
 * Relative paths resolve against the config file's directory. Paths are
 * checked when a command first needs them.
 */

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvr/ablation.hpp"
#include "mvr/core.hpp"
#include "mvr/embed_client.hpp"
#include "mvr/keywords.hpp"
#include "mvr/reformulate.hpp"

namespace mvr {

struct DataPaths {
    std::optional<std::filesystem::path> query_store;
    std::optional<std::filesystem::path> gallery_store;
    std::optional<std::filesystem::path> query_captions;
    std::optional<std::filesystem::path> gallery_captions;
    /// Text-encoder embeddings of gallery captions (sentence vectors for keyword extraction).
    std::optional<std::filesystem::path> gallery_caption_store;
    std::optional<std::filesystem::path> query_token_store;
    std::optional<std::filesystem::path> query_token_bundles;
    std::optional<std::filesystem::path> gallery_token_store;
    std::optional<std::filesystem::path> gallery_token_bundles;
    std::optional<std::filesystem::path> query_view_store;
    std::optional<std::filesystem::path> gallery_view_store;
    std::optional<std::filesystem::path> keywords;
    std::optional<std::filesystem::path> cache;
    std::optional<std::filesystem::path> templates;
};

struct RunConfig {
    DataPaths paths;
    std::filesystem::path output_dir = "mvr-out";
    std::vector<LlmProviderConfig> providers;
    std::size_t requested_count = kDefaultRequestedCount;
    std::size_t llm_concurrency = 4;
    EmbedClientConfig embed = EmbedClientConfig::from_env();
    CompensationConfig compensation{};
    std::vector<Strategy> strategies{Strategy::key_consistent, Strategy::diverse};
    AblationFlags flags = AblationFlags::all_on();
    double delta = kDefaultKeywordDelta;
    std::optional<std::set<std::string>> stopwords;
    std::vector<double> sweep_alphas{0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5};
    std::vector<double> sweep_betas{0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
    std::vector<std::size_t> sweep_scales{0, 1, 2, 5, 10, 15, 20, 25, 30};
    std::size_t top_k = 10;
    std::uint64_t seed = 0;

    [[nodiscard]] const std::filesystem::path& require(const std::optional<std::filesystem::path>& p,
                                                       const char* name) const {
        if (!p) {
            throw Error(ErrorKind::Config, std::string("config is missing '") + name + "'");
        }
        if (!std::filesystem::exists(*p)) {
            throw Error(ErrorKind::Io, std::string("'") + name + "' does not exist: " + p->string());
        }
        return *p;
    }
};

inline RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    RunConfig c;
    auto path_of = [&](const char* key) -> std::optional<std::filesystem::path> {
        if (!j.contains(key) || j.at(key).is_null()) {
            return std::nullopt;
        }
        std::filesystem::path p = j.at(key).get<std::string>();
        return p.is_absolute() ? p : base_dir / p;
    };
    try {
        auto& p = c.paths;
        p.query_store = path_of("query_store");
        p.gallery_store = path_of("gallery_store");
        p.query_captions = path_of("query_captions");
        p.gallery_captions = path_of("gallery_captions");
        p.gallery_caption_store = path_of("gallery_caption_store");
        p.query_token_store = path_of("query_token_store");
        p.query_token_bundles = path_of("query_token_bundles");
        p.gallery_token_store = path_of("gallery_token_store");
        p.gallery_token_bundles = path_of("gallery_token_bundles");
        p.query_view_store = path_of("query_view_store");
        p.gallery_view_store = path_of("gallery_view_store");
        p.keywords = path_of("keywords");
        p.cache = path_of("cache");
        p.templates = path_of("templates");
        if (auto out = path_of("output_dir")) {
            c.output_dir = *out;
        } else {
            c.output_dir = base_dir / "mvr-out";
        }

        if (j.contains("providers")) {
            for (const auto& pj : j.at("providers")) {
                LlmProviderConfig pc;
                pc.name = pj.value("name", pc.name);
                pc.endpoint = pj.value("endpoint", pc.endpoint);
                pc.model = pj.value("model", pc.model);
                pc.temperature = pj.value("temperature", pc.temperature);
                pc.max_retries = pj.value("max_retries", pc.max_retries);
                pc.timeout = std::chrono::milliseconds(pj.value("timeout_ms", pc.timeout.count()));
                pc.retry_base_delay =
                    std::chrono::milliseconds(pj.value("retry_base_delay_ms", pc.retry_base_delay.count()));
                if (pj.contains("api_key")) {
                    pc.api_key = pj.at("api_key").get<std::string>();
                }
                c.providers.push_back(std::move(pc));
            }
        }
        c.requested_count = j.value("requested_count", c.requested_count);
        c.llm_concurrency = j.value("llm_concurrency", c.llm_concurrency);

        if (j.contains("embed")) {
            const auto& e = j.at("embed");
            c.embed.endpoint = e.value("endpoint", c.embed.endpoint);
            c.embed.batch_size = e.value("batch_size", c.embed.batch_size);
            c.embed.max_in_flight = e.value("max_in_flight", c.embed.max_in_flight);
            c.embed.timeout = std::chrono::milliseconds(e.value("timeout_ms", c.embed.timeout.count()));
        }
        if (j.contains("compensation")) {
            const auto& cj = j.at("compensation");
            c.compensation.alpha = cj.value("alpha", c.compensation.alpha);
            c.compensation.beta = cj.value("beta", c.compensation.beta);
            c.compensation.max_views = cj.value("max_views", c.compensation.max_views);
            c.compensation.renormalize_output = cj.value("renormalize_output", c.compensation.renormalize_output);
        }
        if (j.contains("strategies")) {
            c.strategies.clear();
            for (const auto& s : j.at("strategies")) {
                c.strategies.push_back(parse_strategy(s.get<std::string>()));
            }
        }
        if (j.contains("flags")) {
            const auto& f = j.at("flags");
            c.flags.query_key = f.value("query_key", c.flags.query_key);
            c.flags.query_diverse = f.value("query_diverse", c.flags.query_diverse);
            c.flags.gallery_key = f.value("gallery_key", c.flags.gallery_key);
            c.flags.gallery_diverse = f.value("gallery_diverse", c.flags.gallery_diverse);
        }
        c.delta = j.value("delta", c.delta);
        if (j.contains("stopwords")) {
            c.stopwords = j.at("stopwords").get<std::set<std::string>>();
        }
        if (j.contains("sweep")) {
            const auto& s = j.at("sweep");
            c.sweep_alphas = s.value("alphas", c.sweep_alphas);
            c.sweep_betas = s.value("betas", c.sweep_betas);
            c.sweep_scales = s.value("scales", c.sweep_scales);
        }
        c.top_k = j.value("top_k", c.top_k);
        c.seed = j.value("seed", c.seed);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Config, std::string("bad config: ") + e.what());
    }
    return c;
}

/// Environment variables override endpoints and the API key from the file.
inline void apply_env_overrides(RunConfig& c) {
    if (auto ep = env_var(kEmbedEndpointEnv)) {
        c.embed.endpoint = *ep;
    }
    if (auto ep = env_var(kLlmEndpointEnv)) {
        for (auto& p : c.providers) {
            p.endpoint = *ep;
        }
        if (c.providers.empty()) {
            LlmProviderConfig p;
            p.endpoint = *ep;
            c.providers.push_back(p);
        }
    }
    if (auto key = env_var(kLlmApiKeyEnv)) {
        for (auto& p : c.providers) {
            if (!p.api_key) {
                p.api_key = *key;
            }
        }
    }
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(detail::read_file_bytes(path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Config, "cannot parse config '" + path.string() + "': " + e.what());
    }
    auto c = parse_run_config(j, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
    apply_env_overrides(c);
    return c;
}

}  // namespace mvr
