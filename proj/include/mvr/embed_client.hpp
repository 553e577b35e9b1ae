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

/** \file embed_client.hpp
 *  \brief Client for the remote text-embedding service.
 *
 *  POST /embed/text    {"texts": [...]} -> {"dim": d, "vectors": [[...], ...]}
 *  POST /embed/tokens  {"texts": [...]} -> {"dim": d, "results": [{"words": [...], "vectors": [[...]]}]}
 */

#include <chrono>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvr/core.hpp"
#include "mvr/http.hpp"
#include "mvr/parallel.hpp"

namespace mvr {

inline constexpr const char* kEmbedEndpointEnv = "MVR_EMBED_ENDPOINT";

struct EmbedClientConfig {
    std::string endpoint;
    std::size_t batch_size = 64;
    std::size_t max_in_flight = 8;
    std::chrono::milliseconds timeout{30000};
    RetryPolicy retry{};
    /// When set, every returned vector must have this dim.
    std::optional<std::size_t> expected_dim;

    static EmbedClientConfig from_env() {
        EmbedClientConfig c;
        c.endpoint = env_var(kEmbedEndpointEnv).value_or("http://127.0.0.1:8080");
        return c;
    }
};

struct TokenEmbedding {
    std::vector<std::string> words;
    std::vector<EmbeddingVector> vectors;
};

namespace detail {

/// Posts one batch with retries and returns the parsed body.
inline nlohmann::json post_embed_batch(const EmbedClientConfig& cfg, const std::string& route,
                                       const std::vector<std::string>& texts) {
    const auto ep = Endpoint::parse(cfg.endpoint);
    const std::string body = nlohmann::json{{"texts", texts}}.dump();
    int attempt = 0;
    for (;;) {
        ++attempt;
        int status = 0;
        std::string reason;
        bool retryable = true;
        try {
            const auto res = post_json(ep, route, body, cfg.timeout);
            status = res.status;
            if (status == 200) {
                try {
                    return nlohmann::json::parse(res.body);
                } catch (const nlohmann::json::exception& e) {
                    reason = std::string("malformed response body: ") + e.what();
                }
            } else {
                reason = "HTTP " + std::to_string(status);
                retryable = retryable_status(status);
            }
        } catch (const ServiceError& e) {
            reason = e.what();
        }
        if (!retryable || attempt > cfg.retry.max_retries) {
            throw ServiceError(route + ": " + reason, attempt, status, retryable);
        }
        cfg.retry.sleep_before_retry(attempt - 1);
    }
}

inline EmbeddingVector parse_vector(const nlohmann::json& j, const std::string& route) {
    try {
        return EmbeddingVector(j.get<std::vector<double>>());
    } catch (const nlohmann::json::exception& e) {
        throw ServiceError(route + ": vector is not a list of numbers: " + e.what(), 1, 200, false);
    } catch (const Error& e) {
        throw ServiceError(route + ": invalid vector: " + e.what(), 1, 200, false);
    }
}

inline void check_dim(const EmbedClientConfig& cfg, std::size_t dim, std::optional<std::size_t>& seen) {
    if (cfg.expected_dim && dim != *cfg.expected_dim) {
        throw Error(ErrorKind::DimMismatch, "service returned dim " + std::to_string(dim) + ", store expects " +
                                                std::to_string(*cfg.expected_dim));
    }
    if (seen && *seen != dim) {
        throw ServiceError("service returned vectors of mixed dims", 1, 200, false);
    }
    seen = dim;
}

template <typename Result, typename Decode>
std::vector<Result> embed_batched(const std::vector<std::string>& texts, const EmbedClientConfig& cfg,
                                  Decode&& decode) {
    if (texts.empty()) {
        throw Error(ErrorKind::Data, "embed request needs at least one text");
    }
    const std::size_t batch = std::max<std::size_t>(1, cfg.batch_size);
    const std::size_t batches = (texts.size() + batch - 1) / batch;
    std::vector<std::vector<Result>> parts(batches);
    for_each_bounded(batches, cfg.max_in_flight, [&](std::size_t b) {
        const auto first = texts.begin() + static_cast<std::ptrdiff_t>(b * batch);
        const auto last = texts.begin() + static_cast<std::ptrdiff_t>(std::min(texts.size(), (b + 1) * batch));
        std::vector<std::string> chunk(first, last);
        parts[b] = decode(chunk);
        if (parts[b].size() != chunk.size()) {
            throw ServiceError("service returned " + std::to_string(parts[b].size()) + " results for " +
                                   std::to_string(chunk.size()) + " inputs",
                               1, 200, false);
        }
    });
    std::vector<Result> out;
    out.reserve(texts.size());
    for (auto& p : parts) {
        std::move(p.begin(), p.end(), std::back_inserter(out));
    }
    return out;
}

}  // namespace detail

/// One vector per input text, in input order.
inline std::vector<EmbeddingVector> embed_remote(const std::vector<std::string>& texts,
                                                 const EmbedClientConfig& cfg) {
    static const std::string route = "/embed/text";
    auto out = detail::embed_batched<EmbeddingVector>(texts, cfg, [&](const std::vector<std::string>& chunk) {
        const auto j = detail::post_embed_batch(cfg, route, chunk);
        if (!j.is_object() || !j.contains("vectors") || !j["vectors"].is_array()) {
            throw ServiceError(route + ": response lacks a vectors array", 1, 200, false);
        }
        std::vector<EmbeddingVector> vs;
        for (const auto& v : j["vectors"]) {
            vs.push_back(detail::parse_vector(v, route));
        }
        if (j.contains("dim")) {
            for (const auto& v : vs) {
                if (v.dim() != j["dim"].get<std::size_t>()) {
                    throw ServiceError(route + ": vector length disagrees with declared dim", 1, 200, false);
                }
            }
        }
        return vs;
    });
    std::optional<std::size_t> seen;
    for (const auto& v : out) {
        detail::check_dim(cfg, v.dim(), seen);
    }
    return out;
}

inline std::vector<TokenEmbedding> embed_tokens_remote(const std::vector<std::string>& texts,
                                                       const EmbedClientConfig& cfg) {
    static const std::string route = "/embed/tokens";
    auto out = detail::embed_batched<TokenEmbedding>(texts, cfg, [&](const std::vector<std::string>& chunk) {
        const auto j = detail::post_embed_batch(cfg, route, chunk);
        if (!j.is_object() || !j.contains("results") || !j["results"].is_array()) {
            throw ServiceError(route + ": response lacks a results array", 1, 200, false);
        }
        std::vector<TokenEmbedding> rs;
        for (const auto& r : j["results"]) {
            TokenEmbedding te;
            try {
                te.words = r.at("words").get<std::vector<std::string>>();
                for (const auto& v : r.at("vectors")) {
                    te.vectors.push_back(detail::parse_vector(v, route));
                }
            } catch (const nlohmann::json::exception& e) {
                throw ServiceError(route + ": malformed token result: " + e.what(), 1, 200, false);
            }
            if (te.words.size() != te.vectors.size() || te.words.empty()) {
                throw ServiceError(route + ": words and vectors disagree in length", 1, 200, false);
            }
            rs.push_back(std::move(te));
        }
        return rs;
    });
    std::optional<std::size_t> seen;
    for (const auto& te : out) {
        for (const auto& v : te.vectors) {
            detail::check_dim(cfg, v.dim(), seen);
        }
    }
    return out;
}

}  // namespace mvr
