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

/** \file reformulate.hpp
 *  \brief LLM reformulation orchestration.
 *
 * One chat request per (caption, strategy, provider) returns the whole list
 * of variants. Results are cached by content key, key-consistent variants
 * that drop a keyword are discarded, and per-provider lists are
 * concatenated in provider order.
 */

#include <atomic>
#include <chrono>
#include <iterator>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvr/cache.hpp"
#include "mvr/core.hpp"
#include "mvr/http.hpp"
#include "mvr/parallel.hpp"
#include "mvr/prompts.hpp"

namespace mvr {

inline constexpr const char* kLlmEndpointEnv = "MVR_LLM_ENDPOINT";
inline constexpr const char* kLlmApiKeyEnv = "MVR_LLM_API_KEY";
inline constexpr double kDefaultTemperature = 0.01;

struct LlmProviderConfig {
    std::string name = "default";
    std::string endpoint = "http://127.0.0.1:8000";
    std::string model;
    double temperature = kDefaultTemperature;
    int max_retries = 3;
    std::chrono::milliseconds timeout{120000};
    std::chrono::milliseconds retry_base_delay{500};
    std::optional<std::string> api_key;

    void validate() const {
        if (!(temperature >= 0.0 && temperature < 2.0)) {
            throw Error(ErrorKind::Config, "provider '" + name + "' temperature must lie in [0, 2)");
        }
        if (max_retries < 0) {
            throw Error(ErrorKind::Config, "provider '" + name + "' max_retries must be >= 0");
        }
        Endpoint::parse(endpoint);
    }
};

/// Anything that can turn a rendered prompt into raw assistant text.
class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    /// Throws ServiceError on transport/protocol failure.
    virtual std::string complete(const LlmProviderConfig& provider, const RenderedPrompt& prompt) = 0;
};

/// OpenAI-compatible POST /v1/chat/completions.
class HttpChatBackend final : public ChatBackend {
public:
    std::string complete(const LlmProviderConfig& provider, const RenderedPrompt& prompt) override {
        const auto ep = Endpoint::parse(provider.endpoint);
        const nlohmann::json body = {
            {"model", provider.model},
            {"temperature", provider.temperature},
            {"messages",
             nlohmann::json::array({{{"role", "system"}, {"content", prompt.system}},
                                    {{"role", "user"}, {"content", prompt.user}}})},
        };
        const auto res = post_json(ep, "/v1/chat/completions", body.dump(), provider.timeout, provider.api_key);
        if (res.status != 200) {
            throw ServiceError("chat completion returned HTTP " + std::to_string(res.status), 1, res.status,
                               retryable_status(res.status));
        }
        try {
            const auto j = nlohmann::json::parse(res.body);
            return j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw ServiceError(std::string("malformed chat completion body: ") + e.what(), 1, res.status, true);
        }
    }
};

struct ReformulateOptions {
    std::size_t concurrency = 4;
    PromptTemplates templates{};
};

/// Outcome of one caption x strategy across all providers.
struct ReformulationOutcome {
    std::string source_id;
    Strategy strategy = Strategy::diverse;
    std::optional<ReformulationSet> set;
    std::vector<std::string> warnings;
    /// Provider failures; the set still holds what other providers returned.
    std::vector<std::string> errors;
};

struct BatchStats {
    std::size_t requests = 0;
    std::size_t cache_hits = 0;
    std::size_t generated = 0;
    std::size_t dropped_invalid = 0;
    std::size_t provider_failures = 0;
};

struct BatchResult {
    /// Ordered caption-major, then strategy in the order requested.
    std::vector<ReformulationOutcome> outcomes;
    BatchStats stats;

    [[nodiscard]] std::vector<ReformulationSet> sets() const {
        std::vector<ReformulationSet> out;
        for (const auto& o : outcomes) {
            if (o.set) {
                out.push_back(*o.set);
            }
        }
        return out;
    }
};

/// Keywords per caption id; captions without an entry skip the key-consistent strategy.
using KeywordTable = std::map<std::string, std::vector<std::string>>;

namespace detail {

struct ProviderCall {
    std::vector<std::string> texts;
    std::vector<std::string> warnings;
    std::optional<std::string> error;
    std::size_t dropped = 0;
};

struct CallCounters {
    std::atomic<std::size_t> requests{0};
    std::atomic<std::size_t> cache_hits{0};
    std::atomic<std::size_t> dropped{0};
    std::atomic<std::size_t> failures{0};
};

inline ProviderCall call_provider(ChatBackend& backend, const LlmProviderConfig& provider,
                                  const PromptTemplate& tpl, const CaptionRecord& caption,
                                  const std::optional<std::vector<std::string>>& keywords,
                                  ReformulationCache& cache, CallCounters& counters) {
    const auto key = CacheKey::make(caption.text, tpl.strategy, keywords.value_or(std::vector<std::string>{}),
                                    provider.name, provider.model, provider.temperature, tpl.requested_count);
    if (auto hit = cache.lookup(key)) {
        ++counters.cache_hits;
        return {hit->texts, hit->warnings, std::nullopt, hit->dropped};
    }

    const auto prompt = render_prompt(tpl, caption.text, keywords);
    const RetryPolicy retry{provider.max_retries, provider.retry_base_delay};
    std::string last_error;
    for (int attempt = 0; attempt <= provider.max_retries; ++attempt) {
        if (attempt > 0) {
            retry.sleep_before_retry(attempt - 1);
        }
        ++counters.requests;
        ParsedReformulations parsed;
        try {
            parsed = parse_reformulations(backend.complete(provider, prompt), tpl.requested_count);
        } catch (const ServiceError& e) {
            last_error = e.what();
            if (!e.retryable()) {
                break;
            }
            continue;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::Parse) {
                throw;
            }
            last_error = e.what();
            continue;
        }

        ProviderCall call;
        call.warnings = std::move(parsed.warnings);
        for (auto& t : parsed.texts) {
            if (tpl.strategy == Strategy::key_consistent && !validate_key_consistency(t, *keywords)) {
                ++call.dropped;
                continue;
            }
            call.texts.push_back(std::move(t));
        }
        if (call.dropped > 0) {
            call.warnings.push_back("dropped " + std::to_string(call.dropped) + " of " +
                                    std::to_string(call.dropped + call.texts.size()) +
                                    " key-consistent variants missing a keyword");
        }
        counters.dropped += call.dropped;
        cache.store(key, {caption.id, call.texts, call.dropped, call.warnings});
        return call;
    }
    ++counters.failures;
    ProviderCall failed;
    failed.error = "ProviderError: provider '" + provider.name + "' failed for '" + caption.id + "': " + last_error;
    return failed;
}

}  // namespace detail

inline BatchResult reformulate_batch(const std::vector<CaptionRecord>& captions, const KeywordTable& keywords,
                                     const std::vector<Strategy>& strategies,
                                     const std::vector<LlmProviderConfig>& providers, ReformulationCache& cache,
                                     ChatBackend& backend, const ReformulateOptions& options = {}) {
    if (strategies.empty() || providers.empty()) {
        throw Error(ErrorKind::Config, "reformulate_batch needs at least one strategy and one provider");
    }
    for (const auto& p : providers) {
        p.validate();
    }
    options.templates.key.validate();
    options.templates.diverse.validate();

    const std::size_t per_caption = strategies.size();
    const std::size_t np = providers.size();
    const std::size_t n_tasks = captions.size() * per_caption * np;
    std::vector<detail::ProviderCall> calls(n_tasks);
    std::vector<char> skipped(captions.size() * per_caption, 0);
    detail::CallCounters counters;

    for_each_bounded(n_tasks, options.concurrency, [&](std::size_t t) {
        const std::size_t ci = t / (per_caption * np);
        const std::size_t si = (t / np) % per_caption;
        const std::size_t pi = t % np;
        const auto& caption = captions[ci];
        const Strategy strategy = strategies[si];
        std::optional<std::vector<std::string>> kws;
        if (strategy == Strategy::key_consistent) {
            auto it = keywords.find(caption.id);
            if (it == keywords.end() || it->second.empty()) {
                skipped[ci * per_caption + si] = 1;
                return;
            }
            kws = it->second;
        }
        calls[t] = detail::call_provider(backend, providers[pi], options.templates.for_strategy(strategy), caption,
                                         kws, cache, counters);
    });

    BatchResult result;
    for (std::size_t ci = 0; ci < captions.size(); ++ci) {
        for (std::size_t si = 0; si < per_caption; ++si) {
            ReformulationOutcome outcome;
            outcome.source_id = captions[ci].id;
            outcome.strategy = strategies[si];
            if (skipped[ci * per_caption + si]) {
                outcome.warnings.push_back("no keywords for '" + captions[ci].id +
                                           "'; key-consistent strategy skipped");
                result.outcomes.push_back(std::move(outcome));
                continue;
            }
            ReformulationSet set;
            set.source_id = captions[ci].id;
            set.strategy = strategies[si];
            set.temperature = providers.front().temperature;
            for (std::size_t pi = 0; pi < np; ++pi) {
                auto& call = calls[(ci * per_caption + si) * np + pi];
                if (!set.provider.empty()) {
                    set.provider += '+';
                }
                set.provider += providers[pi].name;
                for (auto& w : call.warnings) {
                    outcome.warnings.push_back(providers[pi].name + ": " + w);
                }
                if (call.error) {
                    outcome.errors.push_back(*call.error);
                }
                std::move(call.texts.begin(), call.texts.end(), std::back_inserter(set.texts));
            }
            if (!set.texts.empty()) {
                result.stats.generated += set.texts.size();
                outcome.set = std::move(set);
            } else if (outcome.errors.empty()) {
                outcome.warnings.push_back("no usable reformulation for '" + captions[ci].id + "'");
            }
            result.outcomes.push_back(std::move(outcome));
        }
    }
    result.stats.requests = counters.requests;
    result.stats.cache_hits = counters.cache_hits;
    result.stats.dropped_invalid = counters.dropped;
    result.stats.provider_failures = counters.failures;
    return result;
}

/// Looks up a previously generated set without touching the network.
inline std::optional<ReformulationSet> cached_set(const ReformulationCache& cache, const CaptionRecord& caption,
                                                  Strategy strategy, const std::vector<std::string>& keywords,
                                                  const std::vector<LlmProviderConfig>& providers,
                                                  const PromptTemplates& templates = {}) {
    ReformulationSet set;
    set.source_id = caption.id;
    set.strategy = strategy;
    bool any = false;
    for (const auto& p : providers) {
        const auto key = CacheKey::make(caption.text, strategy,
                                        strategy == Strategy::key_consistent ? keywords : std::vector<std::string>{},
                                        p.name, p.model, p.temperature,
                                        templates.for_strategy(strategy).requested_count);
        if (!set.provider.empty()) {
            set.provider += '+';
        }
        set.provider += p.name;
        set.temperature = p.temperature;
        if (auto hit = cache.lookup(key)) {
            any = true;
            set.texts.insert(set.texts.end(), hit->texts.begin(), hit->texts.end());
        }
    }
    if (!any) {
        return std::nullopt;
    }
    return set;
}

}  // namespace mvr
