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

// In-process HTTP doubles for the chat-completion and embedding contracts.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <mutex>
#include <random>
#include <regex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "mvr/cache.hpp"
#include "mvr/core.hpp"

namespace mvr::testing {

class MockServer {
public:
    MockServer() = default;
    MockServer(const MockServer&) = delete;
    MockServer& operator=(const MockServer&) = delete;
    virtual ~MockServer() { stop(); }

    void start() {
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    void stop() {
        if (thread_.joinable()) {
            server_.stop();
            thread_.join();
        }
    }

    [[nodiscard]] std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
    [[nodiscard]] std::size_t requests() const { return requests_.load(); }
    void reset_counter() { requests_ = 0; }

protected:
    httplib::Server server_;
    std::atomic<std::size_t> requests_{0};

private:
    int port_ = 0;
    std::thread thread_;
};

/// Deterministic chat-completion server. Every response depends only on the
/// prompt, so reruns are reproducible.
class MockLlm : public MockServer {
public:
    /// Every `drop_every`-th key-consistent variant omits its keywords (0 disables).
    std::atomic<std::size_t> drop_every{0};
    /// The next N requests get an unparseable HTTP body.
    std::atomic<int> malformed_remaining{0};
    /// The next N requests get HTTP 500.
    std::atomic<int> errors_remaining{0};
    /// Always answer HTTP 500.
    std::atomic<bool> always_fail{false};
    /// Response layout: 0 dash bullets, 1 numbered lines, 2 JSON array.
    std::atomic<int> style{0};
    /// Overrides the number of variants; 0 follows the prompt.
    std::atomic<std::size_t> force_count{0};
    /// Artificial latency per request.
    std::atomic<int> delay_ms{0};

    MockLlm() {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            if (delay_ms > 0) {
                std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms.load()));
            }
            ++requests_;
            {
                std::lock_guard lock(mu_);
                bodies_.push_back(req.body);
            }
            if (always_fail || errors_remaining.fetch_sub(1) > 0) {
                res.status = 500;
                res.set_content("{\"error\":\"injected\"}", "application/json");
                return;
            }
            if (malformed_remaining.fetch_sub(1) > 0) {
                res.set_content("{\"choices\": [", "application/json");
                return;
            }
            const auto j = nlohmann::json::parse(req.body);
            const auto system = j.at("messages").at(0).at("content").get<std::string>();
            const auto user = j.at("messages").at(1).at("content").get<std::string>();
            const nlohmann::json out = {
                {"id", "mock"},
                {"model", j.value("model", "")},
                {"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", respond(system, user)}}}}}},
            };
            res.set_content(out.dump(), "application/json");
        });
        start();
    }

    [[nodiscard]] std::vector<nlohmann::json> request_bodies() const {
        std::lock_guard lock(mu_);
        std::vector<nlohmann::json> out;
        for (const auto& b : bodies_) {
            out.push_back(nlohmann::json::parse(b));
        }
        return out;
    }

    /// The texts this server produces for one prompt, in order.
    [[nodiscard]] std::vector<std::string> variants(const std::string& system, const std::string& user) const {
        static const std::regex count_re(R"(Give me (\d+) different)");
        std::smatch m;
        std::size_t n = 3;
        if (std::regex_search(system, m, count_re)) {
            n = std::stoul(m[1].str());
        }
        if (force_count > 0) {
            n = force_count;
        }
        std::string caption;
        std::string keywords;
        std::istringstream lines(user);
        for (std::string line; std::getline(lines, line);) {
            if (line.rfind("Caption: ", 0) == 0) {
                caption = line.substr(9);
            } else if (line.rfind("Keywords: ", 0) == 0) {
                keywords = line.substr(10);
            }
        }
        std::vector<std::string> words;
        static const std::regex quoted("'([^']*)'");
        for (auto it = std::sregex_iterator(keywords.begin(), keywords.end(), quoted); it != std::sregex_iterator();
             ++it) {
            words.push_back((*it)[1].str());
        }
        const std::uint64_t h = fnv1a64(system + "\x1f" + user);
        std::vector<std::string> out;
        for (std::size_t i = 0; i < n; ++i) {
            const bool drop = drop_every > 0 && (i + 1) % drop_every == 0;
            std::string text = "view " + std::to_string(i + 1) + " [" + std::to_string((h >> (i % 48)) & 0xffff) + "]";
            if (drop) {
                text += " of an unrelated pedestrian";
            } else {
                text += " of: " + caption;
                for (std::size_t w = 0; w < words.size(); ++w) {
                    text += (w ? ", " : " with ") + words[w];
                }
            }
            out.push_back(text);
        }
        return out;
    }

private:
    [[nodiscard]] std::string respond(const std::string& system, const std::string& user) const {
        const auto texts = variants(system, user);
        std::string out;
        switch (style.load()) {
            case 1:
                for (std::size_t i = 0; i < texts.size(); ++i) {
                    out += std::to_string(i + 1) + ". " + texts[i] + "\n";
                }
                return out;
            case 2:
                return nlohmann::json(texts).dump();
            default:
                for (const auto& t : texts) {
                    out += "- " + t + "\n";
                }
                return out;
        }
    }

    mutable std::mutex mu_;
    std::vector<std::string> bodies_;
};

inline std::vector<double> to_std_copy(const EmbeddingVector& v) { return {v.values().begin(), v.values().end()}; }

/// Unit vector derived from a hash of `text`; identical texts give identical vectors.
inline std::vector<double> hash_vector(const std::string& text, std::size_t dim) {
    std::mt19937_64 rng(fnv1a64(text));
    std::normal_distribution<double> normal;
    std::vector<double> v(dim);
    double sq = 0.0;
    for (double& x : v) {
        x = normal(rng);
        sq += x * x;
    }
    for (double& x : v) {
        x /= std::sqrt(sq);
    }
    return v;
}

/// Embedding service double for /embed/text and /embed/tokens.
class MockEmbed : public MockServer {
public:
    std::atomic<std::size_t> dim{16};
    /// Return one vector fewer than requested.
    std::atomic<bool> short_response{false};
    /// The next N requests get HTTP 503.
    std::atomic<int> errors_remaining{0};

    MockEmbed() {
        server_.Post("/embed/text", [this](const httplib::Request& req, httplib::Response& res) {
            ++requests_;
            std::vector<std::string> texts;
            if (!accept(req, res, texts)) {
                return;
            }
            nlohmann::json vectors = nlohmann::json::array();
            const std::size_t n = short_response ? texts.size() - 1 : texts.size();
            for (std::size_t i = 0; i < n; ++i) {
                vectors.push_back(hash_vector(texts[i], dim));
            }
            res.set_content(nlohmann::json{{"dim", dim.load()}, {"vectors", vectors}}.dump(), "application/json");
        });
        server_.Post("/embed/tokens", [this](const httplib::Request& req, httplib::Response& res) {
            ++requests_;
            std::vector<std::string> texts;
            if (!accept(req, res, texts)) {
                return;
            }
            nlohmann::json results = nlohmann::json::array();
            for (const auto& t : texts) {
                std::istringstream in(t);
                std::vector<std::string> words;
                nlohmann::json vectors = nlohmann::json::array();
                for (std::string w; in >> w;) {
                    words.push_back(w);
                    vectors.push_back(hash_vector(w, dim));
                }
                results.push_back({{"words", words}, {"vectors", vectors}});
            }
            res.set_content(nlohmann::json{{"dim", dim.load()}, {"results", results}}.dump(), "application/json");
        });
        start();
    }

private:
    bool accept(const httplib::Request& req, httplib::Response& res, std::vector<std::string>& texts) {
        if (errors_remaining.fetch_sub(1) > 0) {
            res.status = 503;
            return false;
        }
        try {
            texts = nlohmann::json::parse(req.body).at("texts").get<std::vector<std::string>>();
        } catch (const nlohmann::json::exception&) {
            texts.clear();
        }
        if (texts.empty()) {
            res.status = 400;
            res.set_content("{\"error\":\"texts must be a nonempty list of strings\"}", "application/json");
            return false;
        }
        return true;
    }
};

}  // namespace mvr::testing
