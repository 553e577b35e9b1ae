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

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <optional>
#include <regex>
#include <string>
#include <thread>

#include <httplib.h>

#include "mvr/error.hpp"

namespace mvr {

/// scheme://host[:port][/prefix]
struct Endpoint {
    std::string scheme = "http";
    std::string host;
    int port = 80;
    std::string path_prefix;

    static Endpoint parse(const std::string& url) {
        static const std::regex re(R"(^(https?)://([^/:]+)(?::(\d+))?(/.*)?$)");
        std::smatch m;
        if (!std::regex_match(url, m, re)) {
            throw Error(ErrorKind::Config, "malformed endpoint '" + url + "'");
        }
        Endpoint ep;
        ep.scheme = m[1].str();
        ep.host = m[2].str();
        ep.port = m[3].matched ? std::stoi(m[3].str()) : (ep.scheme == "https" ? 443 : 80);
        ep.path_prefix = m[4].matched ? m[4].str() : "";
        while (!ep.path_prefix.empty() && ep.path_prefix.back() == '/') {
            ep.path_prefix.pop_back();
        }
        return ep;
    }

    [[nodiscard]] std::string base_url() const { return scheme + "://" + host + ":" + std::to_string(port); }
    [[nodiscard]] std::string path(const std::string& route) const { return path_prefix + route; }
};

inline std::optional<std::string> env_var(const char* name) {
    if (const char* v = std::getenv(name); v != nullptr && *v != '\0') {
        return std::string(v);
    }
    return std::nullopt;
}

/// Exponential backoff: attempt k (0-based) waits base * factor^k, capped.
struct RetryPolicy {
    int max_retries = 3;
    std::chrono::milliseconds base_delay{250};
    double factor = 2.0;
    std::chrono::milliseconds max_delay{8000};

    [[nodiscard]] std::chrono::milliseconds delay_for(int attempt) const {
        double d = static_cast<double>(base_delay.count());
        for (int i = 0; i < attempt; ++i) {
            d *= factor;
        }
        return std::chrono::milliseconds(
            static_cast<long long>(std::min(d, static_cast<double>(max_delay.count()))));
    }

    void sleep_before_retry(int attempt) const {
        if (const auto d = delay_for(attempt); d.count() > 0) {
            std::this_thread::sleep_for(d);
        }
    }
};

inline bool retryable_status(int status) { return status == 408 || status == 429 || status >= 500; }

struct HttpResponse {
    int status = 0;
    std::string body;
};

/// One POST with no retry. Transport failures raise ServiceError; any HTTP
/// status is returned to the caller.
inline HttpResponse post_json(const Endpoint& ep, const std::string& route, const std::string& body,
                              std::chrono::milliseconds timeout, const std::optional<std::string>& bearer = {}) {
    httplib::Client client(ep.base_url());
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers headers;
    if (bearer) {
        headers.emplace("Authorization", "Bearer " + *bearer);
    }
    auto res = client.Post(ep.path(route), headers, body, "application/json");
    if (!res) {
        throw ServiceError("POST " + ep.base_url() + ep.path(route) + " failed: " + httplib::to_string(res.error()),
                           1, 0, true);
    }
    return {res->status, res->body};
}

}  // namespace mvr
