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

/** \file cache.hpp
 *  \brief Append-only, line-delimited reformulation cache.
 *
 * Each line is one JSON object {hash, key, source_id, texts, dropped, warnings}.
 * The file is loaded fully at construction; a torn final line (crash during
 * append) is skipped and counted.
 */

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvr/core.hpp"

namespace mvr {

inline std::string normalize_caption_text(std::string_view text) {
    std::string out;
    bool pending_space = false;
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out += ' ';
            pending_space = false;
        }
        out += static_cast<char>(std::tolower(c));
    }
    return out;
}

inline std::uint64_t fnv1a64(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

struct CacheKey {
    std::string caption;  // normalized
    Strategy strategy = Strategy::diverse;
    std::vector<std::string> keywords;  // sorted
    std::string provider;
    std::string model;
    double temperature = 0.0;
    std::size_t requested_count = 0;

    static CacheKey make(std::string_view caption_text, Strategy strategy, std::vector<std::string> keywords,
                         std::string provider, std::string model, double temperature, std::size_t count) {
        std::sort(keywords.begin(), keywords.end());
        return {normalize_caption_text(caption_text), strategy, std::move(keywords), std::move(provider),
                std::move(model), temperature, count};
    }

    [[nodiscard]] nlohmann::json to_json() const {
        char temp[32];
        std::snprintf(temp, sizeof temp, "%.17g", temperature);
        return {{"caption", caption},   {"strategy", to_string(strategy)}, {"keywords", keywords},
                {"provider", provider}, {"model", model},                  {"temperature", std::string(temp)},
                {"requested_count", requested_count}};
    }

    /// Canonical text form; equal keys have equal canonical strings.
    [[nodiscard]] std::string canonical() const { return to_json().dump(); }

    [[nodiscard]] std::string hash() const {
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical())));
        return buf;
    }
};

struct CacheEntry {
    std::string source_id;
    std::vector<std::string> texts;
    std::size_t dropped = 0;
    std::vector<std::string> warnings;
};

class ReformulationCache {
public:
    /// In-memory only.
    ReformulationCache() = default;

    explicit ReformulationCache(std::filesystem::path path) : path_(std::move(path)) { load(); }

    ReformulationCache(const ReformulationCache&) = delete;
    ReformulationCache& operator=(const ReformulationCache&) = delete;

    [[nodiscard]] std::optional<CacheEntry> lookup(const CacheKey& key) const {
        const std::string canon = key.canonical();
        std::shared_lock lock(mu_);
        auto it = entries_.find(canon);
        if (it == entries_.end()) {
            return std::nullopt;
        }
        return it->second;
    }

    /// Records and, when file-backed, appends and flushes one line.
    void store(const CacheKey& key, const CacheEntry& entry) {
        const std::string canon = key.canonical();
        std::unique_lock lock(mu_);
        if (path_) {
            nlohmann::json line = {{"hash", key.hash()},       {"key", key.to_json()},
                                   {"source_id", entry.source_id}, {"texts", entry.texts},
                                   {"dropped", entry.dropped}, {"warnings", entry.warnings}};
            std::ofstream out(*path_, std::ios::app | std::ios::binary);
            if (!out) {
                throw Error(ErrorKind::Io, "cannot append to cache '" + path_->string() + "'");
            }
            out << line.dump() << '\n';
            out.flush();
            if (!out) {
                throw Error(ErrorKind::Io, "write to cache '" + path_->string() + "' failed");
            }
        }
        entries_[canon] = entry;
    }

    [[nodiscard]] std::size_t size() const {
        std::shared_lock lock(mu_);
        return entries_.size();
    }

    /// Lines skipped at load because they did not parse.
    [[nodiscard]] std::size_t skipped_lines() const noexcept { return skipped_; }

    /// All entries in canonical-key order.
    [[nodiscard]] std::vector<std::pair<nlohmann::json, CacheEntry>> entries() const {
        std::shared_lock lock(mu_);
        std::vector<std::pair<nlohmann::json, CacheEntry>> out;
        for (const auto& [canon, e] : entries_) {
            out.emplace_back(nlohmann::json::parse(canon), e);
        }
        return out;
    }

private:
    void load() {
        if (!std::filesystem::exists(*path_)) {
            return;
        }
        std::ifstream in(*path_, std::ios::binary);
        if (!in) {
            throw Error(ErrorKind::Io, "cannot read cache '" + path_->string() + "'");
        }
        std::string line;
        bool ends_with_newline = true;
        while (std::getline(in, line)) {
            ends_with_newline = !in.eof();
            if (line.empty()) {
                continue;
            }
            try {
                const auto j = nlohmann::json::parse(line);
                CacheEntry e;
                e.source_id = j.value("source_id", std::string{});
                e.texts = j.at("texts").get<std::vector<std::string>>();
                e.dropped = j.value("dropped", std::size_t{0});
                e.warnings = j.value("warnings", std::vector<std::string>{});
                entries_[j.at("key").dump()] = std::move(e);
            } catch (const nlohmann::json::exception&) {
                ++skipped_;
            }
        }
        // Terminate a torn final line so the next append starts cleanly.
        if (!ends_with_newline) {
            std::ofstream out(*path_, std::ios::app | std::ios::binary);
            out << '\n';
        }
    }

    std::optional<std::filesystem::path> path_;
    mutable std::shared_mutex mu_;
    std::map<std::string, CacheEntry> entries_;
    std::size_t skipped_ = 0;
};

}  // namespace mvr
