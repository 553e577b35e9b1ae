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

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mvr {

enum class ErrorKind {
    EmptyViewSet,
    DimMismatch,
    ZeroVector,
    Io,
    Format,
    Data,
    Service,
    EmptyKeywordSet,
    Config,
    Parse,
    Provider,
    Range,
    CacheMiss,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::EmptyViewSet: return "EmptyViewSet";
        case ErrorKind::DimMismatch: return "DimMismatch";
        case ErrorKind::ZeroVector: return "ZeroVector";
        case ErrorKind::Io: return "IoError";
        case ErrorKind::Format: return "FormatError";
        case ErrorKind::Data: return "DataError";
        case ErrorKind::Service: return "ServiceError";
        case ErrorKind::EmptyKeywordSet: return "EmptyKeywordSet";
        case ErrorKind::Config: return "ConfigError";
        case ErrorKind::Parse: return "ParseError";
        case ErrorKind::Provider: return "ProviderError";
        case ErrorKind::Range: return "RangeError";
        case ErrorKind::CacheMiss: return "CacheMissError";
    }
    return "Unknown";
}

/// Base exception for every failure raised by the engine. The kind is the
/// stable, machine-checkable part; the message is for humans.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Transport or protocol failure against a remote service.
class ServiceError : public Error {
public:
    ServiceError(const std::string& message, int attempts, int http_status, bool retryable)
        : Error(ErrorKind::Service, message),
          attempts_(attempts),
          http_status_(http_status),
          retryable_(retryable) {}

    [[nodiscard]] int attempts() const noexcept { return attempts_; }
    /// 0 when no HTTP response was received.
    [[nodiscard]] int http_status() const noexcept { return http_status_; }
    [[nodiscard]] bool retryable() const noexcept { return retryable_; }

private:
    int attempts_;
    int http_status_;
    bool retryable_;
};

class CacheMissError : public Error {
public:
    explicit CacheMissError(std::vector<std::string> missing)
        : Error(ErrorKind::CacheMiss, describe(missing)), missing_(std::move(missing)) {}

    [[nodiscard]] const std::vector<std::string>& missing_ids() const noexcept { return missing_; }

private:
    static std::string describe(const std::vector<std::string>& ids) {
        std::string out = "missing entries for " + std::to_string(ids.size()) + " id(s):";
        std::size_t shown = 0;
        for (const auto& id : ids) {
            if (shown++ == 20) {
                out += " ...";
                break;
            }
            out += ' ';
            out += id;
        }
        return out;
    }

    std::vector<std::string> missing_;
};

}  // namespace mvr
