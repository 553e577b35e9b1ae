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

/** \file core.hpp
 *  \brief Shared domain types and vector arithmetic.
 *
 * Vectors are held as doubles in memory. Stores serialize them as 32-bit
 * floats, and every reduction (dot products, means) accumulates in 64 bits.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mvr/error.hpp"

namespace mvr {

inline constexpr double kUnitNormTolerance = 1e-5;

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

inline double l2_norm(std::span<const double> v) noexcept { return std::sqrt(dot(v, v)); }

/// Fixed-dimension real feature. Immutable after construction.
class EmbeddingVector {
public:
    EmbeddingVector() = default;

    explicit EmbeddingVector(std::vector<double> values, bool normalized = false)
        : values_(std::move(values)), normalized_(normalized) {
        if (values_.empty()) {
            throw Error(ErrorKind::Data, "embedding vector must have positive dimension");
        }
        for (double x : values_) {
            if (!std::isfinite(x)) {
                throw Error(ErrorKind::Data, "embedding vector contains a non-finite value");
            }
        }
        if (normalized_ && std::abs(l2_norm(values_) - 1.0) > kUnitNormTolerance) {
            throw Error(ErrorKind::Data, "vector flagged normalized but its norm is not 1");
        }
    }

    EmbeddingVector(std::initializer_list<double> values) : EmbeddingVector(std::vector<double>(values)) {}

    static EmbeddingVector from_floats(std::span<const float> values, bool normalized = false) {
        return EmbeddingVector(std::vector<double>(values.begin(), values.end()), normalized);
    }

    [[nodiscard]] std::size_t dim() const noexcept { return values_.size(); }
    [[nodiscard]] bool empty() const noexcept { return values_.empty(); }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    [[nodiscard]] bool normalized() const noexcept { return normalized_; }
    [[nodiscard]] double operator[](std::size_t i) const noexcept { return values_[i]; }
    [[nodiscard]] double norm() const noexcept { return l2_norm(values_); }

    friend bool operator==(const EmbeddingVector& a, const EmbeddingVector& b) noexcept {
        return a.values_ == b.values_;
    }

private:
    std::vector<double> values_;
    bool normalized_ = false;
};

enum class CaptionKind { query, gallery_caption };

struct CaptionRecord {
    std::string id;
    std::string person_id;
    std::string text;
    CaptionKind kind = CaptionKind::query;
};

/// A caption split into the exporter's words, each paired with its token
/// embedding, plus the sentence-level embedding.
struct TokenizedCaption {
    CaptionRecord caption;
    std::vector<std::string> words;
    std::vector<EmbeddingVector> token_vectors;
    EmbeddingVector sentence_vector;

    void validate() const {
        if (words.empty() || words.size() != token_vectors.size()) {
            throw Error(ErrorKind::Data, "caption '" + caption.id + "' needs one token vector per word");
        }
        for (const auto& t : token_vectors) {
            if (t.dim() != sentence_vector.dim()) {
                throw Error(ErrorKind::DimMismatch, "token vector dim differs from sentence vector dim in '" +
                                                        caption.id + "'");
            }
        }
    }
};

enum class Strategy { key_consistent, diverse };

inline constexpr std::string_view to_string(Strategy s) noexcept {
    return s == Strategy::key_consistent ? "key_consistent" : "diverse";
}

/// Short tag used inside view-store ids ("<source>#key#3").
inline constexpr std::string_view short_tag(Strategy s) noexcept {
    return s == Strategy::key_consistent ? "key" : "diverse";
}

inline Strategy parse_strategy(std::string_view text) {
    if (text == "key_consistent" || text == "key" || text == "a" || text == "A") {
        return Strategy::key_consistent;
    }
    if (text == "diverse" || text == "b" || text == "B") {
        return Strategy::diverse;
    }
    throw Error(ErrorKind::Config, "unknown strategy '" + std::string(text) + "'");
}

struct ReformulationSet {
    std::string source_id;
    Strategy strategy = Strategy::diverse;
    std::string provider;
    double temperature = 0.01;
    std::vector<std::string> texts;
};

struct CompensationConfig {
    double alpha = 0.75;
    double beta = 0.3;
    std::size_t max_views = 30;
    bool renormalize_output = true;

    void validate() const {
        if (!std::isfinite(alpha) || alpha < 0.0 || !std::isfinite(beta) || beta < 0.0) {
            throw Error(ErrorKind::Config, "alpha and beta must be finite and non-negative");
        }
        if (max_views < 1) {
            throw Error(ErrorKind::Config, "max_views must be at least 1");
        }
    }
};

/// Element-wise arithmetic mean with 64-bit accumulation. A list of
/// identical vectors pools to that vector exactly.
inline EmbeddingVector mean_pool(std::span<const EmbeddingVector> vectors) {
    if (vectors.empty()) {
        throw Error(ErrorKind::EmptyViewSet, "mean_pool over an empty view set");
    }
    const std::size_t dim = vectors.front().dim();
    std::vector<double> sum(dim, 0.0);
    bool all_equal = true;
    for (const auto& v : vectors) {
        if (v.dim() != dim) {
            throw Error(ErrorKind::DimMismatch,
                        "mean_pool expected dim " + std::to_string(dim) + ", got " + std::to_string(v.dim()));
        }
        const auto vals = v.values();
        const auto first = vectors.front().values();
        for (std::size_t i = 0; i < dim; ++i) {
            sum[i] += vals[i];
            all_equal = all_equal && vals[i] == first[i];
        }
    }
    if (all_equal) {
        const auto first = vectors.front().values();
        return EmbeddingVector(std::vector<double>(first.begin(), first.end()));
    }
    const auto n = static_cast<double>(vectors.size());
    for (double& x : sum) {
        x /= n;
    }
    return EmbeddingVector(std::move(sum));
}

inline double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim()) {
        throw Error(ErrorKind::DimMismatch, "cosine_similarity on dims " + std::to_string(a.dim()) + " and " +
                                                std::to_string(b.dim()));
    }
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) {
        throw Error(ErrorKind::ZeroVector, "cosine_similarity with a zero-norm vector");
    }
    return std::clamp(dot(a.values(), b.values()) / (na * nb), -1.0, 1.0);
}

inline EmbeddingVector l2_normalize(const EmbeddingVector& v) {
    const double n = v.norm();
    if (n == 0.0) {
        throw Error(ErrorKind::ZeroVector, "cannot normalize a zero-norm vector");
    }
    std::vector<double> out(v.values().begin(), v.values().end());
    for (double& x : out) {
        x /= n;
    }
    return EmbeddingVector(std::move(out), true);
}

/// The vector itself when it already carries an exact unit norm, otherwise
/// its normalization. Keeps renormalized features bit-stable through search.
inline EmbeddingVector as_unit(const EmbeddingVector& v) {
    if (v.normalized() && std::abs(v.norm() - 1.0) <= 1e-12) {
        return v;
    }
    return l2_normalize(v);
}

inline double l2_distance(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim()) {
        throw Error(ErrorKind::DimMismatch, "l2_distance on mismatched dims");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

}  // namespace mvr
