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

/** \file retrieve.hpp
 *  \brief Exact cosine gallery search.
 *
 * Gallery rows are stored unit-normalized in lexicographic id order, so
 * "ties broken by ascending gallery id" and "ties broken by row index" are
 * the same rule.
 */

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvr/core.hpp"
#include "mvr/parallel.hpp"
#include "mvr/store.hpp"

namespace mvr {

class GalleryIndex {
public:
    GalleryIndex() = default;

    [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
    [[nodiscard]] std::size_t size() const noexcept { return ids_.size(); }
    [[nodiscard]] bool empty() const noexcept { return ids_.empty(); }
    [[nodiscard]] const std::vector<std::string>& ids() const noexcept { return ids_; }
    [[nodiscard]] const std::vector<std::string>& person_ids() const noexcept { return person_ids_; }
    [[nodiscard]] std::span<const double> row(std::size_t r) const noexcept {
        return {matrix_.data() + r * dim_, dim_};
    }

    /// Rows are sorted by id and normalized here.
    static GalleryIndex from_vectors(std::vector<std::string> ids, std::vector<std::string> person_ids,
                                     const std::vector<EmbeddingVector>& vectors) {
        if (ids.size() != person_ids.size() || ids.size() != vectors.size()) {
            throw Error(ErrorKind::Data, "gallery ids, identities and vectors differ in length");
        }
        std::vector<std::size_t> order(ids.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });
        for (std::size_t i = 1; i < order.size(); ++i) {
            if (ids[order[i]] == ids[order[i - 1]]) {
                throw Error(ErrorKind::Data, "duplicate gallery id '" + ids[order[i]] + "'");
            }
        }
        GalleryIndex index;
        index.dim_ = vectors.empty() ? 0 : vectors.front().dim();
        index.matrix_.reserve(index.dim_ * vectors.size());
        for (std::size_t o : order) {
            if (vectors[o].dim() != index.dim_) {
                throw Error(ErrorKind::DimMismatch, "gallery vector '" + ids[o] + "' has a different dim");
            }
            const auto unit = as_unit(vectors[o]);
            index.matrix_.insert(index.matrix_.end(), unit.values().begin(), unit.values().end());
            index.ids_.push_back(std::move(ids[o]));
            index.person_ids_.push_back(std::move(person_ids[o]));
        }
        return index;
    }

private:
    std::size_t dim_ = 0;
    std::vector<std::string> ids_;
    std::vector<std::string> person_ids_;
    std::vector<double> matrix_;
};

inline GalleryIndex build_index(const EmbeddingStore& store, const std::map<std::string, std::string>& identities) {
    std::vector<std::string> ids;
    std::vector<std::string> pids;
    std::vector<EmbeddingVector> vecs;
    for (const auto& [id, v] : store.records()) {
        auto it = identities.find(id);
        if (it == identities.end()) {
            throw Error(ErrorKind::Data, "no identity label for gallery item '" + id + "'");
        }
        ids.push_back(id);
        pids.push_back(it->second);
        vecs.push_back(v);
    }
    return GalleryIndex::from_vectors(std::move(ids), std::move(pids), vecs);
}

/// Dense row-major queries x gallery matrix.
struct SimilarityMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    [[nodiscard]] double operator()(std::size_t r, std::size_t c) const noexcept { return data[r * cols + c]; }
    [[nodiscard]] std::span<const double> row(std::size_t r) const noexcept { return {data.data() + r * cols, cols}; }
};

struct ScanOptions {
    std::size_t query_block = 32;
    std::size_t gallery_block = 256;
    std::size_t threads = default_parallelism();
};

/// Each entry is one full-length dot product in fixed order, so the result
/// is bitwise identical for every block size and thread count.
inline SimilarityMatrix similarity_matrix(const GalleryIndex& index, std::span<const EmbeddingVector> queries,
                                          const ScanOptions& options = {}) {
    SimilarityMatrix m;
    m.rows = queries.size();
    m.cols = index.size();
    m.data.assign(m.rows * m.cols, 0.0);
    if (m.rows == 0 || m.cols == 0) {
        return m;
    }
    std::vector<EmbeddingVector> units;
    units.reserve(queries.size());
    for (const auto& q : queries) {
        if (q.dim() != index.dim()) {
            throw Error(ErrorKind::DimMismatch, "query dim " + std::to_string(q.dim()) + " vs gallery dim " +
                                                    std::to_string(index.dim()));
        }
        units.push_back(as_unit(q));
    }
    const std::size_t qb = std::max<std::size_t>(1, options.query_block);
    const std::size_t gb = std::max<std::size_t>(1, options.gallery_block);
    const std::size_t blocks = (m.rows + qb - 1) / qb;
    for_each_bounded(blocks, options.threads, [&](std::size_t b) {
        const std::size_t q0 = b * qb;
        const std::size_t q1 = std::min(m.rows, q0 + qb);
        for (std::size_t g0 = 0; g0 < m.cols; g0 += gb) {
            const std::size_t g1 = std::min(m.cols, g0 + gb);
            for (std::size_t q = q0; q < q1; ++q) {
                const auto qv = units[q].values();
                double* out = m.data.data() + q * m.cols;
                for (std::size_t g = g0; g < g1; ++g) {
                    out[g] = std::clamp(dot(qv, index.row(g)), -1.0, 1.0);
                }
            }
        }
    });
    return m;
}

/// Column order by descending score; ties go to the smaller id (or column
/// index when no ids are given).
inline std::vector<std::size_t> rank_columns(std::span<const double> scores,
                                             const std::vector<std::string>* ids = nullptr) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) {
            return scores[a] > scores[b];
        }
        return ids != nullptr ? (*ids)[a] < (*ids)[b] : a < b;
    });
    return order;
}

struct RankedResult {
    std::string query_id;
    std::vector<std::string> ids;
    std::vector<double> scores;
};

inline RankedResult search(const GalleryIndex& index, const EmbeddingVector& query, std::int64_t k,
                           std::string query_id = {}) {
    if (k <= 0) {
        throw Error(ErrorKind::Range, "k must be positive");
    }
    if (query.dim() != index.dim() && !index.empty()) {
        throw Error(ErrorKind::DimMismatch, "query dim does not match index");
    }
    RankedResult r;
    r.query_id = std::move(query_id);
    if (index.empty()) {
        return r;
    }
    const auto unit = as_unit(query);
    std::vector<double> scores(index.size());
    for (std::size_t g = 0; g < index.size(); ++g) {
        scores[g] = std::clamp(dot(unit.values(), index.row(g)), -1.0, 1.0);
    }
    const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(k), index.size());
    std::vector<std::size_t> order(index.size());
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                      [&](std::size_t a, std::size_t b) { return scores[a] != scores[b] ? scores[a] > scores[b] : a < b; });
    for (std::size_t i = 0; i < keep; ++i) {
        r.ids.push_back(index.ids()[order[i]]);
        r.scores.push_back(scores[order[i]]);
    }
    return r;
}

/// Line-delimited {"query_id": ..., "results": [[gallery_id, score], ...]}.
inline void write_rankings(const std::vector<RankedResult>& results, const std::filesystem::path& path) {
    std::string out;
    for (const auto& r : results) {
        nlohmann::json items = nlohmann::json::array();
        for (std::size_t i = 0; i < r.ids.size(); ++i) {
            items.push_back({r.ids[i], r.scores[i]});
        }
        out += nlohmann::json{{"query_id", r.query_id}, {"results", items}}.dump();
        out += '\n';
    }
    detail::write_file_bytes(path, out);
}

}  // namespace mvr
