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

/** \file store.hpp
 *  \brief MVRE binary embedding stores and token-bundle sidecars.
 *
 * MVRE layout, all integers little-endian:
 *
 *     offset  size  field
 *     0       4     magic "MVRE" (0x4D 0x56 0x52 0x45)
 *     4       2     version (u16) = 1
 *     6       2     flags (u16), bit0 = every vector unit-norm
 *     8       4     dim (u32)
 *     12      8     count (u64)
 *     20      ...   count records: u16 id length, id bytes, dim x f32
 *
 * Records are written in lexicographic id order so two writes of the same
 * store are byte-identical.
 */

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvr/core.hpp"

namespace mvr {

inline constexpr std::array<std::uint8_t, 4> kMvreMagic{0x4D, 0x56, 0x52, 0x45};
inline constexpr std::uint16_t kMvreVersion = 1;
inline constexpr std::size_t kMvreHeaderSize = 20;

struct StoreManifest {
    std::uint32_t dim = 0;
    std::uint64_t count = 0;
    bool normalized = false;
    std::string source_model;
};

class EmbeddingStore {
public:
    EmbeddingStore() = default;
    explicit EmbeddingStore(std::uint32_t dim, bool normalized = false, std::string source_model = {})
        : dim_(dim), normalized_(normalized), source_model_(std::move(source_model)) {
        if (dim == 0) {
            throw Error(ErrorKind::Data, "store dim must be positive");
        }
    }

    /// Values are rounded to 32-bit floats so the store equals its on-disk form.
    void insert(std::string id, const EmbeddingVector& v) {
        if (id.empty()) {
            throw Error(ErrorKind::Data, "store ids must be nonempty");
        }
        if (id.size() > std::numeric_limits<std::uint16_t>::max()) {
            throw Error(ErrorKind::Data, "store id longer than 65535 bytes");
        }
        if (v.dim() != dim_) {
            throw Error(ErrorKind::DimMismatch, "record '" + id + "' has dim " + std::to_string(v.dim()) +
                                                    ", store dim is " + std::to_string(dim_));
        }
        std::vector<float> narrowed(v.dim());
        for (std::size_t i = 0; i < narrowed.size(); ++i) {
            narrowed[i] = static_cast<float>(v[i]);
            if (!std::isfinite(narrowed[i])) {
                throw Error(ErrorKind::Data, "record '" + id + "' overflows 32-bit float");
            }
        }
        auto stored = EmbeddingVector::from_floats(narrowed);
        if (normalized_ && std::abs(stored.norm() - 1.0) > kUnitNormTolerance) {
            throw Error(ErrorKind::Data, "record '" + id + "' is not unit-norm in a normalized store");
        }
        if (!records_.emplace(id, EmbeddingVector(std::vector<double>(stored.values().begin(), stored.values().end()),
                                                  normalized_))
                 .second) {
            throw Error(ErrorKind::Data, "duplicate store id '" + id + "'");
        }
    }

    [[nodiscard]] std::uint32_t dim() const noexcept { return dim_; }
    [[nodiscard]] bool normalized() const noexcept { return normalized_; }
    [[nodiscard]] const std::string& source_model() const noexcept { return source_model_; }
    [[nodiscard]] std::size_t size() const noexcept { return records_.size(); }
    [[nodiscard]] bool empty() const noexcept { return records_.empty(); }
    [[nodiscard]] bool contains(const std::string& id) const { return records_.contains(id); }

    [[nodiscard]] const EmbeddingVector& at(const std::string& id) const {
        auto it = records_.find(id);
        if (it == records_.end()) {
            throw Error(ErrorKind::Data, "no record '" + id + "' in store");
        }
        return it->second;
    }

    [[nodiscard]] const EmbeddingVector* find(const std::string& id) const {
        auto it = records_.find(id);
        return it == records_.end() ? nullptr : &it->second;
    }

    /// Records in lexicographic id order.
    [[nodiscard]] const std::map<std::string, EmbeddingVector>& records() const noexcept { return records_; }

    [[nodiscard]] StoreManifest manifest() const {
        return {dim_, static_cast<std::uint64_t>(records_.size()), normalized_, source_model_};
    }

    void set_source_model(std::string name) { source_model_ = std::move(name); }

    friend bool operator==(const EmbeddingStore& a, const EmbeddingStore& b) {
        return a.dim_ == b.dim_ && a.normalized_ == b.normalized_ && a.records_ == b.records_;
    }

private:
    std::uint32_t dim_ = 0;
    bool normalized_ = false;
    std::string source_model_;
    std::map<std::string, EmbeddingVector> records_;
};

namespace detail {

template <typename T>
void put_le(std::string& out, T value) {
    static_assert(std::is_unsigned_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
    }
}

template <typename T>
T get_le(const std::uint8_t* p) {
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        value |= static_cast<T>(p[i]) << (8 * i);
    }
    return value;
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::Io, "cannot open '" + path.string() + "'");
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw Error(ErrorKind::Io, "short write to '" + path.string() + "'");
    }
}

}  // namespace detail

inline std::string encode_store(const EmbeddingStore& store) {
    std::string out;
    out.reserve(kMvreHeaderSize + store.size() * (2 + 16 + 4 * store.dim()));
    out.append(reinterpret_cast<const char*>(kMvreMagic.data()), kMvreMagic.size());
    detail::put_le<std::uint16_t>(out, kMvreVersion);
    detail::put_le<std::uint16_t>(out, store.normalized() ? 1U : 0U);
    detail::put_le<std::uint32_t>(out, store.dim());
    detail::put_le<std::uint64_t>(out, store.size());
    for (const auto& [id, vec] : store.records()) {
        detail::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(id.size()));
        out.append(id);
        for (double x : vec.values()) {
            detail::put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
        }
    }
    return out;
}

inline EmbeddingStore decode_store(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kMvreHeaderSize) {
        throw Error(ErrorKind::Format, "file shorter than the MVRE header");
    }
    if (!std::equal(kMvreMagic.begin(), kMvreMagic.end(), bytes.begin())) {
        throw Error(ErrorKind::Format, "bad magic bytes");
    }
    const auto version = detail::get_le<std::uint16_t>(bytes.data() + 4);
    if (version != kMvreVersion) {
        throw Error(ErrorKind::Format, "unsupported MVRE version " + std::to_string(version));
    }
    const auto flags = detail::get_le<std::uint16_t>(bytes.data() + 6);
    const auto dim = detail::get_le<std::uint32_t>(bytes.data() + 8);
    const auto count = detail::get_le<std::uint64_t>(bytes.data() + 12);
    if (dim == 0) {
        throw Error(ErrorKind::Format, "header declares dim 0");
    }
    if ((flags & ~std::uint16_t{1}) != 0) {
        throw Error(ErrorKind::Format, "unknown flag bits set");
    }

    EmbeddingStore store(dim, (flags & 1U) != 0);
    std::size_t pos = kMvreHeaderSize;
    const std::size_t payload = std::size_t{4} * dim;
    std::vector<double> values(dim);
    for (std::uint64_t r = 0; r < count; ++r) {
        if (bytes.size() - pos < 2) {
            throw Error(ErrorKind::Format, "truncated at record " + std::to_string(r));
        }
        const auto id_len = detail::get_le<std::uint16_t>(bytes.data() + pos);
        pos += 2;
        if (bytes.size() - pos < id_len + payload) {
            throw Error(ErrorKind::Format, "truncated at record " + std::to_string(r));
        }
        std::string id(reinterpret_cast<const char*>(bytes.data() + pos), id_len);
        pos += id_len;
        for (std::uint32_t i = 0; i < dim; ++i) {
            const float f = std::bit_cast<float>(detail::get_le<std::uint32_t>(bytes.data() + pos));
            pos += 4;
            if (!std::isfinite(f)) {
                throw Error(ErrorKind::Data, "non-finite value in record '" + id + "'");
            }
            values[i] = f;
        }
        if (store.contains(id)) {
            throw Error(ErrorKind::Data, "duplicate id '" + id + "'");
        }
        store.insert(std::move(id), EmbeddingVector(values));
    }
    if (pos != bytes.size()) {
        throw Error(ErrorKind::Format, "trailing bytes after " + std::to_string(count) + " records");
    }
    return store;
}

inline std::filesystem::path manifest_path(const std::filesystem::path& store_path) {
    auto p = store_path;
    p += ".manifest.json";
    return p;
}

inline void write_store(const EmbeddingStore& store, const std::filesystem::path& path) {
    detail::write_file_bytes(path, encode_store(store));
    const auto m = store.manifest();
    const nlohmann::json manifest = {
        {"dim", m.dim}, {"count", m.count}, {"normalized", m.normalized}, {"source_model", m.source_model}};
    detail::write_file_bytes(manifest_path(path), manifest.dump(2) + "\n");
}

inline EmbeddingStore read_store(const std::filesystem::path& path) {
    const std::string raw = detail::read_file_bytes(path);
    auto store = decode_store({reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size()});
    if (const auto mp = manifest_path(path); std::filesystem::exists(mp)) {
        try {
            const auto manifest = nlohmann::json::parse(detail::read_file_bytes(mp));
            if (manifest.at("dim").get<std::uint32_t>() != store.dim() ||
                manifest.at("count").get<std::uint64_t>() != store.size()) {
                throw Error(ErrorKind::Data, "manifest disagrees with store '" + path.string() + "'");
            }
            store.set_source_model(manifest.value("source_model", std::string{}));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::Format, "bad manifest for '" + path.string() + "': " + e.what());
        }
    }
    return store;
}

/// Per-caption word list with ids into a token store ("<caption_id>#<i>").
struct TokenBundle {
    std::string caption_id;
    std::vector<std::string> words;
    std::vector<std::string> token_store_ids;
};

inline std::string token_store_id(const std::string& caption_id, std::size_t index) {
    return caption_id + "#" + std::to_string(index);
}

inline void write_token_bundles(const std::vector<TokenBundle>& bundles, const std::filesystem::path& path) {
    std::string out;
    for (const auto& b : bundles) {
        if (b.words.size() != b.token_store_ids.size()) {
            throw Error(ErrorKind::Data, "bundle '" + b.caption_id + "' words/ids length mismatch");
        }
        nlohmann::json j = {{"caption_id", b.caption_id}, {"words", b.words}, {"token_store_ids", b.token_store_ids}};
        out += j.dump();
        out += '\n';
    }
    detail::write_file_bytes(path, out);
}

inline std::vector<TokenBundle> read_token_bundles(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::Io, "cannot open '" + path.string() + "'");
    }
    std::vector<TokenBundle> bundles;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            const auto j = nlohmann::json::parse(line);
            TokenBundle b{j.at("caption_id").get<std::string>(), j.at("words").get<std::vector<std::string>>(),
                          j.at("token_store_ids").get<std::vector<std::string>>()};
            if (b.words.size() != b.token_store_ids.size()) {
                throw Error(ErrorKind::Data, "bundle '" + b.caption_id + "' words/ids length mismatch");
            }
            bundles.push_back(std::move(b));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::Format, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return bundles;
}

/// Joins a bundle with its token and sentence vectors.
inline TokenizedCaption assemble_tokenized(const CaptionRecord& caption, const TokenBundle& bundle,
                                           const EmbeddingStore& token_store,
                                           const EmbeddingStore& sentence_store) {
    TokenizedCaption tc;
    tc.caption = caption;
    tc.words = bundle.words;
    tc.token_vectors.reserve(bundle.token_store_ids.size());
    for (const auto& tid : bundle.token_store_ids) {
        tc.token_vectors.push_back(token_store.at(tid));
    }
    tc.sentence_vector = sentence_store.at(bundle.caption_id);
    tc.validate();
    return tc;
}

inline std::string_view to_string(CaptionKind k) noexcept {
    return k == CaptionKind::query ? "query" : "gallery_caption";
}

/// Caption files are line-delimited objects {id, person_id, text, kind}.
inline std::vector<CaptionRecord> read_captions(const std::filesystem::path& path,
                                                CaptionKind default_kind = CaptionKind::query) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::Io, "cannot open '" + path.string() + "'");
    }
    std::vector<CaptionRecord> out;
    std::set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        CaptionRecord rec;
        try {
            const auto j = nlohmann::json::parse(line);
            rec.id = j.at("id").get<std::string>();
            rec.person_id = j.value("person_id", std::string{});
            rec.text = j.value("text", std::string{});
            rec.kind = default_kind;
            if (j.contains("kind")) {
                rec.kind = j.at("kind").get<std::string>() == "gallery_caption" ? CaptionKind::gallery_caption
                                                                                 : CaptionKind::query;
            }
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::Format, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (rec.id.empty() || rec.text.empty()) {
            throw Error(ErrorKind::Data, path.string() + ":" + std::to_string(lineno) + ": empty id or text");
        }
        if (!seen.insert(rec.id).second) {
            throw Error(ErrorKind::Data, "duplicate caption id '" + rec.id + "' in " + path.string());
        }
        out.push_back(std::move(rec));
    }
    return out;
}

inline void write_captions(const std::vector<CaptionRecord>& captions, const std::filesystem::path& path) {
    std::string out;
    for (const auto& c : captions) {
        nlohmann::json j = {{"id", c.id}, {"person_id", c.person_id}, {"text", c.text}, {"kind", to_string(c.kind)}};
        out += j.dump();
        out += '\n';
    }
    detail::write_file_bytes(path, out);
}

}  // namespace mvr
