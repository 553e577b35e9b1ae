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

/** \file keywords.hpp
 *  \brief Keyword selection by token/sentence embedding similarity.
 *
 * Each word is scored by the cosine between its token embedding and the
 * sentence embedding, centered by subtracting the mean score over the
 * caption. Words scoring at or above the threshold survive.
 */

#include <algorithm>
#include <cctype>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "mvr/core.hpp"

namespace mvr {

inline constexpr double kDefaultKeywordDelta = -0.03;

struct KeywordResult {
    std::string caption_id;
    std::vector<std::string> keywords;
    /// Centered score per input word, aligned with TokenizedCaption::words.
    std::vector<double> scores;
    double delta = kDefaultKeywordDelta;
};

inline std::string ascii_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

/// Function words dropped before thresholding.
inline const std::set<std::string>& default_stopwords() {
    static const std::set<std::string> words = {
        "a",    "an",   "the",  "is",    "are",  "was",  "were", "be",   "been", "being", "am",
        "of",   "in",   "on",   "at",    "to",   "for",  "with", "by",   "from", "into",  "onto",
        "over", "under", "up",  "down",  "off",  "out",  "and",  "or",   "but",  "as",    "it",
        "its",  "this", "that", "these", "those", "has", "have", "had",  "his",  "her",   "he",
        "she",  "they", "their", "them", "there", "which", "who", "while", "also", "very", "some",
        ".",    ",",    ";",    ":",     "!",    "?",    "'s",
    };
    return words;
}

inline KeywordResult extract_keywords(const TokenizedCaption& tc, double delta,
                                      const std::set<std::string>& stopwords = default_stopwords()) {
    tc.validate();
    const std::size_t n = tc.words.size();

    std::vector<double> raw(n);
    for (std::size_t i = 0; i < n; ++i) {
        raw[i] = cosine_similarity(tc.token_vectors[i], tc.sentence_vector);
    }
    double mean = 0.0;
    for (double r : raw) {
        mean += r;
    }
    mean /= static_cast<double>(n);

    KeywordResult result;
    result.caption_id = tc.caption.id;
    result.delta = delta;
    result.scores.resize(n);
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < n; ++i) {
        result.scores[i] = raw[i] - mean;
        const auto& word = tc.words[i];
        if (stopwords.contains(ascii_lower(word))) {
            continue;
        }
        if (result.scores[i] >= delta && seen.insert(word).second) {
            result.keywords.push_back(word);
        }
    }
    if (result.keywords.empty()) {
        throw Error(ErrorKind::EmptyKeywordSet, "no keyword survived for caption '" + tc.caption.id + "'");
    }
    return result;
}

}  // namespace mvr
