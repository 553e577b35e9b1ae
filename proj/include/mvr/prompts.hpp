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

/** \file prompts.hpp
 *  \brief Reformulation prompt templates, response parsing and keyword checks.
 */

#include <cctype>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvr/core.hpp"
#include "mvr/keywords.hpp"
#include "mvr/store.hpp"

namespace mvr {

inline constexpr std::size_t kDefaultRequestedCount = 15;

/// System text may use {count}; the user pattern uses {caption} and, for
/// key-consistent templates, {keywords}.
struct PromptTemplate {
    Strategy strategy = Strategy::diverse;
    std::string system_text;
    std::string user_text_pattern;
    std::size_t requested_count = kDefaultRequestedCount;

    void validate() const {
        if (user_text_pattern.find("{caption}") == std::string::npos) {
            throw Error(ErrorKind::Config, "template user pattern lacks {caption}");
        }
        if (strategy == Strategy::key_consistent && user_text_pattern.find("{keywords}") == std::string::npos) {
            throw Error(ErrorKind::Config, "key-consistent template lacks {keywords}");
        }
        if (requested_count == 0) {
            throw Error(ErrorKind::Config, "requested_count must be positive");
        }
    }
};

inline PromptTemplate default_key_template() {
    return {Strategy::key_consistent,
            "Instructions:\n"
            "  Suppose you now have a picture of a pedestrian, I will give you a caption and its key words list, "
            "your task is to rewrite the caption.\n"
            "  - Contains every key word must be used, but can change order and replace other words in a similar "
            "meaning.\n"
            "  - Give me {count} different captions and return them in a list. Give me the list without any "
            "statement else.",
            "Caption: {caption}\nKeywords: {keywords}", kDefaultRequestedCount};
}

inline PromptTemplate default_diverse_template() {
    return {Strategy::diverse,
            "Instructions:\n"
            "  Suppose you now have a picture of a pedestrian, I will give you a caption, your task is to rewrite "
            "the caption.\n"
            "  - The rewrite caption must contain the content mentioned in the original caption.\n"
            "  - You may use your imagination, but make sure that what you rewrite is not beyound real-world "
            "logic.\n"
            "  - Give me {count} different captions and return them in a list. Give me the list without any "
            "statement else.",
            "Caption: {caption}", kDefaultRequestedCount};
}

struct PromptTemplates {
    PromptTemplate key = default_key_template();
    PromptTemplate diverse = default_diverse_template();

    [[nodiscard]] const PromptTemplate& for_strategy(Strategy s) const {
        return s == Strategy::key_consistent ? key : diverse;
    }

    void set_requested_count(std::size_t n) {
        key.requested_count = n;
        diverse.requested_count = n;
    }
};

/// Overrides built-in templates from a JSON file shaped like
/// {"key_consistent": {"system": ..., "user": ..., "count": 15}, "diverse": {...}}.
inline PromptTemplates load_templates(const std::filesystem::path& path) {
    PromptTemplates t;
    try {
        const auto j = nlohmann::json::parse(detail::read_file_bytes(path));
        auto apply = [&](const char* name, PromptTemplate& tpl) {
            if (!j.contains(name)) {
                return;
            }
            const auto& o = j.at(name);
            tpl.system_text = o.value("system", tpl.system_text);
            tpl.user_text_pattern = o.value("user", tpl.user_text_pattern);
            tpl.requested_count = o.value("count", tpl.requested_count);
            tpl.validate();
        };
        apply("key_consistent", t.key);
        apply("diverse", t.diverse);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Config, "bad template file '" + path.string() + "': " + e.what());
    }
    return t;
}

struct RenderedPrompt {
    std::string system;
    std::string user;
};

namespace detail {

inline void replace_all(std::string& s, std::string_view from, std::string_view to) {
    for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
        s.replace(pos, from.size(), to);
    }
}

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

}  // namespace detail

/// Renders as 'w1', 'w2', ... 'wn'.
inline std::string render_keyword_list(const std::vector<std::string>& keywords) {
    std::string out;
    for (std::size_t i = 0; i < keywords.size(); ++i) {
        if (i > 0) {
            out += ", ";
        }
        out += '\'';
        out += keywords[i];
        out += '\'';
    }
    out += '.';
    return out;
}

inline RenderedPrompt render_prompt(const PromptTemplate& tpl, std::string_view caption,
                                    const std::optional<std::vector<std::string>>& keywords) {
    tpl.validate();
    if (detail::trim(caption).empty()) {
        throw Error(ErrorKind::Config, "cannot render a prompt for an empty caption");
    }
    const bool wants_keywords = tpl.strategy == Strategy::key_consistent;
    if (wants_keywords && (!keywords || keywords->empty())) {
        throw Error(ErrorKind::Config, "key-consistent prompt requires a nonempty keyword list");
    }
    if (!wants_keywords && keywords) {
        throw Error(ErrorKind::Config, "diverse prompt does not take keywords");
    }

    RenderedPrompt out{tpl.system_text, tpl.user_text_pattern};
    detail::replace_all(out.system, "{count}", std::to_string(tpl.requested_count));
    // Keywords first: the caption text itself may contain a literal "{keywords}".
    if (wants_keywords) {
        detail::replace_all(out.user, "{keywords}", render_keyword_list(*keywords));
    }
    detail::replace_all(out.user, "{caption}", caption);
    return out;
}

struct ParsedReformulations {
    std::vector<std::string> texts;
    std::vector<std::string> warnings;
};

namespace detail {

inline std::string strip_quotes(std::string_view s) {
    s = trim(s);
    if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) {
        s = trim(s.substr(1, s.size() - 2));
    }
    return std::string(s);
}

/// Splits ["a", 'b', ...] written with either quote style. Returns nullopt
/// when the body is not a plain list of quoted literals.
inline std::optional<std::vector<std::string>> split_quoted_array(std::string_view body) {
    std::vector<std::string> items;
    std::size_t i = 0;
    auto skip_ws = [&] {
        while (i < body.size() && std::isspace(static_cast<unsigned char>(body[i]))) {
            ++i;
        }
    };
    skip_ws();
    while (i < body.size()) {
        const char q = body[i];
        if (q != '"' && q != '\'') {
            return std::nullopt;
        }
        std::string item;
        ++i;
        bool closed = false;
        while (i < body.size()) {
            const char c = body[i++];
            if (c == '\\' && i < body.size()) {
                item += body[i++];
            } else if (c == q) {
                // An apostrophe followed by a letter is part of the text (e.g. man's).
                if (q == '\'' && i < body.size() && std::isalpha(static_cast<unsigned char>(body[i]))) {
                    item += c;
                    continue;
                }
                closed = true;
                break;
            } else {
                item += c;
            }
        }
        if (!closed) {
            return std::nullopt;
        }
        items.push_back(std::move(item));
        skip_ws();
        if (i < body.size()) {
            if (body[i] != ',') {
                return std::nullopt;
            }
            ++i;
            skip_ws();
        }
    }
    return items;
}

/// Length of a leading "-", "*", "•", "1.", "1)", "(1)" marker, or 0.
inline std::size_t list_marker_length(std::string_view line) {
    if (line.empty()) {
        return 0;
    }
    if (line.front() == '-' || line.front() == '*') {
        return 1;
    }
    if (line.starts_with("•")) {
        return std::string_view("•").size();
    }
    std::size_t i = 0;
    const bool paren = line.front() == '(';
    if (paren) {
        ++i;
    }
    const std::size_t digits_start = i;
    while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) {
        ++i;
    }
    if (i == digits_start || i >= line.size()) {
        return 0;
    }
    if (paren) {
        return line[i] == ')' ? i + 1 : 0;
    }
    if (line[i] == '.' || line[i] == ')' || line[i] == ':') {
        return i + 1;
    }
    return 0;
}

}  // namespace detail

/// Accepts a JSON or quoted-literal array, dash-bulleted lines, or numbered
/// lines. A count other than `expected` is a warning, not an error.
inline ParsedReformulations parse_reformulations(std::string_view raw, std::size_t expected) {
    ParsedReformulations out;
    std::string_view text = detail::trim(raw);

    // Drop a surrounding markdown fence.
    if (text.starts_with("```")) {
        const auto nl = text.find('\n');
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (const auto end = text.rfind("```"); end != std::string_view::npos) {
            text = text.substr(0, end);
        }
        text = detail::trim(text);
    }

    bool done = false;
    if (text.size() >= 2 && text.front() == '[' && text.back() == ']') {
        try {
            const auto j = nlohmann::json::parse(text);
            if (j.is_array() && std::all_of(j.begin(), j.end(), [](const auto& e) { return e.is_string(); })) {
                for (const auto& e : j) {
                    auto s = std::string(detail::trim(e.template get<std::string>()));
                    if (!s.empty()) {
                        out.texts.push_back(std::move(s));
                    }
                }
                done = true;
            }
        } catch (const nlohmann::json::exception&) {
        }
        if (!done) {
            if (auto items = detail::split_quoted_array(text.substr(1, text.size() - 2))) {
                for (auto& s : *items) {
                    auto t = std::string(detail::trim(s));
                    if (!t.empty()) {
                        out.texts.push_back(std::move(t));
                    }
                }
                done = true;
            } else {
                text = detail::trim(text.substr(1, text.size() - 2));
            }
        }
    }

    if (!done) {
        std::vector<std::string> marked;
        std::vector<std::string> unmarked;
        std::size_t start = 0;
        while (start <= text.size()) {
            auto end = text.find('\n', start);
            if (end == std::string_view::npos) {
                end = text.size();
            }
            std::string_view line = detail::trim(text.substr(start, end - start));
            start = end + 1;
            if (line.empty() || line == "[" || line == "]" || line == "..." || line.starts_with("```")) {
                continue;
            }
            const std::size_t marker = detail::list_marker_length(line);
            std::string_view body = detail::trim(line.substr(marker));
            if (body.ends_with(',')) {
                body = detail::trim(body.substr(0, body.size() - 1));
            }
            auto item = detail::strip_quotes(body);
            if (item.empty()) {
                continue;
            }
            (marker > 0 ? marked : unmarked).push_back(std::move(item));
        }
        // With any list markers present, unmarked lines are preamble or commentary.
        out.texts = marked.empty() ? std::move(unmarked) : std::move(marked);
    }

    if (out.texts.empty()) {
        throw Error(ErrorKind::Parse, "no reformulation could be parsed from the response");
    }
    if (out.texts.size() != expected) {
        out.warnings.push_back("expected " + std::to_string(expected) + " reformulations, parsed " +
                               std::to_string(out.texts.size()));
    }
    return out;
}

/// True iff every keyword occurs as a case-insensitive whole word (or whole
/// phrase, for multi-word keywords) in the reformulation.
inline bool validate_key_consistency(std::string_view reformulation, const std::vector<std::string>& keywords) {
    const std::string hay = ascii_lower(reformulation);
    auto is_word_char = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
    for (const auto& kw : keywords) {
        const std::string needle = ascii_lower(detail::trim(kw));
        if (needle.empty()) {
            continue;
        }
        bool found = false;
        for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) {
            const bool left_ok = pos == 0 || !is_word_char(hay[pos - 1]);
            const std::size_t after = pos + needle.size();
            const bool right_ok = after >= hay.size() || !is_word_char(hay[after]);
            if (left_ok && right_ok) {
                found = true;
                break;
            }
        }
        if (!found) {
            return false;
        }
    }
    return true;
}

}  // namespace mvr
