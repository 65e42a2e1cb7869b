// Copyright 2026 The SAGE Authors.
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

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace sage {

using WordSet = std::unordered_set<std::string>;

// Built-in word lists (resources/stopwords.txt, resources/pronouns.txt).
const WordSet &DefaultStopwords();
const WordSet &DefaultPronouns();

// Parses a one-word-per-line list.  Blank lines and lines starting with '#'
// are skipped; words are lowercased.
WordSet ParseWordList(std::string_view text);
WordSet LoadWordList(const std::filesystem::path &path);

// Non-empty lines of a resource, trimmed, in order.
std::vector<std::string> ParseLines(std::string_view text);

// Removes leading and trailing punctuation (ASCII and the common Unicode
// punctuation blocks) from a single word.
std::string StripPunctuation(std::string_view word);

// ASCII case folding; other bytes pass through unchanged.
std::string Lowercase(std::string_view text);

// Whitespace split followed by StripPunctuation; empty results are dropped.
// Case is preserved.
std::vector<std::string> SplitWords(std::string_view text);

// Whitespace split that keeps punctuation as separate tokens:
// "Bohr." -> {"Bohr", "."}.  Used to feed running text to a resolver.
std::vector<std::string> Tokenize(std::string_view text);

// Lowercased, punctuation-stripped words with stopwords removed; order kept.
std::vector<std::string> NormalizeWords(std::span<const std::string> words,
                                        const WordSet &stopwords);

// Number of Unicode code points in a UTF-8 string.
std::size_t CodePointCount(std::string_view text);

std::string Join(std::span<const std::string> parts, std::string_view sep);
std::string Trim(std::string_view text);

// Replaces every "{name}" in the template.  Unknown placeholders are left
// alone.
std::string FillTemplate(
    std::string_view tmpl,
    std::span<const std::pair<std::string_view, std::string>> values);

}  // namespace sage
