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

#include "sage/text.h"

#include <cctype>
#include <fstream>
#include <sstream>

#include "sage/embedded_resources.h"
#include "sage/error.h"

namespace sage {
namespace {

bool IsSpace(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

bool IsPunctuationCodePoint(char32_t cp) {
  if (cp < 0x80) return std::ispunct(static_cast<unsigned char>(cp)) != 0;
  switch (cp) {
    case 0xA1: case 0xA7: case 0xAB: case 0xB6: case 0xB7: case 0xBB:
    case 0xBF:
      return true;
    default:
      break;
  }
  return (cp >= 0x2010 && cp <= 0x2027) || (cp >= 0x2030 && cp <= 0x205E) ||
         (cp >= 0x3001 && cp <= 0x303F) || (cp >= 0xFF01 && cp <= 0xFF0F) ||
         (cp >= 0xFF1A && cp <= 0xFF20);
}

// Decodes the code point starting at `pos`; returns its byte length.
std::size_t DecodeAt(std::string_view s, std::size_t pos, char32_t *cp) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  std::size_t len = 1;
  char32_t value = b0;
  if (b0 >= 0xF0) {
    len = 4;
    value = b0 & 0x07;
  } else if (b0 >= 0xE0) {
    len = 3;
    value = b0 & 0x0F;
  } else if (b0 >= 0xC0) {
    len = 2;
    value = b0 & 0x1F;
  }
  if (pos + len > s.size()) {
    *cp = b0;
    return 1;
  }
  for (std::size_t i = 1; i < len; ++i) {
    value = (value << 6) | (static_cast<unsigned char>(s[pos + i]) & 0x3F);
  }
  *cp = value;
  return len;
}

// Byte offset of the code point that ends at `end` (exclusive).
std::size_t LastCodePointStart(std::string_view s, std::size_t end) {
  std::size_t pos = end - 1;
  while (pos > 0 && (static_cast<unsigned char>(s[pos]) & 0xC0) == 0x80) --pos;
  return pos;
}

std::vector<std::string_view> SplitWhitespace(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && IsSpace(text[i])) ++i;
    std::size_t start = i;
    while (i < text.size() && !IsSpace(text[i])) ++i;
    if (i > start) out.push_back(text.substr(start, i - start));
  }
  return out;
}

}  // namespace

const WordSet &DefaultStopwords() {
  static const WordSet words = ParseWordList(resources::k_stopwords);
  return words;
}

const WordSet &DefaultPronouns() {
  static const WordSet words = ParseWordList(resources::k_pronouns);
  return words;
}

std::vector<std::string> ParseLines(std::string_view text) {
  std::vector<std::string> lines;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    std::string t = Trim(line);
    if (t.empty() || t[0] == '#') continue;
    lines.push_back(std::move(t));
  }
  return lines;
}

WordSet ParseWordList(std::string_view text) {
  WordSet words;
  for (const std::string &line : ParseLines(text)) words.insert(Lowercase(line));
  return words;
}

WordSet LoadWordList(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read word list " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  WordSet words = ParseWordList(buffer.str());
  if (words.empty()) throw ConfigError("word list is empty: " + path.string());
  return words;
}

std::string StripPunctuation(std::string_view word) {
  std::size_t begin = 0;
  std::size_t end = word.size();
  while (begin < end) {
    char32_t cp;
    std::size_t len = DecodeAt(word, begin, &cp);
    if (!IsPunctuationCodePoint(cp)) break;
    begin += len;
  }
  while (end > begin) {
    std::size_t start = LastCodePointStart(word, end);
    char32_t cp;
    DecodeAt(word, start, &cp);
    if (!IsPunctuationCodePoint(cp)) break;
    end = start;
  }
  return std::string(word.substr(begin, end - begin));
}

std::string Lowercase(std::string_view text) {
  std::string out(text);
  for (char &c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::vector<std::string> SplitWords(std::string_view text) {
  std::vector<std::string> words;
  for (std::string_view raw : SplitWhitespace(text)) {
    std::string w = StripPunctuation(raw);
    if (!w.empty()) words.push_back(std::move(w));
  }
  return words;
}

std::vector<std::string> Tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  for (std::string_view raw : SplitWhitespace(text)) {
    std::string core = StripPunctuation(raw);
    if (core.empty()) {
      tokens.emplace_back(raw);
      continue;
    }
    std::size_t at = raw.find(core);
    std::string_view lead = raw.substr(0, at);
    std::string_view trail = raw.substr(at + core.size());
    // Each punctuation code point becomes its own token.
    auto emit_each = [&tokens](std::string_view run) {
      std::size_t i = 0;
      while (i < run.size()) {
        char32_t cp;
        std::size_t len = DecodeAt(run, i, &cp);
        tokens.emplace_back(run.substr(i, len));
        i += len;
      }
    };
    emit_each(lead);
    tokens.push_back(std::move(core));
    emit_each(trail);
  }
  return tokens;
}

std::vector<std::string> NormalizeWords(std::span<const std::string> words,
                                        const WordSet &stopwords) {
  std::vector<std::string> out;
  out.reserve(words.size());
  for (const std::string &w : words) {
    std::string norm = Lowercase(StripPunctuation(w));
    if (norm.empty() || stopwords.contains(norm)) continue;
    out.push_back(std::move(norm));
  }
  return out;
}

std::size_t CodePointCount(std::string_view text) {
  std::size_t n = 0;
  for (char c : text) {
    if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) ++n;
  }
  return n;
}

std::string Join(std::span<const std::string> parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out.append(sep);
    out.append(parts[i]);
  }
  return out;
}

std::string Trim(std::string_view text) {
  std::size_t b = 0;
  std::size_t e = text.size();
  while (b < e && IsSpace(text[b])) ++b;
  while (e > b && IsSpace(text[e - 1])) --e;
  return std::string(text.substr(b, e - b));
}

std::string FillTemplate(
    std::string_view tmpl,
    std::span<const std::pair<std::string_view, std::string>> values) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      std::size_t close = tmpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        std::string_view name = tmpl.substr(i + 1, close - i - 1);
        bool replaced = false;
        for (const auto &[key, value] : values) {
          if (key == name) {
            out.append(value);
            replaced = true;
            break;
          }
        }
        if (replaced) {
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(tmpl[i++]);
  }
  return out;
}

}  // namespace sage
