#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include "tutor/error.hpp"
#include "tutor/porter.hpp"
#include "tutor/stopwords.hpp"

namespace tutor {

struct Token {
  std::string surface;  // lowercase form
  std::string stem;
  std::size_t char_offset = 0;  // byte offset into TokenizedText::text
  bool is_stopword = false;
  std::string cased;  // original-case view of the same span
  // Index in the flattened token stream this token came from. Tokens
  // inserted by coreference carry the index of the pronoun they replace.
  std::size_t origin = 0;

  friend bool operator==(const Token&, const Token&) = default;
};

using Sentence = std::vector<Token>;

struct TokenizedText {
  std::string text;  // the string char_offsets index into
  std::vector<Sentence> sentences;

  std::size_t token_count() const {
    std::size_t n = 0;
    for (const auto& s : sentences) n += s.size();
    return n;
  }

  std::vector<Token> flatten() const {
    std::vector<Token> out;
    out.reserve(token_count());
    for (const auto& s : sentences) out.insert(out.end(), s.begin(), s.end());
    return out;
  }

  bool empty() const { return token_count() == 0; }
};

namespace detail {

inline std::string to_utf8(const icu::UnicodeString& u) {
  std::string out;
  u.toUTF8String(out);
  return out;
}

inline const icu::Normalizer2& nfc() {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* n = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status) || n == nullptr) {
    throw Error(ErrorCode::kInternal, "unicode normalizer unavailable");
  }
  return *n;
}

inline icu::UnicodeString nfc(const icu::UnicodeString& u) {
  UErrorCode status = U_ZERO_ERROR;
  icu::UnicodeString out = nfc().normalize(u, status);
  if (U_FAILURE(status)) throw Error(ErrorCode::kInternal, "unicode normalization failed");
  return out;
}

inline bool is_ascii(std::string_view s) {
  for (unsigned char c : s) {
    if (c >= 0x80) return false;
  }
  return true;
}

// Control characters stripped, whitespace runs collapsed to one space,
// ends trimmed, then NFC (and lowercase + NFC again when requested).
inline std::string clean(std::string_view raw, bool lowercase) {
  icu::UnicodeString u = icu::UnicodeString::fromUTF8(
      icu::StringPiece(raw.data(), static_cast<int32_t>(raw.size())));
  icu::UnicodeString out;
  bool pending_space = false;
  for (int32_t i = 0; i < u.length();) {
    UChar32 c = u.char32At(i);
    i += U16_LENGTH(c);
    if (u_isUWhiteSpace(c)) {
      pending_space = true;
      continue;
    }
    if (u_charType(c) == U_CONTROL_CHAR) continue;
    if (pending_space && !out.isEmpty()) out.append(static_cast<UChar32>(' '));
    pending_space = false;
    out.append(c);
  }
  out = nfc(out);
  if (lowercase) {
    out.toLower(icu::Locale::getRoot());
    out = nfc(out);
  }
  return to_utf8(out);
}

inline bool is_terminator(UChar32 c) { return c == '.' || c == '!' || c == '?'; }

inline bool is_closing(UChar32 c) {
  return c == '"' || c == '\'' || c == ')' || c == ']' || c == 0x2019 || c == 0x201D;
}

inline bool is_joiner(UChar32 c) { return c == '-' || c == '\'' || c == 0x2019 || c == '.'; }

inline UChar32 peek(std::string_view s, std::size_t i, std::size_t* next = nullptr) {
  if (i >= s.size()) return U_SENTINEL;
  int32_t pos = static_cast<int32_t>(i);
  UChar32 c;
  U8_NEXT(s.data(), pos, static_cast<int32_t>(s.size()), c);
  if (next) *next = static_cast<std::size_t>(pos);
  return c;
}

inline bool has_letter(std::string_view s) {
  for (std::size_t i = 0; i < s.size();) {
    std::size_t next = i + 1;
    UChar32 c = peek(s, i, &next);
    if (u_isalpha(c)) return true;
    i = next;
  }
  return false;
}

}  // namespace detail

// Canonical form used for indexing and matching.
inline std::string normalize(std::string_view raw) { return detail::clean(raw, true); }

// Same cleanup as normalize() but keeps case, for entity recognition.
inline std::string normalize_cased(std::string_view raw) { return detail::clean(raw, false); }

inline std::string to_lower(std::string_view s) {
  if (detail::is_ascii(s)) {
    std::string out(s);
    for (char& c : out) {
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
  }
  icu::UnicodeString u = icu::UnicodeString::fromUTF8(
      icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
  u.toLower(icu::Locale::getRoot());
  return detail::to_utf8(detail::nfc(u));
}

// Possessive endings are dropped before stemming; only pure ASCII-letter
// words go through Porter, everything else (numbers, hyphenated forms,
// abbreviations, non-Latin words) is its own stem.
inline std::string stem_of(std::string_view surface) {
  std::string_view base = surface;
  if (base.size() > 2 && base.ends_with("'s")) {
    base.remove_suffix(2);
  } else if (base.size() > 4 && base.ends_with("\xE2\x80\x99s")) {
    base.remove_suffix(4);
  }
  return porter_stem(base);
}

inline Token make_token(std::string_view cased, std::size_t offset, std::size_t origin) {
  Token t;
  t.cased = std::string(cased);
  t.surface = to_lower(cased);
  t.stem = stem_of(t.surface);
  t.is_stopword = is_stopword(t.surface);
  t.char_offset = offset;
  t.origin = origin;
  return t;
}

// Sentence split on . ! ? followed by space or end (closing quotes and
// brackets may sit in between). Tokens are maximal alphanumeric runs,
// with - ' and . kept when they sit between two alphanumerics; a period
// right after such an abbreviation token does not end the sentence.
inline TokenizedText tokenize(std::string_view text) {
  using detail::peek;
  TokenizedText out;
  out.text = std::string(text);
  Sentence current;
  std::size_t flat = 0;
  std::size_t last_token_end = std::string_view::npos;
  bool last_token_abbrev = false;

  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t next = i + 1;
    UChar32 c = peek(text, i, &next);
    if (u_isalnum(c)) {
      std::size_t start = i;
      std::size_t end = next;
      bool internal_period = false;
      while (end < text.size()) {
        std::size_t after = end + 1;
        UChar32 d = peek(text, end, &after);
        if (u_isalnum(d)) {
          end = after;
          continue;
        }
        if (detail::is_joiner(d)) {
          std::size_t after2 = after + 1;
          UChar32 e = peek(text, after, &after2);
          if (e != U_SENTINEL && u_isalnum(e)) {
            internal_period = internal_period || d == '.';
            end = after2;
            continue;
          }
        }
        break;
      }
      current.push_back(make_token(text.substr(start, end - start), start, flat++));
      last_token_end = end;
      last_token_abbrev = internal_period;
      i = end;
      continue;
    }
    if (detail::is_terminator(c)) {
      std::size_t after = next;
      UChar32 d = peek(text, next, &after);
      while (d != U_SENTINEL && detail::is_closing(d)) {
        std::size_t j = after;
        d = peek(text, j, &after);
      }
      bool at_boundary = d == U_SENTINEL || u_isUWhiteSpace(d);
      bool abbreviation = c == '.' && last_token_end == i && last_token_abbrev;
      if (at_boundary && !abbreviation && !current.empty()) {
        out.sentences.push_back(std::move(current));
        current.clear();
      }
    }
    i = next;
  }
  if (!current.empty()) out.sentences.push_back(std::move(current));
  return out;
}

// Clean and tokenize raw text, keeping the original-case view in Token::cased.
inline TokenizedText analyze(std::string_view raw) { return tokenize(normalize_cased(raw)); }

// Concatenate separately tokenized texts, joined by a blank line; offsets
// and origins are shifted so they stay valid in the combined text.
inline TokenizedText concat(std::span<const TokenizedText> parts) {
  TokenizedText out;
  std::size_t flat = 0;
  for (const auto& part : parts) {
    if (!out.text.empty()) out.text += "\n\n";
    std::size_t base = out.text.size();
    out.text += part.text;
    for (auto sentence : part.sentences) {
      for (auto& t : sentence) {
        t.char_offset += base;
        t.origin += flat;
      }
      out.sentences.push_back(std::move(sentence));
    }
    flat += part.token_count();
  }
  return out;
}

// Non-stopword stems in document order.
inline std::vector<std::string> content_stems(const TokenizedText& text) {
  std::vector<std::string> out;
  for (const auto& sentence : text.sentences) {
    for (const auto& t : sentence) {
      if (!t.is_stopword) out.push_back(t.stem);
    }
  }
  return out;
}

// Rebuild text from tokens: cased forms joined by spaces, each sentence
// closed with a period. Offsets and origins are left untouched.
inline std::string render(const TokenizedText& text) {
  std::string out;
  for (const auto& sentence : text.sentences) {
    if (!out.empty()) out += ' ';
    for (std::size_t i = 0; i < sentence.size(); ++i) {
      if (i > 0) out += ' ';
      out += sentence[i].cased;
    }
    out += '.';
  }
  return out;
}

}  // namespace tutor
