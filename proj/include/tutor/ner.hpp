#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "tutor/error.hpp"
#include "tutor/textprep.hpp"

namespace tutor {

enum class EntityLabel { kPerson, kLocation, kOrganization, kDate, kOther };
enum class Gender { kMasc, kFem, kNeuter, kUnknown };
enum class Number { kSing, kPlur, kUnknown };

inline std::string_view to_string(EntityLabel l) {
  switch (l) {
    case EntityLabel::kPerson: return "PERSON";
    case EntityLabel::kLocation: return "LOCATION";
    case EntityLabel::kOrganization: return "ORGANIZATION";
    case EntityLabel::kDate: return "DATE";
    case EntityLabel::kOther: return "OTHER";
  }
  return "OTHER";
}

// Accepts the canonical names plus the short tags used by common
// sequence-labelling corpora (per, geo, gpe, org, tim).
inline std::optional<EntityLabel> parse_label(std::string_view s) {
  std::string up;
  for (char c : s) up += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (up == "PERSON" || up == "PER") return EntityLabel::kPerson;
  if (up == "LOCATION" || up == "LOC" || up == "GEO" || up == "GPE") return EntityLabel::kLocation;
  if (up == "ORGANIZATION" || up == "ORG") return EntityLabel::kOrganization;
  if (up == "DATE" || up == "TIM") return EntityLabel::kDate;
  if (up == "OTHER" || up == "MISC" || up == "ART" || up == "EVE" || up == "NAT") {
    return EntityLabel::kOther;
  }
  return std::nullopt;
}

inline std::string_view to_string(Gender g) {
  switch (g) {
    case Gender::kMasc: return "MASC";
    case Gender::kFem: return "FEM";
    case Gender::kNeuter: return "NEUTER";
    case Gender::kUnknown: return "UNKNOWN";
  }
  return "UNKNOWN";
}

inline std::string_view to_string(Number n) {
  switch (n) {
    case Number::kSing: return "SING";
    case Number::kPlur: return "PLUR";
    case Number::kUnknown: return "UNKNOWN";
  }
  return "UNKNOWN";
}

struct EntitySpan {
  std::size_t sentence_index = 0;
  std::size_t start = 0;  // token range [start, end) within the sentence
  std::size_t end = 0;
  EntityLabel label = EntityLabel::kOther;
  std::string source_backend;

  std::size_t length() const { return end - start; }
  friend bool operator==(const EntitySpan&, const EntitySpan&) = default;
};

// Surface used for gazetteer comparison: lowercase, possessive dropped.
inline std::string match_key(std::string_view surface) {
  std::string_view s = surface;
  if (s.size() > 2 && s.ends_with("'s")) s.remove_suffix(2);
  else if (s.size() > 4 && s.ends_with("\xE2\x80\x99s")) s.remove_suffix(4);
  return std::string(s);
}

struct GazetteerEntry {
  std::vector<std::string> tokens;  // match keys
  std::string phrase;
  EntityLabel label = EntityLabel::kOther;
  Gender gender = Gender::kUnknown;
  Number number = Number::kUnknown;
};

// Flat phrase list: `phrase<TAB>label[<TAB>gender[<TAB>number]]` per line.
class Gazetteer {
 public:
  void add(std::string_view phrase, EntityLabel label, Gender gender = Gender::kUnknown,
           Number number = Number::kUnknown) {
    GazetteerEntry e;
    for (const auto& t : tokenize(normalize(phrase)).flatten()) e.tokens.push_back(match_key(t.surface));
    if (e.tokens.empty()) return;
    e.phrase = join_tokens(e.tokens);
    e.label = label;
    e.gender = gender;
    e.number = number;
    max_len_ = std::max(max_len_, e.tokens.size());
    entries_[e.tokens] = std::move(e);
  }

  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  std::size_t max_length() const { return max_len_; }

  const GazetteerEntry* find(const std::vector<std::string>& keys) const {
    auto it = entries_.find(keys);
    return it == entries_.end() ? nullptr : &it->second;
  }

  // Entry whose tokens equal sentence[start, end), if any.
  const GazetteerEntry* find(const Sentence& sentence, std::size_t start, std::size_t end) const {
    std::vector<std::string> keys;
    for (std::size_t i = start; i < end; ++i) keys.push_back(match_key(sentence[i].surface));
    return find(keys);
  }

  std::vector<GazetteerEntry> entries() const {
    std::vector<GazetteerEntry> out;
    for (const auto& [k, e] : entries_) out.push_back(e);
    return out;
  }

  static Gazetteer parse(std::istream& in) {
    Gazetteer g;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      std::vector<std::string> cols;
      std::stringstream ss(line);
      std::string col;
      while (std::getline(ss, col, '\t')) cols.push_back(col);
      auto fail = [&](const std::string& why) {
        throw Error(ErrorCode::kIo, "gazetteer line " + std::to_string(lineno) + ": " + why);
      };
      if (cols.size() < 2) fail("expected phrase<TAB>label");
      auto label = parse_label(cols[1]);
      if (!label) fail("unknown label '" + cols[1] + "'");
      Gender gender = Gender::kUnknown;
      Number number = Number::kUnknown;
      if (cols.size() > 2 && !cols[2].empty()) {
        if (cols[2] == "MASC") gender = Gender::kMasc;
        else if (cols[2] == "FEM") gender = Gender::kFem;
        else if (cols[2] == "NEUTER") gender = Gender::kNeuter;
        else if (cols[2] != "UNKNOWN") fail("unknown gender '" + cols[2] + "'");
      }
      if (cols.size() > 3 && !cols[3].empty()) {
        if (cols[3] == "SING") number = Number::kSing;
        else if (cols[3] == "PLUR") number = Number::kPlur;
        else if (cols[3] != "UNKNOWN") fail("unknown number '" + cols[3] + "'");
      }
      g.add(cols[0], *label, gender, number);
    }
    return g;
  }

  static Gazetteer load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kNotFound, "no gazetteer at " + path.string());
    return parse(in);
  }

 private:
  static std::string join_tokens(const std::vector<std::string>& t) {
    std::string out;
    for (std::size_t i = 0; i < t.size(); ++i) out += (i ? " " : "") + t[i];
    return out;
  }

  std::map<std::vector<std::string>, GazetteerEntry> entries_;
  std::size_t max_len_ = 0;
};

class NerBackend {
 public:
  virtual ~NerBackend() = default;
  virtual std::vector<EntitySpan> recognize(const TokenizedText& text) const = 0;
  virtual std::string name() const = 0;
  // False when calls must be serialized by the caller.
  virtual bool concurrent() const { return true; }
};

namespace detail {

inline bool is_capitalized(const Token& t) {
  if (t.cased.empty()) return false;
  UChar32 c = peek(t.cased, 0);
  return u_isupper(c) || u_istitle(c);
}

inline bool is_year(const Token& t) {
  if (t.surface.size() != 4) return false;
  return std::all_of(t.surface.begin(), t.surface.end(),
                     [](char c) { return c >= '0' && c <= '9'; });
}

// Accepts candidates longest first, then leftmost, skipping overlaps.
inline std::vector<EntitySpan> resolve_overlaps(std::vector<EntitySpan> candidates,
                                                std::vector<bool>& covered) {
  std::stable_sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
    if (a.length() != b.length()) return a.length() > b.length();
    return a.start < b.start;
  });
  std::vector<EntitySpan> out;
  for (const auto& c : candidates) {
    bool free = true;
    for (std::size_t i = c.start; i < c.end; ++i) free = free && !covered[i];
    if (!free) continue;
    for (std::size_t i = c.start; i < c.end; ++i) covered[i] = true;
    out.push_back(c);
  }
  return out;
}

}  // namespace detail

inline constexpr std::string_view kRuleBackendName = "rules";

// Rule/gazetteer recognizer:
//  - gazetteer hits are placed first (longest, then leftmost);
//  - on the remaining tokens, maximal runs of capitalized non-stopword
//    tokens become OTHER spans, except a lone sentence-initial capital;
//  - remaining 4-digit tokens become DATE spans.
inline std::vector<EntitySpan> recognize(const TokenizedText& text, const Gazetteer& gazetteer) {
  std::vector<EntitySpan> out;
  for (std::size_t si = 0; si < text.sentences.size(); ++si) {
    const Sentence& s = text.sentences[si];
    std::vector<bool> covered(s.size(), false);
    std::vector<EntitySpan> sentence_spans;

    std::vector<EntitySpan> hits;
    for (std::size_t i = 0; i < s.size(); ++i) {
      std::size_t max_end = std::min(s.size(), i + gazetteer.max_length());
      for (std::size_t end = i + 1; end <= max_end; ++end) {
        if (const auto* e = gazetteer.find(s, i, end)) {
          hits.push_back({si, i, end, e->label, std::string(kRuleBackendName)});
        }
      }
    }
    sentence_spans = detail::resolve_overlaps(std::move(hits), covered);

    std::size_t i = 0;
    while (i < s.size()) {
      auto cap = [&](std::size_t k) {
        return !covered[k] && !s[k].is_stopword && detail::is_capitalized(s[k]);
      };
      if (!cap(i)) {
        ++i;
        continue;
      }
      std::size_t start = i;
      while (i < s.size() && cap(i)) ++i;
      if (start == 0 && i - start == 1) continue;
      sentence_spans.push_back({si, start, i, EntityLabel::kOther, std::string(kRuleBackendName)});
      for (std::size_t k = start; k < i; ++k) covered[k] = true;
    }

    for (std::size_t k = 0; k < s.size(); ++k) {
      if (!covered[k] && detail::is_year(s[k])) {
        sentence_spans.push_back({si, k, k + 1, EntityLabel::kDate, std::string(kRuleBackendName)});
        covered[k] = true;
      }
    }

    std::sort(sentence_spans.begin(), sentence_spans.end(),
              [](const auto& a, const auto& b) { return a.start < b.start; });
    out.insert(out.end(), sentence_spans.begin(), sentence_spans.end());
  }
  return out;
}

class RuleNerBackend final : public NerBackend {
 public:
  explicit RuleNerBackend(Gazetteer gazetteer = {}) : gazetteer_(std::move(gazetteer)) {}

  std::vector<EntitySpan> recognize(const TokenizedText& text) const override {
    return tutor::recognize(text, gazetteer_);
  }
  std::string name() const override { return std::string(kRuleBackendName); }
  const Gazetteer& gazetteer() const { return gazetteer_; }

 private:
  Gazetteer gazetteer_;
};

// Stems covered by a span, in order.
inline std::vector<std::string> span_stems(const TokenizedText& text, const EntitySpan& span) {
  std::vector<std::string> out;
  const auto& s = text.sentences.at(span.sentence_index);
  for (std::size_t i = span.start; i < span.end; ++i) out.push_back(s[i].stem);
  return out;
}

}  // namespace tutor
