#pragma once

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tutor/ner.hpp"
#include "tutor/textprep.hpp"

namespace tutor {

enum class MentionKind { kPronoun, kEntity };

struct Mention {
  std::size_t sentence = 0;
  std::size_t start = 0;  // token range [start, end) within the sentence
  std::size_t end = 0;
  MentionKind kind = MentionKind::kEntity;
  Gender gender = Gender::kUnknown;
  Number number = Number::kUnknown;
  std::string surface;
  std::vector<Token> tokens;  // the mention's own tokens (entity) or the pronoun token

  // Order of appearance: (sentence, start).
  bool precedes(const Mention& other) const {
    if (sentence != other.sentence) return sentence < other.sentence;
    return end <= other.start;
  }
};

struct PronounInfo {
  Gender gender;
  Number number;
  bool possessive;
  bool demonstrative;
};

inline std::optional<PronounInfo> pronoun_info(std::string_view surface) {
  using G = Gender;
  using N = Number;
  if (surface == "he" || surface == "him") return PronounInfo{G::kMasc, N::kSing, false, false};
  if (surface == "his") return PronounInfo{G::kMasc, N::kSing, true, false};
  if (surface == "she" || surface == "her") return PronounInfo{G::kFem, N::kSing, false, false};
  if (surface == "hers") return PronounInfo{G::kFem, N::kSing, true, false};
  if (surface == "it") return PronounInfo{G::kNeuter, N::kSing, false, false};
  if (surface == "its") return PronounInfo{G::kNeuter, N::kSing, true, false};
  if (surface == "they" || surface == "them") return PronounInfo{G::kUnknown, N::kPlur, false, false};
  if (surface == "their" || surface == "theirs") return PronounInfo{G::kUnknown, N::kPlur, true, false};
  if (surface == "this" || surface == "that") return PronounInfo{G::kNeuter, N::kSing, false, true};
  if (surface == "these" || surface == "those") return PronounInfo{G::kUnknown, N::kPlur, false, true};
  return std::nullopt;
}

inline bool agrees(Gender a, Gender b) {
  return a == Gender::kUnknown || b == Gender::kUnknown || a == b;
}

inline bool agrees(Number a, Number b) {
  return a == Number::kUnknown || b == Number::kUnknown || a == b;
}

struct CorefConfig {
  std::size_t sentence_window = 2;  // previous sentences searched besides the current one
};

namespace detail {

// Demonstratives and "her" act as determiners when a content word follows.
inline bool followed_by_content(const Sentence& s, std::size_t i) {
  return i + 1 < s.size() && !s[i + 1].is_stopword;
}

}  // namespace detail

inline std::vector<Mention> pronoun_mentions(const TokenizedText& text) {
  std::vector<Mention> out;
  for (std::size_t si = 0; si < text.sentences.size(); ++si) {
    const auto& s = text.sentences[si];
    for (std::size_t i = 0; i < s.size(); ++i) {
      auto info = pronoun_info(s[i].surface);
      if (!info) continue;
      if (info->demonstrative && detail::followed_by_content(s, i)) continue;
      out.push_back({si, i, i + 1, MentionKind::kPronoun, info->gender, info->number,
                     s[i].surface, {s[i]}});
    }
  }
  return out;
}

// Entity mentions from NER spans; gender and number come from a matching
// gazetteer annotation, otherwise UNKNOWN. Dates never serve as antecedents.
inline std::vector<Mention> entity_mentions(const TokenizedText& text,
                                            std::span<const EntitySpan> entities,
                                            const Gazetteer& gazetteer = {}) {
  std::vector<Mention> out;
  for (const auto& e : entities) {
    if (e.label == EntityLabel::kDate) continue;
    const auto& s = text.sentences.at(e.sentence_index);
    Mention m;
    m.sentence = e.sentence_index;
    m.start = e.start;
    m.end = e.end;
    m.kind = MentionKind::kEntity;
    for (std::size_t i = e.start; i < e.end; ++i) {
      m.tokens.push_back(s[i]);
      m.surface += (i > e.start ? " " : "") + s[i].surface;
    }
    if (const auto* entry = gazetteer.find(s, e.start, e.end)) {
      m.gender = entry->gender;
      m.number = entry->number;
    }
    out.push_back(std::move(m));
  }
  return out;
}

// Nearest preceding entity mention, within the pronoun's sentence or the
// configured number of previous sentences, that agrees in gender and number.
inline std::optional<Mention> find_antecedent(const Mention& pronoun,
                                              std::span<const Mention> candidates,
                                              const CorefConfig& cfg = {}) {
  const Mention* best = nullptr;
  for (const auto& c : candidates) {
    if (c.kind != MentionKind::kEntity || !c.precedes(pronoun)) continue;
    if (pronoun.sentence - c.sentence > cfg.sentence_window) continue;
    if (!agrees(c.gender, pronoun.gender) || !agrees(c.number, pronoun.number)) continue;
    if (best == nullptr || best->precedes(c)) best = &c;
  }
  if (best == nullptr) return std::nullopt;
  return *best;
}

struct Resolution {
  Mention pronoun;
  std::optional<Mention> antecedent;
};

// Antecedent decision for every pronoun, left to right. A resolved
// pronoun becomes a mention of its antecedent for later pronouns, so a
// second pass over the rewritten text finds nothing new.
inline std::vector<Resolution> resolve_pronouns(const TokenizedText& text,
                                                std::span<const EntitySpan> entities,
                                                const Gazetteer& gazetteer = {},
                                                const CorefConfig& cfg = {}) {
  auto mentions = entity_mentions(text, entities, gazetteer);
  std::vector<Resolution> out;
  for (const auto& p : pronoun_mentions(text)) {
    bool inside = std::any_of(mentions.begin(), mentions.end(), [&](const Mention& m) {
      return m.sentence == p.sentence && m.start <= p.start && p.end <= m.end;
    });
    if (inside) continue;
    auto antecedent = find_antecedent(p, mentions, cfg);
    if (antecedent) {
      Mention chained = *antecedent;
      chained.sentence = p.sentence;
      chained.start = p.start;
      chained.end = p.end;
      mentions.push_back(std::move(chained));
    }
    out.push_back({p, std::move(antecedent)});
  }
  return out;
}

// Replace every pronoun that has an antecedent with the antecedent's
// tokens (possessives get "'s" on the last token); other tokens are kept
// as they are. Offsets of the output index into render(output).
inline TokenizedText resolve(const TokenizedText& answer, std::span<const EntitySpan> entities,
                             const Gazetteer& gazetteer = {}, const CorefConfig& cfg = {}) {
  struct Replacement {
    std::size_t sentence, index;
    std::vector<Token> tokens;
  };
  std::vector<Replacement> replacements;
  for (const auto& [p, antecedent] : resolve_pronouns(answer, entities, gazetteer, cfg)) {
    if (!antecedent) continue;
    const Token& pron = p.tokens.front();
    bool possessive = pronoun_info(pron.surface)->possessive ||
                      (pron.surface == "her" &&
                       detail::followed_by_content(answer.sentences[p.sentence], p.start));
    std::vector<Token> inserted;
    for (const auto& src : antecedent->tokens) {
      Token t = src;
      t.origin = pron.origin;
      inserted.push_back(std::move(t));
    }
    if (possessive && !inserted.empty()) {
      Token& last = inserted.back();
      if (!last.surface.ends_with("'s")) {
        last.surface += "'s";
        last.cased += "'s";
      }
      last.stem = stem_of(last.surface);
      last.is_stopword = is_stopword(last.surface);
    }
    replacements.push_back({p.sentence, p.start, std::move(inserted)});
  }
  if (replacements.empty()) return answer;

  TokenizedText out;
  std::size_t r = 0;
  for (std::size_t si = 0; si < answer.sentences.size(); ++si) {
    Sentence sentence;
    for (std::size_t i = 0; i < answer.sentences[si].size(); ++i) {
      if (r < replacements.size() && replacements[r].sentence == si && replacements[r].index == i) {
        for (const auto& t : replacements[r].tokens) sentence.push_back(t);
        ++r;
      } else {
        sentence.push_back(answer.sentences[si][i]);
      }
    }
    out.sentences.push_back(std::move(sentence));
  }
  out.text = render(out);
  std::size_t offset = 0;
  for (auto& sentence : out.sentences) {
    for (auto& t : sentence) {
      t.char_offset = offset;
      offset += t.cased.size() + 1;
    }
    offset += 1;  // trailing period replaces the last separator
  }
  return out;
}

// Convenience: recognize entities with the rule backend and resolve.
inline TokenizedText resolve(const TokenizedText& answer, const Gazetteer& gazetteer,
                             const CorefConfig& cfg = {}) {
  auto spans = recognize(answer, gazetteer);
  return resolve(answer, spans, gazetteer, cfg);
}

}  // namespace tutor
