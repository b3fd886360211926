#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "tutor/coref.hpp"
#include "tutor/document.hpp"
#include "tutor/error.hpp"
#include "tutor/keyconcepts.hpp"
#include "tutor/ner.hpp"
#include "tutor/textprep.hpp"
#include "tutor/tfidf.hpp"

namespace tutor {

struct ScoringConfig {
  double alpha = 1.0;
  double beta = 1.0;
  std::size_t max_concepts = 20;

  void validate() const {
    if (!std::isfinite(alpha) || !std::isfinite(beta) || alpha < 0 || beta < 0) {
      throw Error(ErrorCode::kInvalidArgument, "alpha and beta must be finite and non-negative");
    }
    if (max_concepts < 1) throw Error(ErrorCode::kInvalidArgument, "max_concepts must be >= 1");
  }
};

using StemSeq = std::vector<std::string>;

// Key-concept and named-entity phrases as stem sequences. A word counts as
// a member of a set when it occurs in any of its phrases.
class ConceptSets {
 public:
  void add_kc(StemSeq stems) { add(kc_, kc_words_, std::move(stems)); }
  void add_ne(StemSeq stems) { add(ne_, ne_words_, std::move(stems)); }

  bool kc_contains(const StemSeq& s) const { return kc_.contains(s); }
  bool ne_contains(const StemSeq& s) const { return ne_.contains(s); }
  bool kc_word(const std::string& w) const { return kc_words_.contains(w); }
  bool ne_word(const std::string& w) const { return ne_words_.contains(w); }
  bool contains(const StemSeq& s) const { return kc_contains(s) || ne_contains(s); }

  const std::set<StemSeq>& kc() const { return kc_; }
  const std::set<StemSeq>& ne() const { return ne_; }

  std::size_t max_length() const { return max_len_; }

 private:
  void add(std::set<StemSeq>& phrases, std::set<std::string>& words, StemSeq stems) {
    if (stems.empty()) return;
    max_len_ = std::max(max_len_, stems.size());
    for (const auto& w : stems) words.insert(w);
    phrases.insert(std::move(stems));
  }

  std::set<StemSeq> kc_, ne_;
  std::set<std::string> kc_words_, ne_words_;
  std::size_t max_len_ = 0;
};

struct ConceptScore {
  StemSeq stems;
  std::string display;
  double score = 0.0;
  bool in_kc = false;
  bool in_ne = false;
  bool teacher_edited = false;

  friend bool operator==(const ConceptScore&, const ConceptScore&) = default;
};

inline void to_json(nlohmann::json& j, const ConceptScore& c) {
  j = nlohmann::json{{"stems", c.stems},       {"display", c.display}, {"score", c.score},
                     {"in_kc", c.in_kc},       {"in_ne", c.in_ne},
                     {"teacher_edited", c.teacher_edited}};
}

inline void from_json(const nlohmann::json& j, ConceptScore& c) {
  j.at("stems").get_to(c.stems);
  j.at("display").get_to(c.display);
  j.at("score").get_to(c.score);
  c.in_kc = j.value("in_kc", false);
  c.in_ne = j.value("in_ne", false);
  c.teacher_edited = j.value("teacher_edited", false);
}

struct ConceptMatch {
  ConceptScore concept_score;
  std::vector<std::size_t> token_indices;  // into the transcript's tokens

  friend bool operator==(const ConceptMatch&, const ConceptMatch&) = default;
};

struct AnswerResult {
  std::string question_id;
  std::string transcript;
  std::vector<ConceptMatch> matched;
  double total_score = 0.0;
  double max_score = 0.0;
  double normalized = 0.0;

  friend bool operator==(const AnswerResult&, const AnswerResult&) = default;
};

inline void to_json(nlohmann::json& j, const ConceptMatch& m) {
  j = nlohmann::json{{"concept", m.concept_score}, {"token_indices", m.token_indices}};
}

inline void from_json(const nlohmann::json& j, ConceptMatch& m) {
  j.at("concept").get_to(m.concept_score);
  j.at("token_indices").get_to(m.token_indices);
}

inline void to_json(nlohmann::json& j, const AnswerResult& r) {
  j = nlohmann::json{{"question_id", r.question_id}, {"transcript", r.transcript},
                     {"matched", r.matched},         {"total_score", r.total_score},
                     {"max_score", r.max_score},     {"normalized", r.normalized}};
}

inline void from_json(const nlohmann::json& j, AnswerResult& r) {
  j.at("question_id").get_to(r.question_id);
  j.at("transcript").get_to(r.transcript);
  j.at("matched").get_to(r.matched);
  j.at("total_score").get_to(r.total_score);
  j.at("max_score").get_to(r.max_score);
  j.at("normalized").get_to(r.normalized);
}

// s(w) = tf·idf + α·I[KC] + β·I[NE]
inline double word_score(double tfidf, bool in_kc, bool in_ne, const ScoringConfig& cfg = {}) {
  return tfidf + (in_kc ? cfg.alpha : 0.0) + (in_ne ? cfg.beta : 0.0);
}

inline double word_score(const std::string& w, double tf, double idf, const ConceptSets& sets,
                         const ScoringConfig& cfg = {}) {
  return word_score(tf * idf, sets.kc_word(w), sets.ne_word(w), cfg);
}

// Greedy left-to-right longest match of multiword KC/NE phrases; matched
// runs become one concept scored by the sum of their member word scores,
// other scored words become unigram concepts. Repeats keep the first
// display and the highest score.
inline std::vector<ConceptScore> merge_phrases(const TokenizedText& text, const ConceptSets& sets,
                                               const std::map<std::string, double>& word_scores) {
  auto score_of = [&](const std::string& stem) {
    auto it = word_scores.find(stem);
    return it == word_scores.end() ? 0.0 : it->second;
  };
  std::vector<ConceptScore> out;
  std::map<StemSeq, std::size_t> seen;
  auto emit = [&](ConceptScore c) {
    auto [it, fresh] = seen.emplace(c.stems, out.size());
    if (fresh) out.push_back(std::move(c));
    else out[it->second].score = std::max(out[it->second].score, c.score);
  };

  for (const auto& sentence : text.sentences) {
    std::size_t i = 0;
    while (i < sentence.size()) {
      std::size_t best = 0;
      std::size_t limit = std::min(sentence.size() - i, sets.max_length());
      StemSeq run;
      for (std::size_t len = 1; len <= limit; ++len) {
        run.push_back(sentence[i + len - 1].stem);
        if (len >= 2 && sets.contains(run)) best = len;
      }
      if (best >= 2) {
        ConceptScore c;
        std::vector<std::string> cased;
        for (std::size_t k = i; k < i + best; ++k) {
          c.stems.push_back(sentence[k].stem);
          cased.push_back(sentence[k].cased);
          c.score += score_of(sentence[k].stem);
        }
        c.display = join(cased);
        c.in_kc = sets.kc_contains(c.stems);
        c.in_ne = sets.ne_contains(c.stems);
        emit(std::move(c));
        i += best;
        continue;
      }
      const Token& t = sentence[i];
      if (!t.is_stopword && word_scores.contains(t.stem)) {
        emit({{t.stem}, t.cased, score_of(t.stem), sets.kc_word(t.stem), sets.ne_word(t.stem), false});
      }
      ++i;
    }
  }
  return out;
}

// Score descending, then stems ascending.
inline void sort_concepts(std::vector<ConceptScore>& concepts) {
  std::stable_sort(concepts.begin(), concepts.end(), [](const ConceptScore& a, const ConceptScore& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.stems < b.stems;
  });
}

struct ConceptExtraction {
  TokenizedText text;  // concatenated sources
  ConceptSets sets;
  std::map<std::string, double> word_scores;
  std::vector<ConceptScore> concepts;  // sorted and truncated
};

inline ConceptExtraction extract_concepts(std::span<const Document> sources, const SubjectIndex& index,
                                          const NerBackend& ner, const ScoringConfig& cfg = {},
                                          const KeyconceptConfig& kc = {}) {
  cfg.validate();
  if (sources.empty()) throw Error(ErrorCode::kInvalidArgument, "no source material");
  ConceptExtraction x;
  std::vector<TokenizedText> parts;
  for (const auto& d : sources) parts.push_back(analyze(d.raw_text));
  x.text = concat(parts);

  auto stems = content_stems(x.text);
  if (stems.empty()) return x;

  for (const auto& p : extract_keyphrases(x.text, kc)) x.sets.add_kc(p.stems);
  for (const auto& span : ner.recognize(x.text)) {
    StemSeq ne;
    for (const auto& s : span_stems(x.text, span)) ne.push_back(s);
    x.sets.add_ne(std::move(ne));
  }

  TermFrequencies tf(stems);
  for (const auto& s : stems) {
    if (!x.word_scores.contains(s)) x.word_scores[s] = word_score(s, tf(s), idf(index, s), x.sets, cfg);
  }
  x.concepts = merge_phrases(x.text, x.sets, x.word_scores);
  sort_concepts(x.concepts);
  if (x.concepts.size() > cfg.max_concepts) x.concepts.resize(cfg.max_concepts);
  return x;
}

inline std::vector<ConceptScore> build_concept_list(std::span<const Document> sources,
                                                    const SubjectIndex& index, const NerBackend& ner,
                                                    const ScoringConfig& cfg = {},
                                                    const KeyconceptConfig& kc = {}) {
  return extract_concepts(sources, index, ner, cfg, kc).concepts;
}

inline std::vector<ConceptScore> build_concept_list(std::span<const Document> sources,
                                                    const SubjectIndex& index,
                                                    const Gazetteer& gazetteer = {},
                                                    const ScoringConfig& cfg = {}) {
  return build_concept_list(sources, index, RuleNerBackend(gazetteer), cfg);
}

struct GradeOptions {
  bool coref = true;
  // Text placed before the transcript for pronoun resolution only (the
  // question title); its tokens are never scored.
  std::string context;
  CorefConfig coref_config;
};

// Gazetteer extended with the concept list's entity phrases so answers
// mentioning them are recognized as entities.
inline Gazetteer grading_gazetteer(const Gazetteer& base, std::span<const ConceptScore> concepts) {
  Gazetteer g = base;
  for (const auto& c : concepts) {
    if (!c.in_ne) continue;
    std::vector<std::string> keys;
    for (const auto& t : tokenize(normalize(c.display)).flatten()) keys.push_back(match_key(t.surface));
    if (!keys.empty() && g.find(keys) == nullptr) g.add(c.display, EntityLabel::kOther);
  }
  return g;
}

// Answer tokens after optional coref; inserted tokens keep the origin of
// the pronoun they replaced.
inline std::vector<Token> answer_tokens(const std::string& transcript, const Gazetteer& gazetteer,
                                        const GradeOptions& opt) {
  auto answer = analyze(transcript);
  if (!opt.coref || answer.empty()) return answer.flatten();
  auto context = analyze(opt.context);
  std::size_t skip = context.sentences.size();
  for (auto& s : context.sentences)
    for (auto& t : s) t.origin = static_cast<std::size_t>(-1);
  TokenizedText combined;
  combined.sentences = context.sentences;
  combined.sentences.insert(combined.sentences.end(), answer.sentences.begin(), answer.sentences.end());
  combined.text = render(combined);
  auto resolved = resolve(combined, gazetteer, opt.coref_config);
  std::vector<Token> out;
  for (std::size_t si = skip; si < resolved.sentences.size(); ++si) {
    out.insert(out.end(), resolved.sentences[si].begin(), resolved.sentences[si].end());
  }
  return out;
}

// A concept matches when its stems occur as a contiguous run of answer
// tokens, or when any non-stopword answer token carries one of its stems
// (partial hit). Reported indices cover both kinds of occurrence.
inline ConceptMatch match_concept(const ConceptScore& c, std::span<const Token> tokens, bool* matched) {
  std::set<std::size_t> idx;
  *matched = false;
  if (!c.stems.empty() && tokens.size() >= c.stems.size()) {
    for (std::size_t i = 0; i + c.stems.size() <= tokens.size(); ++i) {
      bool run = true;
      for (std::size_t k = 0; k < c.stems.size() && run; ++k) run = tokens[i + k].stem == c.stems[k];
      if (!run) continue;
      *matched = true;
      for (std::size_t k = 0; k < c.stems.size(); ++k) idx.insert(tokens[i + k].origin);
    }
  }
  std::set<std::string> members(c.stems.begin(), c.stems.end());
  for (const auto& t : tokens) {
    if (t.is_stopword || !members.contains(t.stem)) continue;
    *matched = true;
    idx.insert(t.origin);
  }
  return {c, std::vector<std::size_t>(idx.begin(), idx.end())};
}

inline AnswerResult grade_answer(const std::string& transcript, std::span<const ConceptScore> concepts,
                                 const Gazetteer& gazetteer = {}, const GradeOptions& opt = {}) {
  AnswerResult r;
  r.transcript = transcript;
  auto tokens = answer_tokens(transcript, grading_gazetteer(gazetteer, concepts), opt);
  for (const auto& c : concepts) {
    r.max_score += c.score;
    bool hit = false;
    auto m = match_concept(c, tokens, &hit);
    if (!hit) continue;
    r.total_score += c.score;
    r.matched.push_back(std::move(m));
  }
  r.normalized = r.max_score > 0 ? std::clamp(r.total_score / r.max_score, 0.0, 1.0) : 0.0;
  return r;
}

}  // namespace tutor
