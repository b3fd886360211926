#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <istream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "tutor/error.hpp"
#include "tutor/scoring.hpp"
#include "tutor/textprep.hpp"

namespace tutor {

struct ScoredSentence {
  std::size_t index = 0;  // position in the source text
  Sentence tokens;
  double score = 0.0;
  std::vector<std::size_t> concepts;  // indices into the concept list, list order
};

struct DraftQuestion {
  std::string text;
  std::string source_sentence;
  double sentence_score = 0.0;
  ConceptScore target_concept;
  bool approved = false;

  friend bool operator==(const DraftQuestion&, const DraftQuestion&) = default;
};

inline void to_json(nlohmann::json& j, const DraftQuestion& d) {
  j = nlohmann::json{{"text", d.text},
                     {"source_sentence", d.source_sentence},
                     {"sentence_score", d.sentence_score},
                     {"target_concept", d.target_concept},
                     {"approved", d.approved}};
}

inline void from_json(const nlohmann::json& j, DraftQuestion& d) {
  j.at("text").get_to(d.text);
  j.at("source_sentence").get_to(d.source_sentence);
  j.at("sentence_score").get_to(d.sentence_score);
  j.at("target_concept").get_to(d.target_concept);
  d.approved = j.value("approved", false);
}

inline constexpr std::size_t kDefaultTopSentences = 5;

// First position where the concept's stems occur contiguously, or npos.
inline std::size_t find_run(const Sentence& s, const StemSeq& stems) {
  if (stems.empty() || stems.size() > s.size()) return std::string::npos;
  for (std::size_t i = 0; i + stems.size() <= s.size(); ++i) {
    bool hit = true;
    for (std::size_t k = 0; k < stems.size() && hit; ++k) hit = s[i + k].stem == stems[k];
    if (hit) return i;
  }
  return std::string::npos;
}

inline std::string sentence_text(const Sentence& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? " " : "") + s[i].surface;
  return out;
}

inline std::vector<ScoredSentence> score_sentences(const TokenizedText& text,
                                                   std::span<const ConceptScore> concepts) {
  std::vector<ScoredSentence> out;
  for (std::size_t si = 0; si < text.sentences.size(); ++si) {
    ScoredSentence s{si, text.sentences[si], 0.0, {}};
    for (std::size_t c = 0; c < concepts.size(); ++c) {
      if (find_run(s.tokens, concepts[c].stems) == std::string::npos) continue;
      s.score += concepts[c].score;
      s.concepts.push_back(c);
    }
    out.push_back(std::move(s));
  }
  return out;
}

// Highest scores first; equal scores keep document order.
inline std::vector<ScoredSentence> select_top(std::vector<ScoredSentence> scored,
                                              std::size_t n = kDefaultTopSentences) {
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "n must be >= 1");
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.score > b.score; });
  if (scored.size() > n) scored.resize(n);
  return scored;
}

using TemplateSet = std::vector<std::string>;

inline TemplateSet default_templates() {
  return {"Fill in: <blanked>", "What is the significance of <concept>?"};
}

// One template per line; blank lines and # comments are skipped.
inline TemplateSet parse_templates(std::istream& in) {
  TemplateSet out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (line.find("<concept>") == std::string::npos && line.find("<blanked>") == std::string::npos) {
      throw Error(ErrorCode::kValidation, "template has no placeholder: " + line);
    }
    out.push_back(line);
  }
  if (out.empty()) throw Error(ErrorCode::kValidation, "no templates");
  return out;
}

inline TemplateSet load_templates(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kNotFound, "no templates at " + path.string());
  return parse_templates(in);
}

namespace detail {

inline void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

}  // namespace detail

// One draft per sentence around its highest-scored concept (list order on
// ties); templates rotate across the drafts produced. Sentences without a
// concept are skipped.
inline std::vector<DraftQuestion> draft_questions(std::span<const ScoredSentence> sentences,
                                                  std::span<const ConceptScore> concepts,
                                                  const TemplateSet& templates = default_templates()) {
  if (templates.empty()) throw Error(ErrorCode::kValidation, "no templates");
  std::vector<DraftQuestion> out;
  for (const auto& s : sentences) {
    if (s.concepts.empty()) continue;
    std::size_t best = s.concepts.front();
    for (std::size_t c : s.concepts)
      if (concepts[c].score > concepts[best].score) best = c;
    const ConceptScore& target = concepts[best];
    std::size_t pos = find_run(s.tokens, target.stems);

    std::string blanked;
    for (std::size_t i = 0; i < s.tokens.size();) {
      if (!blanked.empty()) blanked += ' ';
      if (i == pos) {
        blanked += "____";
        i += target.stems.size();
      } else {
        blanked += s.tokens[i++].surface;
      }
    }
    std::string text = templates[out.size() % templates.size()];
    detail::replace_all(text, "<blanked>", blanked);
    detail::replace_all(text, "<concept>", target.display);
    out.push_back({std::move(text), sentence_text(s.tokens), s.score, target, false});
  }
  return out;
}

}  // namespace tutor
