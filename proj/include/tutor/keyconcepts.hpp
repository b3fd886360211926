#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tutor/error.hpp"
#include "tutor/textprep.hpp"

namespace tutor {

// Undirected weighted co-occurrence graph over candidate stems. Vertices
// are kept in lexicographic order; edges are stored once with i < j.
struct CooccurrenceGraph {
  std::vector<std::string> vertices;
  std::map<std::pair<std::size_t, std::size_t>, double> edges;
  std::size_t window = 2;

  std::size_t vertex_index(std::string_view stem) const {
    auto it = std::lower_bound(vertices.begin(), vertices.end(), stem);
    if (it == vertices.end() || *it != stem) return vertices.size();
    return static_cast<std::size_t>(it - vertices.begin());
  }

  double weight(std::size_t i, std::size_t j) const {
    if (i == j) return 0.0;
    auto it = edges.find(std::minmax(i, j));
    return it == edges.end() ? 0.0 : it->second;
  }

  void add_edge(std::size_t i, std::size_t j, double w) {
    if (i == j) throw Error(ErrorCode::kInvalidArgument, "self-loop");
    edges[std::minmax(i, j)] += w;
  }
};

struct RankScores {
  std::vector<double> scores;  // aligned with CooccurrenceGraph::vertices
  std::size_t iterations_used = 0;
  bool converged = false;
};

using CandidateFilter = std::function<bool(const Token&)>;

// Non-stopword tokens with at least three letters. Stands in for the
// noun/adjective filter, which would need a part-of-speech tagger.
inline bool default_candidate(const Token& t) {
  if (t.is_stopword) return false;
  int letters = 0;
  for (std::size_t i = 0; i < t.surface.size();) {
    std::size_t next = i + 1;
    UChar32 c = detail::peek(t.surface, i, &next);
    if (u_isalpha(c)) ++letters;
    i = next;
  }
  return letters >= 3;
}

// `sentences` holds the candidate stems of each sentence, in order. Every
// pair of positions less than `window` apart inside one sentence adds 1 to
// the edge between their stems.
inline CooccurrenceGraph build_graph(std::span<const std::vector<std::string>> sentences,
                                     std::size_t window) {
  if (window < 2) throw Error(ErrorCode::kInvalidArgument, "window must be >= 2");
  CooccurrenceGraph g;
  g.window = window;
  std::set<std::string> unique;
  for (const auto& s : sentences) unique.insert(s.begin(), s.end());
  g.vertices.assign(unique.begin(), unique.end());
  for (const auto& s : sentences) {
    for (std::size_t p = 0; p < s.size(); ++p) {
      for (std::size_t q = p + 1; q < s.size() && q < p + window; ++q) {
        std::size_t a = g.vertex_index(s[p]);
        std::size_t b = g.vertex_index(s[q]);
        if (a != b) g.add_edge(a, b, 1.0);
      }
    }
  }
  return g;
}

inline std::vector<std::vector<std::string>> candidate_sequences(
    const TokenizedText& text, const CandidateFilter& filter = default_candidate) {
  std::vector<std::vector<std::string>> out;
  for (const auto& sentence : text.sentences) {
    std::vector<std::string> seq;
    for (const auto& t : sentence) {
      if (filter(t)) seq.push_back(t.stem);
    }
    out.push_back(std::move(seq));
  }
  return out;
}

inline CooccurrenceGraph build_graph(const TokenizedText& text, std::size_t window,
                                     const CandidateFilter& filter = default_candidate) {
  return build_graph(candidate_sequences(text, filter), window);
}

// Weighted TextRank:
//   WS(i) = (1 - d) + d * sum_{j in N(i)} w_ji / (sum_k w_jk) * WS(j)
// iterated synchronously from all ones until the L-infinity change drops
// below tol or max_iter sweeps have run.
inline RankScores pagerank(const CooccurrenceGraph& g, double d = 0.85, double tol = 1e-6,
                           std::size_t max_iter = 100) {
  if (!(d > 0.0 && d < 1.0)) throw Error(ErrorCode::kInvalidArgument, "damping must be in (0,1)");
  if (!(tol > 0.0)) throw Error(ErrorCode::kInvalidArgument, "tolerance must be positive");
  const std::size_t n = g.vertices.size();
  struct Arc {
    std::size_t to;
    double w;
  };
  std::vector<std::vector<Arc>> adj(n);
  std::vector<double> out_weight(n, 0.0);
  for (const auto& [key, w] : g.edges) {
    adj[key.first].push_back({key.second, w});
    adj[key.second].push_back({key.first, w});
    out_weight[key.first] += w;
    out_weight[key.second] += w;
  }

  RankScores r;
  r.scores.assign(n, 1.0);
  if (n == 0) {
    r.converged = true;
    return r;
  }
  std::vector<double> next(n);
  while (r.iterations_used < max_iter) {
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double sum = 0.0;
      for (const auto& arc : adj[i]) sum += arc.w / out_weight[arc.to] * r.scores[arc.to];
      next[i] = (1.0 - d) + d * sum;
      change = std::max(change, std::abs(next[i] - r.scores[i]));
    }
    r.scores.swap(next);
    ++r.iterations_used;
    if (change < tol) {
      r.converged = true;
      break;
    }
  }
  return r;
}

struct KeyconceptConfig {
  std::size_t window = 2;
  double damping = 0.85;
  double tol = 1e-6;
  std::size_t max_iter = 100;
  double keep_ratio = 1.0 / 3.0;
  CandidateFilter filter = default_candidate;
};

struct Keyphrase {
  std::vector<std::string> stems;
  std::string display;  // cased surfaces of the first occurrence
  double score = 0.0;

  friend bool operator==(const Keyphrase&, const Keyphrase&) = default;
};

inline std::string join(std::span<const std::string> parts, std::string_view sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += sep;
    out += parts[i];
  }
  return out;
}

// Keep the top ceil(keep_ratio * |V|) ranked vertices as keywords and
// collapse keywords that sit next to each other in the text into phrases
// scored by the sum of their members.
inline std::vector<Keyphrase> extract_keyphrases(const TokenizedText& text,
                                                 const KeyconceptConfig& cfg = {}) {
  auto graph = build_graph(text, cfg.window, cfg.filter);
  if (graph.vertices.empty()) return {};
  auto rank = pagerank(graph, cfg.damping, cfg.tol, cfg.max_iter);

  std::vector<std::size_t> order(graph.vertices.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (rank.scores[a] != rank.scores[b]) return rank.scores[a] > rank.scores[b];
    return graph.vertices[a] < graph.vertices[b];
  });
  auto keep = static_cast<std::size_t>(
      std::ceil(cfg.keep_ratio * static_cast<double>(order.size()) - 1e-9));
  keep = std::min(keep, order.size());
  std::map<std::string, double, std::less<>> keywords;
  for (std::size_t i = 0; i < keep; ++i) {
    keywords.emplace(graph.vertices[order[i]], rank.scores[order[i]]);
  }

  std::map<std::vector<std::string>, Keyphrase> phrases;
  for (const auto& sentence : text.sentences) {
    std::size_t i = 0;
    while (i < sentence.size()) {
      auto is_kw = [&](const Token& t) { return cfg.filter(t) && keywords.contains(t.stem); };
      if (!is_kw(sentence[i])) {
        ++i;
        continue;
      }
      Keyphrase p;
      std::vector<std::string> cased;
      while (i < sentence.size() && is_kw(sentence[i])) {
        p.stems.push_back(sentence[i].stem);
        cased.push_back(sentence[i].cased);
        p.score += keywords.find(sentence[i].stem)->second;
        ++i;
      }
      p.display = join(cased);
      phrases.try_emplace(p.stems, std::move(p));
    }
  }

  std::vector<Keyphrase> out;
  for (auto& [stems, p] : phrases) out.push_back(std::move(p));
  std::stable_sort(out.begin(), out.end(), [](const Keyphrase& a, const Keyphrase& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.stems < b.stems;
  });
  return out;
}

}  // namespace tutor
