#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "tutor/document.hpp"
#include "tutor/error.hpp"
#include "tutor/textprep.hpp"

namespace tutor {

// Per-subject document-frequency statistics. Immutable once built.
struct SubjectIndex {
  std::string subject;
  std::size_t n_docs = 0;
  std::map<std::string, std::size_t, std::less<>> df;  // stem -> document frequency

  std::size_t vocab_size() const { return df.size(); }

  std::size_t doc_freq(std::string_view stem) const {
    auto it = df.find(stem);
    return it == df.end() ? 0 : it->second;
  }

  friend bool operator==(const SubjectIndex&, const SubjectIndex&) = default;
};

namespace detail {

inline std::map<std::string, std::size_t, std::less<>> count_df(
    std::span<const std::vector<std::string>> docs) {
  std::map<std::string, std::size_t, std::less<>> df;
  for (const auto& doc : docs) {
    std::set<std::string_view> seen(doc.begin(), doc.end());
    for (auto term : seen) {
      auto it = df.find(term);
      if (it == df.end()) {
        df.emplace(std::string(term), 1);
      } else {
        ++it->second;
      }
    }
  }
  return df;
}

}  // namespace detail

// Each inner vector is one document's stopword-filtered stems. With
// workers > 1 the corpus is partitioned and partial df maps are merged.
inline SubjectIndex build_index(std::string subject,
                                std::span<const std::vector<std::string>> docs,
                                unsigned workers = 1) {
  if (docs.empty()) throw Error(ErrorCode::kInvalidArgument, "empty corpus");
  SubjectIndex index;
  index.subject = std::move(subject);
  index.n_docs = docs.size();
  workers = std::clamp<unsigned>(workers, 1, static_cast<unsigned>(docs.size()));
  if (workers == 1) {
    index.df = detail::count_df(docs);
    return index;
  }
  std::vector<std::map<std::string, std::size_t, std::less<>>> partial(workers);
  std::vector<std::thread> threads;
  std::size_t chunk = (docs.size() + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    std::size_t begin = std::min(docs.size(), w * chunk);
    std::size_t end = std::min(docs.size(), begin + chunk);
    threads.emplace_back([&, w, begin, end] {
      partial[w] = detail::count_df(docs.subspan(begin, end - begin));
    });
  }
  for (auto& t : threads) t.join();
  for (auto& p : partial) {
    for (auto& [term, count] : p) index.df[term] += count;
  }
  return index;
}

inline std::vector<std::string> document_stems(const Document& doc) {
  return content_stems(analyze(doc.raw_text));
}

inline SubjectIndex build_index(std::span<const Document> docs, unsigned workers = 1) {
  if (docs.empty()) throw Error(ErrorCode::kInvalidArgument, "empty corpus");
  std::vector<std::vector<std::string>> stems;
  stems.reserve(docs.size());
  for (const auto& d : docs) {
    if (d.subject != docs.front().subject) {
      throw Error(ErrorCode::kInvalidArgument, "documents span multiple subjects");
    }
    stems.push_back(document_stems(d));
  }
  return build_index(docs.front().subject, stems, workers);
}

// Smoothed inverse document frequency: ln((1 + N) / (1 + df)) + 1.
inline double idf(const SubjectIndex& index, std::string_view stem) {
  double n = static_cast<double>(index.n_docs);
  double df = static_cast<double>(index.doc_freq(stem));
  return std::log((1.0 + n) / (1.0 + df)) + 1.0;
}

// Length-normalized raw frequency of `term` within one source.
inline double tf(std::span<const std::string> doc_tokens, std::string_view term) {
  if (doc_tokens.empty()) throw Error(ErrorCode::kInvalidArgument, "empty source");
  auto count = std::count(doc_tokens.begin(), doc_tokens.end(), term);
  return static_cast<double>(count) / static_cast<double>(doc_tokens.size());
}

// Precomputed term counts for repeated tf() lookups against one source.
class TermFrequencies {
 public:
  explicit TermFrequencies(std::span<const std::string> doc_tokens) : total_(doc_tokens.size()) {
    if (doc_tokens.empty()) throw Error(ErrorCode::kInvalidArgument, "empty source");
    for (const auto& t : doc_tokens) ++counts_[t];
  }

  double operator()(std::string_view term) const {
    auto it = counts_.find(std::string(term));
    if (it == counts_.end()) return 0.0;
    return static_cast<double>(it->second) / static_cast<double>(total_);
  }

 private:
  std::size_t total_;
  std::unordered_map<std::string, std::size_t> counts_;
};

inline nlohmann::json to_json(const SubjectIndex& index) {
  nlohmann::json df = nlohmann::json::object();
  for (const auto& [term, count] : index.df) df[term] = count;
  return {{"subject", index.subject}, {"n_docs", index.n_docs}, {"df", df}};
}

inline SubjectIndex index_from_json(const nlohmann::json& j) {
  SubjectIndex index;
  j.at("subject").get_to(index.subject);
  j.at("n_docs").get_to(index.n_docs);
  for (const auto& [term, count] : j.at("df").items()) {
    index.df.emplace(term, count.get<std::size_t>());
  }
  if (index.n_docs < 1) throw Error(ErrorCode::kIo, "index has no documents");
  for (const auto& [term, count] : index.df) {
    if (count < 1 || count > index.n_docs) {
      throw Error(ErrorCode::kIo, "index df out of range for term '" + term + "'");
    }
  }
  return index;
}

inline void save_index(const SubjectIndex& index, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << to_json(index).dump(1) << '\n';
}

inline SubjectIndex load_index(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kNotFound, "no index at " + path.string());
  try {
    return index_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kIo, path.string() + ": " + e.what());
  }
}

}  // namespace tutor
