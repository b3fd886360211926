#include "tutor/tfidf.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

using namespace tutor;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Brute-force oracle: for every term, test membership in every document.
std::size_t brute_df(const std::vector<std::vector<std::string>>& docs, const std::string& term) {
  std::size_t n = 0;
  for (const auto& d : docs) {
    bool found = false;
    for (const auto& t : d) found = found || t == term;
    n += found ? 1 : 0;
  }
  return n;
}

std::vector<std::vector<std::string>> synthetic_corpus(std::uint32_t seed, int n_docs) {
  std::mt19937 rng(seed);
  std::vector<std::vector<std::string>> docs;
  for (int d = 0; d < n_docs; ++d) {
    std::vector<std::string> doc;
    int len = 1 + static_cast<int>(rng() % 40);
    for (int i = 0; i < len; ++i) doc.push_back("t" + std::to_string(rng() % 60));
    docs.push_back(doc);
  }
  return docs;
}

}  // namespace

TEST(BuildIndex, CountsDocumentFrequency) {
  std::vector<std::vector<std::string>> docs = {{"a", "b"}, {"b", "c"}};
  auto index = build_index("s", docs);
  EXPECT_EQ(index.n_docs, 2u);
  EXPECT_EQ(index.df, (decltype(index.df){{"a", 1}, {"b", 2}, {"c", 1}}));
  EXPECT_EQ(index.vocab_size(), 3u);
}

TEST(BuildIndex, SingleDocument) {
  std::vector<std::vector<std::string>> docs = {{"x", "y", "x", "z"}};
  auto index = build_index("s", docs);
  for (const auto& [term, count] : index.df) EXPECT_EQ(count, 1u) << term;
  EXPECT_EQ(index.vocab_size(), 3u);
}

TEST(BuildIndex, EmptyCorpusRejected) {
  std::vector<std::vector<std::string>> docs;
  try {
    build_index("s", docs);
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "empty corpus");
  }
  std::vector<Document> none;
  EXPECT_THROW(build_index(none), Error);
}

TEST(BuildIndex, FromDocumentsUsesContentStems) {
  std::vector<Document> docs = {Document::make("u1", "hist", "The revolutions began."),
                                Document::make("u2", "hist", "A revolution ended; the king fled.")};
  auto index = build_index(docs);
  EXPECT_EQ(index.subject, "hist");
  EXPECT_EQ(index.doc_freq("revolut"), 2u);
  EXPECT_EQ(index.doc_freq("the"), 0u);  // stopwords removed
  EXPECT_EQ(index.doc_freq("king"), 1u);
  docs.push_back(Document::make("u3", "bio", "cells"));
  EXPECT_THROW(build_index(docs), Error);
}

TEST(BuildIndex, MatchesBruteForceOnRandomCorpora) {
  for (std::uint32_t seed = 1; seed <= 30; ++seed) {
    auto docs = synthetic_corpus(seed, 1 + static_cast<int>(seed % 50));
    auto index = build_index("s", docs);
    for (int t = 0; t < 60; ++t) {
      std::string term = "t" + std::to_string(t);
      std::size_t expected = brute_df(docs, term);
      EXPECT_EQ(index.doc_freq(term), expected);
      if (expected > 0) {
        EXPECT_GE(index.df.at(term), 1u);
        EXPECT_LE(index.df.at(term), index.n_docs);
      }
    }
  }
}

TEST(BuildIndex, ParallelMergeEqualsSerial) {
  auto docs = synthetic_corpus(99, 45);
  EXPECT_EQ(build_index("s", docs, 1), build_index("s", docs, 4));
}

TEST(Idf, SmoothedClosedForm) {
  SubjectIndex index{"s", 4, {{"all", 4}, {"one", 1}}};
  EXPECT_DOUBLE_EQ(idf(index, "all"), 1.0);
  EXPECT_NEAR(idf(index, "unseen"), 2.6094, 1e-4);
  EXPECT_NEAR(idf(index, "one"), 1.9163, 1e-4);
}

TEST(Idf, NonIncreasingInDfAndPositive) {
  for (std::size_t n = 1; n <= 30; ++n) {
    SubjectIndex index{"s", n, {}};
    double prev = idf(index, "t");
    for (std::size_t df = 1; df <= n; ++df) {
      index.df["t"] = df;
      double w = idf(index, "t");
      EXPECT_LE(w, prev);
      EXPECT_GT(w, 0.0);
      prev = w;
    }
  }
}

TEST(Tf, LengthNormalized) {
  std::vector<std::string> tokens = {"a", "b", "a", "c"};
  EXPECT_DOUBLE_EQ(tf(tokens, "a"), 0.5);
  EXPECT_DOUBLE_EQ(tf(tokens, "z"), 0.0);
  TermFrequencies counts(tokens);
  EXPECT_DOUBLE_EQ(counts("a"), 0.5);
  EXPECT_DOUBLE_EQ(counts("c"), 0.25);
  EXPECT_DOUBLE_EQ(counts("z"), 0.0);
}

TEST(Tf, EmptySourceRejected) {
  std::vector<std::string> none;
  try {
    tf(none, "a");
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "empty source");
  }
}

TEST(Tf, FixtureParagraph) {
  // Frozen from tests/oracles/tf_oracle.py: 4 occurrences of "revolut" in 35 content tokens.
  auto stems = content_stems(analyze(read_file(std::string(TUTOR_FIXTURES) + "/revolution_source.txt")));
  EXPECT_EQ(stems.size(), 35u);
  EXPECT_DOUBLE_EQ(tf(stems, "revolut"), 4.0 / 35.0);
}

TEST(TfIdf, ZeroIffAbsent) {
  std::vector<std::string> tokens = {"a", "b", "a"};
  SubjectIndex index{"s", 3, {{"a", 3}, {"b", 1}}};
  for (std::string term : {"a", "b", "c"}) {
    double w = tf(tokens, term) * idf(index, term);
    bool present = std::find(tokens.begin(), tokens.end(), term) != tokens.end();
    EXPECT_EQ(w == 0.0, !present) << term;
  }
}

TEST(IndexIo, JsonRoundTrip) {
  auto docs = synthetic_corpus(5, 12);
  auto index = build_index("us-history", docs);
  auto path = std::filesystem::temp_directory_path() / "tutor_index_test" / "us-history.json";
  save_index(index, path);
  EXPECT_EQ(load_index(path), index);
  auto j = nlohmann::json::parse(std::ifstream(path));
  EXPECT_EQ(j.at("n_docs"), 12);
  EXPECT_TRUE(j.at("df").is_object());
  std::filesystem::remove_all(path.parent_path());
}

TEST(IndexIo, RejectsInconsistentDf) {
  auto j = nlohmann::json::parse(R"({"subject":"s","n_docs":2,"df":{"a":3}})");
  EXPECT_THROW(index_from_json(j), Error);
  EXPECT_THROW(load_index("/nonexistent/x.json"), Error);
}
