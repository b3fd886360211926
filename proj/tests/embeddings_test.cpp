#include "tutor/embeddings.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

using namespace tutor;

namespace {

// 50 documents, each with its own six topic words plus shared filler.
std::vector<std::vector<std::string>> toy_corpus(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::string> shared;
  for (int i = 0; i < 40; ++i) shared.push_back("common" + std::to_string(i));
  std::vector<std::vector<std::string>> docs;
  for (int d = 0; d < 50; ++d) {
    std::vector<std::string> doc;
    for (int i = 0; i < 30; ++i) {
      if (rng() % 3 != 0) doc.push_back("topic" + std::to_string(d) + "_" + std::to_string(rng() % 6));
      else doc.push_back(shared[rng() % shared.size()]);
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = detail::unit(rng) * 2 - 1;
  return v;
}

double rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0, scale = 1e-8;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
  }
  return diff / scale;
}

}  // namespace

TEST(PairGradient, MatchesCentralDifferences) {
  std::mt19937_64 rng(7);
  const double eps = 1e-4;
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t dim = 2 + rng() % 19;
    std::size_t k = rng() % 7;
    auto v = random_vec(rng, dim);
    auto pos = random_vec(rng, dim);
    std::vector<std::vector<double>> negs;
    for (std::size_t i = 0; i < k; ++i) negs.push_back(random_vec(rng, dim));

    auto loss = [&] {
      std::vector<std::span<const double>> ns(negs.begin(), negs.end());
      return pair_loss<double>(v, pos, ns);
    };
    std::vector<double> gv(dim), gp(dim);
    std::vector<std::vector<double>> gn(k, std::vector<double>(dim));
    {
      std::vector<std::span<const double>> ns(negs.begin(), negs.end());
      std::vector<std::span<double>> gns(gn.begin(), gn.end());
      double l = pair_gradient<double>(v, pos, ns, gv, gp, gns);
      EXPECT_NEAR(l, loss(), 1e-12);
    }
    auto numeric = [&](std::vector<double>& x) {
      std::vector<double> g(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) {
        double saved = x[i];
        x[i] = saved + eps;
        double up = loss();
        x[i] = saved - eps;
        double down = loss();
        x[i] = saved;
        g[i] = (up - down) / (2 * eps);
      }
      return g;
    };
    worst = std::max(worst, rel_error(gv, numeric(v)));
    worst = std::max(worst, rel_error(gp, numeric(pos)));
    for (std::size_t i = 0; i < k; ++i) worst = std::max(worst, rel_error(gn[i], numeric(negs[i])));
  }
  EXPECT_LE(worst, 1e-4);
}

TEST(NoiseTable, UnigramToThreeQuarters) {
  std::vector<VocabEntry> vocab = {{"a", 16}, {"b", 1}};
  NoiseTable t(vocab);
  EXPECT_NEAR(t.probability(0), 8.0 / 9.0, 1e-12);
  EXPECT_NEAR(t.probability(1), 1.0 / 9.0, 1e-12);
  std::mt19937_64 rng(1);
  int hits = 0;
  for (int i = 0; i < 90000; ++i) hits += t.sample(rng) == 1;
  EXPECT_NEAR(hits / 90000.0, 1.0 / 9.0, 0.005);
}

TEST(Train, VocabOrderAndMinCount) {
  std::vector<std::vector<std::string>> docs = {{"b", "a", "c", "b"}, {"a", "b", "d"}};
  auto m = train(docs, {.dim = 4, .epochs = 2});
  ASSERT_EQ(m.vocab.size(), 2u);
  EXPECT_EQ(m.vocab[0], (VocabEntry{"b", 3}));
  EXPECT_EQ(m.vocab[1], (VocabEntry{"a", 2}));
  EXPECT_FALSE(m.lookup("c").has_value());
}

TEST(Train, Errors) {
  std::vector<std::vector<std::string>> one = {{"a", "a"}};
  EXPECT_THROW(train(one), Error);
  std::vector<std::vector<std::string>> sparse = {{"a"}, {"b"}};
  try {
    train(sparse);
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "degenerate corpus");
  }
}

TEST(Train, DisjointDocsMoveApart) {
  std::vector<std::vector<std::string>> docs = {{"alpha"}, {"beta"}};
  PvHyperparams hp{.dim = 4, .epochs = 50, .min_count = 1, .seed = 11};
  // Same seed, zero epochs of progress: the initial doc rows.
  std::mt19937_64 rng(hp.seed);
  std::vector<float> a(4), b(4);
  detail::init_row(a, rng);
  detail::init_row(b, rng);
  auto m = train(docs, hp);
  auto ta = m.docs.row(0);
  auto tb = m.docs.row(1);
  EXPECT_LT(cosine<float>(ta, tb), cosine(a, b));
}

TEST(Train, Deterministic) {
  auto docs = toy_corpus(3);
  PvHyperparams hp{.dim = 16, .epochs = 5, .seed = 9};
  auto a = train(docs, hp);
  auto b = train(docs, hp);
  EXPECT_EQ(a.word_output, b.word_output);
  EXPECT_EQ(a.docs, b.docs);
  EXPECT_EQ(a.epoch_loss, b.epoch_loss);
  hp.seed = 10;
  EXPECT_NE(train(docs, hp).word_output, a.word_output);
}

TEST(Train, LossDecreases) {
  auto m = train(toy_corpus(5), {.seed = 5});
  ASSERT_EQ(m.epoch_loss.size(), 40u);
  EXPECT_LT(m.epoch_loss.back(), m.epoch_loss.front());
  for (std::size_t e = 21; e < m.epoch_loss.size(); ++e) EXPECT_LE(m.epoch_loss[e], m.epoch_loss[e - 1]) << e;
  for (float x : m.word_output.data) ASSERT_TRUE(std::isfinite(x));
}

TEST(Infer, SelfRetrieval) {
  auto docs = toy_corpus(17);
  auto m = train(docs, {.seed = 17});
  int hits = 0;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    auto v = infer(m, docs[d]);
    std::size_t best = 0;
    double best_sim = -2;
    for (std::size_t j = 0; j < docs.size(); ++j) {
      double s = cosine<float>(std::span<const float>(v), m.docs.row(j));
      if (s > best_sim) {
        best_sim = s;
        best = j;
      }
    }
    hits += best == d;
  }
  EXPECT_GE(hits, 40) << hits << "/50";
}

TEST(Infer, DeterministicAndErrors) {
  auto docs = toy_corpus(2);
  auto m = train(docs, {.dim = 8, .epochs = 3});
  EXPECT_EQ(infer(m, docs[0]), infer(m, docs[0]));
  EXPECT_THROW(infer(m, std::vector<std::string>{}), Error);
  try {
    infer(m, std::vector<std::string>{"unseen", "words"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "out-of-vocabulary source");
  }
}

TEST(Cosine, Basics) {
  EXPECT_DOUBLE_EQ(cosine(std::vector<double>{1, 0}, {0, 1}), 0.0);
  EXPECT_NEAR(cosine(std::vector<double>{1, 2}, {2, 4}), 1.0, 1e-15);
  EXPECT_THROW(cosine(std::vector<double>{0, 0}, {1, 0}), Error);
  EXPECT_THROW(cosine(std::vector<double>{1}, {1, 0}), Error);
  std::mt19937_64 rng(4);
  for (int i = 0; i < 200; ++i) {
    auto a = random_vec(rng, 7);
    auto b = random_vec(rng, 7);
    EXPECT_NEAR(cosine(a, a), 1.0, 1e-12);
    EXPECT_NEAR(cosine(a, b), cosine(b, a), 1e-12);
    double c = cosine(a, b);
    EXPECT_TRUE(c >= -1 && c <= 1);
  }
}

TEST(Recommend, ExampleOrdering) {
  std::vector<QuestionEmbedding> store = {{"q1", {1, 0}, "v"}, {"q2", {0.9f, 0.1f}, "v"},
                                          {"q3", {0, 1}, "v"},  {"q4", {-1, 0}, "v"}};
  EXPECT_EQ(recommend("q1", store), (std::vector<std::string>{"q2", "q3", "q4"}));
  EXPECT_EQ(recommend("q1", store, 1), (std::vector<std::string>{"q2"}));
  EXPECT_THROW(recommend("q9", store), Error);
  std::vector<QuestionEmbedding> pair = {store[0], store[2]};
  EXPECT_EQ(recommend("q1", pair), (std::vector<std::string>{"q3"}));
}

TEST(Recommend, TiesByIdAndBruteForce) {
  std::vector<QuestionEmbedding> tied = {{"b", {1, 1}, ""}, {"q", {1, 0}, ""}, {"c", {0, 1}, ""},
                                         {"a", {0, 1}, ""}};
  EXPECT_EQ(recommend("q", tied), (std::vector<std::string>{"b", "a", "c"}));

  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<QuestionEmbedding> store;
    std::size_t n = 1 + rng() % 15;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<float> v(3);
      for (auto& x : v) x = static_cast<float>(static_cast<int>(rng() % 5) - 2) + 0.5f;
      store.push_back({"q" + std::to_string(i), v, ""});
    }
    std::string q = store[rng() % n].question_id;
    std::size_t k = 1 + rng() % 5;
    auto got = recommend(q, store, k);
    const auto& qv = std::find_if(store.begin(), store.end(), [&](auto& e) { return e.question_id == q; })->vector;
    std::vector<std::pair<double, std::string>> all;
    for (const auto& e : store)
      if (e.question_id != q) all.emplace_back(-cosine(qv, e.vector), e.question_id);
    std::sort(all.begin(), all.end());
    std::vector<std::string> want;
    for (std::size_t i = 0; i < std::min(k, all.size()); ++i) want.push_back(all[i].second);
    EXPECT_EQ(got, want);
    EXPECT_EQ(std::count(got.begin(), got.end(), q), 0);
  }
}

TEST(ModelFile, RoundTrip) {
  auto m = train(toy_corpus(1), {.dim = 8, .epochs = 2});
  auto bytes = serialize_model(m);
  EXPECT_EQ(bytes.substr(0, 4), "PVDB");
  EXPECT_EQ(bytes[4], 1);  // version, little-endian
  EXPECT_EQ(bytes[8], 8);  // D
  auto back = deserialize_model(bytes);
  EXPECT_EQ(back.hp, m.hp);
  EXPECT_EQ(back.vocab, m.vocab);
  EXPECT_EQ(back.word_output, m.word_output);
  EXPECT_EQ(serialize_model(back), bytes);
  EXPECT_EQ(model_version(back), model_version(m));
  EXPECT_EQ(infer(back, toy_corpus(1)[0]), infer(m, toy_corpus(1)[0]));

  auto path = std::filesystem::temp_directory_path() / "tutor_embeddings_test" / "history.pv";
  save_model(m, path);
  EXPECT_EQ(load_model(path).word_output, m.word_output);
  std::filesystem::remove_all(path.parent_path());

  EXPECT_THROW(deserialize_model("PVDX"), Error);
  EXPECT_THROW(deserialize_model(bytes.substr(0, bytes.size() - 1)), Error);
  EXPECT_THROW(deserialize_model(bytes + "x"), Error);
}
