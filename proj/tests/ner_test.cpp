#include "tutor/ner.hpp"
#include "tutor/ner_process.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

using namespace tutor;

namespace {

std::string fixture(const std::string& name) {
  std::ifstream in(std::string(TUTOR_FIXTURES) + "/" + name);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Gazetteer history_gazetteer() {
  return Gazetteer::load(std::string(TUTOR_FIXTURES) + "/history.tsv");
}

struct Expected {
  std::size_t sentence, start, end;
  EntityLabel label;
};

void expect_spans(const std::vector<EntitySpan>& got, const std::vector<Expected>& want) {
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) {
    EXPECT_EQ(got[i].sentence_index, want[i].sentence) << i;
    EXPECT_EQ(got[i].start, want[i].start) << i;
    EXPECT_EQ(got[i].end, want[i].end) << i;
    EXPECT_EQ(got[i].label, want[i].label) << i;
  }
}

void expect_sorted_disjoint(const std::vector<EntitySpan>& spans) {
  for (std::size_t i = 1; i < spans.size(); ++i) {
    const auto& a = spans[i - 1];
    const auto& b = spans[i];
    ASSERT_TRUE(a.sentence_index < b.sentence_index ||
                (a.sentence_index == b.sentence_index && a.end <= b.start));
  }
  for (const auto& s : spans) EXPECT_LT(s.start, s.end);
}

}  // namespace

TEST(Recognize, GazetteerHitsOnLowercaseText) {
  Gazetteer g;
  g.add("george washington", EntityLabel::kPerson);
  g.add("delaware", EntityLabel::kLocation);
  auto spans = recognize(analyze("george washington crossed the delaware"), g);
  expect_spans(spans, {{0, 0, 2, EntityLabel::kPerson}, {0, 4, 5, EntityLabel::kLocation}});
  EXPECT_EQ(spans[0].source_backend, "rules");
}

TEST(Recognize, SentenceInitialCapitalAlone) {
  EXPECT_TRUE(recognize(analyze("The river froze"), {}).empty());
  EXPECT_TRUE(recognize(analyze("Washington won."), {}).empty());
  auto spans = recognize(analyze("George Washington won."), {});
  expect_spans(spans, {{0, 0, 2, EntityLabel::kOther}});
  Gazetteer g;
  g.add("washington", EntityLabel::kPerson);
  expect_spans(recognize(analyze("Washington won."), g), {{0, 0, 1, EntityLabel::kPerson}});
}

TEST(Recognize, YearsAreDates) {
  auto spans = recognize(analyze("it happened in 1776 and 12345 and 99"), {});
  expect_spans(spans, {{0, 3, 4, EntityLabel::kDate}});
}

TEST(Recognize, LongestThenLeftmost) {
  Gazetteer g;
  g.add("a b", EntityLabel::kOther);
  g.add("b c d", EntityLabel::kLocation);
  auto spans = recognize(analyze("a b c d"), g);
  expect_spans(spans, {{0, 1, 4, EntityLabel::kLocation}});
  Gazetteer g2;
  g2.add("x y", EntityLabel::kPerson);
  g2.add("y z", EntityLabel::kLocation);
  expect_spans(recognize(analyze("x y z"), g2), {{0, 0, 2, EntityLabel::kPerson}});
}

TEST(Recognize, GazetteerWinsOverCapitalRun) {
  Gazetteer g;
  g.add("george washington", EntityLabel::kPerson);
  auto spans = recognize(analyze("they met George Washington Carver there"), g);
  expect_spans(spans, {{0, 2, 4, EntityLabel::kPerson}, {0, 4, 5, EntityLabel::kOther}});
}

TEST(Recognize, FixtureParagraphGolden) {
  // Hand-annotated against the rules (tests/fixtures/history_paragraph.txt).
  auto spans = recognize(analyze(fixture("history_paragraph.txt")), history_gazetteer());
  expect_spans(spans, {
                          {0, 1, 2, EntityLabel::kDate},
                          {0, 3, 6, EntityLabel::kOther},
                          {0, 7, 9, EntityLabel::kPerson},
                          {1, 0, 1, EntityLabel::kPerson},
                          {1, 3, 5, EntityLabel::kOrganization},
                          {1, 6, 7, EntityLabel::kOther},
                          {2, 4, 6, EntityLabel::kLocation},
                          {2, 7, 8, EntityLabel::kDate},
                          {2, 9, 10, EntityLabel::kOther},
                          {2, 11, 12, EntityLabel::kOther},
                          {3, 2, 4, EntityLabel::kOther},
                          {3, 6, 7, EntityLabel::kOther},
                          {3, 8, 9, EntityLabel::kOther},
                      });
}

TEST(Recognize, PossessiveMatchesGazetteer) {
  auto spans = recognize(analyze("we admired george washington's army"), history_gazetteer());
  expect_spans(spans, {{0, 2, 4, EntityLabel::kPerson}});
}

TEST(RecognizeProperties, SortedDisjointDeterministicAndCovering) {
  std::mt19937 rng(3);
  const std::vector<std::string> vocab = {"george", "washington", "army", "the", "delaware",
                                          "river", "Valley", "Forge", "1776", "crossed", "French"};
  const std::vector<std::string> phrases = {"george washington", "delaware", "delaware river",
                                            "valley forge", "washington"};
  for (int trial = 0; trial < 300; ++trial) {
    Gazetteer g;
    std::vector<std::string> used;
    for (const auto& p : phrases) {
      if (rng() % 2) {
        g.add(p, EntityLabel::kOther);
        used.push_back(p);
      }
    }
    std::string text;
    int n = 1 + static_cast<int>(rng() % 20);
    for (int i = 0; i < n; ++i) text += vocab[rng() % vocab.size()] + (rng() % 6 == 0 ? ". " : " ");
    auto tt = analyze(text);
    auto spans = recognize(tt, g);
    expect_sorted_disjoint(spans);
    EXPECT_EQ(recognize(tt, g), spans);
    // Gazetteer phrases here nest rather than partially overlap, so every
    // verbatim occurrence must lie inside a span.
    for (const auto& p : used) {
      auto keys = tokenize(normalize(p)).flatten();
      for (std::size_t si = 0; si < tt.sentences.size(); ++si) {
        const auto& s = tt.sentences[si];
        for (std::size_t i = 0; i + keys.size() <= s.size(); ++i) {
          bool hit = true;
          for (std::size_t k = 0; k < keys.size(); ++k) hit = hit && s[i + k].surface == keys[k].surface;
          if (!hit) continue;
          bool inside = std::any_of(spans.begin(), spans.end(), [&](const EntitySpan& e) {
            return e.sentence_index == si && e.start <= i && i + keys.size() <= e.end;
          });
          EXPECT_TRUE(inside) << p << " in: " << text;
        }
      }
    }
  }
}

TEST(RecognizeProperties, NoCapitalsEmptyGazetteerOnlyDates) {
  std::mt19937 rng(4);
  const std::vector<std::string> vocab = {"army", "1776", "the", "river", "1812", "crossed", "42"};
  for (int trial = 0; trial < 100; ++trial) {
    std::string text;
    for (int i = 0; i < 12; ++i) text += vocab[rng() % vocab.size()] + (rng() % 4 ? " " : ". ");
    for (const auto& s : recognize(analyze(text), {})) EXPECT_EQ(s.label, EntityLabel::kDate);
  }
}

TEST(Gazetteer, ParsesAnnotationsAndRejectsBadLines) {
  auto g = history_gazetteer();
  EXPECT_EQ(g.size(), 6u);
  const auto* e = g.find({"george", "washington"});
  ASSERT_NE(e, nullptr);
  EXPECT_EQ(e->label, EntityLabel::kPerson);
  EXPECT_EQ(e->gender, Gender::kMasc);
  EXPECT_EQ(e->number, Number::kSing);
  std::stringstream bad("phrase only\n");
  EXPECT_THROW(Gazetteer::parse(bad), Error);
  std::stringstream bad_label("x\tPLANET\n");
  EXPECT_THROW(Gazetteer::parse(bad_label), Error);
  std::stringstream short_tags("boston\tgeo\nmarch 1776\ttim\n");
  auto g2 = Gazetteer::parse(short_tags);
  EXPECT_EQ(g2.find({"boston"})->label, EntityLabel::kLocation);
  EXPECT_EQ(g2.find({"march", "1776"})->label, EntityLabel::kDate);
}

TEST(RuleBackend, WrapsRecognize) {
  RuleNerBackend backend(history_gazetteer());
  auto text = analyze(fixture("history_paragraph.txt"));
  EXPECT_EQ(backend.recognize(text), recognize(text, history_gazetteer()));
  EXPECT_TRUE(backend.concurrent());
}

TEST(ExternalBackend, LineProtocol) {
  ExternalNerBackend backend({"python3", std::string(TUTOR_FIXTURES) + "/ner_backend.py"}, "toy");
  auto text = analyze("George crossed the Delaware. then Trenton fell.");
  auto spans = backend.recognize(text);
  expect_spans(spans, {{0, 0, 1, EntityLabel::kPerson},
                       {0, 3, 4, EntityLabel::kLocation},
                       {1, 1, 2, EntityLabel::kPerson}});
  EXPECT_EQ(spans[0].source_backend, "toy");
  // The child stays alive across calls.
  EXPECT_EQ(backend.recognize(text), spans);
  EXPECT_FALSE(backend.concurrent());
}

TEST(ExternalBackend, MissingExecutableFails) {
  ExternalNerBackend backend({"/nonexistent/tagger"});
  EXPECT_THROW(backend.recognize(analyze("Some Text here.")), Error);
}
