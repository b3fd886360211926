#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "tutor/config.hpp"
#include "tutor/crawler.hpp"
#include "tutor/document.hpp"
#include "tutor/embeddings.hpp"
#include "tutor/error.hpp"
#include "tutor/kvstore.hpp"
#include "tutor/ner.hpp"
#include "tutor/qgen.hpp"
#include "tutor/scoring.hpp"
#include "tutor/tfidf.hpp"

namespace tutor {

// ---------------------------------------------------------------------------
// Authentication

enum class Role { kTeacher, kStudent };

inline void to_json(nlohmann::json& j, Role r) { j = r == Role::kTeacher ? "teacher" : "student"; }

inline void from_json(const nlohmann::json& j, Role& r) {
  auto s = j.get<std::string>();
  if (s == "teacher") {
    r = Role::kTeacher;
  } else if (s == "student") {
    r = Role::kStudent;
  } else {
    throw Error(ErrorCode::kInvalidArgument, "unknown role '" + s + "'");
  }
}

struct Principal {
  std::string user;
  Role role = Role::kStudent;
};

// Static bearer tokens: {"tokens": [{"token": .., "user": .., "role": ..}]}.
// Tokens are held as SHA-256 digests.
class Credentials {
 public:
  void add(std::string_view token, Principal p) { by_digest_[sha256_hex(token)] = std::move(p); }

  std::optional<Principal> authenticate(std::string_view token) const {
    if (token.empty()) return std::nullopt;
    auto it = by_digest_.find(sha256_hex(token));
    if (it == by_digest_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t size() const { return by_digest_.size(); }

  static Credentials from_json(const nlohmann::json& j) {
    Credentials c;
    try {
      for (const auto& t : j.at("tokens")) {
        auto token = t.at("token").get<std::string>();
        if (token.size() < 8) throw Error(ErrorCode::kInvalidArgument, "credential tokens need >= 8 characters");
        c.add(token, {t.at("user").get<std::string>(), t.at("role").get<Role>()});
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kInvalidArgument, std::string("credentials: ") + e.what());
    }
    return c;
  }

  static Credentials load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kNotFound, "cannot read credentials " + path.string());
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::kInvalidArgument, "credentials " + path.string() + ": " + e.what());
    }
  }

 private:
  std::map<std::string, Principal> by_digest_;
};

// ---------------------------------------------------------------------------
// Records

struct ClassRecord {
  std::string id;
  std::string name;
  std::string subject;
  std::string teacher;
  std::vector<std::string> roster;

  friend bool operator==(const ClassRecord&, const ClassRecord&) = default;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ClassRecord, id, name, subject, teacher, roster)

struct SourceRef {
  std::string document_id;
  std::string url;

  friend bool operator==(const SourceRef&, const SourceRef&) = default;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(SourceRef, document_id, url)

struct Question {
  std::string id;
  std::string class_id;  // empty for self-study questions
  std::string owner;
  std::string subject;
  std::string title;
  std::vector<SourceRef> sources;
  std::vector<ConceptScore> concepts;
  QuestionEmbedding embedding;
  bool approved = false;
  bool generated = false;
  std::string parent_id;
  std::vector<DraftQuestion> drafts;

  friend bool operator==(const Question&, const Question&) = default;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(Question, id, class_id, owner, subject, title, sources, concepts, embedding,
                                   approved, generated, parent_id, drafts)

struct AnswerRecord {
  std::string question_id;
  std::string student_id;
  std::uint64_t seq = 0;
  std::string submitted_at;
  AnswerResult result;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(AnswerRecord, question_id, student_id, seq, submitted_at, result)

inline constexpr std::size_t kHistogramBins = 10;
inline constexpr std::size_t kWeakestConcepts = 5;
inline constexpr std::size_t kWeakestMinAttempts = 3;

struct QuestionStats {
  std::string question_id;
  std::string title;
  std::size_t attempts = 0;
  double mean_normalized = 0.0;
  std::array<std::size_t, kHistogramBins> histogram{};

  friend bool operator==(const QuestionStats&, const QuestionStats&) = default;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(QuestionStats, question_id, title, attempts, mean_normalized, histogram)

struct ConceptStats {
  std::string question_id;
  std::string concept_name;
  std::size_t attempts = 0;
  std::size_t hits = 0;
  double hit_rate = 0.0;

  friend bool operator==(const ConceptStats&, const ConceptStats&) = default;
};

inline void to_json(nlohmann::json& j, const ConceptStats& c) {
  j = nlohmann::json{{"question_id", c.question_id},
                     {"concept", c.concept_name},
                     {"attempts", c.attempts},
                     {"hits", c.hits},
                     {"hit_rate", c.hit_rate}};
}

inline void from_json(const nlohmann::json& j, ConceptStats& c) {
  j.at("question_id").get_to(c.question_id);
  j.at("concept").get_to(c.concept_name);
  j.at("attempts").get_to(c.attempts);
  j.at("hits").get_to(c.hits);
  j.at("hit_rate").get_to(c.hit_rate);
}

struct ClassStats {
  std::string class_id;
  std::vector<QuestionStats> questions;
  std::vector<ConceptStats> concepts;
  std::vector<ConceptStats> weakest_concepts;

  friend bool operator==(const ClassStats&, const ClassStats&) = default;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ClassStats, class_id, questions, concepts, weakest_concepts)

inline std::size_t histogram_bin(double normalized) {
  auto bin = static_cast<std::size_t>(std::floor(std::clamp(normalized, 0.0, 1.0) * kHistogramBins));
  return std::min(bin, kHistogramBins - 1);
}

// Running aggregates per class, updated in the same transaction as each
// stored answer and recomputable from the answers alone.
struct StatsCounters {
  struct PerQuestion {
    std::size_t attempts = 0;
    double sum_normalized = 0.0;
    std::array<std::size_t, kHistogramBins> histogram{};
    std::map<std::string, std::size_t> hits;  // concept display -> answers matching it

    friend bool operator==(const PerQuestion&, const PerQuestion&) = default;
  };
  std::map<std::string, PerQuestion> questions;

  void add(const AnswerResult& r) {
    auto& q = questions[r.question_id];
    ++q.attempts;
    q.sum_normalized += r.normalized;
    ++q.histogram[histogram_bin(r.normalized)];
    for (const auto& m : r.matched) ++q.hits[m.concept_score.display];
  }

  friend bool operator==(const StatsCounters&, const StatsCounters&) = default;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(StatsCounters::PerQuestion, attempts, sum_normalized, histogram, hits)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(StatsCounters, questions)

// Per-question rows for the given questions (id order); concepts are the
// question's current list plus any concept that was matched earlier.
inline ClassStats build_stats(const std::string& class_id, std::span<const Question> questions,
                              const StatsCounters& counters) {
  ClassStats s;
  s.class_id = class_id;
  for (const auto& q : questions) {
    StatsCounters::PerQuestion c;
    if (auto it = counters.questions.find(q.id); it != counters.questions.end()) c = it->second;
    QuestionStats qs{q.id, q.title, c.attempts, 0.0, c.histogram};
    if (c.attempts > 0) qs.mean_normalized = c.sum_normalized / static_cast<double>(c.attempts);
    s.questions.push_back(qs);
    std::set<std::string> names;
    for (const auto& concept_score : q.concepts) names.insert(concept_score.display);
    for (const auto& [name, _] : c.hits) names.insert(name);
    for (const auto& name : names) {
      std::size_t hits = c.hits.contains(name) ? c.hits.at(name) : 0;
      double rate = c.attempts > 0 ? static_cast<double>(hits) / static_cast<double>(c.attempts) : 0.0;
      s.concepts.push_back({q.id, name, c.attempts, hits, rate});
    }
  }
  std::vector<ConceptStats> eligible;
  for (const auto& c : s.concepts)
    if (c.attempts >= kWeakestMinAttempts) eligible.push_back(c);
  std::stable_sort(eligible.begin(), eligible.end(),
                   [](const auto& a, const auto& b) { return a.hit_rate < b.hit_rate; });
  if (eligible.size() > kWeakestConcepts) eligible.resize(kWeakestConcepts);
  s.weakest_concepts = std::move(eligible);
  return s;
}

// ---------------------------------------------------------------------------
// Operation payloads

struct CreatedQuestion {
  Question question;
  std::vector<std::string> warnings;
};

inline void to_json(nlohmann::json& j, const CreatedQuestion& c) {
  j = nlohmann::json{{"question_id", c.question.id},
                     {"concepts", c.question.concepts},
                     {"drafts", c.question.drafts},
                     {"warnings", c.warnings}};
}

struct ConceptEdit {
  enum class Op { kSet, kDelete, kAdd } op = Op::kSet;
  std::string concept_name;
  double score = 0.0;
};

// {"concept": c, "score": s} sets (or adds when "add": true);
// {"concept": c, "delete": true} removes.
inline void from_json(const nlohmann::json& j, ConceptEdit& e) {
  j.at("concept").get_to(e.concept_name);
  bool del = j.value("delete", false);
  bool add = j.value("add", false);
  if (del && add) throw Error(ErrorCode::kValidation, "edit cannot both add and delete");
  if (del) {
    e.op = ConceptEdit::Op::kDelete;
    return;
  }
  e.op = add ? ConceptEdit::Op::kAdd : ConceptEdit::Op::kSet;
  if (!j.contains("score") || !j.at("score").is_number()) {
    throw Error(ErrorCode::kValidation, "edit for '" + e.concept_name + "' needs a numeric score");
  }
  j.at("score").get_to(e.score);
}

struct ApproveResult {
  Question question;
  std::vector<std::string> generated;
};

inline void to_json(nlohmann::json& j, const ApproveResult& r) {
  j = nlohmann::json{{"question", r.question}, {"generated", r.generated}};
}

struct SubmitResult {
  AnswerResult result;
  std::vector<std::string> recommendations;
};

inline void to_json(nlohmann::json& j, const SubmitResult& r) {
  j = nlohmann::json{{"result", r.result}, {"recommendations", r.recommendations}};
}

// What a student may see of a question before answering.
inline nlohmann::json student_view(const Question& q) {
  return nlohmann::json{{"id", q.id}, {"title", q.title}, {"generated", q.generated}};
}

// ---------------------------------------------------------------------------
// Subject resources

struct SubjectResources {
  std::string subject;
  SubjectIndex index;
  std::optional<EmbeddingModel> model;
  std::string model_version;
  Gazetteer gazetteer;
};

struct Resources {
  std::map<std::string, std::shared_ptr<const SubjectResources>> subjects;
  TemplateSet templates = default_templates();
};

// Subjects without a built index are left out; a missing model or
// gazetteer only disables embeddings or entity lookup for that subject.
inline std::shared_ptr<const Resources> load_resources(const Config& cfg) {
  auto res = std::make_shared<Resources>();
  if (std::filesystem::exists(cfg.templates_path())) res->templates = load_templates(cfg.templates_path());
  for (const auto& s : cfg.subjects) {
    if (!std::filesystem::exists(cfg.index_path(s))) continue;
    auto r = std::make_shared<SubjectResources>();
    r->subject = s;
    r->index = load_index(cfg.index_path(s));
    if (std::filesystem::exists(cfg.model_path(s))) {
      r->model = load_model(cfg.model_path(s));
      r->model_version = model_version(*r->model);
    }
    if (std::filesystem::exists(cfg.gazetteer_path(s))) r->gazetteer = Gazetteer::load(cfg.gazetteer_path(s));
    res->subjects[s] = std::move(r);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Service

namespace detail {

inline std::string padded_id(char prefix, std::uint64_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%06llu", prefix, static_cast<unsigned long long>(n));
  return buf;
}

inline std::string seq_key(std::uint64_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%010llu", static_cast<unsigned long long>(n));
  return buf;
}

inline bool looks_like_url(std::string_view s) {
  s = trim(s);
  return s.find_first_of(" \t\r\n") == std::string_view::npos && parse_url(s).has_value();
}

}  // namespace detail

// Store layout: class/<id>, question/<id>, answer/<question>/<seq>,
// document/<id>, stats/<class>, seq/<counter>. Records are canonical JSON.
class Service {
 public:
  Service(Config cfg, std::shared_ptr<Fetcher> fetcher)
      : cfg_(std::move(cfg)), store_(cfg_.store_path), fetcher_(std::move(fetcher)) {
    cfg_.validate();
    reload();
  }

  const Config& config() const { return cfg_; }
  KvStore& store() { return store_; }

  // Re-reads indices, models and gazetteers and swaps them in atomically.
  // Questions embedded under an older model are re-embedded.
  void reload() {
    auto fresh = load_resources(cfg_);
    {
      std::lock_guard lock(res_mu_);
      resources_ = fresh;
    }
    std::lock_guard lock(mu_);
    for (auto q : all_questions()) {
      auto it = fresh->subjects.find(q.subject);
      if (it == fresh->subjects.end() || q.embedding.model_version == it->second->model_version) continue;
      if (!q.embedding.vector.empty() || it->second->model) {
        std::vector<Document> docs;
        for (const auto& s : q.sources) docs.push_back(get_document(s.document_id));
        std::vector<std::string> warnings;
        q.embedding = embed(*it->second, q.id, docs, warnings);
        put_question(q);
      }
    }
  }

  std::shared_ptr<const Resources> resources() const {
    std::lock_guard lock(res_mu_);
    return resources_;
  }

  // -- classes --------------------------------------------------------------

  ClassRecord create_class(const Principal& who, const std::string& name, const std::string& subject,
                           std::vector<std::string> roster) {
    require_teacher(who);
    if (detail::trim(name).empty()) throw Error(ErrorCode::kValidation, "class name is empty");
    subject_resources(subject);
    std::sort(roster.begin(), roster.end());
    roster.erase(std::unique(roster.begin(), roster.end()), roster.end());
    std::lock_guard lock(mu_);
    return store_.transaction([&] {
      ClassRecord c{detail::padded_id('c', store_.next_sequence("class")), name, subject, who.user,
                    std::move(roster)};
      store_.put("class/" + c.id, nlohmann::json(c).dump());
      return c;
    });
  }

  ClassRecord get_class(const std::string& id) const {
    auto v = store_.get("class/" + id);
    if (!v) throw Error(ErrorCode::kNotFound, "no class " + id);
    return nlohmann::json::parse(*v).get<ClassRecord>();
  }

  // -- questions ------------------------------------------------------------

  CreatedQuestion create_question(const Principal& who, const std::string& class_id, const std::string& title,
                                  const std::vector<std::string>& sources) {
    auto cls = get_class(class_id);
    require_class_teacher(who, cls);
    return build_question(who, class_id, cls.subject, title, sources, false);
  }

  // Student-owned question outside any class; concepts are approved as
  // extracted and the drafts are returned to the owner.
  CreatedQuestion self_study_create(const Principal& who, const std::string& title,
                                    const std::vector<std::string>& sources, std::string subject = {}) {
    if (subject.empty()) {
      if (cfg_.subjects.empty()) throw Error(ErrorCode::kInvalidArgument, "no subjects configured");
      subject = cfg_.subjects.front();
    }
    return build_question(who, "", subject, title, sources, true);
  }

  Question get_question(const std::string& id) const {
    auto v = store_.get("question/" + id);
    if (!v) throw Error(ErrorCode::kNotFound, "no question " + id);
    return nlohmann::json::parse(*v).get<Question>();
  }

  Question update_concepts(const Principal& who, const std::string& question_id,
                           const std::vector<ConceptEdit>& edits) {
    std::lock_guard lock(mu_);
    auto q = get_question(question_id);
    require_question_editor(who, q);
    for (const auto& e : edits) apply_edit(q.concepts, e);
    if (q.concepts.empty()) throw Error(ErrorCode::kValidation, "a question needs at least one concept");
    sort_concepts(q.concepts);
    q.approved = true;
    put_question(q);
    return q;
  }

  // Approves the question and turns the selected drafts into generated,
  // approved questions that share its sources and concepts.
  ApproveResult approve(const Principal& who, const std::string& question_id,
                        const std::vector<std::size_t>& draft_indices = {}) {
    std::lock_guard lock(mu_);
    auto q = get_question(question_id);
    require_question_editor(who, q);
    if (q.concepts.empty()) throw Error(ErrorCode::kValidation, "a question needs at least one concept");
    for (auto i : draft_indices) {
      if (i >= q.drafts.size()) throw Error(ErrorCode::kInvalidArgument, "no draft " + std::to_string(i));
    }
    return store_.transaction([&] {
      ApproveResult r;
      q.approved = true;
      for (auto i : std::set<std::size_t>(draft_indices.begin(), draft_indices.end())) {
        if (q.drafts[i].approved) continue;
        q.drafts[i].approved = true;
        Question g = q;
        g.id = detail::padded_id('q', store_.next_sequence("question"));
        g.title = q.drafts[i].text;
        g.generated = true;
        g.parent_id = q.id;
        g.drafts.clear();
        g.embedding.question_id = g.id;
        put_question(g);
        r.generated.push_back(g.id);
      }
      put_question(q);
      r.question = q;
      return r;
    });
  }

  // Teachers of the class may ask for the full records; everyone else
  // (and role=student) gets approved questions in student view.
  std::vector<nlohmann::json> list_questions(const Principal& who, const std::string& class_id,
                                             bool as_student) const {
    auto cls = get_class(class_id);
    bool teacher = who.role == Role::kTeacher && cls.teacher == who.user;
    if (!teacher && !enrolled(cls, who)) throw Error(ErrorCode::kForbidden, "not a member of class " + class_id);
    if (!teacher && !as_student) throw Error(ErrorCode::kForbidden, "teacher view requires the class teacher");
    std::vector<nlohmann::json> out;
    for (const auto& q : class_questions(class_id)) {
      if (teacher && !as_student) {
        out.push_back(q);
      } else if (q.approved) {
        out.push_back(student_view(q));
      }
    }
    return out;
  }

  // -- answers --------------------------------------------------------------

  // The grading path shared by the service and the CLI.
  AnswerResult grade(const Question& q, const std::string& transcript) const {
    auto res = subject_resources(q.subject);
    GradeOptions opt;
    opt.context = q.title;
    auto r = grade_answer(transcript, q.concepts, res->gazetteer, opt);
    r.question_id = q.id;
    return r;
  }

  SubmitResult submit_answer(const Principal& who, const std::string& question_id, const std::string& transcript) {
    auto q = get_question(question_id);
    require_answerer(who, q);
    SubmitResult out;
    out.result = grade(q, transcript);
    {
      std::lock_guard lock(mu_);
      store_.transaction([&] {
        AnswerRecord rec{q.id, who.user, store_.next_sequence("answer/" + q.id), utc_timestamp(), out.result};
        store_.put("answer/" + q.id + "/" + detail::seq_key(rec.seq), nlohmann::json(rec).dump());
        if (!q.class_id.empty()) {
          auto counters = load_counters(q.class_id);
          counters.add(out.result);
          store_.put("stats/" + q.class_id, nlohmann::json(counters).dump());
        }
      });
    }
    out.recommendations = recommend_for(q);
    return out;
  }

  std::vector<AnswerRecord> answers(const std::string& question_id) const {
    std::vector<AnswerRecord> out;
    for (const auto& [k, v] : store_.scan("answer/" + question_id + "/"))
      out.push_back(nlohmann::json::parse(v).get<AnswerRecord>());
    return out;
  }

  std::vector<std::string> recommendations(const Principal& who, const std::string& question_id) const {
    auto q = get_question(question_id);
    require_answerer(who, q, /*teacher_ok=*/true);
    return recommend_for(q);
  }

  // -- statistics -----------------------------------------------------------

  ClassStats get_stats(const Principal& who, const std::string& class_id) const {
    auto cls = get_class(class_id);
    require_class_teacher(who, cls);
    return build_stats(class_id, stats_questions(class_id), load_counters(class_id));
  }

  ClassStats recompute_stats(const std::string& class_id) const {
    get_class(class_id);
    return build_stats(class_id, stats_questions(class_id), recount(class_id));
  }

  StatsCounters incremental_counters(const std::string& class_id) const { return load_counters(class_id); }

  StatsCounters recount(const std::string& class_id) const {
    StatsCounters c;
    for (const auto& q : class_questions(class_id))
      for (const auto& a : answers(q.id)) c.add(a.result);
    return c;
  }

  // Every stored record in key order, for canonical comparisons.
  std::vector<std::pair<std::string, std::string>> dump() const { return store_.scan(""); }

 private:
  std::shared_ptr<const SubjectResources> subject_resources(const std::string& subject) const {
    auto res = resources();
    auto it = res->subjects.find(subject);
    if (it == res->subjects.end()) throw Error(ErrorCode::kNotFound, "no built index for subject '" + subject + "'");
    return it->second;
  }

  static void require_teacher(const Principal& who) {
    if (who.role != Role::kTeacher) throw Error(ErrorCode::kForbidden, "teacher role required");
  }

  static void require_class_teacher(const Principal& who, const ClassRecord& cls) {
    require_teacher(who);
    if (cls.teacher != who.user) throw Error(ErrorCode::kForbidden, "not the teacher of class " + cls.id);
  }

  static bool enrolled(const ClassRecord& cls, const Principal& who) {
    return who.role == Role::kStudent && std::binary_search(cls.roster.begin(), cls.roster.end(), who.user);
  }

  void require_question_editor(const Principal& who, const Question& q) const {
    if (q.class_id.empty()) {
      if (q.owner != who.user) throw Error(ErrorCode::kForbidden, "not the owner of question " + q.id);
      return;
    }
    require_class_teacher(who, get_class(q.class_id));
  }

  void require_answerer(const Principal& who, const Question& q, bool teacher_ok = false) const {
    if (q.class_id.empty()) {
      if (q.owner != who.user) throw Error(ErrorCode::kForbidden, "not the owner of question " + q.id);
      return;
    }
    auto cls = get_class(q.class_id);
    bool teacher = who.role == Role::kTeacher && cls.teacher == who.user;
    if (!(enrolled(cls, who) || (teacher_ok && teacher))) {
      throw Error(ErrorCode::kForbidden, "not enrolled in class " + cls.id);
    }
    if (!q.approved && !teacher) throw Error(ErrorCode::kUnavailable, "not available");
  }

  std::vector<Question> all_questions() const {
    std::vector<Question> out;
    for (const auto& [k, v] : store_.scan("question/")) out.push_back(nlohmann::json::parse(v).get<Question>());
    return out;
  }

  std::vector<Question> class_questions(const std::string& class_id) const {
    auto all = all_questions();
    std::erase_if(all, [&](const Question& q) { return q.class_id != class_id; });
    return all;
  }

  std::vector<Question> stats_questions(const std::string& class_id) const {
    auto qs = class_questions(class_id);
    std::erase_if(qs, [](const Question& q) { return !q.approved; });
    return qs;
  }

  StatsCounters load_counters(const std::string& class_id) const {
    auto v = store_.get("stats/" + class_id);
    return v ? nlohmann::json::parse(*v).get<StatsCounters>() : StatsCounters{};
  }

  void put_question(const Question& q) { store_.put("question/" + q.id, nlohmann::json(q).dump()); }

  Document get_document(const std::string& id) const {
    auto v = store_.get("document/" + id);
    if (!v) throw Error(ErrorCode::kNotFound, "no document " + id);
    return nlohmann::json::parse(*v).get<Document>();
  }

  // URL sources go through the crawler at depth 0; anything else is text.
  std::vector<Document> ingest(const std::string& subject, const std::vector<std::string>& sources,
                               std::vector<std::string>& warnings) {
    if (sources.empty()) throw Error(ErrorCode::kInvalidArgument, "no source material");
    std::vector<Document> docs;
    std::set<std::string> ids;
    auto keep = [&](Document d) {
      if (ids.insert(d.id).second) docs.push_back(std::move(d));
    };
    for (const auto& raw : sources) {
      std::string_view s = detail::trim(raw);
      if (s.empty()) {
        warnings.push_back("empty source skipped");
        continue;
      }
      if (!detail::looks_like_url(s)) {
        Document d = Document::make("", subject, std::string(s));
        d.url = "text:" + d.id.substr(0, 16);
        keep(std::move(d));
        continue;
      }
      if (!fetcher_) {
        warnings.push_back(std::string(s) + ": URL sources are disabled");
        continue;
      }
      CrawlJob job;
      job.seeds = {std::string(s)};
      job.subject = subject;
      job.max_depth = 0;
      job.max_pages = 1;
      job.politeness = cfg_.politeness;
      job.timeout = cfg_.fetch_timeout;
      auto report = crawl(job, *fetcher_, [](const Document&) { return true; });
      if (report.documents.empty()) {
        std::string why = !report.errors.empty() ? report.errors.front().message : "no text extracted";
        warnings.push_back(std::string(s) + ": " + why);
        continue;
      }
      keep(std::move(report.documents.front()));
    }
    if (docs.empty()) throw Error(ErrorCode::kInvalidArgument, "all sources failed");
    return docs;
  }

  static QuestionEmbedding embed(const SubjectResources& res, const std::string& id, std::span<const Document> docs,
                                 std::vector<std::string>& warnings) {
    QuestionEmbedding e{id, {}, ""};
    if (!res.model) {
      warnings.push_back("no embedding model for subject '" + res.subject + "'");
      return e;
    }
    std::vector<std::string> stems;
    for (const auto& d : docs) {
      auto s = document_stems(d);
      stems.insert(stems.end(), s.begin(), s.end());
    }
    try {
      e.vector = infer(*res.model, stems);
      e.model_version = res.model_version;
    } catch (const Error& err) {
      warnings.push_back(std::string("not embedded: ") + err.what());
    }
    return e;
  }

  CreatedQuestion build_question(const Principal& who, const std::string& class_id, const std::string& subject,
                                 const std::string& title, const std::vector<std::string>& sources,
                                 bool approve_now) {
    if (detail::trim(title).empty()) throw Error(ErrorCode::kValidation, "question title is empty");
    auto res = subject_resources(subject);
    auto templates = resources()->templates;
    CreatedQuestion out;
    auto docs = ingest(subject, sources, out.warnings);

    Question& q = out.question;
    q.class_id = class_id;
    q.owner = who.user;
    q.subject = subject;
    q.title = title;
    auto x = extract_concepts(docs, res->index, RuleNerBackend(res->gazetteer), cfg_.scoring);
    q.concepts = std::move(x.concepts);
    auto top = select_top(score_sentences(x.text, q.concepts), cfg_.n);
    q.drafts = draft_questions(top, q.concepts, templates);
    q.approved = approve_now && !q.concepts.empty();

    std::lock_guard lock(mu_);
    store_.transaction([&] {
      q.id = detail::padded_id('q', store_.next_sequence("question"));
      for (const auto& d : docs) {
        store_.put("document/" + d.id, nlohmann::json(d).dump());
        q.sources.push_back({d.id, d.url});
      }
      q.embedding = embed(*res, q.id, docs, out.warnings);
      put_question(q);
    });
    return out;
  }

  static void apply_edit(std::vector<ConceptScore>& concepts, const ConceptEdit& e) {
    if (e.op != ConceptEdit::Op::kDelete && (!std::isfinite(e.score) || e.score < 0)) {
      throw Error(ErrorCode::kValidation, "score for '" + e.concept_name + "' must be a non-negative number");
    }
    StemSeq stems;
    for (const auto& t : analyze(e.concept_name).flatten()) stems.push_back(t.stem);
    if (stems.empty()) throw Error(ErrorCode::kValidation, "concept '" + e.concept_name + "' has no words");
    auto it = std::find_if(concepts.begin(), concepts.end(),
                           [&](const ConceptScore& c) { return c.display == e.concept_name; });
    if (it == concepts.end()) {
      it = std::find_if(concepts.begin(), concepts.end(), [&](const ConceptScore& c) { return c.stems == stems; });
    }
    switch (e.op) {
      case ConceptEdit::Op::kDelete:
        if (it == concepts.end()) throw Error(ErrorCode::kNotFound, "no concept '" + e.concept_name + "'");
        concepts.erase(it);
        return;
      case ConceptEdit::Op::kSet:
        if (it == concepts.end()) throw Error(ErrorCode::kNotFound, "no concept '" + e.concept_name + "'");
        break;
      case ConceptEdit::Op::kAdd:
        if (it == concepts.end()) {
          ConceptScore c;
          c.stems = std::move(stems);
          c.display = e.concept_name;
          concepts.push_back(std::move(c));
          it = concepts.end() - 1;
        }
        break;
    }
    it->score = e.score;
    it->teacher_edited = true;
  }

  // Nearest approved questions of the same class (or the same owner's
  // self-study questions) embedded under the current model.
  std::vector<std::string> recommend_for(const Question& q) const {
    if (q.embedding.vector.empty()) return {};
    auto res = subject_resources(q.subject);
    if (q.embedding.model_version != res->model_version) return {};
    std::vector<QuestionEmbedding> pool;
    auto candidates = q.class_id.empty() ? all_questions() : class_questions(q.class_id);
    for (const auto& c : candidates) {
      if (c.class_id != q.class_id || (q.class_id.empty() && c.owner != q.owner)) continue;
      if (c.id != q.id && !c.approved) continue;
      if (c.embedding.vector.empty() || c.embedding.model_version != res->model_version) continue;
      pool.push_back(c.embedding);
    }
    if (std::none_of(pool.begin(), pool.end(), [&](const auto& e) { return e.question_id == q.id; })) {
      pool.push_back(q.embedding);
    }
    return recommend(q.id, pool, cfg_.k);
  }

  Config cfg_;
  mutable KvStore store_;
  std::shared_ptr<Fetcher> fetcher_;
  mutable std::mutex res_mu_;
  std::shared_ptr<const Resources> resources_;
  std::mutex mu_;
};

}  // namespace tutor
