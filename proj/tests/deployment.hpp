#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "tutor/config.hpp"
#include "tutor/embeddings.hpp"
#include "tutor/service.hpp"
#include "tutor/textprep.hpp"

namespace tutor::testing {

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::filesystem::path fixture_path(const std::string& name) { return std::filesystem::path(TUTOR_FIXTURES) / name; }

// One document per sentence of the history fixtures.
inline std::vector<std::vector<std::string>> history_training_docs() {
  std::vector<std::vector<std::string>> docs;
  for (const char* f : {"revolution_source.txt", "washington_source.txt", "history_paragraph.txt", "wiki_sample.txt"}) {
    for (const auto& s : analyze(read_file(fixture_path(f))).sentences) {
      std::vector<std::string> stems;
      for (const auto& t : s)
        if (!t.is_stopword) stems.push_back(t.stem);
      if (!stems.empty()) docs.push_back(std::move(stems));
    }
  }
  return docs;
}

inline PvHyperparams small_hyperparams() {
  PvHyperparams hp;
  hp.dim = 16;
  hp.epochs = 30;
  hp.min_count = 1;
  hp.seed = 7;
  return hp;
}

// Scratch deployment for subject "us-history": fixture index and
// gazetteer, the shipped templates and a small trained model.
struct Deployment {
  std::filesystem::path root;
  Config cfg;

  explicit Deployment(const std::string& name, bool with_model = true) {
    static std::atomic<int> counter{0};
    root = std::filesystem::temp_directory_path() /
           ("tutor_" + name + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(root);
    cfg.data_dir = root / "data";
    cfg.store_path = root / "tutor.db";
    cfg.credentials_path = root / "credentials.json";
    cfg.subjects = {"us-history"};
    cfg.politeness = std::chrono::milliseconds(0);
    cfg.fetch_timeout = std::chrono::milliseconds(2000);
    for (const char* d : {"indices", "gazetteers", "qgen", "models", "corpus"})
      std::filesystem::create_directories(cfg.data_dir / d);
    std::filesystem::copy_file(fixture_path("history_index.json"), cfg.index_path("us-history"));
    std::filesystem::copy_file(fixture_path("history.tsv"), cfg.gazetteer_path("us-history"));
    std::filesystem::copy_file(std::filesystem::path(TUTOR_DATA) / "qgen" / "templates.txt", cfg.templates_path());
    if (with_model) save_model(train(history_training_docs(), small_hyperparams()), cfg.model_path("us-history"));
    std::ofstream(cfg.credentials_path) << R"({"tokens": [
      {"token": "teacher-alice-token", "user": "alice", "role": "teacher"},
      {"token": "teacher-erin-token", "user": "erin", "role": "teacher"},
      {"token": "student-bob-token", "user": "bob", "role": "student"},
      {"token": "student-carol-token", "user": "carol", "role": "student"},
      {"token": "student-dave-token", "user": "dave", "role": "student"}
    ]})";
  }

  ~Deployment() { std::filesystem::remove_all(root); }

  Deployment(const Deployment&) = delete;
  Deployment& operator=(const Deployment&) = delete;
};

inline const Principal kAlice{"alice", Role::kTeacher};
inline const Principal kErin{"erin", Role::kTeacher};
inline const Principal kBob{"bob", Role::kStudent};
inline const Principal kCarol{"carol", Role::kStudent};
inline const Principal kDave{"dave", Role::kStudent};

inline std::vector<std::string> two_sources() {
  return {read_file(fixture_path("revolution_source.txt")), read_file(fixture_path("washington_source.txt"))};
}

}  // namespace tutor::testing
