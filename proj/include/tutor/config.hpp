#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "tutor/embeddings.hpp"
#include "tutor/error.hpp"
#include "tutor/qgen.hpp"
#include "tutor/scoring.hpp"

namespace tutor {

// Deployment configuration. Relative paths resolve against the directory
// of the config file.
struct Config {
  std::filesystem::path data_dir = "data";
  std::filesystem::path store_path = "tutor.db";
  std::filesystem::path credentials_path = "credentials.json";
  std::vector<std::string> subjects;
  ScoringConfig scoring;
  std::size_t k = kDefaultRecommendations;
  std::size_t n = kDefaultTopSentences;
  PvHyperparams embeddings;
  std::chrono::milliseconds politeness{200};
  std::chrono::milliseconds fetch_timeout{10000};
  unsigned crawl_workers = 4;
  std::string host = "127.0.0.1";
  int port = 8080;

  std::filesystem::path corpus_dir() const { return data_dir / "corpus"; }
  std::filesystem::path index_path(const std::string& subject) const { return data_dir / "indices" / (subject + ".json"); }
  std::filesystem::path model_path(const std::string& subject) const { return data_dir / "models" / (subject + ".pv"); }
  std::filesystem::path gazetteer_path(const std::string& subject) const {
    return data_dir / "gazetteers" / (subject + ".tsv");
  }
  std::filesystem::path seeds_path(const std::string& subject) const { return data_dir / "seeds" / (subject + ".txt"); }
  std::filesystem::path templates_path() const { return data_dir / "qgen" / "templates.txt"; }

  void validate() const {
    scoring.validate();
    if (k < 1) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
    if (n < 1) throw Error(ErrorCode::kInvalidArgument, "n must be >= 1");
    if (port < 0 || port > 65535) throw Error(ErrorCode::kInvalidArgument, "port out of range");
    for (const auto& s : subjects) {
      if (s.empty() || s.find_first_of("/\\. ") != std::string::npos) {
        throw Error(ErrorCode::kInvalidArgument, "invalid subject key '" + s + "'");
      }
    }
  }
};

namespace detail {

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

}  // namespace detail

// Unknown keys are rejected so typos do not silently fall back to defaults.
inline Config config_from_json(const nlohmann::json& j, const std::filesystem::path& base = {}) {
  static const std::set<std::string> known = {"data_dir", "store", "credentials", "subjects", "alpha",
                                              "beta",     "k",     "n",           "max_concepts", "embeddings",
                                              "crawl",    "listen"};
  if (!j.is_object()) throw Error(ErrorCode::kInvalidArgument, "config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw Error(ErrorCode::kInvalidArgument, "unknown config key '" + key + "'");
  }
  Config c;
  try {
    auto path = [&](const char* key, std::filesystem::path& out) {
      if (!j.contains(key)) return;
      out = j.at(key).get<std::string>();
    };
    path("data_dir", c.data_dir);
    path("store", c.store_path);
    path("credentials", c.credentials_path);
    detail::read_opt(j, "subjects", c.subjects);
    detail::read_opt(j, "alpha", c.scoring.alpha);
    detail::read_opt(j, "beta", c.scoring.beta);
    detail::read_opt(j, "max_concepts", c.scoring.max_concepts);
    detail::read_opt(j, "k", c.k);
    detail::read_opt(j, "n", c.n);
    if (j.contains("embeddings")) {
      const auto& e = j.at("embeddings");
      detail::read_opt(e, "dim", c.embeddings.dim);
      detail::read_opt(e, "negatives", c.embeddings.negatives);
      detail::read_opt(e, "epochs", c.embeddings.epochs);
      detail::read_opt(e, "initial_lr", c.embeddings.initial_lr);
      detail::read_opt(e, "min_count", c.embeddings.min_count);
      detail::read_opt(e, "seed", c.embeddings.seed);
    }
    if (j.contains("crawl")) {
      const auto& cr = j.at("crawl");
      c.politeness = std::chrono::milliseconds(cr.value("politeness_ms", c.politeness.count()));
      c.fetch_timeout = std::chrono::milliseconds(cr.value("timeout_ms", c.fetch_timeout.count()));
      detail::read_opt(cr, "workers", c.crawl_workers);
    }
    if (j.contains("listen")) {
      detail::read_opt(j.at("listen"), "host", c.host);
      detail::read_opt(j.at("listen"), "port", c.port);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("config: ") + e.what());
  }
  if (!base.empty()) {
    for (auto* p : {&c.data_dir, &c.store_path, &c.credentials_path}) {
      if (p->is_relative()) *p = base / *p;
    }
  }
  c.validate();
  return c;
}

inline Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kNotFound, "cannot read config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, "config " + path.string() + ": " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

}  // namespace tutor
