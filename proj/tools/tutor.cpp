// tutor: operator command line for corpus building, index and model
// training, pipeline debugging and serving.
//
// Exit status: 0 success, 1 domain error, 2 usage error.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "tutor/config.hpp"
#include "tutor/crawler.hpp"
#include "tutor/http_api.hpp"
#include "tutor/http_fetcher.hpp"
#include "tutor/service.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kDomainError = 1;
constexpr int kUsageError = 2;

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw tutor::Error(tutor::ErrorCode::kNotFound, "cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> read_seeds(const fs::path& p) {
  std::vector<std::string> seeds;
  std::istringstream in(read_text(p));
  for (std::string line; std::getline(in, line);) {
    auto s = tutor::detail::trim(line);
    if (!s.empty() && s.front() != '#') seeds.emplace_back(s);
  }
  return seeds;
}

// With no --config, ./tutor.json is used when present, otherwise defaults
// relative to the working directory. An empty subject list is filled from
// the built indices.
tutor::Config load(const std::string& path) {
  tutor::Config cfg;
  if (!path.empty()) {
    cfg = tutor::load_config(path);
  } else if (fs::exists("tutor.json")) {
    cfg = tutor::load_config("tutor.json");
  }
  if (cfg.subjects.empty() && fs::is_directory(cfg.data_dir / "indices")) {
    for (const auto& e : fs::directory_iterator(cfg.data_dir / "indices"))
      if (e.path().extension() == ".json") cfg.subjects.push_back(e.path().stem().string());
    std::sort(cfg.subjects.begin(), cfg.subjects.end());
  }
  return cfg;
}

std::string pick_subject(const tutor::Config& cfg, const std::string& subject) {
  if (!subject.empty()) return subject;
  if (cfg.subjects.empty()) throw tutor::Error(tutor::ErrorCode::kInvalidArgument, "no subject given or configured");
  return cfg.subjects.front();
}

std::vector<tutor::Document> corpus(const tutor::Config& cfg, const std::string& subject) {
  auto docs = tutor::DocumentStore(cfg.corpus_dir(), subject).load();
  if (docs.empty()) throw tutor::Error(tutor::ErrorCode::kNotFound, "empty corpus for subject '" + subject + "'");
  return docs;
}

void emit(bool as_json, const json& j, const std::string& human) {
  if (as_json) {
    std::cout << j.dump(2) << '\n';
  } else {
    std::cout << human;
  }
}

std::function<void()> g_stop;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Concept extraction, answer grading and question recommendation"};
  app.require_subcommand(1);
  std::string config_path;
  bool as_json = false;
  app.add_option("--config", config_path, "deployment config (JSON)")->check(CLI::ExistingFile);
  app.add_flag("--json", as_json, "machine-readable output on stdout");

  std::string subject, seeds_file, file, question_id, transcript_file;
  std::size_t depth = 2, max_pages = 200;
  unsigned workers = 0;

  auto* crawl = app.add_subcommand("crawl", "crawl seed URLs into the subject corpus");
  crawl->add_option("--subject", subject, "subject key")->required();
  crawl->add_option("--seeds", seeds_file, "file with one seed URL per line (default: data/seeds/<subject>.txt)");
  crawl->add_option("--depth", depth, "maximum link depth")->capture_default_str();
  crawl->add_option("--max-pages", max_pages, "page request budget")->capture_default_str()->check(CLI::PositiveNumber);
  crawl->add_option("--workers", workers, "concurrent fetchers (default from config)");

  auto* index = app.add_subcommand("index", "subject index maintenance");
  index->require_subcommand(1);
  auto* index_build = index->add_subcommand("build", "build the tf-idf index from the corpus");
  index_build->add_option("--subject", subject, "subject key")->required();
  index_build->add_option("--workers", workers, "partitions for df counting");

  auto* train = app.add_subcommand("train", "train the paragraph-vector model on the corpus");
  train->add_option("--subject", subject, "subject key")->required();

  auto* concepts = app.add_subcommand("concepts", "concept extraction");
  concepts->require_subcommand(1);
  auto* concepts_extract = concepts->add_subcommand("extract", "print the scored concept list of a source file");
  concepts_extract->add_option("--file", file, "source text")->required()->check(CLI::ExistingFile);
  concepts_extract->add_option("--subject", subject, "subject key (default: first configured)");

  auto* grade = app.add_subcommand("grade", "grade a transcript against a stored question");
  grade->add_option("--question-id", question_id, "question id")->required();
  grade->add_option("--transcript-file", transcript_file, "answer transcript")->required()->check(CLI::ExistingFile);

  auto* serve = app.add_subcommand("serve", "run the HTTP API");

  // The global flags are accepted after the subcommand as well.
  for (auto* sub : {crawl, index_build, train, concepts_extract, grade, serve}) {
    sub->add_option("--config", config_path, "deployment config (JSON)")->check(CLI::ExistingFile);
    sub->add_flag("--json", as_json, "machine-readable output on stdout");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kUsageError;
  }

  try {
    auto cfg = load(config_path);

    if (crawl->parsed()) {
      tutor::CrawlJob job;
      job.seeds = read_seeds(seeds_file.empty() ? cfg.seeds_path(subject) : fs::path(seeds_file));
      job.max_depth = depth;
      job.max_pages = max_pages;
      job.politeness = cfg.politeness;
      job.timeout = cfg.fetch_timeout;
      job.workers = workers ? workers : cfg.crawl_workers;
      tutor::DocumentStore store(cfg.corpus_dir(), subject);
      tutor::HttpFetcher fetcher;
      std::cerr << "crawling " << job.seeds.size() << " seed(s) for " << subject << '\n';
      auto r = tutor::crawl(job, fetcher, store);
      json errors = json::array();
      for (const auto& e : r.errors) errors.push_back({{"url", e.url}, {"message", e.message}});
      emit(as_json,
           {{"subject", subject}, {"fetched", r.fetched}, {"skipped", r.skipped}, {"errors", errors},
            {"new_documents", r.documents.size()}, {"corpus_size", store.size()}, {"corpus", store.path().string()}},
           std::to_string(r.fetched) + " fetched, " + std::to_string(r.skipped) + " skipped, " +
               std::to_string(r.errors.size()) + " errors, " + std::to_string(r.documents.size()) +
               " new documents -> " + store.path().string() + "\n");
      for (const auto& e : r.errors) std::cerr << "  " << e.url << ": " << e.message << '\n';
      return 0;
    }

    if (index_build->parsed()) {
      auto docs = corpus(cfg, subject);
      std::cerr << "indexing " << docs.size() << " documents\n";
      auto idx = tutor::build_index(docs, workers ? workers : 1);
      auto path = cfg.index_path(subject);
      fs::create_directories(path.parent_path());
      tutor::save_index(idx, path);
      emit(as_json, {{"subject", subject}, {"n_docs", idx.n_docs}, {"terms", idx.vocab_size()}, {"path", path.string()}},
           std::to_string(idx.n_docs) + " documents, " + std::to_string(idx.vocab_size()) + " terms -> " +
               path.string() + "\n");
      return 0;
    }

    if (train->parsed()) {
      auto docs = corpus(cfg, subject);
      std::vector<std::vector<std::string>> stems;
      for (const auto& d : docs) stems.push_back(tutor::document_stems(d));
      std::cerr << "training on " << docs.size() << " documents, " << cfg.embeddings.epochs << " epochs\n";
      auto model = tutor::train(stems, cfg.embeddings);
      auto path = cfg.model_path(subject);
      fs::create_directories(path.parent_path());
      tutor::save_model(model, path);
      auto version = tutor::model_version(model);
      emit(as_json,
           {{"subject", subject}, {"model_version", version}, {"vocab", model.vocab_size()}, {"dim", model.dim()},
            {"path", path.string()}},
           "vocab " + std::to_string(model.vocab_size()) + ", version " + version + " -> " + path.string() + "\n");
      return 0;
    }

    if (concepts_extract->parsed()) {
      auto s = pick_subject(cfg, subject);
      auto idx = tutor::load_index(cfg.index_path(s));
      tutor::Gazetteer gaz;
      if (fs::exists(cfg.gazetteer_path(s))) gaz = tutor::Gazetteer::load(cfg.gazetteer_path(s));
      std::vector<tutor::Document> src{tutor::Document::make("file:" + file, s, read_text(file))};
      auto list = tutor::build_concept_list(src, idx, gaz, cfg.scoring);
      std::ostringstream human;
      for (const auto& c : list) {
        human << c.score << '\t' << c.display << (c.in_kc ? "\tKC" : "\t") << (c.in_ne ? "\tNE" : "") << '\n';
      }
      emit(as_json, list, human.str());
      return 0;
    }

    if (grade->parsed()) {
      tutor::Service svc(cfg, nullptr);
      auto q = svc.get_question(question_id);
      auto r = svc.grade(q, read_text(transcript_file));
      std::ostringstream human;
      human << "score " << r.total_score << " / " << r.max_score << " (" << r.normalized << ")\n";
      for (const auto& m : r.matched) human << "  + " << m.concept_score.display << '\n';
      emit(as_json, r, human.str());
      return 0;
    }

    if (serve->parsed()) {
      tutor::Service svc(cfg, std::make_shared<tutor::HttpFetcher>());
      auto creds = tutor::Credentials::load(cfg.credentials_path);
      httplib::Server server;
      tutor::install_routes(server, svc, creds);
      g_stop = [&server] { server.stop(); };
      std::signal(SIGINT, [](int) { g_stop(); });
      std::signal(SIGTERM, [](int) { g_stop(); });
      int port = cfg.port;
      if (port == 0) {
        port = server.bind_to_any_port(cfg.host);
      } else if (!server.bind_to_port(cfg.host, port)) {
        throw tutor::Error(tutor::ErrorCode::kUnavailable, "cannot listen on " + cfg.host + ":" + std::to_string(port));
      }
      std::cerr << "listening on " << cfg.host << ":" << port << " (" << svc.resources()->subjects.size()
                << " subjects)" << std::endl;
      if (as_json) std::cout << json{{"host", cfg.host}, {"port", port}}.dump() << std::endl;
      server.listen_after_bind();
      return 0;
    }
  } catch (const tutor::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDomainError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDomainError;
  }
  return kUsageError;
}
