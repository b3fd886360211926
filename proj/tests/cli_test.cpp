#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>

#include <gtest/gtest.h>

#include "deployment.hpp"
#include "site_server.hpp"
#include "tutor/http_api.hpp"

extern char** environ;

using namespace tutor;
using namespace tutor::testing;
using nlohmann::json;

namespace {

struct Run {
  int status;
  std::string out;
  std::string err;
};

std::string quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return q + "'";
}

Run run_cli(const std::vector<std::string>& args, const std::filesystem::path& scratch) {
  std::string cmd = quote(TUTOR_CLI);
  for (const auto& a : args) cmd += " " + quote(a);
  auto out = scratch / "stdout.txt", err = scratch / "stderr.txt";
  cmd += " >" + quote(out.string()) + " 2>" + quote(err.string());
  int raw = std::system(cmd.c_str());
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, read_file(out), read_file(err)};
}

// Writes a config file describing the deployment and returns its path.
std::filesystem::path write_config(const Deployment& d) {
  auto p = d.root / "tutor.json";
  std::ofstream(p) << json{{"data_dir", "data"},
                           {"store", "tutor.db"},
                           {"credentials", "credentials.json"},
                           {"subjects", {"us-history"}},
                           {"embeddings", {{"dim", 16}, {"epochs", 30}, {"min_count", 1}, {"seed", 7}}},
                           {"crawl", {{"politeness_ms", 0}, {"timeout_ms", 2000}}},
                           {"listen", {{"host", "127.0.0.1"}, {"port", 0}}}}
                          .dump(2);
  return p;
}

void seed_corpus(const Deployment& d) {
  DocumentStore store(d.cfg.corpus_dir(), "us-history");
  for (const char* f : {"revolution_source.txt", "washington_source.txt", "history_paragraph.txt", "wiki_sample.txt"})
    store.add(Document::make(std::string("file:") + f, "us-history", read_file(fixture_path(f))));
}

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
  Deployment d("cli_usage");
  for (const auto& args : std::vector<std::vector<std::string>>{
           {"index", "build", "--subject", "us-history", "--bogus"},
           {"--frobnicate", "train", "--subject", "us-history"},
           {"grade", "--question-id", "q1"},
           {"index"},
           {},
           {"teleport"},
           {"crawl", "--subject", "s", "--max-pages", "0"},
           {"--config", (d.root / "missing.json").string(), "train", "--subject", "us-history"}}) {
    auto r = run_cli(args, d.root);
    EXPECT_EQ(r.status, 2) << ::testing::PrintToString(args);
    EXPECT_NE(r.err.find("Usage:"), std::string::npos) << r.err;
    EXPECT_TRUE(r.out.empty());
  }
  EXPECT_EQ(run_cli({"--help"}, d.root).status, 0);
}

TEST(Cli, DomainErrorsExitOne) {
  Deployment d("cli_domain");
  auto cfg = write_config(d).string();
  auto transcript = d.root / "t.txt";
  std::ofstream(transcript) << "Washington";
  auto r = run_cli({"--config", cfg, "grade", "--question-id", "q999999", "--transcript-file", transcript.string()},
                   d.root);
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.err.find("no question q999999"), std::string::npos);
  EXPECT_EQ(run_cli({"--config", cfg, "index", "build", "--subject", "empty-subject"}, d.root).status, 1);
  std::ofstream(d.root / "bad.json") << R"({"alpha": -1})";
  EXPECT_EQ(run_cli({"--config", (d.root / "bad.json").string(), "train", "--subject", "x"}, d.root).status, 1);
}

TEST(Cli, IndexBuildWritesTheIndex) {
  Deployment d("cli_index");
  seed_corpus(d);
  std::filesystem::remove(d.cfg.index_path("us-history"));
  auto r = run_cli({"--config", write_config(d).string(), "index", "build", "--subject", "us-history", "--json"}, d.root);
  ASSERT_EQ(r.status, 0) << r.err;
  auto out = json::parse(r.out);
  EXPECT_EQ(out.at("n_docs"), 4);
  auto built = load_index(d.cfg.index_path("us-history"));
  auto expected = build_index(DocumentStore(d.cfg.corpus_dir(), "us-history").load());
  EXPECT_EQ(built.n_docs, expected.n_docs);
  EXPECT_EQ(built.df, expected.df);
  EXPECT_EQ(out.at("terms"), expected.vocab_size());
}

TEST(Cli, TrainWritesALoadableModel) {
  Deployment d("cli_train", /*with_model=*/false);
  seed_corpus(d);
  auto r = run_cli({"train", "--subject", "us-history", "--config", write_config(d).string(), "--json"}, d.root);
  ASSERT_EQ(r.status, 0) << r.err;
  auto model = load_model(d.cfg.model_path("us-history"));
  EXPECT_EQ(json::parse(r.out).at("model_version"), model_version(model));
  EXPECT_EQ(model.dim(), 16u);
}

TEST(Cli, ConceptsExtractMatchesLibrary) {
  Deployment d("cli_concepts");
  auto src = fixture_path("washington_source.txt");
  auto r = run_cli({"--config", write_config(d).string(), "--json", "concepts", "extract", "--file", src.string()},
                   d.root);
  ASSERT_EQ(r.status, 0) << r.err;
  std::vector<Document> docs{Document::make("x", "us-history", read_file(src))};
  auto expected = build_concept_list(docs, load_index(d.cfg.index_path("us-history")),
                                     Gazetteer::load(d.cfg.gazetteer_path("us-history")));
  EXPECT_EQ(json::parse(r.out), json(expected));
  auto human = run_cli({"--config", write_config(d).string(), "concepts", "extract", "--file", src.string()}, d.root);
  EXPECT_NE(human.out.find("Delaware River"), std::string::npos);
}

TEST(Cli, CrawlFillsTheCorpus) {
  SiteServer site(std::string(TUTOR_FIXTURES) + "/site");
  Deployment d("cli_crawl");
  auto seeds = d.root / "seeds.txt";
  std::ofstream(seeds) << "# demo\n" << site.url("/index.html") << "\n";
  auto r = run_cli({"--config", write_config(d).string(), "crawl", "--subject", "us-history", "--seeds",
                    seeds.string(), "--depth", "1", "--max-pages", "50", "--json"},
                   d.root);
  ASSERT_EQ(r.status, 0) << r.err;
  auto out = json::parse(r.out);
  EXPECT_EQ(out.at("fetched"), 6);
  EXPECT_EQ(out.at("new_documents"), 6);
  EXPECT_EQ(DocumentStore(d.cfg.corpus_dir(), "us-history").load().size(), 6u);
  for (const auto& h : site.hits()) EXPECT_EQ(h.user_agent, kUserAgent);
}

// CLI grading and the HTTP answer endpoint share one grading path.
TEST(Cli, GradeMatchesServiceEndpoint) {
  Deployment d("cli_grade");
  auto cfg = write_config(d).string();
  std::string qid, cid;
  const std::string transcript = "He led the Continental Army across the river and attacked Trenton in December.";
  {
    Service svc(d.cfg, nullptr);
    cid = svc.create_class(kAlice, "P", "us-history", {"bob"}).id;
    qid = svc.create_question(kAlice, cid, "Why did Washington cross the Delaware?", two_sources()).question.id;
    svc.approve(kAlice, qid);
  }
  std::ofstream(d.root / "answer.txt") << transcript;
  auto r = run_cli({"--config", cfg, "grade", "--question-id", qid, "--transcript-file", (d.root / "answer.txt").string(),
                    "--json"},
                   d.root);
  ASSERT_EQ(r.status, 0) << r.err;
  auto cli = json::parse(r.out);

  Service svc(d.cfg, nullptr);
  auto creds = Credentials::load(d.cfg.credentials_path);
  httplib::Server server;
  install_routes(server, svc, creds);
  int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client client("127.0.0.1", port);
  auto res = client.Post("/questions/" + qid + "/answers", {{"Authorization", "Bearer student-bob-token"}},
                         json{{"transcript", transcript}}.dump(), "application/json");
  server.stop();
  t.join();
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 200);
  auto api = json::parse(res->body).at("result");
  EXPECT_EQ(cli, api);
  EXPECT_GT(cli.at("matched").size(), 2u);
}

TEST(Cli, ServeAnswersAndStopsOnSigterm) {
  Deployment d("cli_serve");
  auto cfg = write_config(d).string();
  int pipefd[2];
  ASSERT_EQ(pipe(pipefd), 0);
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, pipefd[1], STDOUT_FILENO);
  posix_spawn_file_actions_addclose(&actions, pipefd[0]);
  std::vector<std::string> args = {TUTOR_CLI, "--config", cfg, "--json", "serve"};
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);
  pid_t pid = 0;
  ASSERT_EQ(posix_spawn(&pid, TUTOR_CLI, &actions, nullptr, argv.data(), environ), 0);
  posix_spawn_file_actions_destroy(&actions);
  close(pipefd[1]);
  FILE* out = fdopen(pipefd[0], "r");
  char line[256] = {};
  ASSERT_TRUE(std::fgets(line, sizeof line, out));
  int port = json::parse(line).at("port");

  httplib::Client client("127.0.0.1", port);
  auto res = client.Post("/classes", {{"Authorization", "Bearer teacher-alice-token"}},
                         json{{"name", "P"}, {"subject", "us-history"}}.dump(), "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 201);
  auto denied = client.Get("/classes/c000001/stats");
  ASSERT_TRUE(denied);
  EXPECT_EQ(denied->status, 401);

  kill(pid, SIGTERM);
  int status = 0;
  waitpid(pid, &status, 0);
  std::fclose(out);
  EXPECT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), 0);
}
