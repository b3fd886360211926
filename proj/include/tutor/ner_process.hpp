#pragma once

#include <csignal>
#include <cstdio>
#include <mutex>
#include <string>
#include <vector>

#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include "json.hpp"
#include "tutor/ner.hpp"

namespace tutor {

// NER backend that talks to a long-running child process over a line
// protocol. For every sentence one JSON object is written to the child's
// stdin:
//   {"sentence_index": 0, "tokens": ["George", "Washington", "crossed"]}
// and one JSON array is read back from its stdout:
//   [{"start": 0, "end": 2, "label": "PERSON"}]
// Calls are serialized; the child sees one request at a time.
class ExternalNerBackend final : public NerBackend {
 public:
  explicit ExternalNerBackend(std::vector<std::string> argv, std::string name = "external")
      : name_(std::move(name)) {
    if (argv.empty()) throw Error(ErrorCode::kInvalidArgument, "empty backend command");
    std::signal(SIGPIPE, SIG_IGN);
    int to_child[2];
    int from_child[2];
    if (pipe(to_child) != 0) throw Error(ErrorCode::kIo, "pipe failed");
    if (pipe(from_child) != 0) {
      close(to_child[0]);
      close(to_child[1]);
      throw Error(ErrorCode::kIo, "pipe failed");
    }
    pid_ = fork();
    if (pid_ < 0) throw Error(ErrorCode::kIo, "fork failed");
    if (pid_ == 0) {
      dup2(to_child[0], STDIN_FILENO);
      dup2(from_child[1], STDOUT_FILENO);
      close(to_child[0]);
      close(to_child[1]);
      close(from_child[0]);
      close(from_child[1]);
      std::vector<char*> args;
      for (auto& a : argv) args.push_back(a.data());
      args.push_back(nullptr);
      execvp(args[0], args.data());
      _exit(127);
    }
    close(to_child[0]);
    close(from_child[1]);
    in_ = fdopen(to_child[1], "w");
    out_ = fdopen(from_child[0], "r");
    if (in_ == nullptr || out_ == nullptr) throw Error(ErrorCode::kIo, "fdopen failed");
  }

  ExternalNerBackend(const ExternalNerBackend&) = delete;
  ExternalNerBackend& operator=(const ExternalNerBackend&) = delete;

  ~ExternalNerBackend() override {
    if (in_) std::fclose(in_);
    if (out_) std::fclose(out_);
    if (pid_ > 0) {
      int status = 0;
      waitpid(pid_, &status, 0);
    }
  }

  std::vector<EntitySpan> recognize(const TokenizedText& text) const override {
    std::lock_guard lock(mu_);
    std::vector<EntitySpan> out;
    for (std::size_t si = 0; si < text.sentences.size(); ++si) {
      const auto& sentence = text.sentences[si];
      nlohmann::json request;
      request["sentence_index"] = si;
      request["tokens"] = nlohmann::json::array();
      for (const auto& t : sentence) request["tokens"].push_back(t.cased);
      std::string line = request.dump() + "\n";
      if (std::fputs(line.c_str(), in_) < 0 || std::fflush(in_) != 0) {
        throw Error(ErrorCode::kIo, name_ + ": backend closed its input");
      }
      std::string reply = read_line();
      nlohmann::json spans;
      try {
        spans = nlohmann::json::parse(reply);
      } catch (const nlohmann::json::exception&) {
        throw Error(ErrorCode::kIo, name_ + ": malformed reply: " + reply);
      }
      if (!spans.is_array()) throw Error(ErrorCode::kIo, name_ + ": reply is not a list");
      std::vector<EntitySpan> candidates;
      for (const auto& s : spans) {
        EntitySpan span;
        span.sentence_index = si;
        span.start = s.at("start").get<std::size_t>();
        span.end = s.at("end").get<std::size_t>();
        auto label = parse_label(s.value("label", std::string("OTHER")));
        span.label = label.value_or(EntityLabel::kOther);
        span.source_backend = name_;
        if (span.start >= span.end || span.end > sentence.size()) {
          throw Error(ErrorCode::kIo, name_ + ": span out of range");
        }
        candidates.push_back(span);
      }
      std::vector<bool> covered(sentence.size(), false);
      auto accepted = detail::resolve_overlaps(std::move(candidates), covered);
      std::sort(accepted.begin(), accepted.end(),
                [](const auto& a, const auto& b) { return a.start < b.start; });
      out.insert(out.end(), accepted.begin(), accepted.end());
    }
    return out;
  }

  std::string name() const override { return name_; }
  bool concurrent() const override { return false; }

 private:
  std::string read_line() const {
    std::string line;
    int c;
    while ((c = std::fgetc(out_)) != EOF) {
      if (c == '\n') return line;
      line += static_cast<char>(c);
    }
    throw Error(ErrorCode::kIo, name_ + ": backend exited");
  }

  std::string name_;
  pid_t pid_ = -1;
  FILE* in_ = nullptr;
  FILE* out_ = nullptr;
  mutable std::mutex mu_;
};

}  // namespace tutor
