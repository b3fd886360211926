#pragma once

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <openssl/evp.h>

#include "json.hpp"
#include "tutor/error.hpp"

namespace tutor {

// Lowercase hex SHA-256 of the given bytes.
inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::kInternal, "sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

inline std::string utc_timestamp(std::chrono::system_clock::time_point tp =
                                     std::chrono::system_clock::now()) {
  std::time_t t = std::chrono::system_clock::to_time_t(tp);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Document {
  std::string id;  // sha256_hex(raw_text)
  std::string url;
  std::string subject;
  std::string raw_text;
  std::string fetched_at;

  static Document make(std::string url, std::string subject, std::string raw_text,
                       std::string fetched_at = utc_timestamp()) {
    Document d;
    d.id = sha256_hex(raw_text);
    d.url = std::move(url);
    d.subject = std::move(subject);
    d.raw_text = std::move(raw_text);
    d.fetched_at = std::move(fetched_at);
    return d;
  }

  friend bool operator==(const Document&, const Document&) = default;
};

inline void to_json(nlohmann::json& j, const Document& d) {
  j = nlohmann::json{{"id", d.id},
                     {"url", d.url},
                     {"subject", d.subject},
                     {"raw_text", d.raw_text},
                     {"fetched_at", d.fetched_at}};
}

inline void from_json(const nlohmann::json& j, Document& d) {
  j.at("id").get_to(d.id);
  j.at("url").get_to(d.url);
  j.at("subject").get_to(d.subject);
  j.at("raw_text").get_to(d.raw_text);
  j.at("fetched_at").get_to(d.fetched_at);
}

inline std::vector<Document> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<Document> docs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      docs.push_back(nlohmann::json::parse(line).get<Document>());
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kIo,
                  path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return docs;
}

// Append-only corpus file `<dir>/<subject>.jsonl`, deduplicated by
// document id. Writes are serialized.
class DocumentStore {
 public:
  DocumentStore(std::filesystem::path dir, std::string subject)
      : path_(std::move(dir) / (subject + ".jsonl")), subject_(std::move(subject)) {
    std::filesystem::create_directories(path_.parent_path());
    if (std::filesystem::exists(path_)) {
      for (auto& d : read_jsonl(path_)) ids_.insert(d.id);
    }
  }

  const std::filesystem::path& path() const { return path_; }
  const std::string& subject() const { return subject_; }

  // Returns false when a document with the same content is already stored.
  bool add(const Document& doc) {
    std::lock_guard lock(mu_);
    if (!ids_.insert(doc.id).second) return false;
    std::ofstream out(path_, std::ios::app);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + path_.string());
    out << nlohmann::json(doc).dump() << '\n';
    return true;
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return ids_.size();
  }

  std::vector<Document> load() const {
    std::lock_guard lock(mu_);
    if (!std::filesystem::exists(path_)) return {};
    return read_jsonl(path_);
  }

 private:
  std::filesystem::path path_;
  std::string subject_;
  mutable std::mutex mu_;
  std::unordered_set<std::string> ids_;
};

}  // namespace tutor
