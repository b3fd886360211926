#pragma once

#include <sqlite3.h>

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tutor/error.hpp"

namespace tutor {

// Ordered string key-value store in a single SQLite file. One connection,
// serialized by a recursive mutex so a transaction body may call back in.
class KvStore {
 public:
  // ":memory:" opens a private in-memory database.
  explicit KvStore(const std::filesystem::path& path) {
    if (path != ":memory:" && path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    if (sqlite3_open_v2(path.c_str(), &db_, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_NOMUTEX,
                        nullptr) != SQLITE_OK) {
      std::string msg = db_ ? sqlite3_errmsg(db_) : "out of memory";
      sqlite3_close(db_);
      throw Error(ErrorCode::kIo, "cannot open store " + path.string() + ": " + msg);
    }
    sqlite3_busy_timeout(db_, 5000);
    exec("PRAGMA journal_mode=WAL");
    exec("PRAGMA synchronous=NORMAL");
    exec("CREATE TABLE IF NOT EXISTS kv (key TEXT PRIMARY KEY, value BLOB NOT NULL) WITHOUT ROWID");
  }

  ~KvStore() { sqlite3_close(db_); }

  KvStore(const KvStore&) = delete;
  KvStore& operator=(const KvStore&) = delete;

  std::optional<std::string> get(std::string_view key) const {
    std::lock_guard lock(mu_);
    Statement st(db_, "SELECT value FROM kv WHERE key = ?1");
    st.bind(1, key);
    if (!st.step()) return std::nullopt;
    return st.column(0);
  }

  void put(std::string_view key, std::string_view value) {
    std::lock_guard lock(mu_);
    Statement st(db_, "INSERT INTO kv (key, value) VALUES (?1, ?2) "
                      "ON CONFLICT(key) DO UPDATE SET value = excluded.value");
    st.bind(1, key);
    st.bind(2, value);
    st.step();
  }

  bool erase(std::string_view key) {
    std::lock_guard lock(mu_);
    Statement st(db_, "DELETE FROM kv WHERE key = ?1");
    st.bind(1, key);
    st.step();
    return sqlite3_changes(db_) > 0;
  }

  // All entries whose key starts with `prefix`, in key order.
  std::vector<std::pair<std::string, std::string>> scan(std::string_view prefix) const {
    std::lock_guard lock(mu_);
    Statement st(db_, "SELECT key, value FROM kv WHERE substr(key, 1, length(?1)) = ?1 ORDER BY key");
    st.bind(1, prefix);
    std::vector<std::pair<std::string, std::string>> out;
    while (st.step()) out.emplace_back(st.column(0), st.column(1));
    return out;
  }

  // Runs `body` atomically; any exception rolls back and propagates.
  template <typename F>
  decltype(auto) transaction(F&& body) {
    std::lock_guard lock(mu_);
    if (depth_ > 0) return body();
    exec("BEGIN IMMEDIATE");
    ++depth_;
    try {
      if constexpr (std::is_void_v<decltype(body())>) {
        body();
        --depth_;
        exec("COMMIT");
      } else {
        auto result = body();
        --depth_;
        exec("COMMIT");
        return result;
      }
    } catch (...) {
      depth_ = 0;
      sqlite3_exec(db_, "ROLLBACK", nullptr, nullptr, nullptr);
      throw;
    }
  }

  // Monotonic counter stored under `seq/<name>`; the first value is 1.
  std::uint64_t next_sequence(std::string_view name) {
    return transaction([&] {
      std::string key = "seq/" + std::string(name);
      std::uint64_t v = 0;
      if (auto cur = get(key)) v = std::stoull(*cur);
      put(key, std::to_string(++v));
      return v;
    });
  }

 private:
  class Statement {
   public:
    Statement(sqlite3* db, const char* sql) : db_(db) {
      if (sqlite3_prepare_v2(db, sql, -1, &st_, nullptr) != SQLITE_OK) fail();
    }
    ~Statement() { sqlite3_finalize(st_); }

    void bind(int i, std::string_view v) {
      if (sqlite3_bind_blob(st_, i, v.data(), static_cast<int>(v.size()), SQLITE_TRANSIENT) != SQLITE_OK) fail();
    }

    bool step() {
      int rc = sqlite3_step(st_);
      if (rc == SQLITE_ROW) return true;
      if (rc != SQLITE_DONE) fail();
      return false;
    }

    std::string column(int i) const {
      auto* p = static_cast<const char*>(sqlite3_column_blob(st_, i));
      return p ? std::string(p, static_cast<std::size_t>(sqlite3_column_bytes(st_, i))) : std::string();
    }

   private:
    [[noreturn]] void fail() const { throw Error(ErrorCode::kIo, std::string("store: ") + sqlite3_errmsg(db_)); }

    sqlite3* db_;
    sqlite3_stmt* st_ = nullptr;
  };

  void exec(const char* sql) {
    char* err = nullptr;
    if (sqlite3_exec(db_, sql, nullptr, nullptr, &err) != SQLITE_OK) {
      std::string msg = err ? err : "unknown error";
      sqlite3_free(err);
      throw Error(ErrorCode::kIo, "store: " + msg);
    }
  }

  sqlite3* db_ = nullptr;
  mutable std::recursive_mutex mu_;
  int depth_ = 0;
};

}  // namespace tutor
