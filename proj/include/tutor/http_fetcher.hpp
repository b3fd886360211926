#pragma once

#include <chrono>
#include <string>

#include "httplib.h"
#include "tutor/crawler.hpp"

namespace tutor {

// Fetcher over cpp-httplib; follows redirects and caps the body size.
class HttpFetcher final : public Fetcher {
 public:
  explicit HttpFetcher(std::string user_agent = std::string(kUserAgent),
                       std::size_t max_body = 8u << 20)
      : user_agent_(std::move(user_agent)), max_body_(max_body) {}

  FetchResponse fetch(const Url& url, std::chrono::milliseconds timeout) override {
    httplib::Client client(url.origin());
    client.set_follow_location(true);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    FetchResponse out;
    bool too_big = false;
    auto res = client.Get(
        url.path_and_query(), httplib::Headers{{"User-Agent", user_agent_}},
        [&](const char* data, std::size_t len) {
          if (out.body.size() + len > max_body_) {
            too_big = true;
            return false;
          }
          out.body.append(data, len);
          return true;
        });
    if (too_big) {
      out.error = "response larger than " + std::to_string(max_body_) + " bytes";
      return out;
    }
    if (!res) {
      out.error = httplib::to_string(res.error());
      return out;
    }
    out.status = res->status;
    out.content_type = res->get_header_value("Content-Type");
    return out;
  }

 private:
  std::string user_agent_;
  std::size_t max_body_;
};

}  // namespace tutor
