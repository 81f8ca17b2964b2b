#pragma once

// Live fetcher over cpp-httplib. Kept out of crawler.hpp so offline users do
// not pull in the socket layer.

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "linktopo/crawler.hpp"
#include "linktopo/url.hpp"

namespace linktopo {

/// True when `path` may be fetched under the "User-agent: *" (or `agent`)
/// group of a robots.txt body. Longest matching rule wins; Allow beats
/// Disallow on ties.
inline bool robots_allows(std::string_view robots_txt, std::string_view path, std::string_view agent = "linktopo") {
  struct Rule {
    bool allow;
    std::string prefix;
  };
  std::vector<Rule> star, mine;
  std::vector<Rule>* current = nullptr;
  bool in_agent_block = false;
  std::istringstream in{std::string(robots_txt)};
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    auto key = detail::to_lower(detail::trim(std::string_view(line).substr(0, colon)));
    auto value = std::string(detail::trim(std::string_view(line).substr(colon + 1)));
    if (key == "user-agent") {
      if (!in_agent_block) current = nullptr;
      in_agent_block = true;
      auto v = detail::to_lower(value);
      if (v == "*") current = &star;
      else if (!agent.empty() && v.find(detail::to_lower(agent)) != std::string::npos) current = &mine;
      continue;
    }
    in_agent_block = false;
    if (!current) continue;
    if (key == "disallow" && !value.empty()) current->push_back({false, value});
    else if (key == "allow" && !value.empty()) current->push_back({true, value});
  }
  const auto& rules = mine.empty() ? star : mine;
  const Rule* best = nullptr;
  for (const auto& r : rules) {
    if (path.substr(0, r.prefix.size()) != r.prefix) continue;
    if (!best || r.prefix.size() > best->prefix.size() || (r.prefix.size() == best->prefix.size() && r.allow))
      best = &r;
  }
  return !best || best->allow;
}

class HttpFetcher : public Fetcher {
 public:
  explicit HttpFetcher(std::chrono::milliseconds politeness_delay, bool respect_robots = true,
                       std::string user_agent = "linktopo/1.0")
      : delay_(politeness_delay), robots_(respect_robots), agent_(std::move(user_agent)) {}

  FetchResult fetch(const std::string& url, std::chrono::milliseconds timeout) override {
    FetchResult r;
    r.final_url = url;
    std::string current = url;
    for (int hop = 0; hop < 5; ++hop) {
      auto parsed = detail::parse_absolute(current);
      if (!parsed) {
        r.status = FetchStatus::http_error(0);
        return r;
      }
      if (robots_ && !allowed_by_robots(*parsed, timeout)) {
        r.status = FetchStatus::skipped();
        return r;
      }
      auto res = get(*parsed, parsed->path + (parsed->has_query ? "?" + parsed->query : ""), timeout);
      r.fetched_at = now_utc();
      if (!res.ok) {
        r.status = res.timed_out ? FetchStatus::timeout() : FetchStatus::http_error(0);
        return r;
      }
      if (res.status >= 300 && res.status < 400 && !res.location.empty()) {
        try {
          current = normalize_url(res.location, current);
        } catch (const Error&) {
          r.status = FetchStatus::http_error(res.status);
          return r;
        }
        r.final_url = current;
        continue;
      }
      if (res.status != 200) {
        r.status = FetchStatus::http_error(res.status);
        return r;
      }
      if (!res.content_type.empty() && res.content_type.find("html") == std::string::npos &&
          res.content_type.find("text/plain") == std::string::npos) {
        r.status = FetchStatus::parse_error();
        return r;
      }
      r.status = FetchStatus::ok();
      r.body = std::move(res.body);
      return r;
    }
    r.status = FetchStatus::http_error(310);
    return r;
  }

 private:
  struct Response {
    bool ok = false;
    bool timed_out = false;
    int status = 0;
    std::string body, location, content_type;
  };

  struct HostState {
    std::mutex mu;  // serializes requests to one host
    std::chrono::steady_clock::time_point next_allowed{};
    bool robots_loaded = false;
    std::string robots;
  };

  HostState& host_state(const std::string& key) {
    std::lock_guard lock(mu_);
    auto& p = hosts_[key];
    if (!p) p = std::make_unique<HostState>();
    return *p;
  }

  Response get(const Url& u, const std::string& target, std::chrono::milliseconds timeout) {
    auto origin = u.scheme + "://" + u.host + (u.port.empty() ? "" : ":" + u.port);
    auto& hs = host_state(origin);
    std::lock_guard lock(hs.mu);
    std::this_thread::sleep_until(hs.next_allowed);
    Response out;
    auto start = std::chrono::steady_clock::now();
    try {
      httplib::Client cli(origin);
      auto secs = timeout.count() / 1000;
      auto usecs = (timeout.count() % 1000) * 1000;
      cli.set_connection_timeout(secs, usecs);
      cli.set_read_timeout(secs, usecs);
      cli.set_write_timeout(secs, usecs);
      cli.set_follow_location(false);
      auto res = cli.Get(target, {{"User-Agent", agent_}});
      if (res) {
        out.ok = true;
        out.status = res->status;
        out.body = std::move(res->body);
        out.location = res->get_header_value("Location");
        out.content_type = res->get_header_value("Content-Type");
      } else {
        auto err = res.error();
        auto elapsed = std::chrono::steady_clock::now() - start;
        out.timed_out = err == httplib::Error::ConnectionTimeout ||
                        (err == httplib::Error::Read && elapsed >= timeout * 9 / 10);
      }
    } catch (const std::exception&) {
    }
    hs.next_allowed = std::chrono::steady_clock::now() + delay_;
    return out;
  }

  bool allowed_by_robots(const Url& u, std::chrono::milliseconds timeout) {
    auto origin = u.scheme + "://" + u.host + (u.port.empty() ? "" : ":" + u.port);
    auto& hs = host_state(origin);
    {
      std::lock_guard lock(robots_mu_);
      if (hs.robots_loaded) return robots_allows(hs.robots, u.path, "linktopo");
    }
    auto res = get(u, "/robots.txt", timeout);
    std::lock_guard lock(robots_mu_);
    hs.robots_loaded = true;
    if (res.ok && res.status == 200) hs.robots = res.body;
    return robots_allows(hs.robots, u.path, "linktopo");
  }

  std::chrono::milliseconds delay_;
  bool robots_;
  std::string agent_;
  std::mutex mu_, robots_mu_;
  std::map<std::string, std::unique_ptr<HostState>> hosts_;
};

}  // namespace linktopo
