#pragma once

#include <array>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <string>
#include <string_view>
#include <system_error>

#include "linktopo/error.hpp"

namespace linktopo {

inline constexpr std::string_view kToolVersion = "linktopo 1.0.0";

using Timestamp = std::chrono::sys_seconds;

/// ISO-8601 UTC, second resolution: "2001-06-30T12:00:00Z".
inline std::string format_iso8601(Timestamp t) {
  std::time_t tt = t.time_since_epoch().count();
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline Timestamp parse_iso8601(std::string_view s) {
  int y, mo, d, h, mi, sec;
  std::string tmp(s);
  if (std::sscanf(tmp.c_str(), "%4d-%2d-%2dT%2d:%2d:%2dZ", &y, &mo, &d, &h, &mi, &sec) != 6)
    throw Error(ErrorKind::StoreFormat, "bad timestamp '" + tmp + "'");
  using namespace std::chrono;
  auto days = sys_days{year{y} / month{static_cast<unsigned>(mo)} / day{static_cast<unsigned>(d)}};
  return Timestamp{days} + hours{h} + minutes{mi} + seconds{sec};
}

inline Timestamp now_utc() {
  return std::chrono::time_point_cast<std::chrono::seconds>(std::chrono::system_clock::now());
}

/// Shortest round-trip decimal form of a double.
inline std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

inline double parse_double(std::string_view s) {
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw Error(ErrorKind::InvalidArgument, "not a number: '" + std::string(s) + "'");
  return v;
}

/// 64-bit FNV-1a; used for config digests and cache file names.
inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace linktopo
