#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace leadrl {

enum class AnswerKind { Integer, Rational, Decimal, RawString };

struct RationalValue {
  long long num = 0;
  long long den = 1;  // > 0, gcd(|num|, den) == 1
};

/// Canonical form of an answer string. Numeric kinds compare by value across
/// kinds ("3/2" equals "1.5"); everything else is a trimmed, space-collapsed,
/// case-folded string.
struct CanonicalAnswer {
  std::variant<long long, RationalValue, double, std::string> value;

  AnswerKind kind() const { return static_cast<AnswerKind>(value.index()); }

  std::string render() const {
    switch (kind()) {
      case AnswerKind::Integer:
        return std::to_string(std::get<long long>(value));
      case AnswerKind::Rational: {
        const auto& r = std::get<RationalValue>(value);
        return std::to_string(r.num) + "/" + std::to_string(r.den);
      }
      case AnswerKind::Decimal: {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.9g", std::get<double>(value));
        return buf;
      }
      case AnswerKind::RawString:
        return std::get<std::string>(value);
    }
    return {};
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::optional<long long> parse_integer(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, 10);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<double> parse_decimal(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  if (!std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::string fold_string(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char ch : trim(s)) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  }
  return out;
}

inline double as_double(const CanonicalAnswer& a) {
  switch (a.kind()) {
    case AnswerKind::Integer: return static_cast<double>(std::get<long long>(a.value));
    case AnswerKind::Rational: {
      const auto& r = std::get<RationalValue>(a.value);
      return static_cast<double>(r.num) / static_cast<double>(r.den);
    }
    case AnswerKind::Decimal: return std::get<double>(a.value);
    default: return 0.0;
  }
}

inline bool nearly_equal(double x, double y) {
  if (x == y) return true;
  const double tol = 1e-9;
  return std::abs(x - y) <= tol * std::max(std::abs(x), std::abs(y));
}

}  // namespace detail

inline CanonicalAnswer canonicalize(std::string_view answer) {
  std::string_view s = detail::trim(answer);
  if (s.empty()) throw std::invalid_argument("canonicalize: empty answer");

  if (auto i = detail::parse_integer(s)) return {*i};

  if (auto slash = s.find('/'); slash != std::string_view::npos &&
                                s.find('/', slash + 1) == std::string_view::npos) {
    auto num = detail::parse_integer(s.substr(0, slash));
    auto den = detail::parse_integer(s.substr(slash + 1));
    if (num && den && *den != 0) {
      long long n = *num, d = *den;
      if (d < 0) { n = -n; d = -d; }
      long long g = std::gcd(n < 0 ? -n : n, d);
      if (g > 1) { n /= g; d /= g; }
      if (d == 1) return {n};
      return {RationalValue{n, d}};
    }
  }

  if (auto d = detail::parse_decimal(s)) return {*d};

  return {detail::fold_string(s)};
}

inline bool answers_equal(const CanonicalAnswer& a, const CanonicalAnswer& b) {
  const bool a_str = a.kind() == AnswerKind::RawString;
  const bool b_str = b.kind() == AnswerKind::RawString;
  if (a_str || b_str) {
    return a_str && b_str && std::get<std::string>(a.value) == std::get<std::string>(b.value);
  }
  if (a.kind() == AnswerKind::Decimal || b.kind() == AnswerKind::Decimal) {
    return detail::nearly_equal(detail::as_double(a), detail::as_double(b));
  }
  // Exact cross-kind comparison: treat integers as rationals with den 1.
  const auto as_rat = [](const CanonicalAnswer& c) -> RationalValue {
    if (c.kind() == AnswerKind::Integer) return {std::get<long long>(c.value), 1};
    return std::get<RationalValue>(c.value);
  };
  const RationalValue ra = as_rat(a), rb = as_rat(b);
  return static_cast<__int128>(ra.num) * rb.den == static_cast<__int128>(rb.num) * ra.den;
}

/// Binary correctness: absent or blank extracted answers are wrong, otherwise
/// canonical forms must match.
inline bool is_correct(const std::optional<std::string>& extracted,
                       const std::string& reference) {
  if (!extracted) return false;
  if (detail::trim(*extracted).empty()) return false;
  return answers_equal(canonicalize(*extracted), canonicalize(reference));
}

/// True iff some contiguous n-gram occurs at >= min_repeats distinct start
/// positions (overlapping occurrences count).
inline bool detect_repetition(std::span<const std::int32_t> tokens, std::int32_t n,
                              std::int32_t min_repeats) {
  if (n < 1) throw std::invalid_argument("detect_repetition: n must be >= 1");
  if (min_repeats < 2) throw std::invalid_argument("detect_repetition: min_repeats must be >= 2");
  const std::int64_t windows = static_cast<std::int64_t>(tokens.size()) - n + 1;
  if (windows < min_repeats) return false;
  std::unordered_map<std::string, std::int32_t> counts;
  counts.reserve(static_cast<std::size_t>(windows));
  for (std::int64_t i = 0; i < windows; ++i) {
    std::string key(reinterpret_cast<const char*>(tokens.data() + i),
                    static_cast<std::size_t>(n) * sizeof(std::int32_t));
    if (++counts[key] >= min_repeats) return true;
  }
  return false;
}

}  // namespace leadrl
