#pragma once

// Locale-independent, shortest-round-trip numeric formatting.  Every file the
// toolkit emits goes through these helpers so that repeated runs are
// byte-identical and parsing the numbers back recovers the exact values.

#include <charconv>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>

namespace epl {

inline std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  if (res.ec != std::errc{}) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, res.ptr);
}

inline std::string format_uint(std::uint64_t value) {
  char buf[24];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  if (res.ec != std::errc{}) throw std::runtime_error("format_uint: conversion failed");
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view text, const std::string& context) {
  double value = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
    throw std::runtime_error("parse_double: bad number '" + std::string(text) + "' in " + context);
  return value;
}

inline std::uint64_t parse_uint(std::string_view text, const std::string& context) {
  std::uint64_t value = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
    throw std::runtime_error("parse_uint: bad integer '" + std::string(text) + "' in " + context);
  return value;
}

}  // namespace epl
