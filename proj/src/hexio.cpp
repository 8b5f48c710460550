// Copyright 2026 The ulfd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ulfd/hexio.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>

namespace ulfd::io {

std::string to_hex(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value,
                                 std::chars_format::hex);
  if (ec != std::errc()) throw std::runtime_error("hex encoding failed");
  return std::string(buf, end);
}

double from_hex(const std::string& token) {
  double value = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(first, last, value, std::chars_format::hex);
  if (ec != std::errc() || ptr != last) {
    throw std::runtime_error("malformed hex float '" + token + "'");
  }
  return value;
}

std::string next_token(std::istream& in) {
  std::string token;
  if (!(in >> token)) throw std::runtime_error("unexpected end of record");
  return token;
}

void expect_token(std::istream& in, const std::string& expected) {
  const std::string got = next_token(in);
  if (got != expected) {
    throw std::runtime_error("expected '" + expected + "', found '" + got + "'");
  }
}

double read_hex(std::istream& in) { return from_hex(next_token(in)); }

unsigned long long read_unsigned(std::istream& in) {
  const std::string token = next_token(in);
  unsigned long long value = 0;
  auto [ptr, ec] =
      std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw std::runtime_error("malformed integer '" + token + "'");
  }
  return value;
}

}  // namespace ulfd::io
