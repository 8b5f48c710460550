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

#ifndef ULFD_HEXIO_HPP_
#define ULFD_HEXIO_HPP_

// Bit-exact text encoding of doubles for the model record formats.

#include <istream>
#include <string>

namespace ulfd::io {

std::string to_hex(double value);
double from_hex(const std::string& token);

/// Reads the next whitespace-separated token; throws std::runtime_error at EOF.
std::string next_token(std::istream& in);
/// Reads a token and checks it equals `expected`.
void expect_token(std::istream& in, const std::string& expected);
double read_hex(std::istream& in);
unsigned long long read_unsigned(std::istream& in);

}  // namespace ulfd::io

#endif  // ULFD_HEXIO_HPP_
