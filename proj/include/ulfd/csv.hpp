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

#ifndef ULFD_CSV_HPP_
#define ULFD_CSV_HPP_

#include <initializer_list>
#include <ostream>
#include <string>
#include <vector>

namespace ulfd::csv {

/// Shortest round-trip decimal representation; "nan"/"inf" spelled out.
std::string num(double value);

/// Joins fields with commas and terminates the line.
void write_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace ulfd::csv

#endif  // ULFD_CSV_HPP_
