// Copyright 2026 The avloc Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "avloc/error.hpp"

namespace avloc::textio {

/// Shortest decimal string that parses back to exactly `value`; always
/// contains a '.' or exponent so it reads as a real ("1.0", not "1").
std::string format_real(double value);

/// Parses a full token as a real; throws Error(kind) on failure.
double parse_real(std::string_view token, ErrorKind kind);
long long parse_int(std::string_view token, ErrorKind kind);

std::vector<std::string_view> split_ws(std::string_view line);
std::vector<std::string_view> split_char(std::string_view line, char sep);
std::string_view trim(std::string_view s);

std::ofstream open_out(const std::filesystem::path& path);
std::ifstream open_in(const std::filesystem::path& path);

/// Reads all lines, stripping a trailing '\r'.
std::vector<std::string> read_lines(const std::filesystem::path& path);

}  // namespace avloc::textio
