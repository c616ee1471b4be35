// SPDX-License-Identifier: Apache-2.0
//
// dlm: dual-input dynamic load modulation transmitter toolkit
// Copyright (C) 2026 The dlm authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include <stdexcept>
#include <string>

namespace dlm {

// Numeric or model failure: bad ranges, non-invertible laws, empty signals.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input files or configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

// File parse failure; carries the 1-based line number when known.
class ParseError : public ConfigError {
public:
    ParseError(const std::string& file, std::size_t line, const std::string& what)
        : ConfigError(file + (line ? ":" + std::to_string(line) : std::string()) + ": " + what),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

} // namespace dlm
