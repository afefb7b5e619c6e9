// Copyright 2026 The Spreadcast Authors
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

#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace spreadcast {

using Date = std::chrono::sys_days;
using Instant = std::chrono::sys_seconds;

// "YYYY-MM-DD"
Date parse_date(std::string_view text);
std::string format_date(Date d);

// GKG 14-digit form "YYYYMMDDHHMMSS" (UTC).
Instant parse_gkg_timestamp(std::string_view text);
std::string format_gkg_timestamp(Instant t);

bool is_weekend(Date d);

}  // namespace spreadcast
