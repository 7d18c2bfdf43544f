// Copyright 2026 The cbm-grader Authors
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

#include "cbm/logging.hpp"

#include <cstdlib>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace cbm {

void configure_logging(const char* fallback) {
    auto logger = spdlog::get("cbm");
    if (!logger) logger = spdlog::stderr_color_mt("cbm");
    spdlog::set_default_logger(logger);
    const char* env = std::getenv("CBM_LOG");
    spdlog::set_level(spdlog::level::from_str(env && *env ? env : fallback));
    spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
}

}  // namespace cbm
