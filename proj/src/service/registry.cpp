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

#include <fstream>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "cbm/service.hpp"

namespace cbm::service {

std::string_view to_string(ModelRegistry::State state) {
    switch (state) {
        case ModelRegistry::State::kUnloaded: return "unloaded";
        case ModelRegistry::State::kLoading: return "loading";
        case ModelRegistry::State::kReady: return "ready";
        case ModelRegistry::State::kFailed: return "failed";
    }
    return "unloaded";
}

ModelRegistry::ModelRegistry(std::map<std::string, std::filesystem::path> manifest, Loader loader)
    : loader_(std::move(loader)) {
    for (auto& [id, path] : manifest) entries_[id].path = std::move(path);
}

ModelRegistry ModelRegistry::from_manifest(const std::filesystem::path& path, Loader loader) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model manifest " + path.string());
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed model manifest " + path.string() + ": " + e.what());
    }
    if (!manifest.is_object()) throw std::runtime_error("model manifest must map model ids to checkpoint paths");
    std::map<std::string, std::filesystem::path> entries;
    const auto base = path.parent_path();
    for (const auto& [id, value] : manifest.items()) {
        if (!value.is_string()) throw std::runtime_error("manifest entry '" + id + "' is not a path string");
        std::filesystem::path ckpt = value.get<std::string>();
        entries.emplace(id, ckpt.is_relative() ? base / ckpt : ckpt);
    }
    return ModelRegistry(std::move(entries), std::move(loader));
}

bool ModelRegistry::contains(const std::string& model_id) const {
    std::lock_guard lock(mutex_);
    return entries_.count(model_id) != 0;
}

std::shared_ptr<const AnyModel> ModelRegistry::get(const std::string& model_id) {
    std::unique_lock lock(mutex_);
    auto it = entries_.find(model_id);
    if (it == entries_.end()) throw UnknownModelError("unknown model_id '" + model_id + "'");
    Entry& entry = it->second;
    for (;;) {
        switch (entry.state) {
            case State::kReady:
                return entry.model;
            case State::kFailed:
                throw ModelUnavailableError(entry.reason);
            case State::kLoading:
                loaded_.wait(lock);
                break;
            case State::kUnloaded: {
                entry.state = State::kLoading;
                ++entry.attempts;
                const auto path = entry.path;
                lock.unlock();
                std::shared_ptr<const AnyModel> model;
                std::string reason;
                try {
                    model = std::make_shared<const AnyModel>(loader_(path));
                } catch (const std::exception& e) {
                    reason = e.what();
                }
                lock.lock();
                if (model) {
                    entry.model = std::move(model);
                    entry.state = State::kReady;
                    spdlog::info("loaded model '{}' from {}", model_id, path.string());
                } else {
                    entry.reason = reason.empty() ? "unknown load failure" : reason;
                    entry.state = State::kFailed;
                    spdlog::warn("model '{}' failed to load: {}", model_id, entry.reason);
                }
                loaded_.notify_all();
                break;
            }
        }
    }
}

std::vector<ModelRegistry::Status> ModelRegistry::list() const {
    std::lock_guard lock(mutex_);
    std::vector<Status> out;
    for (const auto& [id, entry] : entries_) {
        Status s;
        s.model_id = id;
        s.state = entry.state;
        s.reason = entry.reason;
        if (entry.model) {
            s.kind = kind_of(*entry.model);
            std::visit(
                [&](const auto& m) {
                    s.vocab_size = m.vocab().size();
                    s.config = m.config();
                },
                *entry.model);
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::size_t ModelRegistry::load_attempts(const std::string& model_id) const {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(model_id);
    return it == entries_.end() ? 0 : it->second.attempts;
}

}  // namespace cbm::service
