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

#pragma once

// HTTP front end for the grading library.
//
// GradingService maps (method, path, body) to a JSON response and holds no
// model logic of its own: every body is the json_io form of a library call.
// HttpServer binds it to cpp-httplib. ModelRegistry loads checkpoints on
// first use and keeps them for the life of the process.

#include <condition_variable>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cbm/model.hpp"

namespace httplib {
class Server;
}

namespace cbm::service {

inline constexpr const char* kApiHeader = "X-CBM-API";
inline constexpr const char* kApiVersion = "1";

class UnknownModelError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class ModelUnavailableError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class ModelRegistry {
  public:
    enum class State { kUnloaded, kLoading, kReady, kFailed };

    struct Status {
        std::string model_id;
        State state = State::kUnloaded;
        std::string reason;  // set when failed
        std::optional<ModelKind> kind;
        std::optional<std::size_t> vocab_size;
        std::optional<ModelConfig> config;
    };

    using Loader = std::function<AnyModel(const std::filesystem::path&)>;

    explicit ModelRegistry(std::map<std::string, std::filesystem::path> manifest, Loader loader = load_checkpoint);

    /// Manifest file: a JSON object mapping model ids to checkpoint paths.
    /// Relative paths resolve against the manifest's directory.
    static ModelRegistry from_manifest(const std::filesystem::path& path, Loader loader = load_checkpoint);

    bool contains(const std::string& model_id) const;

    /// Returns the loaded model, loading it on first use. Concurrent first
    /// requests share a single load. Throws UnknownModelError or
    /// ModelUnavailableError (with the load failure reason).
    std::shared_ptr<const AnyModel> get(const std::string& model_id);

    std::vector<Status> list() const;
    std::size_t load_attempts(const std::string& model_id) const;

  private:
    struct Entry {
        std::filesystem::path path;
        State state = State::kUnloaded;
        std::string reason;
        std::shared_ptr<const AnyModel> model;
        std::size_t attempts = 0;
    };

    Loader loader_;
    mutable std::mutex mutex_;
    std::condition_variable loaded_;
    std::map<std::string, Entry> entries_;
};

std::string_view to_string(ModelRegistry::State state);

struct Response {
    int status = 200;
    std::string body;  // JSON
};

class GradingService {
  public:
    explicit GradingService(ModelRegistry& registry) : registry_(registry) {}

    /// Dispatches one request. `api_version` is the X-CBM-API request header
    /// value, empty when absent.
    Response handle(const std::string& method, const std::string& path, const std::string& body,
                    const std::string& api_version = {});

  private:
    Response models();
    Response grade(const std::string& body);
    Response intervene(const std::string& body);
    Response explain(const std::string& body);
    Response evaluate(const std::string& body);

    ModelRegistry& registry_;
};

struct ServerOptions {
    std::string host = "127.0.0.1";
    int port = 8080;  // 0 picks a free port
    std::size_t threads = 8;
};

class HttpServer {
  public:
    HttpServer(GradingService& service, ServerOptions options);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds the listening socket and returns the bound port. Throws
    /// std::runtime_error when the address is unavailable.
    int bind();
    /// Serves until stop(). Requires bind().
    void run();
    void stop();

  private:
    GradingService& service_;
    ServerOptions options_;
    std::unique_ptr<httplib::Server> server_;
};

}  // namespace cbm::service
