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

#include <charconv>
#include <sstream>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "cbm/errors.hpp"
#include "cbm/inference.hpp"
#include "cbm/json_io.hpp"
#include "cbm/service.hpp"

namespace cbm::service {

namespace {

using nlohmann::json;

/// Raised inside handlers; converted to {error, detail} at the boundary.
struct HttpError {
    int status;
    std::string error;
    std::string detail;
    Json extra = Json::object();
};

Response json_response(int status, const Json& body) { return {status, body.dump()}; }

Response error_response(const HttpError& e) {
    Json body;
    body["error"] = e.error;
    body["detail"] = e.detail;
    for (const auto& [key, value] : e.extra.items()) body[key] = value;
    return json_response(e.status, body);
}

json parse_body(const std::string& body) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::parse_error& e) {
        throw HttpError{400, "bad_request", std::string("request body is not valid JSON: ") + e.what()};
    }
    if (!j.is_object()) throw HttpError{400, "bad_request", "request body must be a JSON object"};
    return j;
}

std::string require_string(const json& body, const char* field) {
    auto it = body.find(field);
    if (it == body.end() || !it->is_string()) {
        throw HttpError{422, "invalid_request", std::string("field '") + field + "' must be a string",
                        Json{{"fields", Json::array({field})}}};
    }
    return it->get<std::string>();
}

std::vector<int> parse_concept_array(const json& value) {
    if (!value.is_array() || value.size() != kNumConcepts) {
        throw HttpError{422, "invalid_concepts", "'concepts' must be an array of 8 integers",
                        Json{{"fields", Json::array({"concepts"})}}};
    }
    std::vector<int> out;
    Json bad = Json::array();
    for (std::size_t k = 0; k < value.size(); ++k) {
        if (!value[k].is_number_integer()) {
            bad.push_back("concepts[" + std::to_string(k) + "]");
            out.push_back(-1);
            continue;
        }
        const auto v = value[k].get<std::int64_t>();
        out.push_back(v < -1 || v > 100 ? -1 : static_cast<int>(v));
    }
    if (!bad.empty()) throw HttpError{422, "invalid_concepts", "concept scores must be integers", Json{{"fields", bad}}};
    return out;
}

ConceptOverrides parse_overrides(const json& body) {
    ConceptOverrides overrides;
    auto it = body.find("overrides");
    if (it == body.end() || it->is_null()) return overrides;
    if (!it->is_object()) {
        throw HttpError{422, "invalid_concepts", "'overrides' must be an object of index -> score",
                        Json{{"fields", Json::array({"overrides"})}}};
    }
    Json bad = Json::array();
    for (const auto& [key, value] : it->items()) {
        int index = 0;
        const auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), index);
        if (ec != std::errc() || ptr != key.data() + key.size() || !value.is_number_integer()) {
            bad.push_back("overrides." + key);
            continue;
        }
        const auto v = value.get<std::int64_t>();
        overrides[index] = v < -1 || v > 100 ? -1 : static_cast<int>(v);
    }
    if (!bad.empty()) {
        throw HttpError{422, "invalid_concepts", "override keys must be concept indices 1-8 and values integers",
                        Json{{"fields", bad}}};
    }
    return overrides;
}

ConceptVector validated_concepts(std::span<const int> base, const ConceptOverrides& overrides) {
    try {
        return apply_overrides(base, overrides);
    } catch (const ValidationError& e) {
        throw HttpError{422, "invalid_concepts", e.what(), Json{{"fields", e.offenders()}}};
    }
}

const EssayCbmModel& require_cbm(const AnyModel& model, const std::string& model_id) {
    if (const auto* cbm = std::get_if<EssayCbmModel>(&model)) return *cbm;
    throw HttpError{422, "no_concept_bottleneck", "model '" + model_id + "' is a baseline without concept heads"};
}

Json config_json(const ModelConfig& c, std::size_t vocab_size) {
    Json j;
    j["vocab_size"] = vocab_size;
    j["embedding_dim"] = c.embedding_dim;
    j["hidden_dim"] = c.hidden_dim;
    j["grade_hidden"] = c.grade_hidden;
    j["max_length"] = c.max_length;
    return j;
}

}  // namespace

Response GradingService::handle(const std::string& method, const std::string& path, const std::string& body,
                                const std::string& api_version) {
    try {
        if (!api_version.empty() && api_version != kApiVersion) {
            throw HttpError{400, "unsupported_api_version",
                            "this server speaks X-CBM-API " + std::string(kApiVersion) + ", got " + api_version};
        }
        if (method == "GET" && path == "/models") return models();
        if (method == "POST" && path == "/grade") return grade(body);
        if (method == "POST" && path == "/intervene") return intervene(body);
        if (method == "POST" && path == "/explain") return explain(body);
        if (method == "POST" && path == "/evaluate") return evaluate(body);
        throw HttpError{404, "not_found", "no route for " + method + " " + path};
    } catch (const HttpError& e) {
        return error_response(e);
    } catch (const UnknownModelError& e) {
        return error_response({404, "unknown_model", e.what()});
    } catch (const ModelUnavailableError& e) {
        return error_response({503, "model_unavailable", e.what()});
    } catch (const DegenerateInputError& e) {
        return error_response({422, "empty_essay", e.what()});
    } catch (const ValidationError& e) {
        return error_response({422, "invalid_concepts", e.what(), Json{{"fields", e.offenders()}}});
    } catch (const std::exception& e) {
        spdlog::error("{} {} failed: {}", method, path, e.what());
        return error_response({500, "internal_error", e.what()});
    }
}

Response GradingService::models() {
    Json out = Json::array();
    for (const auto& s : registry_.list()) {
        Json entry;
        entry["model_id"] = s.model_id;
        entry["kind"] = s.kind ? Json(std::string(cbm::to_string(*s.kind))) : Json(nullptr);
        entry["state"] = std::string(to_string(s.state));
        if (s.state == ModelRegistry::State::kFailed) entry["reason"] = s.reason;
        entry["dims"] = s.config ? config_json(*s.config, *s.vocab_size) : Json(nullptr);
        out.push_back(std::move(entry));
    }
    return json_response(200, out);
}

Response GradingService::grade(const std::string& raw) {
    const json body = parse_body(raw);
    const std::string model_id = require_string(body, "model_id");
    const std::string text = require_string(body, "text");
    const std::string essay_id = body.contains("essay_id") && body["essay_id"].is_string()
                                     ? body["essay_id"].get<std::string>()
                                     : std::string();
    // Resolve the model first so an unknown id wins over an empty essay.
    const auto model = registry_.get(model_id);
    return json_response(200, to_json(grade_essay(text, *model, model_id, essay_id)));
}

Response GradingService::intervene(const std::string& raw) {
    const json body = parse_body(raw);
    const std::string model_id = require_string(body, "model_id");
    if (!body.contains("concepts")) {
        throw HttpError{422, "invalid_concepts", "'concepts' is required", Json{{"fields", Json::array({"concepts"})}}};
    }
    const auto base = parse_concept_array(body["concepts"]);
    const auto overrides = parse_overrides(body);
    const auto model = registry_.get(model_id);
    const EssayCbmModel& cbm = require_cbm(*model, model_id);
    validated_concepts(base, overrides);

    InterventionRequest request;
    std::copy(base.begin(), base.end(), request.base.begin());
    request.overrides = overrides;
    request.model_id = model_id;
    return json_response(200, to_json(cbm::intervene(request, cbm)));
}

Response GradingService::explain(const std::string& raw) {
    const json body = parse_body(raw);
    const std::string model_id = require_string(body, "model_id");
    const bool has_text = body.contains("text");
    const bool has_concepts = body.contains("concepts");
    if (has_text == has_concepts) {
        throw HttpError{422, "invalid_request", "provide exactly one of 'text' or 'concepts'",
                        Json{{"fields", Json::array({"text", "concepts"})}}};
    }
    std::vector<int> base;
    if (has_concepts) base = parse_concept_array(body["concepts"]);
    const std::string text = has_text ? require_string(body, "text") : std::string();
    const auto model = registry_.get(model_id);
    const EssayCbmModel& cbm = require_cbm(*model, model_id);
    if (has_text) return json_response(200, to_json(cbm::explain(grade_essay(text, cbm, model_id), cbm)));
    return json_response(200, to_json(cbm::explain(validated_concepts(base, {}), cbm)));
}

Response GradingService::evaluate(const std::string& raw) {
    const json body = parse_body(raw);
    const std::string model_id = require_string(body, "model_id");
    const bool has_path = body.contains("dataset_path");
    const bool has_records = body.contains("records");
    if (has_path == has_records) {
        throw HttpError{422, "invalid_request", "provide exactly one of 'dataset_path' or 'records'",
                        Json{{"fields", Json::array({"dataset_path", "records"})}}};
    }
    Dataset dataset;
    try {
        if (has_path) {
            dataset = load_jsonl(require_string(body, "dataset_path"));
        } else {
            const json& records = body["records"];
            if (!records.is_array()) {
                throw HttpError{422, "invalid_request", "'records' must be an array",
                                Json{{"fields", Json::array({"records"})}}};
            }
            for (std::size_t i = 0; i < records.size(); ++i) dataset.push_back(essay_from_json(records[i], i + 1));
        }
    } catch (const LoadError& e) {
        Json extra;
        extra["line"] = e.line();
        extra["field"] = e.field();
        throw HttpError{422, "invalid_dataset", e.what(), extra};
    }
    if (dataset.empty()) throw HttpError{422, "invalid_dataset", "dataset has no records"};
    const auto model = registry_.get(model_id);
    return json_response(200, to_json(cbm::evaluate(*model, dataset)));
}

// ---------------------------------------------------------------------------

HttpServer::HttpServer(GradingService& service, ServerOptions options)
    : service_(service), options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
    const std::size_t threads = options_.threads == 0 ? 1 : options_.threads;
    server_->new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
    // SO_REUSEPORT would let a second server share a busy port silently.
    server_->set_socket_options([](auto sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });

    auto dispatch = [this](const httplib::Request& req, httplib::Response& res) {
        const Response out =
            service_.handle(req.method, req.path, req.body, req.get_header_value(kApiHeader));
        res.status = out.status;
        res.set_header(kApiHeader, kApiVersion);
        res.set_content(out.body, "application/json");
        spdlog::debug("{} {} -> {}", req.method, req.path, out.status);
    };
    server_->Get("/models", dispatch);
    for (const char* route : {"/grade", "/intervene", "/explain", "/evaluate"}) server_->Post(route, dispatch);
    server_->set_error_handler([this](const httplib::Request& req, httplib::Response& res) {
        if (res.status != 404 || !res.body.empty()) return;
        const Response out = service_.handle(req.method, req.path, req.body);
        res.set_header(kApiHeader, kApiVersion);
        res.set_content(out.body, "application/json");
    });
}

HttpServer::~HttpServer() = default;

int HttpServer::bind() {
    if (options_.port == 0) {
        const int port = server_->bind_to_any_port(options_.host);
        if (port < 0) throw std::runtime_error("cannot bind " + options_.host);
        return port;
    }
    if (!server_->bind_to_port(options_.host, options_.port)) {
        throw std::runtime_error("cannot listen on " + options_.host + ":" + std::to_string(options_.port) +
                                 " (address in use or not permitted)");
    }
    return options_.port;
}

void HttpServer::run() { server_->listen_after_bind(); }

void HttpServer::stop() { server_->stop(); }

}  // namespace cbm::service
