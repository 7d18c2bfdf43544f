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

// cbm: command-line entry point.
//
// Machine output is JSON on stdout; logs go to stderr. Exit codes: 0 ok,
// 2 invalid input, 3 runtime or model error.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include <pthread.h>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "cbm/data.hpp"
#include "cbm/errors.hpp"
#include "cbm/inference.hpp"
#include "cbm/json_io.hpp"
#include "cbm/logging.hpp"
#include "cbm/model.hpp"
#include "cbm/service.hpp"
#include "cbm/train.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

bool g_pretty = false;

void print_json(const cbm::Json& j) { std::cout << j.dump(g_pretty ? 2 : -1) << '\n'; }

void print_report(const cbm::EvalReport& report) {
    if (!g_pretty) return print_json(cbm::to_json(report));
    std::cout << std::fixed << std::setprecision(4);
    std::cout << "samples      " << report.sample_count << '\n'
              << "accuracy     " << report.accuracy << '\n'
              << "macro F1     " << report.macro_f1 << '\n'
              << "weighted F1  " << report.weighted_f1 << '\n';
    if (!report.concept_accuracy.empty()) {
        std::cout << "\nconcept accuracy\n";
        for (std::size_t k = 0; k < report.concept_accuracy.size(); ++k) {
            std::cout << "  " << std::left << std::setw(28) << cbm::concept_names()[k] << std::right
                      << report.concept_accuracy[k] << '\n';
        }
        std::cout << "  " << std::left << std::setw(28) << "mean" << std::right << report.mean_concept_accuracy()
                  << '\n';
    }
    std::cout << "\ngrade confusion (rows = label)\n";
    for (const auto& row : report.grade_confusion) {
        std::cout << " ";
        for (const auto v : row) std::cout << std::setw(6) << v;
        std::cout << '\n';
    }
}

void print_grading(const cbm::GradingResult& result) {
    if (!g_pretty) return print_json(cbm::to_json(result));
    std::cout << std::fixed << std::setprecision(3);
    for (const auto& c : result.concepts) {
        std::cout << c.index << ". " << std::left << std::setw(28) << c.name << std::right << c.score
                  << "  (confidence " << c.confidence << ")\n";
    }
    std::cout << "grade " << result.grade << "  (p = " << result.grade_probs[static_cast<std::size_t>(result.grade)]
              << ")\n";
}

std::string read_text_argument(const std::string& value) {
    std::error_code ec;
    if (!fs::is_regular_file(value, ec)) return value;
    std::ifstream in(value, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + value);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

cbm::ConceptOverrides parse_override_flags(const std::vector<std::string>& flags) {
    cbm::ConceptOverrides overrides;
    for (const auto& flag : flags) {
        const auto eq = flag.find('=');
        std::size_t used_k = 0;
        std::size_t used_v = 0;
        int k = 0;
        int v = 0;
        try {
            if (eq == std::string::npos) throw std::invalid_argument(flag);
            const std::string lhs = flag.substr(0, eq);
            const std::string rhs = flag.substr(eq + 1);
            k = std::stoi(lhs, &used_k);
            v = std::stoi(rhs, &used_v);
            if (used_k != lhs.size() || used_v != rhs.size()) throw std::invalid_argument(flag);
        } catch (const std::exception&) {
            throw cbm::ValidationError("override '" + flag + "' is not of the form k=v", {"override"});
        }
        overrides[k] = v;
    }
    return overrides;
}

int run_synth(std::size_t n, std::uint64_t seed, const std::string& out) {
    const auto dataset = cbm::generate_synthetic(n, seed);
    cbm::save_jsonl(dataset, out);
    spdlog::info("wrote {} essays to {}", dataset.size(), out);
    return kExitOk;
}

struct TrainArgs {
    std::string data;
    std::string arch = "cbm";
    std::string out;
    std::string history;
    std::string metric = "grade_macro_f1";
    cbm::TrainingConfig config;
    cbm::ModelConfig model;
};

int run_train(const TrainArgs& args) {
    const cbm::ModelKind kind = args.arch == "cbm" ? cbm::ModelKind::kCbm : cbm::ModelKind::kBaseline;
    cbm::TrainingConfig config = args.config;
    config.early_stop_metric = cbm::parse_early_stop_metric(args.metric);
    config.validate();

    const auto dataset = cbm::load_jsonl(args.data);
    const auto split = cbm::split_dataset(dataset, {0.8, 0.1, 0.1}, config.seed);
    spdlog::info("split {} essays into {}/{}/{}", dataset.size(), split.train.size(), split.validation.size(),
                 split.test.size());

    cbm::FitResult fit;
    const auto model = cbm::train_model(kind, split.train, split.validation, args.model, config, &fit);
    cbm::save_checkpoint(model, args.out);
    const std::string history = args.history.empty() ? args.out + ".history.jsonl" : args.history;
    cbm::write_history_jsonl(fit.history, history);
    spdlog::info("best epoch {} of {}; checkpoint {}, history {}", fit.best_epoch, fit.history.size(), args.out,
                 history);
    print_report(cbm::evaluate(model, split.test));
    return kExitOk;
}

int run_evaluate(const std::string& data, const std::string& ckpt, std::size_t folds) {
    const auto model = cbm::load_checkpoint(ckpt);
    const auto dataset = cbm::load_jsonl(data);
    if (folds == 0) {
        print_report(cbm::evaluate(model, dataset));
        return kExitOk;
    }
    const auto kind = cbm::kind_of(model);
    const auto& model_config = std::visit([](const auto& m) -> const cbm::ModelConfig& { return m.config(); }, model);
    const auto& provenance =
        std::visit([](const auto& m) -> const cbm::Provenance& { return m.provenance(); }, model);
    cbm::TrainingConfig config = cbm::training_config_from_json(provenance.training_config);
    print_json(cbm::to_json(cbm::cross_validate(dataset, folds, kind, model_config, config)));
    return kExitOk;
}

int run_grade(const std::string& ckpt, const std::string& text_arg, const std::vector<std::string>& override_flags) {
    const auto model = cbm::load_checkpoint(ckpt);
    const std::string text = read_text_argument(text_arg);
    const auto overrides = parse_override_flags(override_flags);
    const auto model_id = fs::path(ckpt).stem().string();
    if (override_flags.empty()) {
        print_grading(cbm::grade_essay(text, model, model_id));
        return kExitOk;
    }
    const auto* cbm_model = std::get_if<cbm::EssayCbmModel>(&model);
    if (cbm_model == nullptr) throw cbm::ValidationError("overrides need a concept-bottleneck checkpoint", {"ckpt"});
    const auto graded = cbm::grade_essay(text, *cbm_model, model_id);
    cbm::InterventionRequest request;
    request.base = graded.concept_vector().scores();
    request.overrides = overrides;
    request.model_id = model_id;
    print_json(cbm::to_json(cbm::intervene(request, *cbm_model)));
    return kExitOk;
}

int run_serve(const std::string& manifest, const std::string& host, int port, std::size_t threads) {
    // Block the shutdown signals before any thread starts so only sigwait sees them.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    auto registry = cbm::service::ModelRegistry::from_manifest(manifest);
    cbm::service::GradingService service(registry);
    cbm::service::HttpServer server(service, {host, port, threads});
    const int bound = server.bind();
    spdlog::info("serving {} model(s) on http://{}:{}", registry.list().size(), host, bound);
    std::cout << "listening on " << host << ':' << bound << std::endl;

    std::thread worker([&server] { server.run(); });
    int received = 0;
    sigwait(&signals, &received);
    spdlog::info("received signal {}, shutting down", received);
    server.stop();
    worker.join();
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    cbm::configure_logging();

    CLI::App app{"Concept-bottleneck essay grader"};
    app.require_subcommand(1);
    app.add_flag("--pretty", g_pretty, "Human-readable tables instead of JSON");

    std::size_t synth_n = 100;
    std::uint64_t synth_seed = 0;
    std::string synth_out;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic labelled corpus");
    synth->add_option("--n", synth_n, "Number of essays")->check(CLI::PositiveNumber);
    synth->add_option("--seed", synth_seed, "Generator seed");
    synth->add_option("--out", synth_out, "Output JSONL path")->required();

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "Train a model on a JSONL dataset (80/10/10 split)");
    train->add_option("--data", train_args.data, "Dataset JSONL")->required();
    train->add_option("--arch", train_args.arch, "cbm or baseline")->check(CLI::IsMember({"cbm", "baseline"}));
    train->add_option("--out", train_args.out, "Checkpoint output path")->required();
    train->add_option("--history", train_args.history, "Per-epoch history JSONL (default <out>.history.jsonl)");
    train->add_option("--lr", train_args.config.learning_rate, "Adam learning rate");
    train->add_option("--epochs", train_args.config.max_epochs, "Maximum epochs");
    train->add_option("--patience", train_args.config.patience, "Early-stopping patience");
    train->add_option("--lambda", train_args.config.lambda, "Concept loss weight");
    train->add_option("--batch-size", train_args.config.batch_size, "Mini-batch size");
    train->add_option("--seed", train_args.config.seed, "Seed for split, init and shuffling");
    train->add_option("--metric", train_args.metric, "Early-stopping metric")
        ->check(CLI::IsMember({"grade_macro_f1", "grade_accuracy", "grade_weighted_f1"}));
    train->add_option("--embedding-dim", train_args.model.embedding_dim, "Token embedding width");
    train->add_option("--hidden-dim", train_args.model.hidden_dim, "LSTM hidden width per direction");

    std::string eval_data;
    std::string eval_ckpt;
    std::size_t eval_folds = 0;
    auto* evaluate = app.add_subcommand("evaluate", "Evaluate a checkpoint, or cross-validate its setup");
    evaluate->add_option("--data", eval_data, "Dataset JSONL")->required();
    evaluate->add_option("--ckpt", eval_ckpt, "Checkpoint path")->required();
    evaluate->add_option("--cv", eval_folds, "Run k-fold cross-validation instead")->check(CLI::Range(2, 1000));

    std::string grade_ckpt;
    std::string grade_text;
    std::vector<std::string> grade_overrides;
    auto* grade = app.add_subcommand("grade", "Grade one essay, optionally overriding concepts");
    grade->add_option("--ckpt", grade_ckpt, "Checkpoint path")->required();
    grade->add_option("--text", grade_text, "Essay text, or a path to a text file")->required();
    grade->add_option("--override", grade_overrides, "Concept override k=v (k in 1..8, v in 0..4)");

    std::string serve_models;
    std::string serve_host = "127.0.0.1";
    int serve_port = 8080;
    std::size_t serve_threads = 8;
    auto* serve = app.add_subcommand("serve", "Run the HTTP grading service");
    serve->add_option("--models", serve_models, "Manifest JSON mapping model ids to checkpoints")->required();
    serve->add_option("--host", serve_host, "Listen address");
    serve->add_option("--port", serve_port, "Listen port (0 picks a free one)")->check(CLI::Range(0, 65535));
    serve->add_option("--threads", serve_threads, "Worker threads")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (*synth) return run_synth(synth_n, synth_seed, synth_out);
        if (*train) return run_train(train_args);
        if (*evaluate) return run_evaluate(eval_data, eval_ckpt, eval_folds);
        if (*grade) return run_grade(grade_ckpt, grade_text, grade_overrides);
        if (*serve) return run_serve(serve_models, serve_host, serve_port, serve_threads);
    } catch (const cbm::LoadError& e) {
        spdlog::error("invalid dataset: {}", e.what());
        return kExitValidation;
    } catch (const cbm::ValidationError& e) {
        spdlog::error("validation error: {}", e.what());
        return kExitValidation;
    } catch (const cbm::DegenerateInputError& e) {
        spdlog::error("invalid input: {}", e.what());
        return kExitValidation;
    } catch (const cbm::ContractError& e) {
        spdlog::error("invalid arguments: {}", e.what());
        return kExitValidation;
    } catch (const cbm::CheckpointError& e) {
        spdlog::error("checkpoint error: {}", e.what());
        return kExitRuntime;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kExitRuntime;
    }
    return kExitRuntime;
}
