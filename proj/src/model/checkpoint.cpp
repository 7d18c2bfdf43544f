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

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "cbm/errors.hpp"
#include "cbm/model.hpp"

namespace cbm {

namespace {

constexpr char kMagic[8] = {'C', 'B', 'M', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kKindCbm = 0;
constexpr std::uint32_t kKindBaseline = 1;

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

class Writer {
  public:
    void bytes(std::string_view s) { out_.append(s); }
    void u32(std::uint32_t v) { little_endian(v, 4); }
    void u64(std::uint64_t v) { little_endian(v, 8); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    std::string& buffer() { return out_; }

  private:
    void little_endian(std::uint64_t v, int width) {
        for (int i = 0; i < width; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    std::string out_;
};

class Reader {
  public:
    explicit Reader(std::string_view data) : data_(data) {}

    std::string_view bytes(std::size_t n) {
        need(n);
        auto s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::uint32_t u32() { return static_cast<std::uint32_t>(little_endian(4)); }
    std::uint64_t u64() { return little_endian(8); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::size_t remaining() const { return data_.size() - pos_; }

  private:
    void need(std::size_t n) const {
        if (n > remaining()) throw CheckpointError(CheckpointError::Kind::kCorrupt, "checkpoint is truncated");
    }
    std::uint64_t little_endian(int width) {
        need(static_cast<std::size_t>(width));
        std::uint64_t v = 0;
        for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        pos_ += static_cast<std::size_t>(width);
        return v;
    }
    std::string_view data_;
    std::size_t pos_ = 0;
};

nlohmann::json metadata(const ModelConfig& config, const Vocab& vocab, const Provenance& provenance) {
    nlohmann::json meta;
    meta["config"] = {{"embedding_dim", config.embedding_dim},
                      {"hidden_dim", config.hidden_dim},
                      {"grade_hidden", config.grade_hidden},
                      {"max_length", config.max_length}};
    meta["vocab"] = vocab.tokens();
    std::vector<std::string> names;
    for (auto n : concept_names()) names.emplace_back(n);
    meta["concepts"] = names;
    meta["provenance"] = {{"seed", provenance.seed},
                          {"training_config", provenance.training_config.empty()
                                                  ? nlohmann::json(nullptr)
                                                  : nlohmann::json::parse(provenance.training_config)}};
    return meta;
}

template <typename Model>
std::string serialize(const Model& model, std::uint32_t kind) {
    Writer w;
    w.bytes(std::string_view(kMagic, sizeof kMagic));
    w.u32(kCheckpointVersion);
    w.u32(kind);
    w.u64(model.vocab().size());
    w.u64(model.config().embedding_dim);
    w.u64(model.config().hidden_dim);
    const std::string meta = metadata(model.config(), model.vocab(), model.provenance()).dump();
    w.u64(meta.size());
    w.bytes(meta);
    const auto params = model.named_parameters();
    w.u32(static_cast<std::uint32_t>(params.size()));
    for (const auto& [name, tensor] : params) {
        w.u32(static_cast<std::uint32_t>(name.size()));
        w.bytes(name);
        w.u32(static_cast<std::uint32_t>(tensor.rank()));
        for (std::size_t d : tensor.shape()) w.u64(d);
        for (double v : tensor.data()) w.f64(v);
    }
    const std::uint64_t checksum = fnv1a(w.buffer());
    w.u64(checksum);
    return std::move(w.buffer());
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError(CheckpointError::Kind::kIo, "cannot write checkpoint " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError(CheckpointError::Kind::kIo, "failed writing checkpoint " + path.string());
}

struct RawCheckpoint {
    std::uint32_t kind = 0;
    ModelConfig config;
    Vocab vocab;
    Provenance provenance;
    std::map<std::string, Tensor> params;
};

RawCheckpoint parse_raw(std::string_view bytes) {
    constexpr std::size_t kFixedHeader = sizeof kMagic + 4 + 4;
    if (bytes.size() < kFixedHeader) throw CheckpointError(CheckpointError::Kind::kCorrupt, "checkpoint is truncated");
    if (bytes.substr(0, sizeof kMagic) != std::string_view(kMagic, sizeof kMagic)) {
        throw CheckpointError(CheckpointError::Kind::kCorrupt, "not a checkpoint file (bad magic)");
    }
    Reader header(bytes.substr(sizeof kMagic));
    const std::uint32_t version = header.u32();
    if (version != kCheckpointVersion) {
        throw CheckpointError(CheckpointError::Kind::kVersion,
                              "unsupported checkpoint version " + std::to_string(version) + " (expected " +
                                  std::to_string(kCheckpointVersion) + ")");
    }
    if (bytes.size() < kFixedHeader + 8) throw CheckpointError(CheckpointError::Kind::kCorrupt, "checkpoint is truncated");
    const std::string_view body = bytes.substr(0, bytes.size() - 8);
    if (Reader(bytes.substr(bytes.size() - 8)).u64() != fnv1a(body)) {
        throw CheckpointError(CheckpointError::Kind::kCorrupt, "checkpoint checksum mismatch (truncated or corrupt)");
    }

    Reader r(body.substr(sizeof kMagic + 4));
    RawCheckpoint raw;
    raw.kind = r.u32();
    if (raw.kind != kKindCbm && raw.kind != kKindBaseline) {
        throw CheckpointError(CheckpointError::Kind::kCorrupt, "unknown model kind " + std::to_string(raw.kind));
    }
    const std::uint64_t vocab_size = r.u64();
    raw.config.embedding_dim = r.u64();
    raw.config.hidden_dim = r.u64();
    const std::uint64_t meta_len = r.u64();
    try {
        const auto meta = nlohmann::json::parse(r.bytes(meta_len));
        const auto& cfg = meta.at("config");
        raw.config.grade_hidden = cfg.at("grade_hidden").get<std::vector<std::size_t>>();
        raw.config.max_length = cfg.at("max_length").get<std::size_t>();
        if (cfg.at("embedding_dim").get<std::size_t>() != raw.config.embedding_dim ||
            cfg.at("hidden_dim").get<std::size_t>() != raw.config.hidden_dim) {
            throw CheckpointError(CheckpointError::Kind::kCorrupt, "header and metadata dimensions disagree");
        }
        raw.vocab = Vocab::from_tokens(meta.at("vocab").get<std::vector<std::string>>());
        const auto names = meta.at("concepts").get<std::vector<std::string>>();
        if (names.size() != kNumConcepts || !std::equal(names.begin(), names.end(), concept_names().begin())) {
            throw CheckpointError(CheckpointError::Kind::kCorrupt, "checkpoint concept schema differs");
        }
        const auto& prov = meta.at("provenance");
        raw.provenance.seed = prov.at("seed").get<std::uint64_t>();
        if (!prov.at("training_config").is_null()) raw.provenance.training_config = prov.at("training_config").dump();
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(CheckpointError::Kind::kCorrupt, std::string("bad checkpoint metadata: ") + e.what());
    } catch (const ContractError& e) {
        throw CheckpointError(CheckpointError::Kind::kCorrupt, std::string("bad checkpoint vocabulary: ") + e.what());
    }
    if (raw.vocab.size() != vocab_size) {
        throw CheckpointError(CheckpointError::Kind::kCorrupt, "header and metadata vocabulary sizes disagree");
    }

    const std::uint32_t count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name(r.bytes(r.u32()));
        const std::uint32_t rank = r.u32();
        if (rank > 2) throw CheckpointError(CheckpointError::Kind::kCorrupt, "parameter '" + name + "' has rank > 2");
        Shape shape(rank);
        for (auto& d : shape) d = r.u64();
        const std::size_t n = numel(shape);
        if (n > r.remaining() / 8) throw CheckpointError(CheckpointError::Kind::kCorrupt, "checkpoint is truncated");
        std::vector<double> values(n);
        for (double& v : values) v = r.f64();
        raw.params.emplace(std::move(name), Tensor::from(std::move(shape), std::move(values), true));
    }
    if (r.remaining() != 0) throw CheckpointError(CheckpointError::Kind::kCorrupt, "trailing bytes in checkpoint");
    return raw;
}

template <typename Model>
Model restore(RawCheckpoint raw) {
    Model model(std::move(raw.vocab), raw.config, raw.provenance.seed);
    model.provenance() = raw.provenance;
    auto params = model.named_parameters();
    if (params.size() != raw.params.size()) {
        throw CheckpointError(CheckpointError::Kind::kCorrupt, "checkpoint parameter count differs from architecture");
    }
    for (auto& [name, tensor] : params) {
        auto it = raw.params.find(name);
        if (it == raw.params.end()) {
            throw CheckpointError(CheckpointError::Kind::kCorrupt, "checkpoint lacks parameter '" + name + "'");
        }
        if (it->second.shape() != tensor.shape()) {
            throw CheckpointError(CheckpointError::Kind::kCorrupt, "parameter '" + name + "' has shape " +
                                                                       to_string(it->second.shape()) + ", expected " +
                                                                       to_string(tensor.shape()));
        }
        auto dst = tensor.mutable_data();
        auto src = it->second.data();
        std::copy(src.begin(), src.end(), dst.begin());
    }
    return model;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError(CheckpointError::Kind::kIo, "cannot open checkpoint " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

std::string checkpoint_bytes(const AnyModel& model) {
    return std::visit(
        [](const auto& m) {
            using M = std::decay_t<decltype(m)>;
            return serialize(m, M::kKind == ModelKind::kCbm ? kKindCbm : kKindBaseline);
        },
        model);
}

void save_checkpoint(const EssayCbmModel& model, const std::filesystem::path& path) {
    write_file(path, serialize(model, kKindCbm));
}

void save_checkpoint(const BaselineModel& model, const std::filesystem::path& path) {
    write_file(path, serialize(model, kKindBaseline));
}

void save_checkpoint(const AnyModel& model, const std::filesystem::path& path) {
    write_file(path, checkpoint_bytes(model));
}

AnyModel parse_checkpoint(std::string_view bytes) {
    RawCheckpoint raw = parse_raw(bytes);
    if (raw.kind == kKindCbm) return restore<EssayCbmModel>(std::move(raw));
    return restore<BaselineModel>(std::move(raw));
}

AnyModel load_checkpoint(const std::filesystem::path& path) { return parse_checkpoint(read_file(path)); }

EssayCbmModel load_cbm_checkpoint(const std::filesystem::path& path) {
    AnyModel any = load_checkpoint(path);
    if (auto* m = std::get_if<EssayCbmModel>(&any)) return std::move(*m);
    throw CheckpointError(CheckpointError::Kind::kKindMismatch,
                          "checkpoint " + path.string() + " holds a baseline model, expected cbm");
}

BaselineModel load_baseline_checkpoint(const std::filesystem::path& path) {
    AnyModel any = load_checkpoint(path);
    if (auto* m = std::get_if<BaselineModel>(&any)) return std::move(*m);
    throw CheckpointError(CheckpointError::Kind::kKindMismatch,
                          "checkpoint " + path.string() + " holds a cbm model, expected baseline");
}

}  // namespace cbm
