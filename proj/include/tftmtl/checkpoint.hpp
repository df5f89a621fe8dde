#pragma once
#include <bit>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tftmtl/adamw.hpp"
#include "tftmtl/errors.hpp"
#include "tftmtl/gru.hpp"
#include "tftmtl/model.hpp"
#include "tftmtl/pipeline.hpp"
#include "tftmtl/textio.hpp"

namespace tftmtl {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// base64 of little-endian f64 arrays: checkpoints are byte-comparable across
// platforms regardless of host endianness
// ---------------------------------------------------------------------------

namespace detail {
inline constexpr char kB64Alphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

inline std::string base64_encode_doubles(const std::vector<double>& v) {
    std::vector<unsigned char> bytes;
    bytes.reserve(v.size() * 8);
    for (double d : v) {
        std::uint64_t u = std::bit_cast<std::uint64_t>(d);
        for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<unsigned char>((u >> (8 * i)) & 0xff));
    }
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    for (std::size_t i = 0; i < bytes.size(); i += 3) {
        std::uint32_t chunk = static_cast<std::uint32_t>(bytes[i]) << 16;
        int have = 1;
        if (i + 1 < bytes.size()) {
            chunk |= static_cast<std::uint32_t>(bytes[i + 1]) << 8;
            have = 2;
        }
        if (i + 2 < bytes.size()) {
            chunk |= bytes[i + 2];
            have = 3;
        }
        out += detail::kB64Alphabet[(chunk >> 18) & 0x3f];
        out += detail::kB64Alphabet[(chunk >> 12) & 0x3f];
        out += have >= 2 ? detail::kB64Alphabet[(chunk >> 6) & 0x3f] : '=';
        out += have >= 3 ? detail::kB64Alphabet[chunk & 0x3f] : '=';
    }
    return out;
}

inline std::vector<double> base64_decode_doubles(const std::string& s) {
    auto decode_char = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        return -1;
    };
    if (s.size() % 4 != 0) throw LoadError("base64: length not a multiple of 4");
    std::vector<unsigned char> bytes;
    bytes.reserve(s.size() / 4 * 3);
    for (std::size_t i = 0; i < s.size(); i += 4) {
        int vals[4];
        int pad = 0;
        for (int k = 0; k < 4; ++k) {
            if (s[i + k] == '=') {
                vals[k] = 0;
                ++pad;
            } else {
                vals[k] = decode_char(s[i + k]);
                if (vals[k] < 0) throw LoadError("base64: invalid character");
                if (pad) throw LoadError("base64: data after padding");
            }
        }
        const std::uint32_t chunk = (static_cast<std::uint32_t>(vals[0]) << 18) |
                                    (static_cast<std::uint32_t>(vals[1]) << 12) |
                                    (static_cast<std::uint32_t>(vals[2]) << 6) | static_cast<std::uint32_t>(vals[3]);
        bytes.push_back(static_cast<unsigned char>((chunk >> 16) & 0xff));
        if (pad < 2) bytes.push_back(static_cast<unsigned char>((chunk >> 8) & 0xff));
        if (pad < 1) bytes.push_back(static_cast<unsigned char>(chunk & 0xff));
    }
    if (bytes.size() % 8 != 0) throw LoadError("base64: payload is not a whole number of f64 values");
    std::vector<double> out(bytes.size() / 8);
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint64_t u = 0;
        for (int k = 0; k < 8; ++k) u |= static_cast<std::uint64_t>(bytes[i * 8 + k]) << (8 * k);
        out[i] = std::bit_cast<double>(u);
    }
    return out;
}

// ---------------------------------------------------------------------------
// ModelConfig <-> JSON
// ---------------------------------------------------------------------------

inline json model_config_to_json(const ModelConfig& cfg) {
    json j;
    j["hidden_dim"] = cfg.hidden_dim;
    j["num_heads"] = cfg.num_heads;
    j["lookback"] = cfg.lookback;
    j["horizon"] = cfg.horizon;
    j["num_dynamic_vars"] = cfg.num_dynamic_vars;
    j["dropout_rate"] = cfg.dropout_rate;
    json vocab = json::object();
    for (const auto& [name, size] : cfg.static_vocab_sizes) vocab[name] = size;
    j["static_vocab_sizes"] = vocab;
    return j;
}

inline ModelConfig model_config_from_json(const json& j) {
    ModelConfig cfg;
    cfg.hidden_dim = j.at("hidden_dim").get<int>();
    cfg.num_heads = j.at("num_heads").get<int>();
    cfg.lookback = j.at("lookback").get<int>();
    cfg.horizon = j.at("horizon").get<int>();
    cfg.num_dynamic_vars = j.at("num_dynamic_vars").get<int>();
    cfg.dropout_rate = j.at("dropout_rate").get<double>();
    for (const auto& [name, size] : j.at("static_vocab_sizes").items()) {
        cfg.static_vocab_sizes[name] = size.get<int>();
    }
    cfg.validate();
    return cfg;
}

// ---------------------------------------------------------------------------
// Checkpoint: config, parameters, optimizer state, epoch counter, normalizer
// statistics, and vocabularies in one self-describing canonical-JSON file
// ---------------------------------------------------------------------------

struct Checkpoint {
    static constexpr int kVersion = 1;
    static constexpr const char* kFormat = "tftmtl-checkpoint";

    std::string model_kind;  // tft_mtl | tft_single_sales | tft_single_inventory | gru
    ModelConfig config;
    int epoch = 0;
    double best_val = 0.0;
    TaskWeights weights;
    std::vector<std::pair<std::string, Tensor>> params;  // canonical order
    AdamWState opt;
    NormalizerStats normalizer;
    VocabMaps vocab;
};

inline Checkpoint snapshot_checkpoint(const ForecastModel& model, const AdamWState& opt, int epoch, double best_val,
                                      TaskWeights weights, const NormalizerStats& norm, const VocabMaps& vocab) {
    Checkpoint c;
    c.model_kind = model.kind();
    if (const auto* tft = dynamic_cast<const TftMtlModel*>(&model)) {
        c.config = tft->config();
    } else if (const auto* gru = dynamic_cast<const GruModel*>(&model)) {
        c.config = gru->config();
    } else {
        throw ContractError("snapshot_checkpoint: unknown model type");
    }
    c.epoch = epoch;
    c.best_val = best_val;
    c.weights = weights;
    for (const auto& [name, t] : model.params().entries()) c.params.emplace_back(name, t);
    c.opt = opt;
    c.normalizer = norm;
    c.vocab = vocab;
    return c;
}

inline std::string checkpoint_to_json_text(const Checkpoint& c) {
    json j;
    j["format"] = Checkpoint::kFormat;
    j["version"] = Checkpoint::kVersion;
    j["model_kind"] = c.model_kind;
    j["config"] = model_config_to_json(c.config);
    j["train"] = {{"epoch", c.epoch},
                  {"best_val", c.best_val},
                  {"lambda_sales", c.weights.lambda_sales},
                  {"lambda_inventory", c.weights.lambda_inventory}};
    json params = json::object();
    for (const auto& [name, t] : c.params) {
        params[name] = {{"shape", t.shape}, {"data", base64_encode_doubles(t.data)}};
    }
    j["params"] = params;
    j["optimizer"] = {{"step", c.opt.step},
                      {"hyper",
                       {{"lr", c.opt.hyper.lr},
                        {"beta1", c.opt.hyper.beta1},
                        {"beta2", c.opt.hyper.beta2},
                        {"eps", c.opt.hyper.eps},
                        {"weight_decay", c.opt.hyper.weight_decay}}},
                      {"m", base64_encode_doubles(c.opt.m)},
                      {"v", base64_encode_doubles(c.opt.v)}};
    json norm;
    norm["features"] = c.normalizer.feature_names;
    auto stats_to_json = [](const std::vector<FeatureStats>& st) {
        json arr = json::array();
        for (const FeatureStats& s : st) arr.push_back({s.mean, s.std});
        return arr;
    };
    norm["global"] = stats_to_json(c.normalizer.global);
    json per = json::object();
    for (const auto& [pid, st] : c.normalizer.per_product) per[pid] = stats_to_json(st);
    norm["per_product"] = per;
    j["normalizer"] = norm;
    j["vocab"] = {{"product_id", c.vocab.product_id.items},
                  {"category", c.vocab.category.items},
                  {"brand", c.vocab.brand.items}};
    return j.dump(1) + "\n";
}

inline void save_checkpoint(const Checkpoint& c, const std::string& path) {
    write_file(path, checkpoint_to_json_text(c));
}

inline Checkpoint load_checkpoint(const std::string& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw LoadError("checkpoint '" + path + "': " + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != Checkpoint::kFormat) {
            throw LoadError("checkpoint '" + path + "': not a checkpoint file");
        }
        if (j.at("version").get<int>() != Checkpoint::kVersion) {
            throw LoadError("checkpoint '" + path + "': unsupported version " +
                            std::to_string(j.at("version").get<int>()));
        }
        Checkpoint c;
        c.model_kind = j.at("model_kind").get<std::string>();
        c.config = model_config_from_json(j.at("config"));
        c.epoch = j.at("train").at("epoch").get<int>();
        c.best_val = j.at("train").at("best_val").get<double>();
        c.weights.lambda_sales = j.at("train").at("lambda_sales").get<double>();
        c.weights.lambda_inventory = j.at("train").at("lambda_inventory").get<double>();
        for (const auto& [name, pj] : j.at("params").items()) {
            Shape shape = pj.at("shape").get<Shape>();
            std::vector<double> data = base64_decode_doubles(pj.at("data").get<std::string>());
            if (shape_numel(shape) != data.size()) {
                throw LoadError("checkpoint '" + path + "': parameter '" + name + "' shape " + shape_str(shape) +
                                " does not match payload length " + std::to_string(data.size()));
            }
            c.params.emplace_back(name, Tensor(std::move(shape), std::move(data), true));
        }
        const json& oj = j.at("optimizer");
        c.opt.step = oj.at("step").get<long>();
        c.opt.hyper.lr = oj.at("hyper").at("lr").get<double>();
        c.opt.hyper.beta1 = oj.at("hyper").at("beta1").get<double>();
        c.opt.hyper.beta2 = oj.at("hyper").at("beta2").get<double>();
        c.opt.hyper.eps = oj.at("hyper").at("eps").get<double>();
        c.opt.hyper.weight_decay = oj.at("hyper").at("weight_decay").get<double>();
        c.opt.m = base64_decode_doubles(oj.at("m").get<std::string>());
        c.opt.v = base64_decode_doubles(oj.at("v").get<std::string>());
        const json& nj = j.at("normalizer");
        c.normalizer.feature_names = nj.at("features").get<std::vector<std::string>>();
        auto stats_from_json = [&path](const json& arr) {
            std::vector<FeatureStats> out;
            for (const auto& e : arr) {
                if (!e.is_array() || e.size() != 2) throw LoadError("checkpoint '" + path + "': bad normalizer entry");
                out.push_back({e[0].get<double>(), e[1].get<double>()});
            }
            return out;
        };
        c.normalizer.global = stats_from_json(nj.at("global"));
        for (const auto& [pid, st] : nj.at("per_product").items()) {
            c.normalizer.per_product[pid] = stats_from_json(st);
        }
        c.vocab.product_id.items = j.at("vocab").at("product_id").get<std::vector<std::string>>();
        c.vocab.category.items = j.at("vocab").at("category").get<std::vector<std::string>>();
        c.vocab.brand.items = j.at("vocab").at("brand").get<std::vector<std::string>>();
        return c;
    } catch (const json::exception& e) {
        throw LoadError("checkpoint '" + path + "': " + e.what());
    }
}

/// Rebuilds the model a checkpoint describes and installs its parameters.
inline std::unique_ptr<ForecastModel> model_from_checkpoint(const Checkpoint& c) {
    std::unique_ptr<ForecastModel> model;
    if (c.model_kind == "tft_mtl") {
        model = std::make_unique<TftMtlModel>(c.config, HeadMode::both, 0);
    } else if (c.model_kind == "tft_single_sales") {
        model = std::make_unique<TftMtlModel>(c.config, HeadMode::sales_only, 0);
    } else if (c.model_kind == "tft_single_inventory") {
        model = std::make_unique<TftMtlModel>(c.config, HeadMode::inventory_only, 0);
    } else if (c.model_kind == "gru") {
        model = std::make_unique<GruModel>(c.config, 0);
    } else {
        throw LoadError("checkpoint: unknown model kind '" + c.model_kind + "'");
    }
    ParameterStore& store = model->params();
    if (store.count() != c.params.size()) {
        throw LoadError("checkpoint: has " + std::to_string(c.params.size()) + " parameters, model '" +
                        c.model_kind + "' expects " + std::to_string(store.count()));
    }
    for (const auto& [name, t] : c.params) {
        Tensor& dst = store.get(name);
        if (dst.shape != t.shape) {
            throw LoadError("checkpoint: parameter '" + name + "' shape " + shape_str(t.shape) +
                            " does not match model shape " + shape_str(dst.shape));
        }
        dst.data = t.data;
    }
    return model;
}

}  // namespace tftmtl
