#pragma once

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <string>

#include <json.hpp>

#include "vhda/errors.hpp"

namespace vhda {

using json = nlohmann::json;

struct ModelConfig {
    int word_emb = 64;       // token embedding width
    int feat_width = 64;     // goal/state/utterance/conversation encoding width
    int act_width = 64;      // act-triple encoding width, shared with scoring heads
    int ctx_width = 128;     // dialog context LSTM width
    int latent_global = 16;  // z_c
    int latent_turn = 16;    // z_r, z_g, z_s, z_u
    int spk_emb = 16;
    int dec_hidden = 64;     // utterance decoder LSTM width
    int n_speakers = 2;
    int max_decode_len = 24;
    double dropout_base = 0.1;
    double dropout_ratio = 1.5;
    double sigma_floor = 1e-4;
    int neg_samples = 0;  // 0 = score the full ontology

    json to_json() const {
        return json{{"word_emb", word_emb},
                    {"feat_width", feat_width},
                    {"act_width", act_width},
                    {"ctx_width", ctx_width},
                    {"latent_global", latent_global},
                    {"latent_turn", latent_turn},
                    {"spk_emb", spk_emb},
                    {"dec_hidden", dec_hidden},
                    {"n_speakers", n_speakers},
                    {"max_decode_len", max_decode_len},
                    {"dropout_base", dropout_base},
                    {"dropout_ratio", dropout_ratio},
                    {"sigma_floor", sigma_floor},
                    {"neg_samples", neg_samples}};
    }

    static ModelConfig from_json(const json& j) {
        ModelConfig c;
        c.word_emb = j.value("word_emb", c.word_emb);
        c.feat_width = j.value("feat_width", c.feat_width);
        c.act_width = j.value("act_width", c.act_width);
        c.ctx_width = j.value("ctx_width", c.ctx_width);
        c.latent_global = j.value("latent_global", c.latent_global);
        c.latent_turn = j.value("latent_turn", c.latent_turn);
        c.spk_emb = j.value("spk_emb", c.spk_emb);
        c.dec_hidden = j.value("dec_hidden", c.dec_hidden);
        c.n_speakers = j.value("n_speakers", c.n_speakers);
        c.max_decode_len = j.value("max_decode_len", c.max_decode_len);
        c.dropout_base = j.value("dropout_base", c.dropout_base);
        c.dropout_ratio = j.value("dropout_ratio", c.dropout_ratio);
        c.sigma_floor = j.value("sigma_floor", c.sigma_floor);
        c.neg_samples = j.value("neg_samples", c.neg_samples);
        return c;
    }
};

struct TrainConfig {
    double lr = 1e-3;
    int batch_size = 4;
    int64_t max_steps = 2000;
    int64_t anneal_horizon = 1000;
    double mi_weight = 1.0;
    double clip_norm = 5.0;
    uint64_t seed = 1;
    int64_t ckpt_every = 1000;
    bool hierarchical_dropout = true;
    bool anneal_enabled = true;

    json to_json() const {
        return json{{"lr", lr},
                    {"batch_size", batch_size},
                    {"max_steps", max_steps},
                    {"anneal_horizon", anneal_horizon},
                    {"mi_weight", mi_weight},
                    {"clip_norm", clip_norm},
                    {"seed", seed},
                    {"ckpt_every", ckpt_every},
                    {"hierarchical_dropout", hierarchical_dropout},
                    {"anneal_enabled", anneal_enabled}};
    }

    static TrainConfig from_json(const json& j) {
        TrainConfig c;
        c.lr = j.value("lr", c.lr);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.max_steps = j.value("max_steps", c.max_steps);
        c.anneal_horizon = j.value("anneal_horizon", c.anneal_horizon);
        c.mi_weight = j.value("mi_weight", c.mi_weight);
        c.clip_norm = j.value("clip_norm", c.clip_norm);
        c.seed = j.value("seed", c.seed);
        c.ckpt_every = j.value("ckpt_every", c.ckpt_every);
        c.hierarchical_dropout = j.value("hierarchical_dropout", c.hierarchical_dropout);
        c.anneal_enabled = j.value("anneal_enabled", c.anneal_enabled);
        if (c.lr <= 0 || c.batch_size <= 0 || c.max_steps < 0 || c.anneal_horizon <= 0)
            throw ConfigError("train config values must be positive");
        return c;
    }
};

struct RunConfig {
    ModelConfig model;
    TrainConfig train;

    json to_json() const { return json{{"model", model.to_json()}, {"train", train.to_json()}}; }

    static RunConfig from_json(const json& j) {
        RunConfig c;
        if (j.contains("model")) c.model = ModelConfig::from_json(j["model"]);
        if (j.contains("train")) c.train = TrainConfig::from_json(j["train"]);
        return c;
    }
};

// Desk-scale preset: minutes on a laptop CPU.
inline RunConfig toy_preset() { return RunConfig{}; }

// Full-scale preset mirroring the published hyperparameters.
inline RunConfig paper_preset() {
    RunConfig c;
    c.model.word_emb = 400;
    c.model.feat_width = 500;
    c.model.act_width = 500;
    c.model.ctx_width = 1000;
    c.model.latent_global = 200;
    c.model.latent_turn = 100;
    c.model.dec_hidden = 500;
    c.train.max_steps = 250000;
    c.train.anneal_horizon = 250000;
    c.train.batch_size = 32;
    c.train.ckpt_every = 10000;
    return c;
}

inline RunConfig preset_by_name(const std::string& name) {
    if (name == "toy") return toy_preset();
    if (name == "paper") return paper_preset();
    throw ConfigError("unknown preset: " + name);
}

// Environment overrides: VHDA_<SECTION>_<KEY> (upper case) replaces the
// corresponding config leaf, e.g. VHDA_TRAIN_MAX_STEPS=100.
inline void apply_env_overrides(json& cfg, const std::string& prefix = "VHDA") {
    for (auto& [section, body] : cfg.items()) {
        if (!body.is_object()) continue;
        for (auto& [key, value] : body.items()) {
            std::string env_key = prefix + "_" + section + "_" + key;
            for (auto& c : env_key) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
            const char* env = std::getenv(env_key.c_str());
            if (!env) continue;
            if (value.is_number_integer() || value.is_number_unsigned())
                value = json(std::stoll(env));
            else if (value.is_number_float())
                value = json(std::stod(env));
            else if (value.is_boolean())
                value = json(std::string(env) == "1" || std::string(env) == "true");
            else
                value = json(std::string(env));
        }
    }
}

inline RunConfig load_run_config(const std::string& path, const std::string& preset = "toy") {
    json j = preset_by_name(preset).to_json();
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file: " + path);
        json file;
        try {
            in >> file;
        } catch (const json::exception& e) {
            throw ConfigError("config " + path + ": " + e.what());
        }
        for (auto& [section, body] : file.items()) {
            if (!j.contains(section)) {
                j[section] = body;
                continue;
            }
            for (auto& [key, value] : body.items()) j[section][key] = value;
        }
    }
    apply_env_overrides(j);
    return RunConfig::from_json(j);
}

inline uint64_t fnv1a(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline uint64_t config_hash(const RunConfig& c) { return fnv1a(c.to_json().dump()); }

}  // namespace vhda
