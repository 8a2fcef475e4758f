#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "vhda/errors.hpp"
#include "vhda/graph.hpp"
#include "vhda/nn.hpp"

namespace vhda {

namespace fs = std::filesystem;
using json = nlohmann::json;

// Checkpoint directory layout:
//   params.bin  - named parameter blobs (values)
//   optim.bin   - Adam step counter and first/second moments
//   meta.json   - step, config hash, vocabulary/ontology hashes
// Doubles are written raw (little-endian IEEE 754), so a reload
// reproduces evaluation-mode forward passes bitwise.

namespace ckpt_detail {

inline void write_u64(std::ostream& os, uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

inline uint64_t read_u64(std::istream& is) {
    uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

inline void write_mat(std::ostream& os, const Mat& m) {
    write_u64(os, static_cast<uint64_t>(m.rows));
    write_u64(os, static_cast<uint64_t>(m.cols));
    os.write(reinterpret_cast<const char*>(m.a.data()),
             static_cast<std::streamsize>(m.a.size() * sizeof(double)));
}

inline void read_mat(std::istream& is, Mat& m) {
    const int rows = static_cast<int>(read_u64(is));
    const int cols = static_cast<int>(read_u64(is));
    if (rows != m.rows || cols != m.cols)
        throw ConfigError("checkpoint parameter shape mismatch");
    is.read(reinterpret_cast<char*>(m.a.data()),
            static_cast<std::streamsize>(m.a.size() * sizeof(double)));
}

inline void write_str(std::ostream& os, const std::string& s) {
    write_u64(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_str(std::istream& is) {
    std::string s(read_u64(is), '\0');
    is.read(s.data(), static_cast<std::streamsize>(s.size()));
    return s;
}

constexpr uint64_t kMagic = 0x56484441434b5054ULL;  // "VHDACKPT"

}  // namespace ckpt_detail

struct CheckpointMeta {
    int64_t step = 0;
    uint64_t config_hash = 0;
    uint64_t vocab_hash = 0;
    uint64_t ontology_hash = 0;

    json to_json() const {
        return json{{"step", step},
                    {"config_hash", config_hash},
                    {"vocab_hash", vocab_hash},
                    {"ontology_hash", ontology_hash}};
    }
    static CheckpointMeta from_json(const json& j) {
        CheckpointMeta m;
        m.step = j.at("step").get<int64_t>();
        m.config_hash = j.at("config_hash").get<uint64_t>();
        m.vocab_hash = j.at("vocab_hash").get<uint64_t>();
        m.ontology_hash = j.at("ontology_hash").get<uint64_t>();
        return m;
    }
};

inline void save_checkpoint(const std::string& dir, const ParamStore& params, const Adam& opt,
                            const CheckpointMeta& meta) {
    using namespace ckpt_detail;
    fs::create_directories(dir);
    {
        std::ofstream os(fs::path(dir) / "params.bin", std::ios::binary);
        if (!os) throw std::runtime_error("cannot write checkpoint params: " + dir);
        write_u64(os, kMagic);
        write_u64(os, params.all().size());
        for (const auto& p : params.all()) {
            write_str(os, p->name);
            write_mat(os, p->value);
        }
    }
    {
        std::ofstream os(fs::path(dir) / "optim.bin", std::ios::binary);
        if (!os) throw std::runtime_error("cannot write checkpoint optimizer: " + dir);
        write_u64(os, kMagic);
        write_u64(os, static_cast<uint64_t>(opt.t));
        write_u64(os, params.all().size());
        for (const auto& p : params.all()) {
            write_str(os, p->name);
            write_mat(os, p->m);
            write_mat(os, p->v);
        }
    }
    {
        std::ofstream os(fs::path(dir) / "meta.json");
        os << meta.to_json().dump(2) << "\n";
    }
}

// Loads values (and optimizer state when present) into an existing
// parameter store with identical names and shapes.
inline CheckpointMeta load_checkpoint(const std::string& dir, ParamStore& params, Adam* opt,
                                      const uint64_t* expect_config_hash = nullptr,
                                      const uint64_t* expect_vocab_hash = nullptr,
                                      const uint64_t* expect_ontology_hash = nullptr) {
    using namespace ckpt_detail;
    std::ifstream meta_in(fs::path(dir) / "meta.json");
    if (!meta_in) throw ConfigError("no checkpoint at " + dir);
    json mj;
    meta_in >> mj;
    CheckpointMeta meta = CheckpointMeta::from_json(mj);
    if (expect_config_hash && *expect_config_hash != meta.config_hash)
        throw ConfigError("checkpoint config hash mismatch");
    if (expect_vocab_hash && *expect_vocab_hash != meta.vocab_hash)
        throw ConfigError("checkpoint vocabulary hash mismatch");
    if (expect_ontology_hash && *expect_ontology_hash != meta.ontology_hash)
        throw ConfigError("checkpoint ontology hash mismatch");

    {
        std::ifstream is(fs::path(dir) / "params.bin", std::ios::binary);
        if (!is) throw ConfigError("missing params.bin in " + dir);
        if (read_u64(is) != kMagic) throw ConfigError("bad checkpoint magic");
        const uint64_t n = read_u64(is);
        if (n != params.all().size()) throw ConfigError("checkpoint parameter count mismatch");
        for (uint64_t i = 0; i < n; ++i) {
            const std::string name = read_str(is);
            Parameter* p = params.find(name);
            if (!p) throw ConfigError("unknown checkpoint parameter: " + name);
            read_mat(is, p->value);
        }
    }
    if (opt) {
        std::ifstream is(fs::path(dir) / "optim.bin", std::ios::binary);
        if (!is) throw ConfigError("missing optim.bin in " + dir);
        if (read_u64(is) != kMagic) throw ConfigError("bad checkpoint magic");
        opt->t = static_cast<int64_t>(read_u64(is));
        const uint64_t n = read_u64(is);
        for (uint64_t i = 0; i < n; ++i) {
            const std::string name = read_str(is);
            Parameter* p = params.find(name);
            if (!p) throw ConfigError("unknown checkpoint parameter: " + name);
            read_mat(is, p->m);
            read_mat(is, p->v);
        }
    }
    return meta;
}

}  // namespace vhda
