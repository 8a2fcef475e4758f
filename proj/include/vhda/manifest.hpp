#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vhda/config.hpp"

namespace vhda {

// Every output directory carries a manifest describing the command, its
// configuration, seeds, inputs, and hashes of the artifacts it produced.
struct RunManifest {
    std::string command;
    std::string config_path;
    uint64_t config_hash = 0;
    uint64_t seed = 0;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::string started_at;
    std::string finished_at;
    std::map<std::string, uint64_t> artifact_hashes;

    json to_json() const {
        return json{{"command", command},
                    {"config_path", config_path},
                    {"config_hash", config_hash},
                    {"seed", seed},
                    {"inputs", inputs},
                    {"outputs", outputs},
                    {"started_at", started_at},
                    {"finished_at", finished_at},
                    {"artifact_hashes", artifact_hashes}};
    }
};

inline std::string iso_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

inline uint64_t hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return 0;
    uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 14];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

inline void write_manifest(const std::string& out_dir, RunManifest m) {
    m.finished_at = iso_timestamp();
    for (const auto& out : m.outputs) m.artifact_hashes[out] = hash_file(out);
    std::filesystem::create_directories(out_dir);
    std::ofstream os(std::filesystem::path(out_dir) / "manifest.json");
    os << m.to_json().dump(2) << "\n";
}

}  // namespace vhda
