#pragma once
#include <chrono>
#include <cstdio>
#include <ctime>
#include <string>
#include <vector>

#include <json.hpp>

#include "tftmtl/textio.hpp"

namespace tftmtl {

/// One manifest per CLI run: command, seed, fully-resolved config, input and
/// output checksums, and timestamps, so every experiment is replayable.
struct RunManifest {
    std::string command;
    std::uint64_t seed = 0;
    nlohmann::ordered_json resolved_config;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    nlohmann::ordered_json extra;  // e.g. the training leakage guard

    std::string to_json_text() const {
        nlohmann::ordered_json j;
        j["command"] = command;
        j["seed"] = seed;
        j["timestamp_utc"] = now_utc_iso();
        j["config"] = resolved_config;
        auto files = [](const std::vector<std::string>& paths) {
            nlohmann::ordered_json out = nlohmann::ordered_json::object();
            for (const std::string& p : paths) {
                const std::string content = read_file(p);
                out[p] = {{"fnv1a64", to_hex(fnv1a64(content))}, {"bytes", content.size()}};
            }
            return out;
        };
        j["inputs"] = files(inputs);
        j["outputs"] = files(outputs);
        if (!extra.is_null()) j["extra"] = extra;
        return j.dump(1) + "\n";
    }

    void write(const std::string& path) const { write_file(path, to_json_text()); }

    static std::string now_utc_iso() {
        const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        std::tm tm{};
        gmtime_r(&t, &tm);
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                      tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
        return buf;
    }
};

}  // namespace tftmtl
