#pragma once

// Checkpoint files: JSON mapping parameter names to {shape, flat data},
// values serialized with 9 significant digits (exact for float32).

#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "gspkit/tensor.hpp"

namespace gspkit {

inline double round9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return std::strtod(buf, nullptr);
}

inline nlohmann::json checkpoint_to_json(const Params& params, const nlohmann::json& config) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["config"] = config;
    nlohmann::json p = nlohmann::json::object();
    for (const auto& [name, t] : params) {
        nlohmann::json arr = nlohmann::json::array();
        for (float v : t->data) arr.push_back(round9(v));
        p[name] = {{"shape", t->shape}, {"data", std::move(arr)}};
    }
    j["params"] = std::move(p);
    return j;
}

inline void save_checkpoint(const Params& params, const nlohmann::json& config,
                            const std::string& path) {
    std::ofstream f(path);
    if (!f) throw TensorError("save_checkpoint: cannot open " + path);
    f << checkpoint_to_json(params, config).dump();
    f << "\n";
}

struct Checkpoint {
    nlohmann::json config;
    std::map<std::string, std::pair<std::vector<int>, std::vector<float>>> params;
};

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw TensorError("load_checkpoint: cannot open " + path);
    nlohmann::json j = nlohmann::json::parse(f);
    if (!j.contains("format_version") || j["format_version"].get<int>() != 1)
        throw TensorError("load_checkpoint: unsupported format_version in " + path);
    Checkpoint ck;
    ck.config = j.value("config", nlohmann::json::object());
    for (auto& [name, entry] : j.at("params").items()) {
        std::vector<int> shape = entry.at("shape").get<std::vector<int>>();
        std::vector<float> data = entry.at("data").get<std::vector<float>>();
        if (static_cast<int>(data.size()) != shape_numel(shape))
            throw TensorError("load_checkpoint: shape/data mismatch for '" + name + "'");
        ck.params[name] = {std::move(shape), std::move(data)};
    }
    return ck;
}

// Copies checkpoint values into an existing parameter set (shapes must match).
inline void restore_params(const Params& params, const Checkpoint& ck) {
    for (const auto& [name, t] : params) {
        auto it = ck.params.find(name);
        if (it == ck.params.end()) throw TensorError("restore_params: missing parameter '" + name + "'");
        if (it->second.first != t->shape)
            throw TensorError("restore_params: shape mismatch for '" + name + "'");
        t->data = it->second.second;
        t->zero_grad();
    }
}

}  // namespace gspkit
