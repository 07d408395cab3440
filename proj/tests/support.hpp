#pragma once

#include "fbctl/problem.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <string>

namespace fbctl::testing {

inline std::string config_path(const std::string& name) {
    return std::string(FBCTL_CONFIG_DIR) + "/" + name + ".json";
}

inline Problem shipped(const std::string& name) { return load_problem_file(config_path(name)); }

inline nlohmann::json shipped_json(const std::string& name) {
    std::ifstream is(config_path(name));
    return nlohmann::json::parse(is);
}

inline nlohmann::json family(const std::string& name, const nlohmann::json& params) {
    return {{"family", name}, {"params", params}};
}

// A d=1 problem assembled from catalog selections.
inline nlohmann::json problem_json(const nlohmann::json& drift, const nlohmann::json& diffusion,
                                   const nlohmann::json& driver, const nlohmann::json& terminal,
                                   const nlohmann::json& mesh = nlohmann::json::array({0}), double horizon = 1.0,
                                   int dim = 1) {
    return {{"dimension", dim},   {"horizon", horizon},     {"control_mesh", mesh}, {"drift", drift},
            {"diffusion", diffusion}, {"driver", driver}, {"terminal", terminal}};
}

inline Vec vec1(double a) {
    Vec v(1);
    v << a;
    return v;
}

inline Vec vec2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

inline ControlPoint ctrl(double a) {
    ControlPoint v(1);
    v << a;
    return v;
}

}  // namespace fbctl::testing
