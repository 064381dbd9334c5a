#pragma once

#include <fstream>
#include <initializer_list>
#include <stdexcept>
#include <string>

#include <json.hpp>

// Shared helpers for the strict version-1 file loaders.
namespace headbal::jsonutil {

using nlohmann::json;

inline json parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
}

inline void write_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed for " + path);
}

// Rejects unknown keys; `where` names the object in error messages.
inline void expect_keys(const json& j, const std::string& where,
                        std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw std::runtime_error(where + ": expected an object");
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (const char* a : allowed) {
            if (key == a) {
                known = true;
                break;
            }
        }
        if (!known) throw std::runtime_error(where + ": unknown field \"" + key + "\"");
    }
}

inline const json& require(const json& j, const std::string& where, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw std::runtime_error(where + ": missing field \"" + key + "\"");
    return *it;
}

inline long require_int(const json& j, const std::string& where, const char* key) {
    const json& v = require(j, where, key);
    if (!v.is_number_integer()) {
        throw std::runtime_error(where + "." + key + ": expected an integer");
    }
    return v.get<long>();
}

inline double require_number(const json& j, const std::string& where, const char* key) {
    const json& v = require(j, where, key);
    if (!v.is_number()) throw std::runtime_error(where + "." + key + ": expected a number");
    return v.get<double>();
}

inline std::string require_string(const json& j, const std::string& where, const char* key) {
    const json& v = require(j, where, key);
    if (!v.is_string()) throw std::runtime_error(where + "." + key + ": expected a string");
    return v.get<std::string>();
}

inline void require_version_1(const json& j, const std::string& where) {
    if (require_int(j, where, "version") != 1) {
        throw std::runtime_error(where + ": unsupported version (expected 1)");
    }
}

}  // namespace headbal::jsonutil
