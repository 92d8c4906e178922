#pragma once

// Helpers shared by the strict JSON readers (diagram, task, config, fixtures).

#include "utilimax/error.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <string_view>

namespace utilimax::detail {

using json = nlohmann::json;

inline json parse_json_text(std::string_view text, ErrorCode code = ErrorCode::Parse) {
    try {
        return json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        // e.byte is 1-based and points one past the offending character.
        std::size_t offset = e.byte == 0 ? 0 : e.byte - 1;
        if (offset > text.size()) offset = text.size();
        std::size_t line = 1;
        std::size_t column = 1;
        for (std::size_t i = 0; i < offset; ++i) {
            if (text[i] == '\n') {
                ++line;
                column = 1;
            } else {
                ++column;
            }
        }
        if (code == ErrorCode::Parse) throw SyntaxError("syntax error", line, column);
        throw Error(code, "syntax error (line " + std::to_string(line) + ", column " +
                              std::to_string(column) + ")");
    }
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write file: " + path.string());
    out << text;
    if (!out) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

inline void require_object(const json& j, const std::string& where, ErrorCode code) {
    if (!j.is_object()) throw Error(code, where + ": expected an object");
}

inline void reject_unknown_keys(const json& j, std::initializer_list<std::string_view> allowed,
                                const std::string& where, ErrorCode code) {
    for (const auto& item : j.items()) {
        bool known = false;
        for (auto key : allowed) {
            if (item.key() == key) {
                known = true;
                break;
            }
        }
        if (!known) throw Error(code, where + ": unknown key '" + item.key() + "'");
    }
}

inline std::string get_string(const json& j, const char* key, const std::string& where,
                              ErrorCode code) {
    auto it = j.find(key);
    if (it == j.end()) throw Error(code, where + ": missing key '" + key + "'");
    if (!it->is_string()) throw Error(code, where + "." + key + ": expected a string");
    return it->get<std::string>();
}

inline std::string get_string_or(const json& j, const char* key, std::string fallback,
                                 const std::string& where, ErrorCode code) {
    if (!j.contains(key)) return fallback;
    return get_string(j, key, where, code);
}

inline double get_number(const json& j, const char* key, const std::string& where,
                         ErrorCode code) {
    auto it = j.find(key);
    if (it == j.end()) throw Error(code, where + ": missing key '" + key + "'");
    if (!it->is_number()) throw Error(code, where + "." + key + ": expected a number");
    return it->get<double>();
}

inline long long get_integer(const json& j, const char* key, const std::string& where,
                             ErrorCode code) {
    auto it = j.find(key);
    if (it == j.end()) throw Error(code, where + ": missing key '" + key + "'");
    if (!it->is_number_integer()) throw Error(code, where + "." + key + ": expected an integer");
    return it->get<long long>();
}

}  // namespace utilimax::detail
