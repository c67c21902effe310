#pragma once

#include <bit>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "terraclass/errors.hpp"

namespace terraclass {

static_assert(std::endian::native == std::endian::little,
              "binary grid formats are little-endian; big-endian hosts are unsupported");

inline std::string trim(const std::string& s) {
    const char* ws = " \t\r\n";
    auto b = s.find_first_not_of(ws);
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) out.push_back(cur);
    if (!s.empty() && s.back() == sep) out.push_back("");
    return out;
}

// Shortest decimal string that parses back to exactly the same double.
inline std::string format_double(double v) {
    char buf[40];
    for (int prec = 6; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

inline double parse_double(const std::string& s, const std::string& what) {
    char* end = nullptr;
    std::string t = trim(s);
    double v = std::strtod(t.c_str(), &end);
    if (t.empty() || end != t.c_str() + t.size())
        throw data_error("cannot parse " + what + ": '" + s + "'");
    return v;
}

inline long parse_long(const std::string& s, const std::string& what) {
    char* end = nullptr;
    std::string t = trim(s);
    long v = std::strtol(t.c_str(), &end, 10);
    if (t.empty() || end != t.c_str() + t.size())
        throw data_error("cannot parse " + what + ": '" + s + "'");
    return v;
}

// Writes through a temp file in the same directory, then renames into place.
inline void write_file_atomic(const std::string& path, const void* data, std::size_t size) {
    std::string tmp = path + ".tmp~";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw data_error("cannot open for writing: " + tmp);
        out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
        if (!out) throw data_error("write failed: " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw data_error("rename failed: " + tmp + " -> " + path + " (" + ec.message() + ")");
}

inline void write_file_atomic(const std::string& path, const std::string& text) {
    write_file_atomic(path, text.data(), text.size());
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::vector<char> read_binary_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw data_error("cannot open file: " + path);
    auto size = in.tellg();
    std::vector<char> buf(static_cast<std::size_t>(size));
    in.seekg(0);
    in.read(buf.data(), size);
    if (!in) throw data_error("read failed: " + path);
    return buf;
}

// Plain "key = value" document. Blank lines and '#' comments are skipped;
// repeated keys are rejected.
inline std::map<std::string, std::string> parse_key_values(const std::string& text,
                                                           const std::string& what) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw data_error(what + ": line " + std::to_string(lineno) + " is not 'key = value'");
        std::string key = trim(t.substr(0, eq));
        std::string val = trim(t.substr(eq + 1));
        if (key.empty())
            throw data_error(what + ": empty key at line " + std::to_string(lineno));
        if (!kv.emplace(key, val).second)
            throw data_error(what + ": duplicate key '" + key + "'");
    }
    return kv;
}

}  // namespace terraclass
