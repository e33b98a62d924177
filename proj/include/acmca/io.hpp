#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "acmca/error.hpp"

namespace acmca {

inline std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

inline std::string strip(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r' || s[b] == '\n')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' || s[e - 1] == '\n'))
        --e;
    return s.substr(b, e - b);
}

inline bool parse_double(const std::string& s, double& out) {
    const std::string t = strip(s);
    if (t.empty()) return false;
    char* end = nullptr;
    out = std::strtod(t.c_str(), &end);
    return end == t.c_str() + t.size();
}

inline bool parse_long(const std::string& s, long& out) {
    const std::string t = strip(s);
    if (t.empty()) return false;
    char* end = nullptr;
    out = std::strtol(t.c_str(), &end, 10);
    return end == t.c_str() + t.size();
}

inline std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

// Formats a double with enough digits to round-trip, without trailing noise
// for short values. Deterministic, so repeated runs emit identical bytes.
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

inline std::string fmt_fixed(double v, int digits) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

// CSV document with a leading `# key=value` metadata comment block.
class CsvWriter {
  public:
    void meta(const std::string& key, const std::string& value) {
        meta_.emplace_back(key, value);
    }
    void meta(const std::string& key, double value) { meta(key, fmt_double(value)); }
    void meta(const std::string& key, long value) { meta(key, std::to_string(value)); }

    void header(const std::vector<std::string>& cols) { header_ = cols; }
    void row(const std::vector<std::string>& cells) { rows_.push_back(cells); }

    std::string str() const {
        std::ostringstream os;
        for (const auto& [k, v] : meta_) os << "# " << k << "=" << v << "\n";
        os << join(header_) << "\n";
        for (const auto& r : rows_) os << join(r) << "\n";
        return os.str();
    }

    void write(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw DataError("cannot write " + path);
        out << str();
    }

  private:
    static std::string join(const std::vector<std::string>& cells) {
        std::string s;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) s += ',';
            s += cells[i];
        }
        return s;
    }
    std::vector<std::pair<std::string, std::string>> meta_;
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

inline void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << content;
}

inline void ensure_dir(const std::string& path) {
    std::error_code ec;
    std::filesystem::create_directories(path, ec);
    if (ec) throw DataError("cannot create directory " + path + ": " + ec.message());
}

}  // namespace acmca
