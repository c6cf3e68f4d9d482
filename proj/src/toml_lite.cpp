#include "rfmpc/toml_lite.hpp"

#include <cctype>
#include <charconv>
#include <limits>
#include <sstream>

#include "rfmpc/errors.hpp"

namespace rfmpc::toml {

namespace {

[[noreturn]] void fail(int line, const std::string& what) {
    std::ostringstream msg;
    msg << "config line " << line << ": " << what;
    throw Error(ErrorKind::Config, msg.str());
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

// Drops a trailing comment that is not inside a string.
std::string_view strip_comment(std::string_view s) {
    bool in_string = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) in_string = !in_string;
        if (s[i] == '#' && !in_string) return s.substr(0, i);
    }
    return s;
}

bool valid_key(std::string_view key) {
    if (key.empty()) return false;
    for (char c : key) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
    }
    return true;
}

double parse_number(std::string_view text, int line, bool* integral) {
    std::string cleaned;
    for (char c : text) {
        if (c != '_') cleaned.push_back(c);
    }
    std::string_view s = cleaned;
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    if (s == "inf") return std::numeric_limits<double>::infinity();
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size()) fail(line, "invalid value '" + std::string(text) + "'");
    if (integral) *integral = s.find_first_of(".eE") == std::string_view::npos;
    return value;
}

Entry parse_value(std::string_view text, int line) {
    Entry entry;
    entry.line = line;
    if (text.empty()) fail(line, "missing value");
    if (text.front() == '"') {
        if (text.size() < 2 || text.back() != '"') fail(line, "unterminated string");
        entry.value = std::string(text.substr(1, text.size() - 2));
        return entry;
    }
    if (text == "true" || text == "false") {
        entry.value = (text == "true");
        return entry;
    }
    if (text.front() == '[') {
        if (text.back() != ']') fail(line, "unterminated array");
        std::vector<double> values;
        std::string_view body = trim(text.substr(1, text.size() - 2));
        while (!body.empty()) {
            const auto comma = body.find(',');
            const std::string_view item = trim(body.substr(0, comma));
            if (!item.empty()) values.push_back(parse_number(item, line, nullptr));
            if (comma == std::string_view::npos) break;
            body = trim(body.substr(comma + 1));
        }
        entry.value = std::move(values);
        return entry;
    }
    entry.value = parse_number(text, line, &entry.integral);
    return entry;
}

}  // namespace

Document parse(std::string_view text) {
    Document doc;
    std::string table;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto end = text.find('\n', pos);
        std::string_view raw = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
        pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
        ++line_no;

        const std::string_view line = trim(strip_comment(raw));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail(line_no, "malformed table header");
            const std::string_view name = trim(line.substr(1, line.size() - 2));
            if (!valid_key(name)) fail(line_no, "invalid table name '" + std::string(name) + "'");
            table = std::string(name);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) fail(line_no, "expected 'key = value'");
        const std::string_view key = trim(line.substr(0, eq));
        if (!valid_key(key)) fail(line_no, "invalid key '" + std::string(key) + "'");
        const std::string full = table.empty() ? std::string(key) : table + "." + std::string(key);
        if (doc.count(full)) fail(line_no, "duplicate key '" + full + "'");
        doc.emplace(full, parse_value(trim(line.substr(eq + 1)), line_no));
    }
    return doc;
}

}  // namespace rfmpc::toml
