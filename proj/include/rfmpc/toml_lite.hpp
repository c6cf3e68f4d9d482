#pragma once

#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace rfmpc::toml {

/// Flat TOML subset: [tables], key = value with numbers, booleans, strings,
/// and single-line arrays of numbers. Keys are stored as "table.key".
using Value = std::variant<double, bool, std::string, std::vector<double>>;

struct Entry {
    Value value;
    int line = 0;
    bool integral = false;  // number literal without fraction or exponent
};

using Document = std::map<std::string, Entry>;

/// Throws rfmpc::Error(ErrorKind::Config) with the offending line number.
Document parse(std::string_view text);

}  // namespace rfmpc::toml
