#pragma once

#include <fstream>
#include <string>

#include "json.hpp"

namespace loko::test {

inline std::string data_path(const std::string& name) { return std::string(LOKO_TEST_DATA_DIR) + "/" + name; }

inline nlohmann::json load_json(const std::string& name) {
    std::ifstream in(data_path(name));
    return nlohmann::json::parse(in);
}

/// |a - b| <= rel * |b|
inline bool rel_close(double a, double b, double rel) { return std::abs(a - b) <= rel * std::abs(b); }

}  // namespace loko::test
