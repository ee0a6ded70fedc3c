#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"

namespace fdot::test {

// Numeric rows of a CSV file with one header line.
inline std::vector<std::vector<double>> read_csv(const std::string& name) {
    std::ifstream in(std::string(FDOT_TEST_DATA) + "/" + name);
    REQUIRE_MESSAGE(in.good(), "missing test data " << name);
    std::vector<std::vector<double>> rows;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace fdot::test
