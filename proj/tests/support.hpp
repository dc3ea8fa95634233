#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cornyield/csv.hpp"
#include "cornyield/dataset.hpp"
#include "cornyield/matrix.hpp"
#include "cornyield/rng.hpp"

namespace testing {

inline cornyield::Matrix random_matrix(std::size_t rows, std::size_t cols, cornyield::Rng& rng, double lo = 0.0,
                                       double hi = 1.0) {
    cornyield::Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = rng.uniform(lo, hi);
    return m;
}

inline std::vector<double> random_vector(std::size_t n, cornyield::Rng& rng, double lo = 0.0, double hi = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return v;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("cornyield_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string slurp(const std::filesystem::path& p) { return cornyield::csv::read_file(p); }

}  // namespace testing
