// Shared test utilities: scratch directories and tiny builders.
#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "toothseg/types.hpp"

namespace testutil {

/// Fresh scratch directory under the system temp dir, unique per name.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("toothseg_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline toothseg::Volume3 constant_volume(std::array<int, 3> dims, float value,
                                         std::array<double, 3> spacing = {1, 1, 1}) {
    return toothseg::Volume3(dims, spacing, value);
}

inline toothseg::Volume3 random_u16_volume(std::array<int, 3> dims, std::mt19937_64& rng) {
    toothseg::Volume3 v(dims, {1, 1, 1});
    std::uniform_int_distribution<int> dist(0, 65535);
    for (auto& x : v.data) x = static_cast<float>(dist(rng));
    return v;
}

}  // namespace testutil
