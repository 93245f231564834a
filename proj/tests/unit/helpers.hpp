#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "latent_rqa/rng.hpp"
#include "latent_rqa/trajectory.hpp"

namespace testutil {

class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("lrqa_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    f << text;
}

/// Gaussian rows, not normalized.
inline lrqa::Trajectory random_trajectory(std::size_t n, std::size_t d, std::uint64_t seed) {
    lrqa::Rng rng(seed);
    std::vector<float> v(n * d);
    for (auto& x : v) x = static_cast<float>(rng.normal());
    return lrqa::Trajectory(n, d, std::move(v));
}

inline lrqa::Trajectory from_rows(const std::vector<std::vector<float>>& rows) {
    std::vector<float> v;
    for (const auto& r : rows) v.insert(v.end(), r.begin(), r.end());
    return lrqa::Trajectory(rows.size(), rows.front().size(), std::move(v));
}

inline lrqa::Trajectory constant_trajectory(std::size_t n, std::size_t d) {
    return lrqa::Trajectory(n, d, std::vector<float>(n * d, 0.5f));
}

}  // namespace testutil
