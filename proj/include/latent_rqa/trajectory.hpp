#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace lrqa {

/// Hard cap on generation steps kept per trace.
inline constexpr std::size_t kMaxSteps = 32000;

/// Time-ordered hidden-state sequence: N rows (generation steps) of d floats, row-major.
///
/// Invariants checked on construction: N >= 2, d >= 1, data.size() == N*d, all values finite.
/// The step cap is applied by the loaders, not here, so synthetic tests can exceed it.
class Trajectory {
public:
    Trajectory(std::size_t n_steps, std::size_t dim, std::vector<float> data);

    std::size_t n_steps() const noexcept { return n_steps_; }
    std::size_t dim() const noexcept { return dim_; }

    std::span<const float> row(std::size_t t) const noexcept { return {data_.data() + t * dim_, dim_}; }
    std::span<const float> data() const noexcept { return data_; }

    /// Rows [begin, end) as a new trajectory (end - begin >= 2).
    Trajectory slice(std::size_t begin, std::size_t end) const;

    friend bool operator==(const Trajectory&, const Trajectory&) = default;

private:
    std::size_t n_steps_;
    std::size_t dim_;
    std::vector<float> data_;
};

}  // namespace lrqa
