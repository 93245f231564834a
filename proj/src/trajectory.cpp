#include "latent_rqa/trajectory.hpp"

#include <cmath>
#include <string>

#include "latent_rqa/errors.hpp"

namespace lrqa {

Trajectory::Trajectory(std::size_t n_steps, std::size_t dim, std::vector<float> data)
    : n_steps_(n_steps), dim_(dim), data_(std::move(data)) {
    if (n_steps_ < 2) throw ValidationError("trajectory needs at least 2 steps, got " + std::to_string(n_steps_));
    if (dim_ < 1) throw ValidationError("trajectory dimension must be positive");
    if (data_.size() != n_steps_ * dim_) {
        throw ValidationError("trajectory data has " + std::to_string(data_.size()) + " values, expected " +
                              std::to_string(n_steps_ * dim_));
    }
    for (std::size_t i = 0; i < data_.size(); ++i) {
        if (!std::isfinite(data_[i])) {
            throw ValidationError("non-finite value at step " + std::to_string(i / dim_) + ", component " +
                                  std::to_string(i % dim_));
        }
    }
}

Trajectory Trajectory::slice(std::size_t begin, std::size_t end) const {
    if (end > n_steps_ || begin >= end) throw ValidationError("invalid trajectory slice");
    std::vector<float> rows(data_.begin() + static_cast<std::ptrdiff_t>(begin * dim_),
                            data_.begin() + static_cast<std::ptrdiff_t>(end * dim_));
    return Trajectory(end - begin, dim_, std::move(rows));
}

}  // namespace lrqa
