#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "latent_rqa/trajectory.hpp"

namespace lrqa {

/// Cosine distance 1 - x.y/(|x||y|), evaluated as |u - v|^2 / 2 on the unit vectors
/// u = x/|x|, v = y/|y| and clamped to [0, 2]. The two forms agree up to round-off;
/// the second is exactly 0 for identical rows and exactly symmetric.
/// Throws DegenerateVectorError on zero-norm input.
double cosine_distance(std::span<const float> x, std::span<const float> y);

/// Trajectory rows L2-normalized once (double precision), so each pairwise distance is a
/// single pass over d components.
class UnitRows {
public:
    explicit UnitRows(const Trajectory& traj);

    std::size_t size() const noexcept { return n_; }
    std::size_t dim() const noexcept { return dim_; }
    std::span<const double> row(std::size_t i) const noexcept { return {values_.data() + i * dim_, dim_}; }

    double distance(std::size_t i, std::size_t j) const noexcept;

private:
    std::size_t n_;
    std::size_t dim_;
    std::vector<double> values_;
};

struct ThresholdSpec {
    enum class Mode { exact, sampled };

    double quantile = 0.10;
    Mode mode = Mode::sampled;
    std::uint64_t sample_budget = 10'000'000;  // pairs
    std::uint64_t seed = 0;
    std::optional<double> fixed_epsilon;  // bypasses the quantile entirely

    void validate() const;
};

/// Largest pair count accepted by exact mode.
inline constexpr std::uint64_t kExactPairLimit = std::uint64_t{1} << 31;

/// Lower nearest-rank q-quantile of pairwise distances (i < j): the element at index
/// ceil(q*K) - 1 of the sorted distances. Sampled mode draws min(K, sample_budget) pairs
/// without replacement (selection sampling driven by a counter-based hash of the seed), so
/// a budget >= K reproduces exact mode. Deterministic for a given seed.
double select_epsilon(const Trajectory& traj, const ThresholdSpec& spec);

/// Same, restricted to rows [begin, end) of pre-normalized rows.
double select_epsilon(const UnitRows& rows, const ThresholdSpec& spec, std::size_t begin = 0,
                      std::size_t end = std::numeric_limits<std::size_t>::max());

enum class Metric { cosine };

/// Symmetric N x N binary matrix, bit-packed row-major (bit j of row i lives in word j/64,
/// position j%64). Padding bits past column N-1 are always zero.
class RecurrenceMatrix {
public:
    /// From a row-major 0/1 array; must be symmetric with an all-ones main diagonal.
    static RecurrenceMatrix from_dense(std::size_t n, std::span<const std::uint8_t> cells, double epsilon = 0.0);

    std::size_t size() const noexcept { return n_; }
    double epsilon() const noexcept { return epsilon_; }
    Metric metric() const noexcept { return Metric::cosine; }
    std::size_t words_per_row() const noexcept { return words_; }

    bool operator()(std::size_t i, std::size_t j) const noexcept {
        return (bits_[i * words_ + j / 64] >> (j % 64)) & 1u;
    }
    std::span<const std::uint64_t> row_words(std::size_t i) const noexcept {
        return {bits_.data() + i * words_, words_};
    }

    /// Number of set cells, main diagonal included.
    std::uint64_t count() const noexcept;

    friend bool operator==(const RecurrenceMatrix&, const RecurrenceMatrix&) = default;

private:
    friend RecurrenceMatrix recurrence_matrix(const UnitRows&, std::size_t, std::size_t, double, unsigned);
    RecurrenceMatrix(std::size_t n, double epsilon);

    std::size_t n_;
    std::size_t words_;
    double epsilon_;
    std::vector<std::uint64_t> bits_;
};

/// R[i][j] = 1 iff distance(h_i, h_j) <= epsilon (equality counts as recurrent).
RecurrenceMatrix recurrence_matrix(const Trajectory& traj, double epsilon, unsigned threads = 1);

/// Matrix over rows [begin, end) of pre-normalized rows.
RecurrenceMatrix recurrence_matrix(const UnitRows& rows, std::size_t begin, std::size_t end, double epsilon,
                                   unsigned threads = 1);

/// Off-diagonal recurrence fraction: sum_{i != j} R / (N (N - 1)).
double recurrence_rate(const RecurrenceMatrix& matrix);

/// Binary PBM (P4) dump, 1 = recurrent (black). Row 0 = time index 0 at the top unless flip_y.
void write_pbm(const RecurrenceMatrix& matrix, const std::filesystem::path& path, bool flip_y = false);

/// Binary PGM (P5), 0 = recurrent (dark), 255 = non-recurrent.
void write_pgm(const RecurrenceMatrix& matrix, const std::filesystem::path& path, bool flip_y = false);

}  // namespace lrqa
