#include "latent_rqa/recurrence.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <string>

#include "latent_rqa/errors.hpp"
#include "latent_rqa/parallel.hpp"
#include "latent_rqa/rng.hpp"

namespace lrqa {
namespace {

// Sum of squared differences with four interleaved accumulators (component k feeds lane k % 4),
// halved and clamped. Kept in this exact order so results are reproducible bit for bit.
inline double unit_distance(const double* u, const double* v, std::size_t d) noexcept {
    double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
    std::size_t k = 0;
    for (; k + 4 <= d; k += 4) {
        const double e0 = u[k] - v[k];
        const double e1 = u[k + 1] - v[k + 1];
        const double e2 = u[k + 2] - v[k + 2];
        const double e3 = u[k + 3] - v[k + 3];
        acc0 += e0 * e0;
        acc1 += e1 * e1;
        acc2 += e2 * e2;
        acc3 += e3 * e3;
    }
    if (k < d) { const double e = u[k] - v[k]; acc0 += e * e; ++k; }
    if (k < d) { const double e = u[k] - v[k]; acc1 += e * e; ++k; }
    if (k < d) { const double e = u[k] - v[k]; acc2 += e * e; }
    return std::min(2.0, 0.5 * ((acc0 + acc1) + (acc2 + acc3)));
}

void normalize_into(std::span<const float> x, double* out, std::size_t row_index) {
    double sq = 0.0;
    for (float v : x) sq += static_cast<double>(v) * static_cast<double>(v);
    const double norm = std::sqrt(sq);
    if (!(norm > 0.0)) {
        throw DegenerateVectorError("zero-norm hidden state at step " + std::to_string(row_index));
    }
    for (std::size_t k = 0; k < x.size(); ++k) out[k] = static_cast<double>(x[k]) / norm;
}

// a[r] bit c  <->  a[c] bit r
void transpose64(std::array<std::uint64_t, 64>& a) noexcept {
    std::uint64_t m = 0x00000000FFFFFFFFULL;
    for (unsigned j = 32; j != 0; j >>= 1, m ^= (m << j)) {
        for (unsigned k = 0; k < 64; k = ((k | j) + 1) & ~j) {
            const std::uint64_t t = ((a[k] >> j) ^ a[k | j]) & m;
            a[k] ^= t << j;
            a[k | j] ^= t;
        }
    }
}

}  // namespace

double cosine_distance(std::span<const float> x, std::span<const float> y) {
    if (x.size() != y.size() || x.empty()) throw ValidationError("cosine_distance: length mismatch or empty input");
    std::vector<double> u(x.size()), v(y.size());
    normalize_into(x, u.data(), 0);
    normalize_into(y, v.data(), 1);
    return unit_distance(u.data(), v.data(), u.size());
}

UnitRows::UnitRows(const Trajectory& traj) : n_(traj.n_steps()), dim_(traj.dim()), values_(n_ * dim_) {
    for (std::size_t i = 0; i < n_; ++i) normalize_into(traj.row(i), values_.data() + i * dim_, i);
}

double UnitRows::distance(std::size_t i, std::size_t j) const noexcept {
    return unit_distance(values_.data() + i * dim_, values_.data() + j * dim_, dim_);
}

void ThresholdSpec::validate() const {
    if (fixed_epsilon) {
        if (!(*fixed_epsilon >= 0.0) || !std::isfinite(*fixed_epsilon)) {
            throw ConfigError("fixed epsilon must be a finite non-negative number");
        }
        return;
    }
    if (!(quantile > 0.0 && quantile < 1.0)) throw ConfigError("quantile must lie in (0, 1)");
    if (sample_budget == 0) throw ConfigError("sample budget must be positive");
}

double select_epsilon(const Trajectory& traj, const ThresholdSpec& spec) {
    spec.validate();
    if (spec.fixed_epsilon) return *spec.fixed_epsilon;
    return select_epsilon(UnitRows(traj), spec);
}

double select_epsilon(const UnitRows& rows, const ThresholdSpec& spec, std::size_t begin, std::size_t end) {
    spec.validate();
    if (spec.fixed_epsilon) return *spec.fixed_epsilon;
    end = std::min(end, rows.size());
    if (begin >= end || end - begin < 2) throw InsufficientDataError("select_epsilon needs at least 2 steps");

    const std::uint64_t n = end - begin;
    const std::uint64_t total = n * (n - 1) / 2;
    if (spec.mode == ThresholdSpec::Mode::exact && total > kExactPairLimit) {
        throw ConfigError("exact epsilon selection needs N(N-1)/2 <= 2^31 pairs; use sampled mode");
    }
    const bool all_pairs = spec.mode == ThresholdSpec::Mode::exact || spec.sample_budget >= total;

    std::vector<double> distances;
    if (all_pairs) {
        distances.resize(total);
        // Row i's pairs start at i*n - i(i+1)/2 in the i<j row-major enumeration.
        for (std::uint64_t i = 0; i + 1 < n; ++i) {
            double* out = distances.data() + (i * n - i * (i + 1) / 2);
            for (std::uint64_t j = i + 1; j < n; ++j) *out++ = rows.distance(begin + i, begin + j);
        }
    } else {
        // Selection sampling (Knuth's Algorithm S): pair t is kept with probability
        // remaining / (total - t); the uniform draw is a hash of (seed, t).
        const std::uint64_t wanted = spec.sample_budget;
        distances.reserve(wanted);
        const std::uint64_t key = mix64(spec.seed ^ 0x5eed'e951'1c0d'e000ULL);
        std::uint64_t t = 0;
        for (std::uint64_t i = 0; i + 1 < n && distances.size() < wanted; ++i) {
            for (std::uint64_t j = i + 1; j < n; ++j, ++t) {
                const std::uint64_t left = total - t;
                const std::uint64_t need = wanted - distances.size();
                const auto draw = static_cast<std::uint64_t>(
                    (static_cast<unsigned __int128>(mix64(key + t)) * left) >> 64);
                if (draw < need) {
                    distances.push_back(rows.distance(begin + i, begin + j));
                    if (distances.size() == wanted) break;
                }
            }
        }
    }

    const auto k = static_cast<double>(distances.size());
    auto rank = static_cast<std::size_t>(std::ceil(spec.quantile * k));
    rank = std::clamp<std::size_t>(rank, 1, distances.size());
    auto nth = distances.begin() + static_cast<std::ptrdiff_t>(rank - 1);
    std::nth_element(distances.begin(), nth, distances.end());
    return *nth;
}

RecurrenceMatrix::RecurrenceMatrix(std::size_t n, double epsilon)
    : n_(n), words_((n + 63) / 64), epsilon_(epsilon), bits_(n * words_, 0) {}

RecurrenceMatrix RecurrenceMatrix::from_dense(std::size_t n, std::span<const std::uint8_t> cells, double epsilon) {
    if (n < 1) throw ValidationError("recurrence matrix must be non-empty");
    if (cells.size() != n * n) throw ValidationError("dense matrix has wrong number of cells");
    RecurrenceMatrix m(n, epsilon);
    for (std::size_t i = 0; i < n; ++i) {
        if (!cells[i * n + i]) throw ValidationError("main diagonal must be recurrent");
        for (std::size_t j = 0; j < n; ++j) {
            const bool v = cells[i * n + j] != 0;
            if (v != (cells[j * n + i] != 0)) {
                throw ValidationError("matrix is not symmetric at (" + std::to_string(i) + ", " + std::to_string(j) + ")");
            }
            if (v) m.bits_[i * m.words_ + j / 64] |= std::uint64_t{1} << (j % 64);
        }
    }
    return m;
}

std::uint64_t RecurrenceMatrix::count() const noexcept {
    std::uint64_t total = 0;
    for (auto w : bits_) total += static_cast<std::uint64_t>(std::popcount(w));
    return total;
}

RecurrenceMatrix recurrence_matrix(const Trajectory& traj, double epsilon, unsigned threads) {
    const UnitRows rows(traj);
    return recurrence_matrix(rows, 0, rows.size(), epsilon, threads);
}

RecurrenceMatrix recurrence_matrix(const UnitRows& rows, std::size_t begin, std::size_t end, double epsilon,
                                   unsigned threads) {
    if (!(epsilon >= 0.0)) throw ConfigError("epsilon must be non-negative");
    if (end > rows.size() || begin >= end) throw ValidationError("invalid row range for recurrence matrix");
    const std::size_t n = end - begin;
    RecurrenceMatrix m(n, epsilon);
    const std::size_t words = m.words_;
    const std::size_t blocks = words;  // 64-row blocks

    // Upper triangle plus diagonal, one 64-row block per task.
    parallel_for(blocks, threads, [&](std::size_t b) {
        const std::size_t row_end = std::min(n, (b + 1) * 64);
        for (std::size_t i = b * 64; i < row_end; ++i) {
            std::uint64_t* out = m.bits_.data() + i * words;
            out[i / 64] |= std::uint64_t{1} << (i % 64);
            for (std::size_t j = i + 1; j < n; ++j) {
                if (rows.distance(begin + i, begin + j) <= epsilon) out[j / 64] |= std::uint64_t{1} << (j % 64);
            }
        }
    });

    // Mirror into the lower triangle by 64x64 block transposes. Task `bi` writes only the
    // lower words of its own rows and reads only upper-triangle words.
    parallel_for(blocks, threads, [&](std::size_t bi) {
        std::array<std::uint64_t, 64> block{};
        for (std::size_t bj = 0; bj <= bi; ++bj) {
            for (std::size_t r = 0; r < 64; ++r) {
                const std::size_t src_row = bj * 64 + r;
                block[r] = src_row < n ? m.bits_[src_row * words + bi] : 0;
            }
            transpose64(block);
            for (std::size_t r = 0; r < 64; ++r) {
                const std::size_t dst_row = bi * 64 + r;
                if (dst_row < n) m.bits_[dst_row * words + bj] |= block[r];
            }
        }
    });
    return m;
}

double recurrence_rate(const RecurrenceMatrix& matrix) {
    const std::size_t n = matrix.size();
    if (n < 2) throw InsufficientDataError("recurrence rate needs N >= 2");
    const std::uint64_t off_diagonal = matrix.count() - n;
    return static_cast<double>(off_diagonal) / (static_cast<double>(n) * static_cast<double>(n - 1));
}

namespace {

void write_image(const RecurrenceMatrix& matrix, const std::filesystem::path& path, bool flip_y, bool pbm) {
    const std::size_t n = matrix.size();
    std::string out = (pbm ? "P4\n" : "P5\n") + std::to_string(n) + " " + std::to_string(n) + "\n";
    if (!pbm) out += "255\n";
    for (std::size_t r = 0; r < n; ++r) {
        const std::size_t i = flip_y ? n - 1 - r : r;
        if (pbm) {
            for (std::size_t j0 = 0; j0 < n; j0 += 8) {
                unsigned char byte = 0;
                for (std::size_t b = 0; b < 8 && j0 + b < n; ++b) {
                    if (matrix(i, j0 + b)) byte |= static_cast<unsigned char>(0x80u >> b);
                }
                out.push_back(static_cast<char>(byte));
            }
        } else {
            for (std::size_t j = 0; j < n; ++j) out.push_back(static_cast<char>(matrix(i, j) ? 0 : 255));
        }
    }
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw IoError("cannot open " + path.string() + " for writing");
    file.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!file) throw IoError("write failed for " + path.string());
}

}  // namespace

void write_pbm(const RecurrenceMatrix& matrix, const std::filesystem::path& path, bool flip_y) {
    write_image(matrix, path, flip_y, true);
}

void write_pgm(const RecurrenceMatrix& matrix, const std::filesystem::path& path, bool flip_y) {
    write_image(matrix, path, flip_y, false);
}

}  // namespace lrqa
