#include "latent_rqa/rqa.hpp"

#include <bit>
#include <cmath>
#include <vector>

#include "latent_rqa/errors.hpp"

namespace lrqa {
namespace {

std::map<std::size_t, std::uint64_t> to_map(const std::vector<std::uint64_t>& dense) {
    std::map<std::size_t, std::uint64_t> counts;
    for (std::size_t l = 1; l < dense.size(); ++l) {
        if (dense[l]) counts.emplace(l, dense[l]);
    }
    return counts;
}

struct VerticalScan {
    std::vector<std::uint64_t> counts;  // indexed by run length
    std::uint64_t points_on_long_runs = 0;
};

// Horizontal runs of each row, which equal the vertical runs of the matching column because
// the matrix is symmetric.
VerticalScan scan_vertical(const RecurrenceMatrix& m, bool split_at_diagonal, std::size_t v_min) {
    const std::size_t n = m.size();
    const std::size_t words = m.words_per_row();
    VerticalScan scan{std::vector<std::uint64_t>(n + 1, 0), 0};
    std::vector<std::uint64_t> row(words + 1, 0);
    for (std::size_t c = 0; c < n; ++c) {
        const auto src = m.row_words(c);
        std::copy(src.begin(), src.end(), row.begin());
        const std::uint64_t diag_bit = std::uint64_t{1} << (c % 64);
        if (split_at_diagonal) row[c / 64] &= ~diag_bit;

        std::size_t run_start = 0;
        std::uint64_t carry_in = 0;  // top bit of the previous word
        for (std::size_t w = 0; w < words; ++w) {
            const std::uint64_t x = row[w];
            const std::uint64_t before = (x << 1) | carry_in;
            const std::uint64_t after = (x >> 1) | (row[w + 1] << 63);
            carry_in = x >> 63;
            const std::uint64_t starts = x & ~before;
            const std::uint64_t ends = x & ~after;
            std::uint64_t events = starts | ends;
            while (events) {
                const auto b = static_cast<std::size_t>(std::countr_zero(events));
                const std::uint64_t bit = std::uint64_t{1} << b;
                const std::size_t pos = w * 64 + b;
                if (starts & bit) run_start = pos;
                if (ends & bit) {
                    const std::size_t len = pos - run_start + 1;
                    ++scan.counts[len];
                    if (len >= v_min) {
                        const bool holds_diagonal = !split_at_diagonal && run_start <= c && c <= pos;
                        scan.points_on_long_runs += len - (holds_diagonal ? 1 : 0);
                    }
                }
                events &= events - 1;
            }
        }
    }
    return scan;
}

}  // namespace

std::uint64_t LineHistogram::mass() const noexcept { return mass_from(1); }

std::uint64_t LineHistogram::mass_from(std::size_t min_length) const noexcept {
    std::uint64_t total = 0;
    for (auto it = counts.lower_bound(min_length); it != counts.end(); ++it) total += it->first * it->second;
    return total;
}

void RqaParams::validate() const {
    if (l_min < 2) throw ConfigError("l_min must be >= 2");
    if (v_min < 2) throw ConfigError("v_min must be >= 2");
}

LineHistogram diagonal_histogram(const RecurrenceMatrix& m) {
    const std::size_t n = m.size();
    const std::size_t words = m.words_per_row();
    std::vector<std::uint64_t> counts(n + 1, 0);
    std::vector<std::size_t> start_row(n, 0);  // by offset k = j - i
    const std::vector<std::uint64_t> zeros(words + 1, 0);

    // A diagonal run through (i, j), j > i, starts where R[i-1][j-1] = 0 and ends where
    // R[i+1][j+1] = 0. Both conditions are evaluated a word at a time on shifted neighbours.
    for (std::size_t i = 0; i < n; ++i) {
        const auto cur = m.row_words(i);
        const std::uint64_t* prev = i > 0 ? m.row_words(i - 1).data() : zeros.data();
        const std::uint64_t* next = i + 1 < n ? m.row_words(i + 1).data() : zeros.data();
        for (std::size_t w = (i + 1) / 64; w < words; ++w) {
            std::uint64_t x = cur[w];
            if (w == (i + 1) / 64) x &= ~std::uint64_t{0} << ((i + 1) % 64);  // keep j > i
            if (!x) continue;
            const std::uint64_t prev_shift = (prev[w] << 1) | (w > 0 ? prev[w - 1] >> 63 : 0);
            const std::uint64_t next_shift = (next[w] >> 1) | (w + 1 < words ? next[w + 1] << 63 : 0);
            for (std::uint64_t s = x & ~prev_shift; s; s &= s - 1) {
                const std::size_t j = w * 64 + static_cast<std::size_t>(std::countr_zero(s));
                start_row[j - i] = i;
            }
            for (std::uint64_t e = x & ~next_shift; e; e &= e - 1) {
                const std::size_t j = w * 64 + static_cast<std::size_t>(std::countr_zero(e));
                counts[i - start_row[j - i] + 1] += 2;  // mirrored line below the diagonal
            }
        }
    }
    return LineHistogram{Orientation::diagonal, n, to_map(counts)};
}

LineHistogram vertical_histogram(const RecurrenceMatrix& m, bool split_at_diagonal) {
    auto scan = scan_vertical(m, split_at_diagonal, m.size() + 1);
    return LineHistogram{Orientation::vertical, m.size(), to_map(scan.counts)};
}

RqaMetrics quantify(const RecurrenceMatrix& m, const RqaParams& params) {
    params.validate();
    const std::size_t n = m.size();
    if (n < 2) throw InsufficientDataError("RQA needs N >= 2");
    const std::uint64_t off_diagonal = m.count() - n;
    if (off_diagonal == 0) return RqaMetrics{0.0, 0.0, 0.0, 0.0, true};

    const auto denom = static_cast<double>(off_diagonal);
    RqaMetrics out;
    out.rr = recurrence_rate(m);

    const LineHistogram diag = diagonal_histogram(m);
    out.det = static_cast<double>(diag.mass_from(params.l_min)) / denom;

    std::uint64_t long_lines = 0;
    for (auto it = diag.counts.lower_bound(params.l_min); it != diag.counts.end(); ++it) long_lines += it->second;
    if (long_lines > 0) {
        double h = 0.0;
        for (auto it = diag.counts.lower_bound(params.l_min); it != diag.counts.end(); ++it) {
            const double p = static_cast<double>(it->second) / static_cast<double>(long_lines);
            h -= p * std::log(p);
        }
        out.entr = h == 0.0 ? 0.0 : h;  // avoid -0
    }

    const VerticalScan vert = scan_vertical(m, params.split_vertical_at_diagonal, params.v_min);
    out.lam = static_cast<double>(vert.points_on_long_runs) / denom;
    return out;
}

}  // namespace lrqa
