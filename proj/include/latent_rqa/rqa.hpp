#pragma once

#include <cstdint>
#include <map>

#include "latent_rqa/recurrence.hpp"

namespace lrqa {

enum class Orientation { diagonal, vertical };

/// Counts of maximal lines by length. Diagonal histograms count both triangles, so every
/// geometric line off the main diagonal appears twice.
struct LineHistogram {
    Orientation orientation = Orientation::diagonal;
    std::size_t n = 0;
    std::map<std::size_t, std::uint64_t> counts;

    /// Sum of l * P(l) over all lengths.
    std::uint64_t mass() const noexcept;
    /// Sum of l * P(l) over l >= min_length.
    std::uint64_t mass_from(std::size_t min_length) const noexcept;

    friend bool operator==(const LineHistogram&, const LineHistogram&) = default;
};

struct RqaParams {
    std::size_t l_min = 3;
    std::size_t v_min = 3;
    /// Zero the main-diagonal cell before extracting vertical runs, so a run crossing i == j
    /// splits in two. When false the cell stays inside the run but is not counted as a
    /// recurrence point in LAM's numerator.
    bool split_vertical_at_diagonal = true;

    void validate() const;
};

struct RqaMetrics {
    double rr = 0.0;
    double det = 0.0;
    double lam = 0.0;
    double entr = 0.0;       // nats
    bool degenerate = false;  // no off-diagonal recurrence; all metrics 0 by convention

    friend bool operator==(const RqaMetrics&, const RqaMetrics&) = default;
};

/// Maximal runs along every diagonal offset k != 0.
LineHistogram diagonal_histogram(const RecurrenceMatrix& matrix);

/// Maximal vertical runs per column (main-diagonal cells removed unless split is false).
LineHistogram vertical_histogram(const RecurrenceMatrix& matrix, bool split_at_diagonal = true);

/// RR, DET, LAM and ENTR of a recurrence matrix.
RqaMetrics quantify(const RecurrenceMatrix& matrix, const RqaParams& params = {});

}  // namespace lrqa
