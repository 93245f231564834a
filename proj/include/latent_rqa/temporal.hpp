#pragma once

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "latent_rqa/recurrence.hpp"
#include "latent_rqa/rqa.hpp"

namespace lrqa {

struct WindowConfig {
    enum class EpsilonPolicy { trace_global, per_window };

    std::size_t width = 150;
    std::size_t step = 15;
    EpsilonPolicy epsilon_policy = EpsilonPolicy::trace_global;

    void validate() const;
};

/// Half-open [start, end) window ranges: [k*step, k*step + W) for k = 0..floor((n-W)/step),
/// or the single window [0, n) when n < W.
std::vector<std::pair<std::size_t, std::size_t>> sliding_windows(std::size_t n_steps, const WindowConfig& cfg);

struct MetricSeries {
    std::vector<std::size_t> window_starts;
    std::vector<double> rr, det, lam, entr;
    std::vector<bool> degenerate;  // per window
    double epsilon = 0.0;          // trace-global epsilon (unused under per_window)

    std::size_t size() const noexcept { return window_starts.size(); }
};

/// Per-window RQA over sliding windows. Under trace_global one epsilon is selected from the
/// whole trajectory and reused for every window.
MetricSeries metric_series(const Trajectory& traj, const WindowConfig& cfg, const RqaParams& params,
                           const ThresholdSpec& threshold, unsigned threads = 1);

/// OLS slope of the series against its index 0..T-1. Throws InsufficientDataError for T < 2.
double linear_slope(std::span<const double> series);

struct DfaOptions {
    std::size_t box_min = 4;
    double box_max_fraction = 0.25;
    std::size_t n_scales = 12;
};

inline constexpr std::size_t kDfaMinLength = 16;

/// Box sizes used by dfa_exponent for a series of length T.
std::vector<std::size_t> dfa_scales(std::size_t length, const DfaOptions& options = {});

/// DFA-1 scaling exponent: slope of ln F(n) against ln n. Returns nullopt for T < 16;
/// throws DegenerateSeriesError if the fluctuation vanishes at some scale.
std::optional<double> dfa_exponent(std::span<const double> series, const DfaOptions& options = {});

inline constexpr std::array<std::string_view, 12> kTemporalFeatureNames{
    "det_mean", "det_std", "det_slope", "det_dfa",  "lam_mean",  "lam_std",
    "lam_slope", "lam_dfa", "entr_mean", "entr_std", "entr_slope", "entr_dfa"};

/// The twelve temporal features in kTemporalFeatureNames order; nullopt marks a missing value.
struct TemporalFeatures {
    std::array<std::optional<double>, 12> values;
};

TemporalFeatures summarize_series(const MetricSeries& series, const DfaOptions& options = {});

}  // namespace lrqa
