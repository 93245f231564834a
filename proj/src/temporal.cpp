#include "latent_rqa/temporal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "latent_rqa/errors.hpp"
#include "latent_rqa/parallel.hpp"

namespace lrqa {

void WindowConfig::validate() const {
    if (width < 10) throw ConfigError("window width must be >= 10");
    if (step < 1 || step > width) throw ConfigError("window step must lie in [1, width]");
}

std::vector<std::pair<std::size_t, std::size_t>> sliding_windows(std::size_t n_steps, const WindowConfig& cfg) {
    cfg.validate();
    if (n_steps < 2) throw InsufficientDataError("sliding windows need at least 2 steps");
    if (n_steps < cfg.width) return {{0, n_steps}};
    std::vector<std::pair<std::size_t, std::size_t>> windows;
    const std::size_t count = (n_steps - cfg.width) / cfg.step + 1;
    windows.reserve(count);
    for (std::size_t k = 0; k < count; ++k) windows.emplace_back(k * cfg.step, k * cfg.step + cfg.width);
    return windows;
}

MetricSeries metric_series(const Trajectory& traj, const WindowConfig& cfg, const RqaParams& params,
                           const ThresholdSpec& threshold, unsigned threads) {
    params.validate();
    threshold.validate();
    const auto windows = sliding_windows(traj.n_steps(), cfg);
    const UnitRows rows(traj);

    MetricSeries series;
    const bool global = cfg.epsilon_policy == WindowConfig::EpsilonPolicy::trace_global;
    if (global) series.epsilon = select_epsilon(rows, threshold);

    const std::size_t t = windows.size();
    std::vector<RqaMetrics> metrics(t);
    parallel_for(t, threads, [&](std::size_t w) {
        const auto [begin, end] = windows[w];
        const double eps = global ? series.epsilon : select_epsilon(rows, threshold, begin, end);
        metrics[w] = quantify(recurrence_matrix(rows, begin, end, eps), params);
    });

    series.window_starts.reserve(t);
    for (std::size_t w = 0; w < t; ++w) {
        series.window_starts.push_back(windows[w].first);
        series.rr.push_back(metrics[w].rr);
        series.det.push_back(metrics[w].det);
        series.lam.push_back(metrics[w].lam);
        series.entr.push_back(metrics[w].entr);
        series.degenerate.push_back(metrics[w].degenerate);
    }
    return series;
}

double linear_slope(std::span<const double> series) {
    const std::size_t t = series.size();
    if (t < 2) throw InsufficientDataError("linear slope needs at least 2 points");
    const double x_mean = static_cast<double>(t - 1) / 2.0;
    const double y_mean = std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(t);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < t; ++i) {
        const double dx = static_cast<double>(i) - x_mean;
        sxy += dx * (series[i] - y_mean);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

std::vector<std::size_t> dfa_scales(std::size_t length, const DfaOptions& options) {
    if (options.box_min < 2 || options.n_scales < 2) throw ConfigError("DFA needs box_min >= 2 and >= 2 scales");
    // At least four integer scales are always available: the upper box size is raised to
    // box_min + 3 when length * fraction falls short (this still keeps two boxes at T = 16).
    const auto by_fraction = static_cast<std::size_t>(std::floor(static_cast<double>(length) * options.box_max_fraction));
    const std::size_t box_max = std::max(by_fraction, options.box_min + 3);
    if (box_max > length / 2) throw InsufficientDataError("series too short for DFA");

    std::vector<std::size_t> scales;
    const double lo = std::log(static_cast<double>(options.box_min));
    const double hi = std::log(static_cast<double>(box_max));
    for (std::size_t s = 0; s < options.n_scales; ++s) {
        const double x = lo + (hi - lo) * static_cast<double>(s) / static_cast<double>(options.n_scales - 1);
        scales.push_back(static_cast<std::size_t>(std::lround(std::exp(x))));
    }
    scales.erase(std::unique(scales.begin(), scales.end()), scales.end());
    if (scales.size() < 4) {
        scales.clear();
        for (std::size_t s = options.box_min; s <= box_max; ++s) scales.push_back(s);
    }
    return scales;
}

std::optional<double> dfa_exponent(std::span<const double> series, const DfaOptions& options) {
    const std::size_t t = series.size();
    if (t < kDfaMinLength) return std::nullopt;

    const double mean = std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(t);
    double spread = 0.0;
    for (double v : series) spread += (v - mean) * (v - mean);
    spread = std::sqrt(spread / static_cast<double>(t));
    if (!(spread > 1e-12 * std::max(1.0, std::abs(mean)))) {
        throw DegenerateSeriesError("DFA of a constant series is undefined");
    }

    std::vector<double> profile(t);
    double running = 0.0;
    for (std::size_t i = 0; i < t; ++i) {
        running += series[i] - mean;
        profile[i] = running;
    }

    const auto scales = dfa_scales(t, options);
    std::vector<double> log_n, log_f;
    for (std::size_t n : scales) {
        const std::size_t boxes = t / n;
        // Least-squares line on x = 0..n-1 within each box; the x moments are shared.
        const double x_mean = static_cast<double>(n - 1) / 2.0;
        double sxx = 0.0;
        for (std::size_t k = 0; k < n; ++k) sxx += (static_cast<double>(k) - x_mean) * (static_cast<double>(k) - x_mean);
        double residual_sq = 0.0;
        for (std::size_t b = 0; b < boxes; ++b) {
            const double* y = profile.data() + b * n;
            double y_mean = 0.0;
            for (std::size_t k = 0; k < n; ++k) y_mean += y[k];
            y_mean /= static_cast<double>(n);
            double sxy = 0.0;
            for (std::size_t k = 0; k < n; ++k) sxy += (static_cast<double>(k) - x_mean) * (y[k] - y_mean);
            const double slope = sxy / sxx;
            for (std::size_t k = 0; k < n; ++k) {
                const double r = y[k] - (y_mean + slope * (static_cast<double>(k) - x_mean));
                residual_sq += r * r;
            }
        }
        const double f = std::sqrt(residual_sq / static_cast<double>(boxes * n));
        if (!(f > 1e-12 * spread)) throw DegenerateSeriesError("DFA fluctuation vanishes at box size " + std::to_string(n));
        log_n.push_back(std::log(static_cast<double>(n)));
        log_f.push_back(std::log(f));
    }

    const double xm = std::accumulate(log_n.begin(), log_n.end(), 0.0) / static_cast<double>(log_n.size());
    const double ym = std::accumulate(log_f.begin(), log_f.end(), 0.0) / static_cast<double>(log_f.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < log_n.size(); ++i) {
        sxy += (log_n[i] - xm) * (log_f[i] - ym);
        sxx += (log_n[i] - xm) * (log_n[i] - xm);
    }
    return sxy / sxx;
}

TemporalFeatures summarize_series(const MetricSeries& series, const DfaOptions& options) {
    TemporalFeatures out;
    const std::array<const std::vector<double>*, 3> metrics{&series.det, &series.lam, &series.entr};
    for (std::size_t m = 0; m < metrics.size(); ++m) {
        const auto& x = *metrics[m];
        if (x.empty()) continue;
        const auto t = static_cast<double>(x.size());
        const double mean = std::accumulate(x.begin(), x.end(), 0.0) / t;
        double var = 0.0;
        for (double v : x) var += (v - mean) * (v - mean);
        out.values[4 * m + 0] = mean;
        out.values[4 * m + 1] = std::sqrt(var / t);
        if (x.size() >= 2) out.values[4 * m + 2] = linear_slope(x);
        try {
            out.values[4 * m + 3] = dfa_exponent(x, options);
        } catch (const DegenerateSeriesError&) {
            // flat series: left missing, imputed later
        }
    }
    return out;
}

}  // namespace lrqa
