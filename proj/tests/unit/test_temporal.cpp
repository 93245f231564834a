#include <cmath>
#include <numeric>

#include "doctest.h"
#include "helpers.hpp"
#include "latent_rqa/errors.hpp"
#include "latent_rqa/oracle.hpp"
#include "latent_rqa/temporal.hpp"

using namespace lrqa;

namespace {

using Windows = std::vector<std::pair<std::size_t, std::size_t>>;

// Plain DFA-1: integrate, fit a line per box by solving the 2x2 normal equations on x = 1..n,
// average squared residuals, regress log F on log n.
double naive_dfa(const std::vector<double>& x, const std::vector<std::size_t>& scales) {
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    std::vector<double> y;
    double acc = 0;
    for (double v : x) y.push_back(acc += v - mean);
    std::vector<double> lx, ly;
    for (std::size_t n : scales) {
        double total = 0;
        const std::size_t boxes = y.size() / n;
        for (std::size_t b = 0; b < boxes; ++b) {
            double s1 = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
            for (std::size_t k = 0; k < n; ++k) {
                const double xv = static_cast<double>(k + 1), yv = y[b * n + k];
                s1 += 1;
                sx += xv;
                sy += yv;
                sxx += xv * xv;
                sxy += xv * yv;
            }
            const double slope = (s1 * sxy - sx * sy) / (s1 * sxx - sx * sx);
            const double icpt = (sy - slope * sx) / s1;
            for (std::size_t k = 0; k < n; ++k) {
                const double r = y[b * n + k] - (icpt + slope * static_cast<double>(k + 1));
                total += r * r;
            }
        }
        lx.push_back(std::log(static_cast<double>(n)));
        ly.push_back(0.5 * std::log(total / static_cast<double>(boxes * n)));
    }
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / static_cast<double>(lx.size());
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / static_cast<double>(ly.size());
    double num = 0, den = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        num += (lx[i] - mx) * (ly[i] - my);
        den += (lx[i] - mx) * (lx[i] - mx);
    }
    return num / den;
}

std::vector<double> white_noise(std::size_t t, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> x(t);
    for (auto& v : x) v = rng.normal();
    return x;
}

Trajectory period_two(std::size_t n) {
    std::vector<std::vector<float>> rows;
    for (std::size_t t = 0; t < n; ++t) rows.push_back(t % 2 ? std::vector<float>{0, 1, 0} : std::vector<float>{1, 0, 0});
    return testutil::from_rows(rows);
}

}  // namespace

TEST_SUITE("temporal-features") {

TEST_CASE("sliding window layout") {
    const WindowConfig cfg;
    CHECK(sliding_windows(150, cfg) == Windows{{0, 150}});
    CHECK(sliding_windows(165, cfg) == Windows{{0, 150}, {15, 165}});
    CHECK(sliding_windows(179, cfg) == Windows{{0, 150}, {15, 165}});
    CHECK(sliding_windows(100, cfg) == Windows{{0, 100}});
    CHECK(sliding_windows(1000, cfg).size() == (1000 - 150) / 15 + 1);
    CHECK_THROWS_AS(sliding_windows(1, cfg), InsufficientDataError);
    WindowConfig bad;
    bad.step = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = {};
    bad.step = 151;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = {};
    bad.width = 9;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("constant trajectory gives identical all-ones windows") {
    const auto s = metric_series(testutil::constant_trajectory(300, 4), {}, {}, {});
    REQUIRE(s.size() == 11);
    const double w = 150.0 * 149.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        CHECK(s.rr[i] == 1.0);
        CHECK(std::fabs(s.det[i] - (w - 6) / w) <= 1e-12);
        CHECK(std::fabs(s.lam[i] - (w - 6) / w) <= 1e-12);
        CHECK(std::fabs(s.entr[i] - std::log(147.0)) <= 1e-12);
    }
}

TEST_CASE("period-2 trajectory is stationary across windows") {
    const auto traj = period_two(300);
    ThresholdSpec thr;
    thr.fixed_epsilon = 0.5;
    const auto s = metric_series(traj, {}, {}, thr);
    for (std::size_t i = 1; i < s.size(); ++i) CHECK(s.det[i] == s.det[0]);
    const auto a = oracle::brute_force_rqa(traj.slice(0, 150), 0.5, {});
    const auto b = oracle::brute_force_rqa(traj.slice(15, 165), 0.5, {});
    CHECK(std::fabs(a.metrics.det - s.det[0]) <= 1e-12);
    CHECK(std::fabs(b.metrics.det - s.det[1]) <= 1e-12);
    CHECK(std::fabs(a.metrics.lam - s.lam[0]) <= 1e-12);
}

TEST_CASE("series length follows the window count") {
    const auto s = metric_series(testutil::random_trajectory(165, 6, 1), {}, {}, {});
    CHECK(s.size() == 2);
    CHECK(s.window_starts == std::vector<std::size_t>{0, 15});
}

TEST_CASE("windows equal the oracle on the sliced trajectory under a global epsilon") {
    const auto traj = testutil::random_trajectory(260, 5, 8);
    ThresholdSpec thr;
    thr.mode = ThresholdSpec::Mode::exact;
    const auto s = metric_series(traj, {}, {}, thr);
    const double eps = select_epsilon(traj, thr);
    CHECK(s.epsilon == eps);
    for (std::size_t i = 0; i < s.size(); ++i) {
        const auto ref = oracle::brute_force_rqa(traj.slice(s.window_starts[i], s.window_starts[i] + 150), eps, {});
        CHECK(std::fabs(ref.metrics.det - s.det[i]) <= 1e-12);
        CHECK(std::fabs(ref.metrics.lam - s.lam[i]) <= 1e-12);
        CHECK(std::fabs(ref.metrics.entr - s.entr[i]) <= 1e-12);
        CHECK(std::fabs(ref.metrics.rr - s.rr[i]) <= 1e-12);
    }
}

TEST_CASE("per-window epsilon reselects the threshold inside each window") {
    const auto traj = testutil::random_trajectory(200, 5, 9);
    WindowConfig cfg;
    cfg.epsilon_policy = WindowConfig::EpsilonPolicy::per_window;
    ThresholdSpec thr;
    thr.mode = ThresholdSpec::Mode::exact;
    const auto s = metric_series(traj, cfg, {}, thr);
    for (std::size_t i = 0; i < s.size(); ++i) {
        const auto w = traj.slice(s.window_starts[i], s.window_starts[i] + 150);
        const auto ref = oracle::brute_force_rqa(w, select_epsilon(w, thr), {});
        CHECK(std::fabs(ref.metrics.det - s.det[i]) <= 1e-12);
        // about 10% of the window's pairs recur
        CHECK(s.rr[i] >= 0.1);
        CHECK(s.rr[i] < 0.11);
    }
}

TEST_CASE("metric series does not depend on the thread count") {
    const auto traj = testutil::random_trajectory(700, 8, 10);
    const auto a = metric_series(traj, {}, {}, {}, 1);
    const auto b = metric_series(traj, {}, {}, {}, 4);
    CHECK(a.det == b.det);
    CHECK(a.lam == b.lam);
    CHECK(a.entr == b.entr);
    CHECK(a.rr == b.rr);
}

TEST_CASE("linear slope") {
    const std::vector<double> line{1, 2, 3}, flat{5, 5, 5, 5}, bumpy{0, 1, 1, 2}, one{4};
    CHECK(linear_slope(line) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(linear_slope(flat) == 0.0);
    CHECK(linear_slope(bumpy) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK_THROWS_AS(linear_slope(one), InsufficientDataError);
}

TEST_CASE("slope is equivariant under affine maps of the values") {
    const auto x = white_noise(50, 3);
    std::vector<double> y;
    for (double v : x) y.push_back(2.5 * v - 7.0);
    CHECK(std::fabs(linear_slope(y) - 2.5 * linear_slope(x)) <= 1e-12);
}

TEST_CASE("dfa scale grid") {
    const auto s = dfa_scales(1024);
    CHECK(s.front() == 4);
    CHECK(s.back() == 256);
    CHECK(s.size() == 12);
    CHECK(std::is_sorted(s.begin(), s.end()));
    CHECK(dfa_scales(16) == std::vector<std::size_t>{4, 5, 6, 7});
    CHECK(dfa_scales(40).size() >= 4);
}

TEST_CASE("dfa short and constant series") {
    CHECK_FALSE(dfa_exponent(std::vector<double>(8, 1.0)).has_value());
    CHECK_FALSE(dfa_exponent(white_noise(15, 1)).has_value());
    CHECK(dfa_exponent(white_noise(16, 1)).has_value());
    CHECK_THROWS_AS(dfa_exponent(std::vector<double>(64, 0.3)), DegenerateSeriesError);
}

TEST_CASE("dfa matches a plain reference implementation") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto x = white_noise(100 + 37 * seed, seed);
        const double ref = naive_dfa(x, dfa_scales(x.size()));
        CHECK(std::fabs(*dfa_exponent(x) - ref) <= 1e-9);
    }
}

TEST_CASE("dfa is invariant under affine maps") {
    const auto x = white_noise(500, 4);
    std::vector<double> y;
    for (double v : x) y.push_back(-3.0 * v + 11.0);
    CHECK(std::fabs(*dfa_exponent(x) - *dfa_exponent(y)) <= 1e-9);
}

TEST_CASE("dfa of white and integrated noise") {
    double white = 0, brown = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto x = white_noise(1024, derive_seed(42, 0xDFA, seed));
        std::vector<double> c;
        double acc = 0;
        for (double v : x) c.push_back(acc += v);
        white += *dfa_exponent(x);
        brown += *dfa_exponent(c);
    }
    white /= 50;
    brown /= 50;
    CHECK(std::fabs(white - 0.5) <= 0.1);
    CHECK(std::fabs(brown - 1.5) <= 0.15);
}

TEST_CASE("summaries of short series") {
    MetricSeries s;
    s.det = {0.5, 0.5};
    s.lam = {0.2, 0.4};
    s.entr = {1.0, 1.0};
    const auto f = summarize_series(s);
    CHECK(f.values[0] == 0.5);
    CHECK(f.values[1] == 0.0);
    CHECK(f.values[2] == 0.0);
    CHECK_FALSE(f.values[3].has_value());
    CHECK(*f.values[4] == doctest::Approx(0.3));
    CHECK(*f.values[5] == doctest::Approx(0.1));
    CHECK(*f.values[6] == doctest::Approx(0.2));

    MetricSeries one;
    one.det = {0.7};
    one.lam = {0.1};
    one.entr = {2.0};
    const auto g = summarize_series(one);
    for (std::size_t m = 0; m < 3; ++m) {
        CHECK(g.values[4 * m].has_value());
        CHECK(g.values[4 * m + 1] == 0.0);
        CHECK_FALSE(g.values[4 * m + 2].has_value());
        CHECK_FALSE(g.values[4 * m + 3].has_value());
    }
}

TEST_CASE("slope of a unit ramp over 20 windows") {
    MetricSeries s;
    for (int i = 0; i < 20; ++i) {
        s.det.push_back(i / 19.0);
        s.lam.push_back(0.5);
        s.entr.push_back(1.0);
    }
    const auto f = summarize_series(s);
    CHECK(std::fabs(*f.values[2] - 1.0 / 19.0) <= 1e-12);
    CHECK(f.values[3].has_value());
    CHECK_FALSE(f.values[7].has_value());  // constant lam: DFA undefined
    CHECK(f.values[6] == 0.0);
}

TEST_CASE("feature names") {
    CHECK(kTemporalFeatureNames.front() == "det_mean");
    CHECK(kTemporalFeatureNames.back() == "entr_dfa");
}

}
