// Deliberately plain reference implementation. Nothing here calls into recurrence.cpp or
// rqa.cpp; the only thing shared with the optimized path is the documented floating-point
// recipe for the distance (double-precision unit rows, squared differences summed in four
// interleaved lanes, halved, clamped to 2), so thresholds land on the same side.

#include "latent_rqa/oracle.hpp"

#include <cmath>
#include <string>

#include "latent_rqa/errors.hpp"

namespace lrqa::oracle {
namespace {

std::vector<std::vector<double>> unit_rows(const Trajectory& traj) {
    std::vector<std::vector<double>> rows(traj.n_steps(), std::vector<double>(traj.dim()));
    for (std::size_t t = 0; t < traj.n_steps(); ++t) {
        const auto x = traj.row(t);
        double sq = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) sq += static_cast<double>(x[k]) * static_cast<double>(x[k]);
        const double norm = std::sqrt(sq);
        if (norm == 0.0) throw DegenerateVectorError("oracle: zero-norm row " + std::to_string(t));
        for (std::size_t k = 0; k < x.size(); ++k) rows[t][k] = static_cast<double>(x[k]) / norm;
    }
    return rows;
}

double distance(const std::vector<double>& u, const std::vector<double>& v) {
    double lane[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t k = 0; k < u.size(); ++k) {
        const double e = u[k] - v[k];
        lane[k % 4] += e * e;
    }
    const double d = 0.5 * ((lane[0] + lane[1]) + (lane[2] + lane[3]));
    return d > 2.0 ? 2.0 : d;
}

void record_run(std::map<std::size_t, std::uint64_t>& hist, std::size_t& run) {
    if (run > 0) hist[run] += 1;
    run = 0;
}

}  // namespace

DenseMatrix brute_force_matrix(const Trajectory& traj, double epsilon) {
    const std::size_t n = traj.n_steps();
    if (n > kOracleMaxSteps) throw OracleScopeError("oracle is limited to N <= 2000");
    const auto rows = unit_rows(traj);
    std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) dist[i][j] = distance(rows[i], rows[j]);
    }
    DenseMatrix r(n, std::vector<bool>(n, false));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) r[i][j] = dist[i][j] <= epsilon;  // Theta(0) = 1
    }
    return r;
}

OracleResult naive_rqa(const DenseMatrix& r, const RqaParams& params) {
    const std::size_t n = r.size();
    OracleResult out;

    std::uint64_t off_diagonal = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i != j && r[i][j]) ++off_diagonal;
        }
    }

    // Diagonals k = j - i, both signs.
    for (long k = -static_cast<long>(n) + 1; k < static_cast<long>(n); ++k) {
        if (k == 0) continue;
        std::size_t run = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const long j = static_cast<long>(i) + k;
            if (j < 0 || j >= static_cast<long>(n)) continue;
            if (r[i][static_cast<std::size_t>(j)]) {
                ++run;
            } else {
                record_run(out.diagonal, run);
            }
        }
        record_run(out.diagonal, run);
    }

    // Columns, top to bottom.
    std::uint64_t vertical_points = 0;
    for (std::size_t j = 0; j < n; ++j) {
        std::size_t run = 0;
        bool run_has_diagonal = false;
        for (std::size_t i = 0; i <= n; ++i) {
            bool cell = i < n && r[i][j];
            if (i == j && params.split_vertical_at_diagonal) cell = false;
            if (cell) {
                ++run;
                if (i == j) run_has_diagonal = true;
                continue;
            }
            if (run >= params.v_min) vertical_points += run - (run_has_diagonal ? 1 : 0);
            record_run(out.vertical, run);
            run_has_diagonal = false;
        }
    }

    if (off_diagonal == 0) {
        out.metrics = RqaMetrics{0.0, 0.0, 0.0, 0.0, true};
        return out;
    }

    std::uint64_t det_points = 0, long_lines = 0;
    for (const auto& [len, count] : out.diagonal) {
        if (len >= params.l_min) {
            det_points += len * count;
            long_lines += count;
        }
    }
    double entropy = 0.0;
    for (const auto& [len, count] : out.diagonal) {
        if (len < params.l_min) continue;
        const double p = static_cast<double>(count) / static_cast<double>(long_lines);
        entropy -= p * std::log(p);
    }

    const auto denom = static_cast<double>(off_diagonal);
    out.metrics.rr = denom / (static_cast<double>(n) * static_cast<double>(n - 1));
    out.metrics.det = static_cast<double>(det_points) / denom;
    out.metrics.lam = static_cast<double>(vertical_points) / denom;
    out.metrics.entr = entropy == 0.0 ? 0.0 : entropy;
    out.metrics.degenerate = false;
    return out;
}

OracleResult brute_force_rqa(const Trajectory& traj, double epsilon, const RqaParams& params) {
    return naive_rqa(brute_force_matrix(traj, epsilon), params);
}

}  // namespace lrqa::oracle
