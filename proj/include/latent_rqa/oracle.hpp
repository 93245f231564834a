#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "latent_rqa/rqa.hpp"
#include "latent_rqa/trajectory.hpp"

namespace lrqa::oracle {

/// Largest trajectory the reference implementation accepts.
inline constexpr std::size_t kOracleMaxSteps = 2000;

struct OracleResult {
    RqaMetrics metrics;
    std::map<std::size_t, std::uint64_t> diagonal;
    std::map<std::size_t, std::uint64_t> vertical;
};

/// Dense boolean matrix, row-major vector of rows.
using DenseMatrix = std::vector<std::vector<bool>>;

/// Reference RQA on an explicit matrix: walks every diagonal offset k != 0 and every column
/// cell by cell. Shares no code with the optimized path.
OracleResult naive_rqa(const DenseMatrix& r, const RqaParams& params);

/// Materializes the dense distance matrix, thresholds it and calls naive_rqa.
/// Throws OracleScopeError above kOracleMaxSteps.
OracleResult brute_force_rqa(const Trajectory& traj, double epsilon, const RqaParams& params);

/// The dense thresholded matrix brute_force_rqa works on.
DenseMatrix brute_force_matrix(const Trajectory& traj, double epsilon);

}  // namespace lrqa::oracle
