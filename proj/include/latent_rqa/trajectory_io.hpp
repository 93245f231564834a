#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "latent_rqa/trajectory.hpp"

namespace lrqa {

// Trajectory file layout (all little-endian):
//   "LTRJ" | u32 version=1 | u64 N | u64 d | u32 dtype=1 (float32) | N*d float32, row-major
inline constexpr std::uint32_t kTrajectoryVersion = 1;
inline constexpr std::uint32_t kDtypeFloat32 = 1;
inline constexpr std::size_t kTrajectoryHeaderBytes = 28;

struct LoadedTrajectory {
    Trajectory trajectory;
    std::uint64_t stored_steps = 0;  // N from the header, before the cap
    bool truncated = false;          // stored_steps > kMaxSteps
};

void write_trajectory(const Trajectory& traj, const std::filesystem::path& path);

/// Reads and validates a trajectory file; rows beyond kMaxSteps are dropped and flagged.
LoadedTrajectory read_trajectory(const std::filesystem::path& path);

/// Grid configuration "NxM" (houses x features).
struct GridConfig {
    int n_houses = 0;
    int m_features = 0;

    std::string str() const;
    friend auto operator<=>(const GridConfig&, const GridConfig&) = default;
};

/// Parses "NxM" with N, M >= 2. Throws ValidationError otherwise.
GridConfig parse_config(const std::string& text);

/// One manifest line. `correct` is empty for traces not yet graded.
struct TraceRecord {
    std::string trace_id;
    std::string path;  // relative to the manifest's directory unless absolute
    std::string puzzle_id;
    GridConfig config;
    std::optional<bool> correct;
    std::uint64_t n_tokens = 0;

    friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

/// Parses JSONL text; `source` names the input in diagnostics. Blank lines are skipped.
std::vector<TraceRecord> parse_manifest(const std::string& text, const std::string& source = "<manifest>");
std::vector<TraceRecord> load_manifest(const std::filesystem::path& path);

/// One JSONL line (no trailing newline) with keys in canonical order.
std::string manifest_line(const TraceRecord& record);
void write_manifest(const std::vector<TraceRecord>& records, const std::filesystem::path& path);

/// Resolves a record's trajectory path against the manifest directory.
std::filesystem::path resolve_trace_path(const TraceRecord& record, const std::filesystem::path& manifest_dir);

}  // namespace lrqa
