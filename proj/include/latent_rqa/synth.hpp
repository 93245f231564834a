#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "latent_rqa/trajectory.hpp"
#include "latent_rqa/trajectory_io.hpp"

namespace lrqa {

enum class RegimeKind { noise, periodic, laminar, mixed };

RegimeKind parse_regime(const std::string& name);
std::string to_string(RegimeKind kind);

struct Regime {
    RegimeKind kind = RegimeKind::noise;  // noise, periodic or laminar
    std::size_t length = 0;
};

/// Synthetic trajectory with known dynamical character. All rows are unit norm.
///  - noise: i.i.d. random unit vectors
///  - periodic: a cycle of `period` fixed random unit vectors
///  - laminar: runs of `plateau_len` identical rows; each plateau picks a state from a pool of
///    `n_plateaus` random unit vectors (0 = a fresh state per plateau)
///  - mixed: concatenation of the `schedule` segments, each generated from its own sub-seed
/// noise_scale adds N(0, noise_scale^2 / d) per component before renormalising.
struct SynthSpec {
    RegimeKind kind = RegimeKind::noise;
    std::size_t n_steps = 300;
    std::size_t dim = 64;
    std::size_t period = 2;
    std::size_t plateau_len = 20;
    std::size_t n_plateaus = 0;
    std::vector<Regime> schedule;
    double noise_scale = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
};

Trajectory generate(const SynthSpec& spec);

SynthSpec synth_spec_from_json(const nlohmann::json& j);

/// One class of a regime corpus: segment kinds are drawn with these relative weights.
struct RegimeClass {
    std::string config;
    double periodic = 1.0;
    double laminar = 1.0;
    double noise = 1.0;
};

/// Labelled corpus whose classes differ only in how often each regime appears. Every trace
/// has the same length; each group (puzzle) belongs to one class.
struct CorpusSpec {
    std::vector<RegimeClass> classes;
    std::size_t groups_per_class = 20;
    std::size_t traces_per_group = 10;
    std::size_t n_steps = 600;
    std::size_t dim = 64;
    std::size_t segment_len = 100;
    std::size_t period = 4;
    std::size_t plateau_len = 25;
    double noise_scale = 0.05;
    std::uint64_t seed = 0;
};

struct SynthTrace {
    TraceRecord record;
    SynthSpec spec;
};

std::vector<SynthTrace> make_regime_corpus(const CorpusSpec& spec);

/// Reads a synth description: {"traces": [...], "corpus": {...}} (either or both).
std::vector<SynthTrace> synth_traces_from_json(const nlohmann::json& j);

/// Writes <dir>/<trace_id>.ltrj for every trace plus <dir>/manifest.jsonl. Returns the records.
std::vector<TraceRecord> write_synth_corpus(const std::vector<SynthTrace>& traces, const std::filesystem::path& dir);

}  // namespace lrqa
