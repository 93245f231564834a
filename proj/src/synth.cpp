#include "latent_rqa/synth.hpp"

#include <cmath>
#include <fstream>

#include "latent_rqa/errors.hpp"
#include "latent_rqa/rng.hpp"
#include "latent_rqa/trajectory_io.hpp"

namespace lrqa {
namespace {

constexpr std::uint64_t kStateStream = 0x57A7E;
constexpr std::uint64_t kNoiseStream = 0x0015E;
constexpr std::uint64_t kSegmentStream = 0x5E6;
constexpr std::uint64_t kCorpusStream = 0xC0DE;

std::vector<double> random_unit(Rng& rng, std::size_t dim) {
    std::vector<double> v(dim);
    double sq = 0.0;
    do {
        sq = 0.0;
        for (auto& x : v) {
            x = rng.normal();
            sq += x * x;
        }
    } while (sq == 0.0);
    const double norm = std::sqrt(sq);
    for (auto& x : v) x /= norm;
    return v;
}

// Appends `state` (+ optional isotropic noise), renormalised, as one float row.
void emit(std::vector<float>& out, const std::vector<double>& state, double noise_scale, Rng& noise) {
    std::vector<double> row = state;
    if (noise_scale > 0.0) {
        const double sd = noise_scale / std::sqrt(static_cast<double>(row.size()));
        for (auto& x : row) x += sd * noise.normal();
    }
    double sq = 0.0;
    for (double x : row) sq += x * x;
    const double norm = std::sqrt(sq);
    for (double x : row) out.push_back(static_cast<float>(x / norm));
}

void generate_into(std::vector<float>& out, RegimeKind kind, std::size_t length, const SynthSpec& spec,
                   std::uint64_t seed) {
    Rng states(derive_seed(seed, kStateStream, 0));
    Rng noise(derive_seed(seed, kNoiseStream, 0));
    switch (kind) {
        case RegimeKind::noise:
            for (std::size_t t = 0; t < length; ++t) emit(out, random_unit(states, spec.dim), 0.0, noise);
            break;
        case RegimeKind::periodic: {
            std::vector<std::vector<double>> cycle;
            for (std::size_t p = 0; p < spec.period; ++p) cycle.push_back(random_unit(states, spec.dim));
            for (std::size_t t = 0; t < length; ++t) emit(out, cycle[t % spec.period], spec.noise_scale, noise);
            break;
        }
        case RegimeKind::laminar: {
            std::vector<std::vector<double>> pool;
            for (std::size_t p = 0; p < spec.n_plateaus; ++p) pool.push_back(random_unit(states, spec.dim));
            std::vector<double> current;
            for (std::size_t t = 0; t < length; ++t) {
                if (t % spec.plateau_len == 0) {
                    current = pool.empty() ? random_unit(states, spec.dim)
                                           : pool[static_cast<std::size_t>(states.below(pool.size()))];
                }
                emit(out, current, spec.noise_scale, noise);
            }
            break;
        }
        case RegimeKind::mixed:
            throw ConfigError("mixed regimes cannot be nested");
    }
}

template <typename T>
T field_or(const nlohmann::json& j, const char* key, T fallback) {
    return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace

RegimeKind parse_regime(const std::string& name) {
    if (name == "noise") return RegimeKind::noise;
    if (name == "periodic") return RegimeKind::periodic;
    if (name == "laminar") return RegimeKind::laminar;
    if (name == "mixed") return RegimeKind::mixed;
    throw ConfigError("unknown regime \"" + name + "\"");
}

std::string to_string(RegimeKind kind) {
    switch (kind) {
        case RegimeKind::noise: return "noise";
        case RegimeKind::periodic: return "periodic";
        case RegimeKind::laminar: return "laminar";
        case RegimeKind::mixed: return "mixed";
    }
    return "?";
}

void SynthSpec::validate() const {
    if (n_steps < 2) throw ConfigError("synthetic trajectory needs n_steps >= 2");
    if (dim < 1) throw ConfigError("synthetic trajectory needs dim >= 1");
    if (period < 1) throw ConfigError("period must be positive");
    if (plateau_len < 1) throw ConfigError("plateau_len must be positive");
    if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale)) throw ConfigError("noise_scale must be >= 0");
    if (kind == RegimeKind::mixed) {
        std::size_t total = 0;
        for (const auto& r : schedule) {
            if (r.length == 0) throw ConfigError("schedule segments need positive length");
            if (r.kind == RegimeKind::mixed) throw ConfigError("mixed regimes cannot be nested");
            total += r.length;
        }
        if (total != n_steps) {
            throw ConfigError("schedule lengths sum to " + std::to_string(total) + ", expected n_steps=" +
                              std::to_string(n_steps));
        }
    }
}

Trajectory generate(const SynthSpec& spec) {
    spec.validate();
    std::vector<float> data;
    data.reserve(spec.n_steps * spec.dim);
    if (spec.kind == RegimeKind::mixed) {
        for (std::size_t s = 0; s < spec.schedule.size(); ++s) {
            generate_into(data, spec.schedule[s].kind, spec.schedule[s].length, spec,
                          derive_seed(spec.seed, kSegmentStream, s));
        }
    } else {
        generate_into(data, spec.kind, spec.n_steps, spec, spec.seed);
    }
    return Trajectory(spec.n_steps, spec.dim, std::move(data));
}

SynthSpec synth_spec_from_json(const nlohmann::json& j) {
    SynthSpec s;
    try {
        s.kind = parse_regime(field_or<std::string>(j, "kind", "noise"));
        s.n_steps = field_or<std::size_t>(j, "n_steps", s.n_steps);
        s.dim = field_or<std::size_t>(j, "dim", s.dim);
        s.period = field_or<std::size_t>(j, "period", s.period);
        s.plateau_len = field_or<std::size_t>(j, "plateau_len", s.plateau_len);
        s.n_plateaus = field_or<std::size_t>(j, "n_plateaus", s.n_plateaus);
        s.noise_scale = field_or<double>(j, "noise_scale", s.noise_scale);
        s.seed = field_or<std::uint64_t>(j, "seed", s.seed);
        if (j.contains("schedule")) {
            for (const auto& seg : j.at("schedule")) {
                s.schedule.push_back({parse_regime(seg.at("kind").get<std::string>()), seg.at("length").get<std::size_t>()});
            }
            if (!j.contains("n_steps")) {
                s.n_steps = 0;
                for (const auto& r : s.schedule) s.n_steps += r.length;
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("bad synth spec: ") + e.what());
    }
    s.validate();
    return s;
}

std::vector<SynthTrace> make_regime_corpus(const CorpusSpec& spec) {
    if (spec.classes.empty()) throw ConfigError("corpus needs at least one class");
    if (spec.segment_len == 0 || spec.n_steps % spec.segment_len != 0) {
        throw ConfigError("n_steps must be a positive multiple of segment_len");
    }
    std::vector<SynthTrace> traces;
    const std::size_t segments = spec.n_steps / spec.segment_len;
    for (std::size_t c = 0; c < spec.classes.size(); ++c) {
        const auto& cls = spec.classes[c];
        const double weights[3] = {cls.periodic, cls.laminar, cls.noise};
        const double total = weights[0] + weights[1] + weights[2];
        if (!(total > 0.0) || weights[0] < 0.0 || weights[1] < 0.0 || weights[2] < 0.0) {
            throw ConfigError("class " + cls.config + " needs non-negative regime weights with a positive sum");
        }
        const GridConfig config = parse_config(cls.config);
        for (std::size_t g = 0; g < spec.groups_per_class; ++g) {
            const std::string puzzle = "p" + cls.config + "_" + std::to_string(g);
            for (std::size_t t = 0; t < spec.traces_per_group; ++t) {
                const std::uint64_t unit = (c * spec.groups_per_class + g) * spec.traces_per_group + t;
                Rng rng(derive_seed(spec.seed, kCorpusStream, unit));
                SynthSpec s;
                s.kind = RegimeKind::mixed;
                s.n_steps = spec.n_steps;
                s.dim = spec.dim;
                s.period = spec.period;
                s.plateau_len = spec.plateau_len;
                s.noise_scale = spec.noise_scale;
                s.seed = rng.next();
                for (std::size_t k = 0; k < segments; ++k) {
                    const double u = rng.uniform() * total;
                    const RegimeKind kind = u < weights[0]               ? RegimeKind::periodic
                                            : u < weights[0] + weights[1] ? RegimeKind::laminar
                                                                          : RegimeKind::noise;
                    s.schedule.push_back({kind, spec.segment_len});
                }
                TraceRecord rec;
                rec.trace_id = puzzle + "_t" + std::to_string(t);
                rec.path = rec.trace_id + ".ltrj";
                rec.puzzle_id = puzzle;
                rec.config = config;
                rec.correct = rng.uniform() < 0.5;
                rec.n_tokens = spec.n_steps;
                traces.push_back({std::move(rec), std::move(s)});
            }
        }
    }
    return traces;
}

std::vector<SynthTrace> synth_traces_from_json(const nlohmann::json& j) {
    std::vector<SynthTrace> traces;
    try {
        if (j.contains("corpus")) {
            const auto& c = j.at("corpus");
            CorpusSpec spec;
            for (const auto& cls : c.at("classes")) {
                RegimeClass rc;
                rc.config = cls.at("config").get<std::string>();
                const auto& w = cls.at("weights");
                rc.periodic = field_or<double>(w, "periodic", 0.0);
                rc.laminar = field_or<double>(w, "laminar", 0.0);
                rc.noise = field_or<double>(w, "noise", 0.0);
                spec.classes.push_back(rc);
            }
            spec.groups_per_class = field_or<std::size_t>(c, "groups_per_class", spec.groups_per_class);
            spec.traces_per_group = field_or<std::size_t>(c, "traces_per_group", spec.traces_per_group);
            spec.n_steps = field_or<std::size_t>(c, "n_steps", spec.n_steps);
            spec.dim = field_or<std::size_t>(c, "dim", spec.dim);
            spec.segment_len = field_or<std::size_t>(c, "segment_len", spec.segment_len);
            spec.period = field_or<std::size_t>(c, "period", spec.period);
            spec.plateau_len = field_or<std::size_t>(c, "plateau_len", spec.plateau_len);
            spec.noise_scale = field_or<double>(c, "noise_scale", spec.noise_scale);
            spec.seed = field_or<std::uint64_t>(c, "seed", spec.seed);
            traces = make_regime_corpus(spec);
        }
        if (j.contains("traces")) {
            for (const auto& t : j.at("traces")) {
                SynthTrace st;
                st.spec = synth_spec_from_json(t);
                st.record.trace_id = t.at("trace_id").get<std::string>();
                st.record.path = st.record.trace_id + ".ltrj";
                st.record.puzzle_id = field_or<std::string>(t, "puzzle_id", st.record.trace_id);
                st.record.config = parse_config(field_or<std::string>(t, "config", "2x2"));
                if (t.contains("correct") && !t.at("correct").is_null()) st.record.correct = t.at("correct").get<bool>();
                st.record.n_tokens = st.spec.n_steps;
                traces.push_back(std::move(st));
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("bad synth description: ") + e.what());
    }
    if (traces.empty()) throw ValidationError("synth description defines no traces");
    return traces;
}

std::vector<TraceRecord> write_synth_corpus(const std::vector<SynthTrace>& traces, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    std::vector<TraceRecord> records;
    for (const auto& t : traces) {
        write_trajectory(generate(t.spec), dir / t.record.path);
        records.push_back(t.record);
    }
    // parse_manifest's duplicate check also guards the generated ids
    std::string text;
    for (const auto& r : records) text += manifest_line(r) + "\n";
    parse_manifest(text, "generated manifest");
    write_manifest(records, dir / "manifest.jsonl");
    return records;
}

}  // namespace lrqa
