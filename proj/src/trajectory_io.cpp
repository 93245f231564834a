#include "latent_rqa/trajectory_io.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

#include "latent_rqa/errors.hpp"

namespace lrqa {
namespace {

constexpr std::array<char, 4> kMagic{'L', 'T', 'R', 'J'};

template <typename T>
void put_le(std::string& out, T value) {
    using U = std::make_unsigned_t<T>;
    auto bits = static_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out.push_back(static_cast<char>(bits & 0xFFu));
        bits = static_cast<U>(bits >> 8);
    }
}

template <typename T>
T get_le(const unsigned char* p) {
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(p[i]) << (8 * i);
    return value;
}

}  // namespace

void write_trajectory(const Trajectory& traj, const std::filesystem::path& path) {
    std::string buffer;
    buffer.reserve(kTrajectoryHeaderBytes + 4 * traj.data().size());
    buffer.append(kMagic.data(), kMagic.size());
    put_le<std::uint32_t>(buffer, kTrajectoryVersion);
    put_le<std::uint64_t>(buffer, traj.n_steps());
    put_le<std::uint64_t>(buffer, traj.dim());
    put_le<std::uint32_t>(buffer, kDtypeFloat32);
    for (float v : traj.data()) put_le<std::uint32_t>(buffer, std::bit_cast<std::uint32_t>(v));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
    out.close();
    if (!out) throw IoError("write failed for " + path.string());
}

LoadedTrajectory read_trajectory(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());

    std::array<unsigned char, kTrajectoryHeaderBytes> header{};
    in.read(reinterpret_cast<char*>(header.data()), header.size());
    if (in.gcount() >= 4 && !std::equal(kMagic.begin(), kMagic.end(), header.begin())) {
        throw FormatError(path.string() + ": bad magic, not a trajectory file");
    }
    if (static_cast<std::size_t>(in.gcount()) != header.size()) {
        throw CorruptionError(path.string() + ": file shorter than the trajectory header");
    }
    const auto version = get_le<std::uint32_t>(header.data() + 4);
    const auto n = get_le<std::uint64_t>(header.data() + 8);
    const auto d = get_le<std::uint64_t>(header.data() + 16);
    const auto dtype = get_le<std::uint32_t>(header.data() + 24);
    if (version != kTrajectoryVersion) {
        throw FormatError(path.string() + ": unsupported version " + std::to_string(version));
    }
    if (dtype != kDtypeFloat32) throw FormatError(path.string() + ": unsupported dtype " + std::to_string(dtype));
    if (n < 2 || d < 1) {
        throw ValidationError(path.string() + ": header declares N=" + std::to_string(n) + ", d=" + std::to_string(d));
    }
    if (d > (std::uint64_t{1} << 32) || n > (std::uint64_t{1} << 40)) {
        throw CorruptionError(path.string() + ": implausible header dimensions");
    }

    std::error_code ec;
    const auto file_size = std::filesystem::file_size(path, ec);
    if (ec) throw IoError(path.string() + ": " + ec.message());
    const std::uint64_t expected = kTrajectoryHeaderBytes + 4 * n * d;
    if (file_size < expected) {
        throw CorruptionError(path.string() + ": payload truncated (" + std::to_string(file_size) + " of " +
                              std::to_string(expected) + " bytes)");
    }
    if (file_size > expected) {
        throw CorruptionError(path.string() + ": " + std::to_string(file_size - expected) + " trailing bytes");
    }

    const std::uint64_t kept = std::min<std::uint64_t>(n, kMaxSteps);
    std::vector<unsigned char> raw(kept * d * 4);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size()) throw CorruptionError(path.string() + ": short read");

    std::vector<float> values(kept * d);
    for (std::size_t i = 0; i < values.size(); ++i) {
        values[i] = std::bit_cast<float>(get_le<std::uint32_t>(raw.data() + 4 * i));
        if (!std::isfinite(values[i])) {
            throw ValidationError(path.string() + ": non-finite value at step " + std::to_string(i / d) +
                                  ", component " + std::to_string(i % d));
        }
    }
    return LoadedTrajectory{Trajectory(kept, d, std::move(values)), n, n > kMaxSteps};
}

std::string GridConfig::str() const { return std::to_string(n_houses) + "x" + std::to_string(m_features); }

GridConfig parse_config(const std::string& text) {
    const auto x = text.find('x');
    auto parse_int = [&](std::string_view part) {
        if (part.empty() || part.size() > 6) throw ValidationError("invalid config \"" + text + "\", expected NxM");
        int v = 0;
        for (char c : part) {
            if (c < '0' || c > '9') throw ValidationError("invalid config \"" + text + "\", expected NxM");
            v = v * 10 + (c - '0');
        }
        return v;
    };
    if (x == std::string::npos) throw ValidationError("invalid config \"" + text + "\", expected NxM");
    GridConfig cfg{parse_int(std::string_view(text).substr(0, x)), parse_int(std::string_view(text).substr(x + 1))};
    if (cfg.n_houses < 2 || cfg.m_features < 2) {
        throw ValidationError("config \"" + text + "\" needs N >= 2 and M >= 2");
    }
    return cfg;
}

std::vector<TraceRecord> parse_manifest(const std::string& text, const std::string& source) {
    static const std::array<std::string, 6> kFields{"trace_id", "path", "puzzle_id", "config", "correct", "n_tokens"};

    std::vector<TraceRecord> records;
    std::map<std::string, std::size_t> first_line_of;
    std::istringstream lines(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(lines, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        const std::string where = source + ":" + std::to_string(line_no);

        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(where + ": malformed JSON (" + e.what() + ")");
        }
        if (!j.is_object()) throw ParseError(where + ": expected a JSON object");
        for (const auto& field : kFields) {
            if (!j.contains(field)) throw ValidationError(where + ": missing field \"" + field + "\"");
        }
        for (const auto& [key, _] : j.items()) {
            if (std::find(kFields.begin(), kFields.end(), key) == kFields.end()) {
                throw ValidationError(where + ": unknown field \"" + key + "\"");
            }
        }

        TraceRecord r;
        try {
            r.trace_id = j.at("trace_id").get<std::string>();
            r.path = j.at("path").get<std::string>();
            r.puzzle_id = j.at("puzzle_id").get<std::string>();
            r.config = parse_config(j.at("config").get<std::string>());
            if (!j.at("correct").is_null()) r.correct = j.at("correct").get<bool>();
            const auto& n = j.at("n_tokens");
            if (!n.is_number_unsigned() || n.get<std::uint64_t>() == 0) {
                throw ValidationError("n_tokens must be a positive integer");
            }
            r.n_tokens = n.get<std::uint64_t>();
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(where + ": " + e.what());
        } catch (const ValidationError& e) {
            throw ValidationError(where + ": " + e.what());
        }
        if (r.trace_id.empty()) throw ValidationError(where + ": empty trace_id");

        auto [it, inserted] = first_line_of.emplace(r.trace_id, line_no);
        if (!inserted) {
            throw ValidationError(source + ": duplicate trace_id \"" + r.trace_id + "\" on lines " +
                                  std::to_string(it->second) + " and " + std::to_string(line_no));
        }
        records.push_back(std::move(r));
    }
    return records;
}

std::vector<TraceRecord> load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open manifest " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_manifest(text.str(), path.string());
}

std::string manifest_line(const TraceRecord& record) {
    nlohmann::ordered_json j;
    j["trace_id"] = record.trace_id;
    j["path"] = record.path;
    j["puzzle_id"] = record.puzzle_id;
    j["config"] = record.config.str();
    j["correct"] = record.correct ? nlohmann::ordered_json(*record.correct) : nlohmann::ordered_json(nullptr);
    j["n_tokens"] = record.n_tokens;
    return j.dump();
}

void write_manifest(const std::vector<TraceRecord>& records, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    for (const auto& r : records) out << manifest_line(r) << '\n';
    if (!out) throw IoError("write failed for " + path.string());
}

std::filesystem::path resolve_trace_path(const TraceRecord& record, const std::filesystem::path& manifest_dir) {
    std::filesystem::path p(record.path);
    return p.is_absolute() ? p : manifest_dir / p;
}

}  // namespace lrqa
