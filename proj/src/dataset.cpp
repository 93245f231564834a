#include "latent_rqa/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "latent_rqa/errors.hpp"
#include "latent_rqa/parallel.hpp"

namespace lrqa {
namespace {

const std::vector<std::string> kKeyColumns{"trace_id", "puzzle_id", "config", "correct"};
const std::vector<std::string> kGlobalNames{"det", "lam", "entr"};

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

// RFC 4180 records; quoted fields may contain separators and doubled quotes.
std::vector<std::vector<std::string>> parse_csv(const std::string& text, const std::string& source) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool quoted = false, field_started = false;
    std::size_t line = 1;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                if (c == '\n') ++line;
                field += c;
            }
            continue;
        }
        if (c == '"' && !field_started) {
            quoted = field_started = true;
        } else if (c == ',') {
            record.push_back(std::move(field));
            field.clear();
            field_started = false;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            record.push_back(std::move(field));
            field.clear();
            field_started = false;
            if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
            record.clear();
            ++line;
        } else {
            field += c;
            field_started = true;
        }
    }
    if (quoted) throw ParseError(source + ":" + std::to_string(line) + ": unterminated quoted field");
    if (field_started || !record.empty()) {
        record.push_back(std::move(field));
        records.push_back(std::move(record));
    }
    return records;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return text.str();
}

void dump(const std::string& text, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
}

std::vector<std::optional<double>> global_features(const Trajectory& traj, const FeatureOptions& options) {
    const UnitRows rows(traj);
    const double eps = select_epsilon(rows, options.threshold);
    const auto m = quantify(recurrence_matrix(rows, 0, rows.size(), eps), options.params);
    return {m.det, m.lam, m.entr};
}

std::vector<std::optional<double>> temporal_features(const Trajectory& traj, const FeatureOptions& options) {
    const auto series = metric_series(traj, options.window, options.params, options.threshold);
    const auto summary = summarize_series(series, options.dfa);
    return {summary.values.begin(), summary.values.end()};
}

}  // namespace

std::string format_double(double value) {
    char buf[64];
    const auto result = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, result.ptr);
}

BigInt search_space_size(int n, int m) {
    if (n < 1 || m < 1) throw ConfigError("search space size needs n >= 1 and m >= 1");
    BigInt factorial = 1;
    for (int k = 2; k <= n; ++k) factorial *= k;
    return boost::multiprecision::pow(factorial, static_cast<unsigned>(m));
}

FeatureSet parse_feature_set(const std::string& name) {
    if (name == "length") return FeatureSet::length;
    if (name == "global" || name == "global_rqa") return FeatureSet::global_rqa;
    if (name == "temporal" || name == "temporal_rqa") return FeatureSet::temporal_rqa;
    throw ConfigError("unknown feature set \"" + name + "\" (expected length, global or temporal)");
}

std::string to_string(FeatureSet set) {
    switch (set) {
        case FeatureSet::length: return "length";
        case FeatureSet::global_rqa: return "global";
        case FeatureSet::temporal_rqa: return "temporal";
    }
    return "?";
}

std::vector<std::string> feature_names(FeatureSet set) {
    switch (set) {
        case FeatureSet::length: return {"n_tokens"};
        case FeatureSet::global_rqa: return kGlobalNames;
        case FeatureSet::temporal_rqa: return {kTemporalFeatureNames.begin(), kTemporalFeatureNames.end()};
    }
    return {};
}

FeatureBuild build_feature_table(const std::vector<TraceRecord>& records, const std::filesystem::path& manifest_dir,
                                 FeatureSet set, const FeatureOptions& options) {
    options.params.validate();
    options.threshold.validate();
    options.window.validate();

    std::vector<const TraceRecord*> order;
    order.reserve(records.size());
    for (const auto& r : records) order.push_back(&r);
    std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->trace_id < b->trace_id; });

    std::vector<std::optional<FeatureRow>> rows(order.size());
    std::vector<std::string> failures(order.size());
    parallel_for(order.size(), options.threads, [&](std::size_t i) {
        const TraceRecord& rec = *order[i];
        FeatureRow row{rec.trace_id, rec.puzzle_id, rec.config.str(), rec.correct, {}};
        try {
            if (set == FeatureSet::length) {
                // Traces longer than the cap were truncated, so their usable length is the cap.
                row.features = {static_cast<double>(std::min<std::uint64_t>(rec.n_tokens, kMaxSteps))};
            } else {
                const auto loaded = read_trajectory(resolve_trace_path(rec, manifest_dir));
                if (loaded.stored_steps != rec.n_tokens) {
                    throw ValidationError("n_tokens " + std::to_string(rec.n_tokens) + " does not match file N=" +
                                          std::to_string(loaded.stored_steps));
                }
                row.features = set == FeatureSet::global_rqa ? global_features(loaded.trajectory, options)
                                                             : temporal_features(loaded.trajectory, options);
            }
            rows[i] = std::move(row);
        } catch (const Error& e) {
            failures[i] = e.what();
        }
    });

    FeatureBuild build;
    build.table.feature_names = feature_names(set);
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (rows[i]) {
            build.table.rows.push_back(std::move(*rows[i]));
        } else {
            build.errors.push_back({order[i]->trace_id, failures[i]});
        }
    }
    return build;
}

std::string feature_table_csv(const FeatureTable& table) {
    std::string out;
    for (const auto& k : kKeyColumns) out += k + ",";
    for (const auto& name : table.feature_names) out += csv_field(name) + ",";
    out += "flags\n";
    for (const auto& row : table.rows) {
        out += csv_field(row.trace_id) + "," + csv_field(row.puzzle_id) + "," + csv_field(row.config) + ",";
        out += row.correct ? (*row.correct ? "true" : "false") : "";
        std::string flags;
        for (std::size_t f = 0; f < row.features.size(); ++f) {
            out += ",";
            if (row.features[f]) {
                out += format_double(*row.features[f]);
            } else {
                if (!flags.empty()) flags += ";";
                flags += table.feature_names[f];
            }
        }
        out += "," + csv_field(flags) + "\n";
    }
    return out;
}

void write_feature_table(const FeatureTable& table, const std::filesystem::path& path) {
    dump(feature_table_csv(table), path);
}

FeatureTable parse_feature_table(const std::string& text, const std::string& source) {
    const auto records = parse_csv(text, source);
    if (records.empty()) throw ValidationError(source + ": empty feature table");
    const auto& header = records.front();
    for (std::size_t k = 0; k < kKeyColumns.size(); ++k) {
        if (std::find(header.begin(), header.end(), kKeyColumns[k]) == header.end()) {
            throw ValidationError(source + ": missing column \"" + kKeyColumns[k] + "\"");
        }
        if (header.size() <= k || header[k] != kKeyColumns[k]) {
            throw ValidationError(source + ": column " + std::to_string(k + 1) + " must be \"" + kKeyColumns[k] + "\"");
        }
    }

    FeatureTable table;
    std::size_t end = header.size();
    if (header.back() == "flags") --end;
    for (std::size_t c = kKeyColumns.size(); c < end; ++c) table.feature_names.push_back(header[c]);
    if (table.feature_names.empty()) throw ValidationError(source + ": no feature columns");

    std::set<std::string> present(table.feature_names.begin(), table.feature_names.end());
    if (present.size() != table.feature_names.size()) throw ValidationError(source + ": duplicate feature column");
    const std::vector<std::string> temporal(kTemporalFeatureNames.begin(), kTemporalFeatureNames.end());
    for (const auto* family : {&kGlobalNames, &temporal}) {
        const bool any = std::any_of(family->begin(), family->end(), [&](auto& n) { return present.count(n) > 0; });
        if (!any) continue;
        for (const auto& name : *family) {
            if (!present.count(name)) throw ValidationError(source + ": missing column \"" + name + "\"");
        }
    }

    std::set<std::string> seen;
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        const std::string where = source + ": row " + std::to_string(r);
        if (rec.size() != header.size()) {
            throw ValidationError(where + " has " + std::to_string(rec.size()) + " fields, header has " +
                                  std::to_string(header.size()));
        }
        FeatureRow row{rec[0], rec[1], rec[2], std::nullopt, {}};
        if (!seen.insert(row.trace_id).second) throw ValidationError(where + ": duplicate trace_id " + row.trace_id);
        if (rec[3] == "true") row.correct = true;
        else if (rec[3] == "false") row.correct = false;
        else if (!rec[3].empty()) throw ValidationError(where + ": correct must be true, false or empty");
        for (std::size_t c = kKeyColumns.size(); c < end; ++c) {
            const std::string& cell = rec[c];
            if (cell.empty()) {
                row.features.emplace_back();
                continue;
            }
            double v = 0.0;
            const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size() || !std::isfinite(v)) {
                throw ValidationError(where + ": column \"" + header[c] + "\" is not a number: " + cell);
            }
            row.features.emplace_back(v);
        }
        table.rows.push_back(std::move(row));
    }
    std::sort(table.rows.begin(), table.rows.end(), [](auto& a, auto& b) { return a.trace_id < b.trace_id; });
    return table;
}

FeatureTable read_feature_table(const std::filesystem::path& path) {
    return parse_feature_table(slurp(path), path.string());
}

void write_row_errors(const std::vector<RowError>& errors, const std::filesystem::path& path) {
    std::string out;
    for (const auto& e : errors) {
        nlohmann::ordered_json j;
        j["trace_id"] = e.trace_id;
        j["error"] = e.message;
        out += j.dump() + "\n";
    }
    dump(out, path);
}

AccuracySummary summarize_accuracy(const std::vector<TraceRecord>& records) {
    std::map<GridConfig, AccuracyRow> groups;
    AccuracySummary summary;
    summary.totals.config = "total";
    for (const auto& r : records) {
        if (!r.correct) {
            ++summary.ungraded;
            continue;
        }
        auto& row = groups[r.config];
        row.config = r.config.str();
        (*r.correct ? row.correct : row.incorrect) += 1;
        ++row.total;
        (*r.correct ? summary.totals.correct : summary.totals.incorrect) += 1;
        ++summary.totals.total;
    }
    for (auto& [_, row] : groups) {
        row.mean_accuracy = static_cast<double>(row.correct) / static_cast<double>(row.total);
        summary.per_config.push_back(row);
    }
    if (summary.totals.total > 0) {
        summary.totals.mean_accuracy =
            static_cast<double>(summary.totals.correct) / static_cast<double>(summary.totals.total);
    }
    return summary;
}

std::string accuracy_csv(const AccuracySummary& summary) {
    std::string out = "config,incorrect,correct,total,mean_accuracy\n";
    auto line = [&](const AccuracyRow& r) {
        out += r.config + "," + std::to_string(r.incorrect) + "," + std::to_string(r.correct) + "," +
               std::to_string(r.total) + "," + (r.mean_accuracy ? format_double(*r.mean_accuracy) : "") + "\n";
    };
    for (const auto& r : summary.per_config) line(r);
    line(summary.totals);
    return out;
}

}  // namespace lrqa
