#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "latent_rqa/temporal.hpp"
#include "latent_rqa/trajectory_io.hpp"

namespace lrqa {

using BigInt = boost::multiprecision::cpp_int;

/// (n!)^m, exact. Throws ConfigError for n < 1 or m < 1.
BigInt search_space_size(int n, int m);

enum class FeatureSet { length, global_rqa, temporal_rqa };

FeatureSet parse_feature_set(const std::string& name);  // length | global | temporal
std::string to_string(FeatureSet set);
std::vector<std::string> feature_names(FeatureSet set);

struct FeatureRow {
    std::string trace_id;
    std::string puzzle_id;
    std::string config;
    std::optional<bool> correct;
    std::vector<std::optional<double>> features;  // nullopt = missing, imputed per fold later
};

struct FeatureTable {
    std::vector<std::string> feature_names;
    std::vector<FeatureRow> rows;  // sorted by trace_id
};

struct FeatureOptions {
    WindowConfig window;
    RqaParams params;
    ThresholdSpec threshold;
    DfaOptions dfa;
    unsigned threads = 1;
};

struct RowError {
    std::string trace_id;
    std::string message;
};

struct FeatureBuild {
    FeatureTable table;
    std::vector<RowError> errors;  // rows that could not be computed
};

/// Extracts one feature row per manifest record. Failures are collected per row rather than
/// thrown; every record ends up either in the table or in `errors`.
FeatureBuild build_feature_table(const std::vector<TraceRecord>& records, const std::filesystem::path& manifest_dir,
                                 FeatureSet set, const FeatureOptions& options = {});

/// CSV: trace_id,puzzle_id,config,correct,<features...>,flags. Missing values are empty cells
/// and their names are listed, ';'-separated, in the flags column.
std::string feature_table_csv(const FeatureTable& table);
void write_feature_table(const FeatureTable& table, const std::filesystem::path& path);

/// Parses a feature CSV. A partially present known feature family (global or temporal) is
/// rejected with a message naming the first missing column.
FeatureTable parse_feature_table(const std::string& text, const std::string& source = "<features>");
FeatureTable read_feature_table(const std::filesystem::path& path);

void write_row_errors(const std::vector<RowError>& errors, const std::filesystem::path& path);

struct AccuracyRow {
    std::string config;
    std::size_t incorrect = 0;
    std::size_t correct = 0;
    std::size_t total = 0;
    std::optional<double> mean_accuracy;  // empty when total == 0
};

struct AccuracySummary {
    std::vector<AccuracyRow> per_config;  // ordered by (houses, features)
    AccuracyRow totals;
    std::size_t ungraded = 0;  // records with no correctness label, excluded from counts
};

AccuracySummary summarize_accuracy(const std::vector<TraceRecord>& records);
std::string accuracy_csv(const AccuracySummary& summary);

/// Shortest round-trip decimal form ("." separator, locale independent).
std::string format_double(double value);

}  // namespace lrqa
