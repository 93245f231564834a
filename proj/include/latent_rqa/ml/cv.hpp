#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "latent_rqa/dataset.hpp"
#include "latent_rqa/ml/models.hpp"

namespace lrqa::ml {

struct FoldAssignment {
    int k = 8;
    std::map<std::string, int> fold_of_group;
    std::uint64_t seed = 0;
};

/// Whole-group fold assignment with greedy label balancing. Groups are visited in descending
/// size (equal sizes in seeded shuffle order); each goes to the fold minimising the mean over
/// classes of the across-fold std of (fold class count / class total), then the smallest fold,
/// then the lowest index. Once the remaining groups only just cover the empty folds, they are
/// restricted to those. Throws ConfigError if there are fewer groups than folds.
FoldAssignment group_stratified_folds(const std::vector<std::string>& groups, const Labels& labels, int n_classes,
                                      int k, std::uint64_t seed);

enum class Target { complexity, correctness };
Target parse_target(const std::string& name);
std::string to_string(Target target);

/// Class names in canonical order (lexicographic config strings; "false" < "true") and the
/// per-row class index.
struct LabelEncoding {
    std::vector<std::string> classes;
    Labels y;
};
LabelEncoding encode_labels(const FeatureTable& table, Target target);

struct FoldResult {
    int fold = 0;
    double balanced_accuracy = 0.0;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    std::optional<bool> converged;  // logistic only
};

struct Prediction {
    std::string trace_id;
    std::string puzzle_id;
    int fold = 0;
    int truth = 0;
    int predicted = 0;
};

struct CvOptions {
    std::size_t importance_repeats = 0;  // 0 disables permutation importance
    std::uint64_t seed = 0;              // importance shuffles
};

struct McNemarResult {
    double statistic = 0.0;  // chi-square, or min(b, c) for the exact test
    double p_value = 1.0;
    std::uint64_t b = 0;     // a correct, b wrong
    std::uint64_t c = 0;     // a wrong, b correct
    bool exact = false;
    bool undefined = false;  // b + c == 0
};

struct CvReport {
    Target target = Target::complexity;
    ClassifierConfig::Kind model = ClassifierConfig::Kind::random_forest;
    std::vector<std::string> classes;
    std::vector<std::string> feature_names;
    std::vector<FoldResult> folds;
    std::vector<Prediction> predictions;  // sorted by trace_id, one per row
    double mean_balanced_accuracy = 0.0;
    double std_balanced_accuracy = 0.0;  // population std over folds
    std::vector<std::vector<std::uint64_t>> confusion;  // [truth][predicted], pooled
    std::optional<std::vector<double>> importance;       // mean over folds, by feature
    std::optional<McNemarResult> mcnemar;
    std::vector<std::string> warnings;
};

/// Grouped k-fold evaluation. Per fold: impute missing values with training-fold means, train
/// on out-of-fold rows, predict in-fold. Throws LeakageError if a group lands on both sides.
CvReport evaluate_cv(const FeatureTable& table, const ClassifierConfig& cfg, const FoldAssignment& folds,
                     Target target, const CvOptions& options = {});

/// Baseline balanced accuracy minus the accuracy after shuffling one column, averaged over
/// repeats. Shuffle of (feature f, repeat r) uses derive_seed(seed, f, r).
std::vector<double> permutation_importance(const Model& model, const Matrix& x, const Labels& y, int n_classes,
                                           std::size_t repeats, std::uint64_t seed);

/// McNemar test on paired predictions. Exact two-sided binomial when b + c < 25, otherwise
/// continuity-corrected chi-square with one degree of freedom.
McNemarResult mcnemar_test(const Labels& a, const Labels& b, const Labels& truth);

nlohmann::ordered_json to_json(const CvReport& report);
nlohmann::ordered_json to_json(const McNemarResult& result);
/// Reads the fields needed for pairing: target, classes and predictions.
CvReport report_from_json(const nlohmann::json& j);

/// Confusion matrix as CSV: header "truth\\predicted,<classes...>", one row per class.
std::string confusion_csv(const CvReport& report);

}  // namespace lrqa::ml

namespace lrqa::ml {

/// McNemar on two reports over the same traces (matched by trace_id). Throws ValidationError if
/// targets, classes, trace sets or ground truth differ.
McNemarResult compare_reports(const CvReport& a, const CvReport& b);

}  // namespace lrqa::ml
