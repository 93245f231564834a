#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

namespace lrqa::ml {

/// Dense row-major feature matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) noexcept { return values[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return values[i * cols + j]; }
    std::span<const double> row(std::size_t i) const noexcept { return {values.data() + i * cols, cols}; }
};

using Labels = std::vector<int>;  // class indices in canonical order

struct ClassifierConfig {
    enum class Kind { logistic, random_forest };
    Kind kind = Kind::random_forest;

    // logistic regression
    double l2_strength = 1.0;  // penalty (l2_strength / 2) * |W|^2 added to the summed log-loss
    std::size_t max_iterations = 500;
    double tolerance = 1e-6;  // on the max-abs gradient of the per-sample objective
    bool standardize = true;

    // random forest
    std::size_t n_trees = 100;
    std::optional<std::size_t> max_features;  // default floor(sqrt(p)), at least 1
    std::size_t min_samples_leaf = 1;
    bool bootstrap = true;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

class LogisticModel {
public:
    int predict_one(std::span<const double> x) const;
    Labels predict(const Matrix& x) const;

    int n_classes() const noexcept { return n_classes_; }
    bool converged() const noexcept { return converged_; }
    std::size_t iterations() const noexcept { return iterations_; }
    /// Weight of `feature` for `cls` in standardized units (0 for dropped features).
    double weight(int cls, std::size_t feature) const noexcept;

private:
    friend LogisticModel train_logistic(const Matrix&, const Labels&, int, const ClassifierConfig&);

    int n_classes_ = 0;
    std::size_t n_features_ = 0;
    std::vector<std::size_t> kept_;  // features with non-zero training variance
    std::vector<double> mean_, scale_;
    std::vector<double> weights_;  // n_classes x kept
    std::vector<double> bias_;
    bool converged_ = false;
    std::size_t iterations_ = 0;
};

struct TreeNode {
    int feature = -1;  // -1 for leaves
    double threshold = 0.0;  // x[feature] <= threshold goes left
    int left = -1;
    int right = -1;
    int label = 0;  // majority class of the node's samples
};

class ForestModel {
public:
    int predict_one(std::span<const double> x) const;
    Labels predict(const Matrix& x) const;

    int n_classes() const noexcept { return n_classes_; }
    std::size_t n_trees() const noexcept { return trees_.size(); }

private:
    friend ForestModel train_random_forest(const Matrix&, const Labels&, int, const ClassifierConfig&);

    int n_classes_ = 0;
    std::vector<std::vector<TreeNode>> trees_;
};

using Model = std::variant<LogisticModel, ForestModel>;

/// Multinomial L2-regularized logistic regression fitted with L-BFGS. Zero-variance features
/// are dropped; with `standardize` the rest are scaled by training mean and std.
LogisticModel train_logistic(const Matrix& x, const Labels& y, int n_classes, const ClassifierConfig& cfg);

/// Gini CART trees on bootstrap samples, grown to purity subject to min_samples_leaf.
/// Tree t draws from derive_seed(cfg.seed, kForestStream, t).
ForestModel train_random_forest(const Matrix& x, const Labels& y, int n_classes, const ClassifierConfig& cfg);

inline constexpr std::uint64_t kForestStream = 0xF0257;

Model train(const Matrix& x, const Labels& y, int n_classes, const ClassifierConfig& cfg);
Labels predict(const Model& model, const Matrix& x);

/// Mean recall over the classes present in `truth`.
double balanced_accuracy(const Labels& truth, const Labels& predicted, int n_classes);

/// Index of the largest count; ties go to the lowest index.
int argmax_lowest(std::span<const double> scores) noexcept;

}  // namespace lrqa::ml
