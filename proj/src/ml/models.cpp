#include "latent_rqa/ml/models.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "latent_rqa/errors.hpp"
#include "latent_rqa/parallel.hpp"
#include "latent_rqa/rng.hpp"

namespace lrqa::ml {
namespace {

void check_training_data(const Matrix& x, const Labels& y, int n_classes) {
    if (x.rows == 0 || x.rows != y.size()) throw ValidationError("training data is empty or misaligned");
    if (n_classes < 2) throw DegenerateLabelError("need at least 2 classes");
    std::vector<bool> seen(static_cast<std::size_t>(n_classes), false);
    for (int label : y) {
        if (label < 0 || label >= n_classes) throw ValidationError("label out of range");
        seen[static_cast<std::size_t>(label)] = true;
    }
    if (std::count(seen.begin(), seen.end(), true) < 2) {
        throw DegenerateLabelError("training labels contain a single class");
    }
    for (double v : x.values) {
        if (!std::isfinite(v)) throw ValidationError("training features contain missing or non-finite values");
    }
}

double dot(std::span<const double> a, std::span<const double> b) noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Softmax cross-entropy objective over parameters [W (classes x p) | b (classes)], divided by n.
struct LogLoss {
    const Matrix& z;  // design matrix after feature selection/scaling
    const Labels& y;
    int classes;
    double l2;

    double operator()(const std::vector<double>& theta, std::vector<double>& grad) const {
        const std::size_t p = z.cols;
        const auto c = static_cast<std::size_t>(classes);
        const double* w = theta.data();
        const double* b = theta.data() + c * p;
        std::fill(grad.begin(), grad.end(), 0.0);
        double* gw = grad.data();
        double* gb = grad.data() + c * p;

        std::vector<double> logits(c);
        double loss = 0.0;
        for (std::size_t i = 0; i < z.rows; ++i) {
            const auto xi = z.row(i);
            double top = -INFINITY;
            for (std::size_t k = 0; k < c; ++k) {
                logits[k] = b[k] + dot({w + k * p, p}, xi);
                top = std::max(top, logits[k]);
            }
            double total = 0.0;
            for (std::size_t k = 0; k < c; ++k) total += std::exp(logits[k] - top);
            const double log_norm = top + std::log(total);
            const auto yi = static_cast<std::size_t>(y[i]);
            loss += log_norm - logits[yi];
            for (std::size_t k = 0; k < c; ++k) {
                const double r = std::exp(logits[k] - log_norm) - (k == yi ? 1.0 : 0.0);
                gb[k] += r;
                for (std::size_t j = 0; j < p; ++j) gw[k * p + j] += r * xi[j];
            }
        }
        double penalty = 0.0;
        for (std::size_t j = 0; j < c * p; ++j) {
            penalty += w[j] * w[j];
            gw[j] += l2 * w[j];
        }
        const double inv_n = 1.0 / static_cast<double>(z.rows);
        for (auto& g : grad) g *= inv_n;
        return (loss + 0.5 * l2 * penalty) * inv_n;
    }
};

double max_abs(const std::vector<double>& v) noexcept {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

}  // namespace

int argmax_lowest(std::span<const double> scores) noexcept {
    int best = 0;
    for (std::size_t k = 1; k < scores.size(); ++k) {
        if (scores[k] > scores[static_cast<std::size_t>(best)]) best = static_cast<int>(k);
    }
    return best;
}

LogisticModel train_logistic(const Matrix& x, const Labels& y, int n_classes, const ClassifierConfig& cfg) {
    check_training_data(x, y, n_classes);
    LogisticModel model;
    model.n_classes_ = n_classes;
    model.n_features_ = x.cols;

    const auto n = static_cast<double>(x.rows);
    for (std::size_t j = 0; j < x.cols; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < x.rows; ++i) mean += x(i, j);
        mean /= n;
        double var = 0.0;
        for (std::size_t i = 0; i < x.rows; ++i) var += (x(i, j) - mean) * (x(i, j) - mean);
        const double sd = std::sqrt(var / n);
        if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) continue;  // zero variance: dropped
        model.kept_.push_back(j);
        model.mean_.push_back(cfg.standardize ? mean : 0.0);
        model.scale_.push_back(cfg.standardize ? sd : 1.0);
    }

    const std::size_t p = model.kept_.size();
    Matrix z(x.rows, p);
    for (std::size_t i = 0; i < x.rows; ++i) {
        for (std::size_t j = 0; j < p; ++j) z(i, j) = (x(i, model.kept_[j]) - model.mean_[j]) / model.scale_[j];
    }

    const auto c = static_cast<std::size_t>(n_classes);
    const LogLoss objective{z, y, n_classes, cfg.l2_strength};
    std::vector<double> theta(c * p + c, 0.0), grad(theta.size());
    double f = objective(theta, grad);

    // L-BFGS with Armijo backtracking.
    constexpr std::size_t kMemory = 10;
    std::deque<std::vector<double>> s_hist, y_hist;
    std::deque<double> rho_hist;
    std::vector<double> direction(theta.size()), trial(theta.size()), trial_grad(theta.size());
    std::size_t iter = 0;
    bool converged = max_abs(grad) <= cfg.tolerance;
    while (!converged && iter < cfg.max_iterations) {
        ++iter;
        direction = grad;
        std::vector<double> alpha(s_hist.size());
        for (std::size_t h = s_hist.size(); h-- > 0;) {
            alpha[h] = rho_hist[h] * dot(s_hist[h], direction);
            for (std::size_t k = 0; k < direction.size(); ++k) direction[k] -= alpha[h] * y_hist[h][k];
        }
        double gamma = 1.0;
        if (!s_hist.empty()) gamma = dot(s_hist.back(), y_hist.back()) / dot(y_hist.back(), y_hist.back());
        for (auto& d : direction) d *= gamma;
        for (std::size_t h = 0; h < s_hist.size(); ++h) {
            const double beta = rho_hist[h] * dot(y_hist[h], direction);
            for (std::size_t k = 0; k < direction.size(); ++k) direction[k] += s_hist[h][k] * (alpha[h] - beta);
        }
        for (auto& d : direction) d = -d;

        double slope = dot(direction, grad);
        if (!(slope < 0.0)) {  // not a descent direction: restart from steepest descent
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            for (std::size_t k = 0; k < direction.size(); ++k) direction[k] = -grad[k];
            slope = dot(direction, grad);
        }
        double step = s_hist.empty() ? std::min(1.0, 1.0 / std::max(1e-12, max_abs(grad))) : 1.0;
        double f_trial = 0.0;
        bool accepted = false;
        for (int attempt = 0; attempt < 60; ++attempt) {
            for (std::size_t k = 0; k < theta.size(); ++k) trial[k] = theta[k] + step * direction[k];
            f_trial = objective(trial, trial_grad);
            if (f_trial <= f + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;

        std::vector<double> s(theta.size()), yk(theta.size());
        for (std::size_t k = 0; k < theta.size(); ++k) {
            s[k] = trial[k] - theta[k];
            yk[k] = trial_grad[k] - grad[k];
        }
        const double sy = dot(s, yk);
        theta.swap(trial);
        grad.swap(trial_grad);
        f = f_trial;
        if (sy > 1e-16) {
            s_hist.push_back(std::move(s));
            y_hist.push_back(std::move(yk));
            rho_hist.push_back(1.0 / sy);
            if (s_hist.size() > kMemory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }
        converged = max_abs(grad) <= cfg.tolerance;
    }

    model.weights_.assign(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(c * p));
    model.bias_.assign(theta.begin() + static_cast<std::ptrdiff_t>(c * p), theta.end());
    model.converged_ = converged;
    model.iterations_ = iter;
    return model;
}

int LogisticModel::predict_one(std::span<const double> x) const {
    const std::size_t p = kept_.size();
    std::vector<double> logits(static_cast<std::size_t>(n_classes_));
    for (std::size_t k = 0; k < logits.size(); ++k) {
        double s = bias_[k];
        for (std::size_t j = 0; j < p; ++j) s += weights_[k * p + j] * ((x[kept_[j]] - mean_[j]) / scale_[j]);
        logits[k] = s;
    }
    return argmax_lowest(logits);
}

Labels LogisticModel::predict(const Matrix& x) const {
    if (x.cols != n_features_) throw ValidationError("feature count differs from training");
    Labels out(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i) out[i] = predict_one(x.row(i));
    return out;
}

double LogisticModel::weight(int cls, std::size_t feature) const noexcept {
    const auto it = std::find(kept_.begin(), kept_.end(), feature);
    if (it == kept_.end()) return 0.0;
    return weights_[static_cast<std::size_t>(cls) * kept_.size() + static_cast<std::size_t>(it - kept_.begin())];
}

namespace {

struct TreeBuilder {
    const Matrix& x;
    const Labels& y;
    int classes;
    std::size_t max_features;
    std::size_t min_leaf;
    Rng rng;

    std::vector<TreeNode> nodes;
    std::vector<std::size_t> idx;  // sample indices, partitioned in place per node

    struct Split {
        int feature = -1;
        double threshold = 0.0;
        double score = -1.0;  // sum over children of (sum_k count_k^2) / size; larger is purer
    };

    int majority(std::size_t lo, std::size_t hi, bool& pure) const {
        std::vector<double> counts(static_cast<std::size_t>(classes), 0.0);
        for (std::size_t i = lo; i < hi; ++i) counts[static_cast<std::size_t>(y[idx[i]])] += 1.0;
        pure = std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0.0; }) <= 1;
        return argmax_lowest(counts);
    }

    Split best_split(std::size_t lo, std::size_t hi) {
        const std::size_t size = hi - lo;
        std::vector<std::size_t> features(x.cols);
        std::iota(features.begin(), features.end(), std::size_t{0});
        rng.shuffle(std::span(features));

        Split best;
        std::vector<std::pair<double, int>> column(size);
        std::vector<double> left(static_cast<std::size_t>(classes)), right(left.size());
        std::size_t evaluated = 0;
        for (std::size_t f : features) {
            if (evaluated == max_features) break;
            for (std::size_t i = 0; i < size; ++i) column[i] = {x(idx[lo + i], f), y[idx[lo + i]]};
            std::sort(column.begin(), column.end());
            if (column.front().first == column.back().first) continue;  // constant here: not counted
            ++evaluated;

            std::fill(left.begin(), left.end(), 0.0);
            std::fill(right.begin(), right.end(), 0.0);
            for (const auto& [_, label] : column) right[static_cast<std::size_t>(label)] += 1.0;
            double left_sq = 0.0, right_sq = 0.0;
            for (double r : right) right_sq += r * r;
            for (std::size_t pos = 1; pos < size; ++pos) {
                const auto label = static_cast<std::size_t>(column[pos - 1].second);
                left_sq += 2.0 * left[label] + 1.0;
                right_sq -= 2.0 * right[label] - 1.0;
                left[label] += 1.0;
                right[label] -= 1.0;
                if (column[pos - 1].first == column[pos].first) continue;
                if (pos < min_leaf || size - pos < min_leaf) continue;
                const double score = left_sq / static_cast<double>(pos) + right_sq / static_cast<double>(size - pos);
                if (score > best.score) {
                    const double a = column[pos - 1].first, b = column[pos].first;
                    double mid = a + (b - a) / 2.0;
                    if (!(mid < b)) mid = a;
                    best = Split{static_cast<int>(f), mid, score};
                }
            }
        }
        return best;
    }

    void build(std::size_t n_samples, bool bootstrap) {
        idx.resize(n_samples);
        if (bootstrap) {
            for (auto& i : idx) i = static_cast<std::size_t>(rng.below(n_samples));
        } else {
            std::iota(idx.begin(), idx.end(), std::size_t{0});
        }
        struct Pending { int node; std::size_t lo, hi; };
        std::vector<Pending> stack{{0, 0, n_samples}};
        nodes.emplace_back();
        while (!stack.empty()) {
            const Pending job = stack.back();
            stack.pop_back();
            bool pure = false;
            nodes[static_cast<std::size_t>(job.node)].label = majority(job.lo, job.hi, pure);
            if (pure || job.hi - job.lo < 2 * min_leaf) continue;
            const Split split = best_split(job.lo, job.hi);
            if (split.feature < 0) continue;

            const auto f = static_cast<std::size_t>(split.feature);
            const auto mid_it = std::stable_partition(idx.begin() + static_cast<std::ptrdiff_t>(job.lo),
                                                      idx.begin() + static_cast<std::ptrdiff_t>(job.hi),
                                                      [&](std::size_t i) { return x(i, f) <= split.threshold; });
            const auto mid = static_cast<std::size_t>(mid_it - idx.begin());
            const int left = static_cast<int>(nodes.size());
            nodes.emplace_back();
            nodes.emplace_back();
            auto& node = nodes[static_cast<std::size_t>(job.node)];
            node.feature = split.feature;
            node.threshold = split.threshold;
            node.left = left;
            node.right = left + 1;
            stack.push_back({left + 1, mid, job.hi});
            stack.push_back({left, job.lo, mid});
        }
    }
};

int tree_predict(const std::vector<TreeNode>& tree, std::span<const double> x) noexcept {
    std::size_t at = 0;
    while (tree[at].feature >= 0) {
        const auto& node = tree[at];
        at = static_cast<std::size_t>(x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right);
    }
    return tree[at].label;
}

}  // namespace

ForestModel train_random_forest(const Matrix& x, const Labels& y, int n_classes, const ClassifierConfig& cfg) {
    check_training_data(x, y, n_classes);
    if (cfg.n_trees == 0) throw ConfigError("forest needs at least one tree");
    if (cfg.min_samples_leaf == 0) throw ConfigError("min_samples_leaf must be positive");
    const std::size_t max_features = std::clamp<std::size_t>(
        cfg.max_features.value_or(static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(x.cols))))), 1,
        x.cols);

    ForestModel model;
    model.n_classes_ = n_classes;
    model.trees_.resize(cfg.n_trees);
    parallel_for(cfg.n_trees, cfg.threads, [&](std::size_t t) {
        TreeBuilder builder{x, y, n_classes, max_features, cfg.min_samples_leaf,
                            Rng(derive_seed(cfg.seed, kForestStream, t)), {}, {}};
        builder.build(x.rows, cfg.bootstrap);
        model.trees_[t] = std::move(builder.nodes);
    });
    return model;
}

int ForestModel::predict_one(std::span<const double> x) const {
    std::vector<double> votes(static_cast<std::size_t>(n_classes_), 0.0);
    for (const auto& tree : trees_) votes[static_cast<std::size_t>(tree_predict(tree, x))] += 1.0;
    return argmax_lowest(votes);
}

Labels ForestModel::predict(const Matrix& x) const {
    Labels out(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i) out[i] = predict_one(x.row(i));
    return out;
}

Model train(const Matrix& x, const Labels& y, int n_classes, const ClassifierConfig& cfg) {
    if (cfg.kind == ClassifierConfig::Kind::logistic) return train_logistic(x, y, n_classes, cfg);
    return train_random_forest(x, y, n_classes, cfg);
}

Labels predict(const Model& model, const Matrix& x) {
    return std::visit([&](const auto& m) { return m.predict(x); }, model);
}

double balanced_accuracy(const Labels& truth, const Labels& predicted, int n_classes) {
    if (truth.size() != predicted.size()) throw ValidationError("balanced_accuracy: length mismatch");
    std::vector<double> support(static_cast<std::size_t>(n_classes), 0.0), hits(support.size(), 0.0);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        support[static_cast<std::size_t>(truth[i])] += 1.0;
        if (truth[i] == predicted[i]) hits[static_cast<std::size_t>(truth[i])] += 1.0;
    }
    double sum = 0.0;
    int present = 0;
    for (std::size_t k = 0; k < support.size(); ++k) {
        if (support[k] > 0.0) {
            sum += hits[k] / support[k];
            ++present;
        }
    }
    return present ? sum / present : 0.0;
}

}  // namespace lrqa::ml
