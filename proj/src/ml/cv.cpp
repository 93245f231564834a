#include "latent_rqa/ml/cv.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "latent_rqa/errors.hpp"
#include "latent_rqa/rng.hpp"

namespace lrqa::ml {
namespace {

constexpr std::uint64_t kFoldStream = 0xF01D5;
constexpr std::uint64_t kModelStream = 0x30DE1;
constexpr std::uint64_t kImportanceStream = 0x1A9A7;

std::string kind_name(ClassifierConfig::Kind kind) {
    return kind == ClassifierConfig::Kind::logistic ? "lr" : "rf";
}

double fold_balance(const std::vector<std::vector<double>>& counts, const std::vector<double>& class_total) {
    const std::size_t k = counts.size();
    double total = 0.0;
    int classes = 0;
    for (std::size_t c = 0; c < class_total.size(); ++c) {
        if (class_total[c] == 0.0) continue;
        double mean = 0.0;
        for (std::size_t f = 0; f < k; ++f) mean += counts[f][c] / class_total[c];
        mean /= static_cast<double>(k);
        double var = 0.0;
        for (std::size_t f = 0; f < k; ++f) {
            const double d = counts[f][c] / class_total[c] - mean;
            var += d * d;
        }
        total += std::sqrt(var / static_cast<double>(k));
        ++classes;
    }
    return classes ? total / classes : 0.0;
}

double binomial_two_sided(std::uint64_t n, std::uint64_t k) {
    // 2 * P(X <= k), X ~ Binomial(n, 1/2), with k <= n/2.
    double term = std::pow(0.5, static_cast<double>(n));  // C(n, 0) / 2^n
    double tail = 0.0;
    for (std::uint64_t i = 0; i <= k; ++i) {
        tail += term;
        term *= static_cast<double>(n - i) / static_cast<double>(i + 1);
    }
    return std::min(1.0, 2.0 * tail);
}

}  // namespace

FoldAssignment group_stratified_folds(const std::vector<std::string>& groups, const Labels& labels, int n_classes,
                                      int k, std::uint64_t seed) {
    if (groups.size() != labels.size()) throw ValidationError("groups and labels differ in length");
    if (k < 2) throw ConfigError("need at least 2 folds");

    std::map<std::string, std::vector<double>> group_counts;
    const auto c = static_cast<std::size_t>(n_classes);
    std::vector<double> class_total(c, 0.0);
    for (std::size_t i = 0; i < groups.size(); ++i) {
        auto& counts = group_counts[groups[i]];
        counts.resize(c, 0.0);
        counts[static_cast<std::size_t>(labels[i])] += 1.0;
        class_total[static_cast<std::size_t>(labels[i])] += 1.0;
    }
    if (group_counts.size() < static_cast<std::size_t>(k)) {
        throw ConfigError("only " + std::to_string(group_counts.size()) + " groups for " + std::to_string(k) +
                          " folds");
    }

    struct Group {
        const std::string* name;
        const std::vector<double>* counts;
        double size;
    };
    std::vector<Group> order;
    for (const auto& [name, counts] : group_counts) {
        order.push_back({&name, &counts, std::accumulate(counts.begin(), counts.end(), 0.0)});
    }
    Rng rng(derive_seed(seed, kFoldStream, 0));
    rng.shuffle(std::span(order));
    std::stable_sort(order.begin(), order.end(), [](const Group& a, const Group& b) { return a.size > b.size; });

    const auto folds = static_cast<std::size_t>(k);
    std::vector<std::vector<double>> fold_counts(folds, std::vector<double>(c, 0.0));
    std::vector<double> fold_size(folds, 0.0);
    FoldAssignment out;
    out.k = k;
    out.seed = seed;
    for (std::size_t g = 0; g < order.size(); ++g) {
        const std::size_t remaining = order.size() - g;
        const auto empty = static_cast<std::size_t>(std::count(fold_size.begin(), fold_size.end(), 0.0));
        const bool only_empty = remaining <= empty;

        std::size_t best = folds;
        double best_eval = 0.0;
        for (std::size_t f = 0; f < folds; ++f) {
            if (only_empty && fold_size[f] != 0.0) continue;
            for (std::size_t j = 0; j < c; ++j) fold_counts[f][j] += (*order[g].counts)[j];
            const double eval = fold_balance(fold_counts, class_total);
            for (std::size_t j = 0; j < c; ++j) fold_counts[f][j] -= (*order[g].counts)[j];
            const bool better = best == folds || eval < best_eval - 1e-12 ||
                                (std::abs(eval - best_eval) <= 1e-12 && fold_size[f] < fold_size[best]);
            if (better) {
                best = f;
                best_eval = eval;
            }
        }
        for (std::size_t j = 0; j < c; ++j) fold_counts[best][j] += (*order[g].counts)[j];
        fold_size[best] += order[g].size;
        out.fold_of_group[*order[g].name] = static_cast<int>(best);
    }
    return out;
}

Target parse_target(const std::string& name) {
    if (name == "complexity") return Target::complexity;
    if (name == "correctness") return Target::correctness;
    throw ConfigError("unknown target \"" + name + "\" (expected complexity or correctness)");
}

std::string to_string(Target target) { return target == Target::complexity ? "complexity" : "correctness"; }

LabelEncoding encode_labels(const FeatureTable& table, Target target) {
    std::vector<std::string> raw;
    raw.reserve(table.rows.size());
    for (const auto& row : table.rows) {
        if (target == Target::complexity) {
            raw.push_back(row.config);
        } else {
            if (!row.correct) throw ValidationError("trace " + row.trace_id + " has no correctness label");
            raw.push_back(*row.correct ? "true" : "false");
        }
    }
    LabelEncoding enc;
    std::set<std::string> distinct(raw.begin(), raw.end());
    enc.classes.assign(distinct.begin(), distinct.end());
    for (const auto& r : raw) {
        enc.y.push_back(static_cast<int>(std::lower_bound(enc.classes.begin(), enc.classes.end(), r) - enc.classes.begin()));
    }
    return enc;
}

std::vector<double> permutation_importance(const Model& model, const Matrix& x, const Labels& y, int n_classes,
                                           std::size_t repeats, std::uint64_t seed) {
    if (x.rows == 0) throw ValidationError("permutation importance needs validation rows");
    if (repeats == 0) throw ConfigError("permutation importance needs at least one repeat");
    const double baseline = balanced_accuracy(y, predict(model, x), n_classes);
    std::vector<double> importance(x.cols, 0.0);
    Matrix shuffled = x;
    std::vector<double> column(x.rows);
    for (std::size_t f = 0; f < x.cols; ++f) {
        double drop = 0.0;
        for (std::size_t r = 0; r < repeats; ++r) {
            for (std::size_t i = 0; i < x.rows; ++i) column[i] = x(i, f);
            Rng rng(derive_seed(seed, f, r));
            rng.shuffle(std::span(column));
            for (std::size_t i = 0; i < x.rows; ++i) shuffled(i, f) = column[i];
            drop += baseline - balanced_accuracy(y, predict(model, shuffled), n_classes);
        }
        for (std::size_t i = 0; i < x.rows; ++i) shuffled(i, f) = x(i, f);
        importance[f] = drop / static_cast<double>(repeats);
    }
    return importance;
}

CvReport evaluate_cv(const FeatureTable& table, const ClassifierConfig& cfg, const FoldAssignment& folds,
                     Target target, const CvOptions& options) {
    if (table.rows.empty()) throw ValidationError("feature table has no rows");
    const LabelEncoding enc = encode_labels(table, target);
    const auto n_classes = static_cast<int>(enc.classes.size());
    if (n_classes < 2) throw DegenerateLabelError("target has a single class");
    const std::size_t p = table.feature_names.size();

    CvReport report;
    report.target = target;
    report.model = cfg.kind;
    report.classes = enc.classes;
    report.feature_names = table.feature_names;
    report.confusion.assign(enc.classes.size(), std::vector<std::uint64_t>(enc.classes.size(), 0));

    std::vector<int> fold_of_row(table.rows.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto it = folds.fold_of_group.find(table.rows[i].puzzle_id);
        if (it == folds.fold_of_group.end()) {
            throw ConfigError("fold assignment does not cover puzzle_id " + table.rows[i].puzzle_id);
        }
        fold_of_row[i] = it->second;
    }

    std::vector<double> importance_sum(p, 0.0);
    std::size_t importance_folds = 0;
    std::vector<Prediction> predictions;
    for (int f = 0; f < folds.k; ++f) {
        std::vector<std::size_t> train, test;
        for (std::size_t i = 0; i < table.rows.size(); ++i) (fold_of_row[i] == f ? test : train).push_back(i);
        if (test.empty()) {
            report.warnings.push_back("fold " + std::to_string(f) + " is empty");
            continue;
        }
        std::set<std::string> train_groups, test_groups;
        for (auto i : train) train_groups.insert(table.rows[i].puzzle_id);
        for (auto i : test) test_groups.insert(table.rows[i].puzzle_id);
        for (const auto& g : test_groups) {
            if (train_groups.count(g)) throw LeakageError("puzzle_id " + g + " is in both train and test of fold " + std::to_string(f));
        }

        // Training-fold means fill missing values on both sides.
        std::vector<double> fill(p, 0.0);
        for (std::size_t j = 0; j < p; ++j) {
            double sum = 0.0;
            std::size_t n = 0;
            for (auto i : train) {
                if (const auto& v = table.rows[i].features[j]) {
                    sum += *v;
                    ++n;
                }
            }
            if (n) fill[j] = sum / static_cast<double>(n);
        }
        auto design = [&](const std::vector<std::size_t>& rows, Labels& y) {
            Matrix x(rows.size(), p);
            y.resize(rows.size());
            for (std::size_t r = 0; r < rows.size(); ++r) {
                const auto& row = table.rows[rows[r]];
                for (std::size_t j = 0; j < p; ++j) x(r, j) = row.features[j].value_or(fill[j]);
                y[r] = enc.y[rows[r]];
            }
            return x;
        };
        Labels y_train, y_test;
        const Matrix x_train = design(train, y_train);
        const Matrix x_test = design(test, y_test);

        std::set<int> train_classes(y_train.begin(), y_train.end());
        for (int label : std::set<int>(y_test.begin(), y_test.end())) {
            if (!train_classes.count(label)) {
                report.warnings.push_back("fold " + std::to_string(f) + ": class " +
                                          enc.classes[static_cast<std::size_t>(label)] +
                                          " absent from training split, scored as recall 0");
            }
        }

        ClassifierConfig fold_cfg = cfg;
        fold_cfg.seed = derive_seed(cfg.seed, kModelStream, static_cast<std::uint64_t>(f));
        const Model model = ml::train(x_train, y_train, n_classes, fold_cfg);
        const Labels predicted = predict(model, x_test);

        FoldResult result{f, balanced_accuracy(y_test, predicted, n_classes), train.size(), test.size(), std::nullopt};
        if (const auto* lr = std::get_if<LogisticModel>(&model)) {
            result.converged = lr->converged();
            if (!lr->converged()) report.warnings.push_back("fold " + std::to_string(f) + ": logistic regression did not converge");
        }
        report.folds.push_back(result);
        for (std::size_t r = 0; r < test.size(); ++r) {
            const auto& row = table.rows[test[r]];
            predictions.push_back({row.trace_id, row.puzzle_id, f, y_test[r], predicted[r]});
            ++report.confusion[static_cast<std::size_t>(y_test[r])][static_cast<std::size_t>(predicted[r])];
        }

        if (options.importance_repeats > 0) {
            const auto imp = permutation_importance(model, x_test, y_test, n_classes, options.importance_repeats,
                                                    derive_seed(options.seed, kImportanceStream, static_cast<std::uint64_t>(f)));
            for (std::size_t j = 0; j < p; ++j) importance_sum[j] += imp[j];
            ++importance_folds;
        }
    }

    std::sort(predictions.begin(), predictions.end(), [](auto& a, auto& b) { return a.trace_id < b.trace_id; });
    report.predictions = std::move(predictions);
    double mean = 0.0;
    for (const auto& fr : report.folds) mean += fr.balanced_accuracy;
    mean /= static_cast<double>(report.folds.size());
    double var = 0.0;
    for (const auto& fr : report.folds) var += (fr.balanced_accuracy - mean) * (fr.balanced_accuracy - mean);
    report.mean_balanced_accuracy = mean;
    report.std_balanced_accuracy = std::sqrt(var / static_cast<double>(report.folds.size()));
    if (importance_folds > 0) {
        for (auto& v : importance_sum) v /= static_cast<double>(importance_folds);
        report.importance = std::move(importance_sum);
    }
    return report;
}

McNemarResult mcnemar_test(const Labels& a, const Labels& b, const Labels& truth) {
    if (a.size() != b.size() || a.size() != truth.size()) throw ValidationError("McNemar inputs differ in length");
    McNemarResult r;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const bool a_ok = a[i] == truth[i];
        const bool b_ok = b[i] == truth[i];
        if (a_ok && !b_ok) ++r.b;
        if (!a_ok && b_ok) ++r.c;
    }
    const std::uint64_t n = r.b + r.c;
    if (n == 0) {
        r.undefined = true;
        r.p_value = 1.0;
        return r;
    }
    if (n < 25) {
        r.exact = true;
        r.statistic = static_cast<double>(std::min(r.b, r.c));
        r.p_value = binomial_two_sided(n, std::min(r.b, r.c));
        return r;
    }
    const double diff = std::abs(static_cast<double>(r.b) - static_cast<double>(r.c)) - 1.0;
    r.statistic = diff * diff / static_cast<double>(n);
    r.p_value = std::erfc(std::sqrt(r.statistic / 2.0));  // chi-square(1) upper tail
    return r;
}

McNemarResult compare_reports(const CvReport& a, const CvReport& b) {
    if (a.target != b.target) throw ValidationError("reports have different targets");
    if (a.classes != b.classes) throw ValidationError("reports have different class sets");
    if (a.predictions.size() != b.predictions.size()) throw ValidationError("reports cover different traces");
    Labels pa, pb, truth;
    for (std::size_t i = 0; i < a.predictions.size(); ++i) {
        const auto& x = a.predictions[i];
        const auto& y = b.predictions[i];
        if (x.trace_id != y.trace_id) throw ValidationError("reports cover different traces (" + x.trace_id + ")");
        if (x.truth != y.truth) throw ValidationError("reports disagree on the label of " + x.trace_id);
        pa.push_back(x.predicted);
        pb.push_back(y.predicted);
        truth.push_back(x.truth);
    }
    return mcnemar_test(pa, pb, truth);
}

nlohmann::ordered_json to_json(const McNemarResult& r) {
    nlohmann::ordered_json j;
    j["b"] = r.b;
    j["c"] = r.c;
    j["exact"] = r.exact;
    j["statistic"] = r.statistic;
    j["p_value"] = r.p_value;
    j["undefined"] = r.undefined;
    return j;
}

nlohmann::ordered_json to_json(const CvReport& report) {
    using json = nlohmann::ordered_json;
    json j;
    j["target"] = to_string(report.target);
    j["model"] = kind_name(report.model);
    j["classes"] = report.classes;
    j["feature_names"] = report.feature_names;
    j["mean_balanced_accuracy"] = report.mean_balanced_accuracy;
    j["std_balanced_accuracy"] = report.std_balanced_accuracy;
    json folds = json::array();
    for (const auto& f : report.folds) {
        json fj;
        fj["fold"] = f.fold;
        fj["balanced_accuracy"] = f.balanced_accuracy;
        fj["n_train"] = f.n_train;
        fj["n_test"] = f.n_test;
        if (f.converged) fj["converged"] = *f.converged;
        folds.push_back(std::move(fj));
    }
    j["folds"] = std::move(folds);
    j["confusion"] = report.confusion;
    if (report.importance) {
        json imp;
        for (std::size_t k = 0; k < report.feature_names.size(); ++k) imp[report.feature_names[k]] = (*report.importance)[k];
        j["importance"] = std::move(imp);
    }
    if (report.mcnemar) j["mcnemar"] = to_json(*report.mcnemar);
    j["warnings"] = report.warnings;
    json preds = json::array();
    for (const auto& p : report.predictions) {
        json pj;
        pj["trace_id"] = p.trace_id;
        pj["puzzle_id"] = p.puzzle_id;
        pj["fold"] = p.fold;
        pj["truth"] = report.classes[static_cast<std::size_t>(p.truth)];
        pj["predicted"] = report.classes[static_cast<std::size_t>(p.predicted)];
        preds.push_back(std::move(pj));
    }
    j["predictions"] = std::move(preds);
    return j;
}

CvReport report_from_json(const nlohmann::json& j) {
    CvReport report;
    try {
        report.target = parse_target(j.at("target").get<std::string>());
        report.model = j.at("model").get<std::string>() == "lr" ? ClassifierConfig::Kind::logistic
                                                                 : ClassifierConfig::Kind::random_forest;
        report.classes = j.at("classes").get<std::vector<std::string>>();
        auto index_of = [&](const std::string& label) {
            const auto it = std::find(report.classes.begin(), report.classes.end(), label);
            if (it == report.classes.end()) throw ValidationError("unknown class \"" + label + "\" in report");
            return static_cast<int>(it - report.classes.begin());
        };
        for (const auto& p : j.at("predictions")) {
            report.predictions.push_back({p.at("trace_id").get<std::string>(), p.value("puzzle_id", ""),
                                          p.value("fold", 0), index_of(p.at("truth").get<std::string>()),
                                          index_of(p.at("predicted").get<std::string>())});
        }
        report.mean_balanced_accuracy = j.value("mean_balanced_accuracy", 0.0);
        report.std_balanced_accuracy = j.value("std_balanced_accuracy", 0.0);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed report: ") + e.what());
    }
    std::sort(report.predictions.begin(), report.predictions.end(),
              [](auto& a, auto& b) { return a.trace_id < b.trace_id; });
    return report;
}

std::string confusion_csv(const CvReport& report) {
    std::string out = "truth\\predicted";
    for (const auto& c : report.classes) out += "," + c;
    out += "\n";
    for (std::size_t r = 0; r < report.classes.size(); ++r) {
        out += report.classes[r];
        for (auto v : report.confusion[r]) out += "," + std::to_string(v);
        out += "\n";
    }
    return out;
}

}  // namespace lrqa::ml
