#include <cmath>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "latent_rqa/errors.hpp"
#include "latent_rqa/ml/cv.hpp"

using namespace lrqa;
using namespace lrqa::ml;

namespace {

struct Data {
    Matrix x;
    Labels y;
};

Data xor_data(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    Data d{Matrix(n, 2), {}};
    for (std::size_t i = 0; i < n; ++i) {
        const double a = 2 * rng.uniform() - 1, b = 2 * rng.uniform() - 1;
        d.x(i, 0) = a;
        d.x(i, 1) = b;
        d.y.push_back((a > 0) != (b > 0) ? 1 : 0);
    }
    return d;
}

Data blobs(std::size_t per_class, std::uint64_t seed) {
    const double centers[3][2] = {{0, 0}, {4, 0}, {0, 4}};
    Rng rng(seed);
    Data d{Matrix(3 * per_class, 2), {}};
    for (std::size_t i = 0; i < 3 * per_class; ++i) {
        const int c = static_cast<int>(i % 3);
        d.x(i, 0) = centers[c][0] + rng.normal();
        d.x(i, 1) = centers[c][1] + rng.normal();
        d.y.push_back(c);
    }
    return d;
}

ClassifierConfig logistic() {
    ClassifierConfig c;
    c.kind = ClassifierConfig::Kind::logistic;
    return c;
}

// n_groups groups of group_size rows; every row of a group shares its config label.
FeatureTable grouped_table(std::size_t n_groups, std::size_t group_size, int n_configs, std::uint64_t seed,
                           bool informative) {
    Rng rng(seed);
    FeatureTable t;
    t.feature_names = {"n_tokens"};
    std::size_t id = 0;
    for (std::size_t g = 0; g < n_groups; ++g) {
        const int label = static_cast<int>(g % static_cast<std::size_t>(n_configs));
        for (std::size_t r = 0; r < group_size; ++r, ++id) {
            FeatureRow row;
            char buf[32];
            std::snprintf(buf, sizeof buf, "t%05zu", id);
            row.trace_id = buf;
            row.puzzle_id = "g" + std::to_string(g);
            row.config = std::to_string(label + 2) + "x2";
            row.correct = rng.below(2) == 1;
            row.features = {informative ? double(label) + 0.1 * rng.uniform() : rng.normal()};
            t.rows.push_back(row);
        }
    }
    return t;
}

FoldAssignment folds_for(const FeatureTable& t, Target target, int k, std::uint64_t seed) {
    const auto enc = encode_labels(t, target);
    std::vector<std::string> groups;
    for (const auto& r : t.rows) groups.push_back(r.puzzle_id);
    return group_stratified_folds(groups, enc.y, static_cast<int>(enc.classes.size()), k, seed);
}

double binomial_two_sided_oracle(unsigned n, unsigned k) {
    double tail = 0;
    double c = 1;
    for (unsigned i = 0; i <= k; ++i) {
        tail += c;
        c = c * (n - i) / (i + 1);
    }
    return std::min(1.0, 2 * tail / std::pow(2.0, n));
}

McNemarResult from_counts(std::uint64_t b, std::uint64_t c) {
    Labels truth, pa, pb;
    for (std::uint64_t i = 0; i < b; ++i) { truth.push_back(0); pa.push_back(0); pb.push_back(1); }
    for (std::uint64_t i = 0; i < c; ++i) { truth.push_back(0); pa.push_back(1); pb.push_back(0); }
    for (int i = 0; i < 7; ++i) { truth.push_back(1); pa.push_back(1); pb.push_back(1); }
    return mcnemar_test(pa, pb, truth);
}

}  // namespace

TEST_SUITE("ml-harness") {

TEST_CASE("16 groups into 8 folds: two whole groups each") {
    std::vector<std::string> groups;
    Labels labels;
    for (int g = 0; g < 16; ++g)
        for (int r = 0; r < 5; ++r) {
            groups.push_back("g" + std::to_string(g));
            labels.push_back(g % 2);
        }
    const auto fa = group_stratified_folds(groups, labels, 2, 8, 3);
    CHECK(fa.fold_of_group.size() == 16);
    std::map<int, int> per_fold;
    for (const auto& [g, f] : fa.fold_of_group) ++per_fold[f];
    CHECK(per_fold.size() == 8);
    for (const auto& [f, n] : per_fold) CHECK(n == 2);
}

TEST_CASE("fewer groups than folds is a configuration error") {
    std::vector<std::string> groups{"a", "b", "c", "d", "e", "f", "g"};
    CHECK_THROWS_AS(group_stratified_folds(groups, Labels(7, 0), 1, 8, 0), ConfigError);
}

TEST_CASE("360 single-label groups keep fold label proportions near global") {
    std::vector<std::string> groups;
    Labels labels;
    for (int g = 0; g < 360; ++g)
        for (int r = 0; r < 10; ++r) {
            groups.push_back("g" + std::to_string(g));
            labels.push_back(g % 9);
        }
    const auto fa = group_stratified_folds(groups, labels, 9, 8, 11);
    std::vector<std::vector<double>> counts(8, std::vector<double>(9, 0));
    std::vector<double> size(8, 0);
    for (std::size_t i = 0; i < groups.size(); ++i) {
        const int f = fa.fold_of_group.at(groups[i]);
        counts[f][labels[i]] += 1;
        size[f] += 1;
    }
    for (int f = 0; f < 8; ++f) {
        CHECK(size[f] > 0);
        for (int c = 0; c < 9; ++c) CHECK(std::fabs(counts[f][c] / size[f] - 1.0 / 9.0) <= 0.10);
    }
}

TEST_CASE("skewed group sizes: no fold is empty and assignment is seeded") {
    std::vector<std::string> groups;
    Labels labels;
    for (int g = 0; g < 20; ++g) {
        const int size = g < 3 ? 60 : 1 + g % 4;
        for (int r = 0; r < size; ++r) {
            groups.push_back("g" + std::to_string(g));
            labels.push_back((g + r) % 3);
        }
    }
    const auto a = group_stratified_folds(groups, labels, 3, 8, 5);
    const auto b = group_stratified_folds(groups, labels, 3, 8, 5);
    CHECK(a.fold_of_group == b.fold_of_group);
    std::set<int> used;
    for (const auto& [g, f] : a.fold_of_group) used.insert(f);
    CHECK(used.size() == 8);
}

TEST_CASE("logistic regression on separable data") {
    Data d{Matrix(40, 2), {}};
    Rng rng(4);
    for (std::size_t i = 0; i < 40; ++i) {
        const int c = static_cast<int>(i % 2);
        d.x(i, 0) = (c ? 2.0 : -2.0) + 0.5 * rng.normal();
        d.x(i, 1) = rng.normal();
        d.y.push_back(c);
    }
    const auto m = train_logistic(d.x, d.y, 2, logistic());
    CHECK(m.converged());
    CHECK(balanced_accuracy(d.y, m.predict(d.x), 2) == 1.0);
}

TEST_CASE("constant feature gets no weight") {
    auto d = blobs(30, 2);
    Matrix x(d.x.rows, 3);
    for (std::size_t i = 0; i < x.rows; ++i) {
        x(i, 0) = d.x(i, 0);
        x(i, 1) = 7.5;
        x(i, 2) = d.x(i, 1);
    }
    const auto m = train_logistic(x, d.y, 3, logistic());
    for (int c = 0; c < 3; ++c) CHECK(std::fabs(m.weight(c, 1)) <= 1e-6);
    CHECK(std::fabs(m.weight(1, 0)) > 0.1);
}

TEST_CASE("logistic regression separates gaussian blobs") {
    const auto train = blobs(100, 10);
    const auto test = blobs(100, 11);
    const auto m = train_logistic(train.x, train.y, 3, logistic());
    CHECK(m.converged());
    CHECK(balanced_accuracy(test.y, m.predict(test.x), 3) >= 0.9);
}

TEST_CASE("logistic regression reports non-convergence") {
    auto cfg = logistic();
    cfg.max_iterations = 1;
    const auto d = blobs(50, 1);
    const auto m = train_logistic(d.x, d.y, 3, cfg);
    CHECK_FALSE(m.converged());
    CHECK(m.predict(d.x).size() == d.y.size());
}

TEST_CASE("degenerate training labels") {
    const auto d = blobs(10, 1);
    CHECK_THROWS_AS(train_logistic(d.x, Labels(d.y.size(), 1), 3, logistic()), DegenerateLabelError);
    CHECK_THROWS_AS(train_random_forest(d.x, Labels(d.y.size(), 0), 3, {}), DegenerateLabelError);
}

TEST_CASE("random forest handles XOR where a linear model cannot") {
    const auto train = xor_data(400, 1);
    const auto test = xor_data(400, 2);
    ClassifierConfig rf;
    rf.seed = 9;
    const auto forest = train_random_forest(train.x, train.y, 2, rf);
    CHECK(forest.n_trees() == 100);
    CHECK(balanced_accuracy(test.y, forest.predict(test.x), 2) >= 0.95);
    const auto lr = train_logistic(train.x, train.y, 2, logistic());
    CHECK(balanced_accuracy(test.y, lr.predict(test.x), 2) <= 0.6);
}

TEST_CASE("random forest is deterministic in seed and threads") {
    const auto train = xor_data(200, 3);
    const auto test = xor_data(200, 4);
    ClassifierConfig rf;
    rf.seed = 1;
    const auto a = train_random_forest(train.x, train.y, 2, rf).predict(test.x);
    CHECK(a == train_random_forest(train.x, train.y, 2, rf).predict(test.x));
    rf.threads = 4;
    CHECK(a == train_random_forest(train.x, train.y, 2, rf).predict(test.x));
}

TEST_CASE("a single unbootstrapped tree memorizes distinct points") {
    const auto d = blobs(50, 6);
    ClassifierConfig rf;
    rf.n_trees = 1;
    rf.bootstrap = false;
    rf.max_features = 2;
    CHECK(balanced_accuracy(d.y, train_random_forest(d.x, d.y, 3, rf).predict(d.x), 3) == 1.0);
}

TEST_CASE("balanced accuracy") {
    CHECK(balanced_accuracy({0, 0, 0, 1}, {0, 0, 0, 0}, 2) == 0.5);
    CHECK(balanced_accuracy({0, 1, 2, 2}, {0, 0, 0, 0}, 3) == doctest::Approx(1.0 / 3.0));
    CHECK(balanced_accuracy({0, 1, 1, 1}, {0, 1, 1, 0}, 2) == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0));
    CHECK(argmax_lowest(std::vector<double>{1, 3, 3}) == 1);
}

TEST_CASE("label encoding") {
    auto t = grouped_table(12, 2, 3, 1, true);
    const auto enc = encode_labels(t, Target::complexity);
    CHECK(enc.classes == std::vector<std::string>{"2x2", "3x2", "4x2"});
    const auto cor = encode_labels(t, Target::correctness);
    CHECK(cor.classes == std::vector<std::string>{"false", "true"});
    t.rows[0].correct.reset();
    CHECK_THROWS_AS(encode_labels(t, Target::correctness), ValidationError);
    CHECK(parse_target("correctness") == Target::correctness);
    CHECK_THROWS_AS(parse_target("x"), ConfigError);
}

TEST_CASE("perfectly predictive feature scores 1 under cross-validation") {
    const auto t = grouped_table(48, 5, 3, 2, true);
    const auto folds = folds_for(t, Target::complexity, 8, 0);
    for (const auto& cfg : {logistic(), ClassifierConfig{}}) {
        const auto report = evaluate_cv(t, cfg, folds, Target::complexity);
        CHECK(report.mean_balanced_accuracy == 1.0);
        CHECK(report.std_balanced_accuracy == 0.0);
        CHECK(report.folds.size() == 8);
    }
}

TEST_CASE("shuffled labels sit at chance for 9 classes") {
    double total = 0;
    const int runs = 5;
    for (int s = 0; s < runs; ++s) {
        const auto t = grouped_table(360, 10, 9, 100 + s, false);
        const auto folds = folds_for(t, Target::complexity, 8, s);
        ClassifierConfig cfg;
        cfg.seed = s;
        cfg.n_trees = 30;
        total += evaluate_cv(t, cfg, folds, Target::complexity).mean_balanced_accuracy;
    }
    CHECK(std::fabs(total / runs - 1.0 / 9.0) <= 0.05);
}

TEST_CASE("cross-validation report invariants") {
    auto t = grouped_table(40, 3, 4, 3, false);
    for (std::size_t i = 0; i < t.rows.size(); i += 7) t.rows[i].features[0].reset();
    const auto folds = folds_for(t, Target::complexity, 8, 2);
    ClassifierConfig cfg;
    cfg.n_trees = 20;
    const auto report = evaluate_cv(t, cfg, folds, Target::complexity);

    REQUIRE(report.predictions.size() == t.rows.size());
    std::map<std::string, int> fold_of_puzzle;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& p = report.predictions[i];
        CHECK(p.trace_id == t.rows[i].trace_id);
        auto [it, fresh] = fold_of_puzzle.emplace(p.puzzle_id, p.fold);
        CHECK(it->second == p.fold);  // a puzzle is tested in exactly one fold
    }
    for (const auto& f : report.folds) CHECK(f.n_train + f.n_test == t.rows.size());
    const auto enc = encode_labels(t, Target::complexity);
    for (std::size_t c = 0; c < report.classes.size(); ++c) {
        std::uint64_t support = std::count(enc.y.begin(), enc.y.end(), static_cast<int>(c));
        std::uint64_t row_sum = 0;
        for (auto v : report.confusion[c]) row_sum += v;
        CHECK(row_sum == support);
    }
}

TEST_CASE("test rows never influence their own fold") {
    auto t = grouped_table(24, 4, 2, 8, true);
    for (std::size_t i = 0; i < t.rows.size(); i += 3) t.rows[i].features[0].reset();
    const auto folds = folds_for(t, Target::complexity, 8, 1);
    ClassifierConfig cfg;
    cfg.n_trees = 15;
    const auto base = evaluate_cv(t, cfg, folds, Target::complexity);

    // perturb one test row of fold 0; every other row of fold 0 must keep its prediction
    const std::size_t victim = [&] {
        for (std::size_t i = 0; i < t.rows.size(); ++i)
            if (folds.fold_of_group.at(t.rows[i].puzzle_id) == 0) return i;
        return std::size_t{0};
    }();
    auto perturbed = t;
    perturbed.rows[victim].features[0] = 1e6;
    const auto other = evaluate_cv(perturbed, cfg, folds, Target::complexity);
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        if (i != victim && base.predictions[i].fold == 0) CHECK(base.predictions[i].predicted == other.predictions[i].predicted);
    }
}

TEST_CASE("fold assignment must cover every group") {
    const auto t = grouped_table(16, 2, 2, 1, true);
    auto folds = folds_for(t, Target::complexity, 8, 0);
    folds.fold_of_group.erase("g0");
    CHECK_THROWS_AS(evaluate_cv(t, {}, folds, Target::complexity), ConfigError);
}

TEST_CASE("class missing from a training split is warned about") {
    auto t = grouped_table(16, 2, 2, 1, true);
    for (auto& r : t.rows)
        if (r.puzzle_id == "g0") r.config = "9x9";
    const auto report = evaluate_cv(t, {}, folds_for(t, Target::complexity, 8, 0), Target::complexity);
    REQUIRE_FALSE(report.warnings.empty());
    CHECK(report.warnings[0].find("9x9") != std::string::npos);
}

TEST_CASE("McNemar exact and asymptotic branches") {
    const auto small = from_counts(10, 2);
    CHECK(small.exact);
    CHECK(small.b == 10);
    CHECK(small.c == 2);
    CHECK(std::fabs(small.p_value - 2.0 * (1 + 12 + 66) / 4096.0) <= 1e-12);
    CHECK(std::fabs(small.p_value - 0.03857) <= 1e-4);

    CHECK(from_counts(5, 5).p_value == 1.0);

    const auto large = from_counts(40, 10);
    CHECK_FALSE(large.exact);
    CHECK(std::fabs(large.statistic - 16.82) <= 1e-2);
    CHECK(large.p_value < 0.001);
    // chi-square(1) tail: P(Z^2 > x) = erfc(sqrt(x / 2))
    CHECK(std::fabs(large.p_value - std::erfc(std::sqrt(16.82 / 2))) <= 1e-12);

    const auto none = from_counts(0, 0);
    CHECK(none.undefined);
    CHECK(none.p_value == 1.0);

    for (unsigned b = 0; b < 13; ++b) {
        for (unsigned c = 0; c + b < 25; ++c) {
            if (b + c == 0) continue;
            const auto ab = from_counts(b, c), ba = from_counts(c, b);
            CHECK(std::fabs(ab.p_value - binomial_two_sided_oracle(b + c, std::min(b, c))) <= 1e-12);
            CHECK(ab.p_value == ba.p_value);
            CHECK(ab.b == ba.c);
        }
    }
    CHECK_THROWS_AS(mcnemar_test({0}, {0, 1}, {0}), ValidationError);
}

TEST_CASE("permutation importance") {
    Rng rng(5);
    Matrix x(300, 2);
    Labels y;
    for (std::size_t i = 0; i < 300; ++i) {
        const int c = static_cast<int>(i % 3);
        x(i, 0) = c + 0.2 * rng.uniform();
        x(i, 1) = 4.0;
        y.push_back(c);
    }
    ClassifierConfig cfg;
    cfg.n_trees = 20;
    const Model model = train(x, y, 3, cfg);
    const auto imp = permutation_importance(model, x, y, 3, 10, 77);
    CHECK(imp[1] == 0.0);
    // one perfect feature: shuffling drops accuracy from 1 to chance
    CHECK(std::fabs(imp[0] - (1.0 - 1.0 / 3.0)) <= 0.05);
    CHECK(imp == permutation_importance(model, x, y, 3, 10, 77));

    Matrix single(300, 1);
    for (std::size_t i = 0; i < 300; ++i) single(i, 0) = x(i, 0);
    const auto lr = train(single, y, 3, logistic());
    CHECK(std::fabs(permutation_importance(lr, single, y, 3, 10, 1)[0] - 2.0 / 3.0) <= 0.05);
}

TEST_CASE("report JSON, comparison and confusion CSV") {
    const auto t = grouped_table(24, 3, 3, 4, false);
    const auto folds = folds_for(t, Target::complexity, 8, 0);
    ClassifierConfig rf;
    rf.n_trees = 10;
    const auto a = evaluate_cv(t, rf, folds, Target::complexity, {3, 1});
    REQUIRE(a.importance.has_value());
    const auto b = evaluate_cv(t, logistic(), folds, Target::complexity);

    const auto j = to_json(a);
    CHECK(j.begin().key() == "target");
    CHECK(j["model"] == "rf");
    CHECK(j["predictions"][0]["truth"].is_string());
    CHECK(to_json(a).dump() == j.dump());

    const auto back = report_from_json(nlohmann::json::parse(j.dump()));
    CHECK(back.predictions.size() == a.predictions.size());
    const auto direct = compare_reports(a, b);
    const auto via_json = compare_reports(back, report_from_json(nlohmann::json::parse(to_json(b).dump())));
    CHECK(direct.b == via_json.b);
    CHECK(direct.c == via_json.c);
    CHECK(direct.p_value == via_json.p_value);

    auto c = b;
    c.predictions.pop_back();
    CHECK_THROWS_AS(compare_reports(a, c), ValidationError);
    c = b;
    c.target = Target::correctness;
    CHECK_THROWS_AS(compare_reports(a, c), ValidationError);

    const std::string csv = confusion_csv(a);
    CHECK(csv.rfind("truth\\predicted,2x2,3x2,4x2\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
}

}
