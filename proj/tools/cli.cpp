#include "cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "latent_rqa/dataset.hpp"
#include "latent_rqa/errors.hpp"
#include "latent_rqa/ml/cv.hpp"
#include "latent_rqa/recurrence.hpp"
#include "latent_rqa/rng.hpp"
#include "latent_rqa/rqa.hpp"
#include "latent_rqa/synth.hpp"
#include "latent_rqa/temporal.hpp"
#include "latent_rqa/trajectory_io.hpp"

namespace lrqa::cli {
namespace {

unsigned default_threads() {
    if (const char* env = std::getenv("RQA_THREADS")) {
        char* end = nullptr;
        const unsigned long v = std::strtoul(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
    }
    return 1;
}

// Flags shared by every subcommand.
struct Common {
    std::uint64_t seed = 0;
    double quantile = 0.10;
    std::size_t window = 150;
    std::size_t step = 15;
    std::size_t l_min = 3;
    std::size_t v_min = 3;
    unsigned threads = default_threads();
    std::optional<double> epsilon;
    bool exact = false;
    bool per_window = false;
    std::uint64_t sample_budget = 10'000'000;

    void attach(CLI::App* app) {
        app->add_option("--seed", seed, "Master seed")->capture_default_str();
        app->add_option("--quantile", quantile, "Recurrence threshold quantile q of pairwise distances")
            ->capture_default_str();
        app->add_option("--window", window, "Sliding window width W")->capture_default_str();
        app->add_option("--step", step, "Sliding window step")->capture_default_str();
        app->add_option("--lmin", l_min, "Minimum diagonal line length")->capture_default_str();
        app->add_option("--vmin", v_min, "Minimum vertical line length")->capture_default_str();
        app->add_option("--threads", threads, "Thread budget (default from RQA_THREADS, else 1)")
            ->capture_default_str();
        app->add_option("--epsilon", epsilon, "Fixed threshold, overrides --quantile");
        app->add_flag("--exact", exact, "Exact epsilon over all pairs instead of sampling");
        app->add_option("--sample-budget", sample_budget, "Pairs sampled for epsilon")->capture_default_str();
        app->add_flag("--per-window-epsilon", per_window, "Select epsilon inside each window");
    }

    ThresholdSpec threshold() const {
        ThresholdSpec t;
        t.quantile = quantile;
        t.mode = exact ? ThresholdSpec::Mode::exact : ThresholdSpec::Mode::sampled;
        t.sample_budget = sample_budget;
        t.seed = seed;
        t.fixed_epsilon = epsilon;
        t.validate();
        return t;
    }
    RqaParams params() const {
        RqaParams p;
        p.l_min = l_min;
        p.v_min = v_min;
        p.validate();
        return p;
    }
    WindowConfig window_config() const {
        WindowConfig w;
        w.width = window;
        w.step = step;
        w.epsilon_policy = per_window ? WindowConfig::EpsilonPolicy::per_window
                                      : WindowConfig::EpsilonPolicy::trace_global;
        w.validate();
        return w;
    }
    unsigned thread_budget() const { return threads == 0 ? 1 : threads; }
};

void write_text(const std::string& text, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    f << text;
    if (!f) throw IoError("write failed: " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

nlohmann::json read_json(const std::filesystem::path& path) {
    try {
        return nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

std::string series_csv(const MetricSeries& s) {
    std::string out = "window_start,rr,det,lam,entr\n";
    for (std::size_t i = 0; i < s.size(); ++i) {
        out += std::to_string(s.window_starts[i]) + "," + format_double(s.rr[i]) + "," + format_double(s.det[i]) +
               "," + format_double(s.lam[i]) + "," + format_double(s.entr[i]) + "\n";
    }
    return out;
}

struct AnalyzeArgs {
    std::string input;
    std::string series;
    std::string output;
};

int do_analyze(const AnalyzeArgs& a, const Common& c, std::ostream& out) {
    const LoadedTrajectory loaded = read_trajectory(a.input);
    const Trajectory& traj = loaded.trajectory;
    const ThresholdSpec thr = c.threshold();
    const RqaParams params = c.params();
    const double eps = select_epsilon(traj, thr);
    const RqaMetrics m = quantify(recurrence_matrix(traj, eps, c.thread_budget()), params);

    nlohmann::ordered_json j;
    j["n_steps"] = traj.n_steps();
    j["dim"] = traj.dim();
    j["truncated"] = loaded.truncated;
    j["epsilon"] = eps;
    j["rr"] = m.rr;
    j["det"] = m.det;
    j["lam"] = m.lam;
    j["entr"] = m.entr;
    j["degenerate"] = m.degenerate;
    if (!a.series.empty()) {
        const MetricSeries s = metric_series(traj, c.window_config(), params, thr, c.thread_budget());
        write_text(series_csv(s), a.series);
    }
    const std::string text = j.dump(2) + "\n";
    if (a.output.empty()) {
        out << text;
    } else {
        write_text(text, a.output);
    }
    return kExitOk;
}

struct FeaturesArgs {
    std::string manifest;
    std::string set = "temporal";
    std::string output;
    std::string errors;
};

int do_features(const FeaturesArgs& a, const Common& c, std::ostream& err) {
    const FeatureSet set = parse_feature_set(a.set);
    const auto records = load_manifest(a.manifest);
    FeatureOptions opt;
    opt.window = c.window_config();
    opt.params = c.params();
    opt.threshold = c.threshold();
    opt.threads = c.thread_budget();
    const FeatureBuild build =
        build_feature_table(records, std::filesystem::path(a.manifest).parent_path(), set, opt);
    write_feature_table(build.table, a.output);
    const std::string errors_path = a.errors.empty() ? a.output + ".errors.jsonl" : a.errors;
    if (!build.errors.empty() || !a.errors.empty()) write_row_errors(build.errors, errors_path);
    if (!build.errors.empty()) {
        err << "rqa features: " << build.errors.size() << " of " << records.size()
            << " traces failed; see " << errors_path << "\n";
    }
    return kExitOk;
}

struct ClassifyArgs {
    std::string features;
    std::string target = "complexity";
    std::string model = "rf";
    std::string output;
    std::string compare;
    std::string confusion;
    bool importance = false;
    std::size_t importance_repeats = 10;
    int folds = 8;
    std::size_t trees = 100;
    double l2 = 1.0;
    std::size_t max_iterations = 500;
};

int do_classify(const ClassifyArgs& a, const Common& c, std::ostream& out) {
    const FeatureTable table = read_feature_table(a.features);
    const ml::Target target = ml::parse_target(a.target);

    ml::ClassifierConfig cfg;
    if (a.model == "lr") {
        cfg.kind = ml::ClassifierConfig::Kind::logistic;
    } else if (a.model == "rf") {
        cfg.kind = ml::ClassifierConfig::Kind::random_forest;
    } else {
        throw ConfigError("unknown model \"" + a.model + "\" (expected lr or rf)");
    }
    cfg.l2_strength = a.l2;
    cfg.max_iterations = a.max_iterations;
    cfg.n_trees = a.trees;
    cfg.seed = c.seed;
    cfg.threads = c.thread_budget();

    const ml::LabelEncoding enc = ml::encode_labels(table, target);
    std::vector<std::string> groups;
    for (const auto& row : table.rows) groups.push_back(row.puzzle_id);
    const ml::FoldAssignment folds = ml::group_stratified_folds(
        groups, enc.y, static_cast<int>(enc.classes.size()), a.folds, c.seed);

    ml::CvOptions opt;
    opt.importance_repeats = a.importance ? a.importance_repeats : 0;
    opt.seed = c.seed;
    ml::CvReport report = ml::evaluate_cv(table, cfg, folds, target, opt);
    if (!a.compare.empty()) {
        report.mcnemar = ml::compare_reports(report, ml::report_from_json(read_json(a.compare)));
    }
    if (!a.confusion.empty()) write_text(ml::confusion_csv(report), a.confusion);

    const std::string text = ml::to_json(report).dump(2) + "\n";
    if (a.output.empty()) {
        out << text;
    } else {
        write_text(text, a.output);
    }
    return kExitOk;
}

struct PlotArgs {
    std::string input;
    std::string output;
    bool flip_y = false;
};

int do_plot(const PlotArgs& a, const Common& c) {
    const Trajectory traj = read_trajectory(a.input).trajectory;
    const double eps = select_epsilon(traj, c.threshold());
    const RecurrenceMatrix m = recurrence_matrix(traj, eps, c.thread_budget());
    const std::filesystem::path path(a.output);
    if (path.extension() == ".pbm") {
        write_pbm(m, path, a.flip_y);
    } else {
        write_pgm(m, path, a.flip_y);
    }
    return kExitOk;
}

struct SynthArgs {
    std::string spec;
    std::string output;
};

int do_synth(const SynthArgs& a, const Common& c, bool seed_given, std::ostream& out) {
    nlohmann::json j = read_json(a.spec);
    // --seed fills in seeds the description leaves open
    if (seed_given && j.is_object()) {
        if (j.contains("corpus") && j["corpus"].is_object() && !j["corpus"].contains("seed")) j["corpus"]["seed"] = c.seed;
        if (j.contains("traces") && j["traces"].is_array()) {
            for (std::size_t i = 0; i < j["traces"].size(); ++i) {
                auto& t = j["traces"][i];
                if (t.is_object() && !t.contains("seed")) t["seed"] = derive_seed(c.seed, 0x5EED, i);
            }
        }
    }
    const auto records = write_synth_corpus(synth_traces_from_json(j), a.output);
    out << "wrote " << records.size() << " trajectories to " << a.output << "\n";
    return kExitOk;
}

struct SummaryArgs {
    std::string manifest;
    std::string output;
};

int do_summary(const SummaryArgs& a, std::ostream& out) {
    const AccuracySummary s = summarize_accuracy(load_manifest(a.manifest));
    const std::string text = accuracy_csv(s);
    if (a.output.empty()) {
        out << text;
    } else {
        write_text(text, a.output);
    }
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Recurrence quantification of latent generation trajectories", "rqa"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "0.1.0");

    Common common;

    AnalyzeArgs analyze;
    auto* an = app.add_subcommand("analyze", "Global RQA of one trajectory, printed as JSON");
    an->add_option("trajectory", analyze.input, "Trajectory file")->required();
    an->add_option("--series", analyze.series, "Also write the sliding-window metric series CSV here");
    an->add_option("-o,--output", analyze.output, "Write the JSON here instead of stdout");

    FeaturesArgs features;
    auto* fe = app.add_subcommand("features", "Feature table for every trace in a manifest");
    fe->add_option("manifest", features.manifest, "Manifest (JSONL)")->required();
    fe->add_option("--set", features.set, "Feature set: length | global | temporal")
        ->check(CLI::IsMember({"length", "global", "temporal"}))
        ->capture_default_str();
    fe->add_option("-o,--output", features.output, "Output CSV")->required();
    fe->add_option("--errors", features.errors, "Per-trace error report (JSONL), default <output>.errors.jsonl");

    ClassifyArgs classify;
    auto* cl = app.add_subcommand("classify", "Grouped k-fold cross-validated classification");
    cl->add_option("features", classify.features, "Feature CSV")->required();
    cl->add_option("--target", classify.target, "complexity | correctness")
        ->check(CLI::IsMember({"complexity", "correctness"}))
        ->capture_default_str();
    cl->add_option("--model", classify.model, "lr | rf")->check(CLI::IsMember({"lr", "rf"}))->capture_default_str();
    cl->add_option("-o,--output", classify.output, "Write the report JSON here instead of stdout");
    cl->add_option("--compare", classify.compare, "Other report JSON; adds a McNemar test against it");
    cl->add_option("--confusion", classify.confusion, "Write the pooled confusion matrix CSV here");
    cl->add_flag("--importance", classify.importance, "Add permutation importances");
    cl->add_option("--importance-repeats", classify.importance_repeats, "Shuffles per feature")->capture_default_str();
    cl->add_option("--folds", classify.folds, "Number of folds k")->capture_default_str();
    cl->add_option("--trees", classify.trees, "Random forest size")->capture_default_str();
    cl->add_option("--l2", classify.l2, "Logistic regression L2 strength")->capture_default_str();
    cl->add_option("--max-iterations", classify.max_iterations, "Logistic regression iteration cap")
        ->capture_default_str();

    PlotArgs plot;
    auto* pl = app.add_subcommand("plot", "Recurrence plot as binary PGM (or PBM for a .pbm output)");
    pl->add_option("trajectory", plot.input, "Trajectory file")->required();
    pl->add_option("-o,--output", plot.output, "Image path")->required();
    pl->add_flag("--flip-y", plot.flip_y, "Put time index 0 at the bottom");

    SynthArgs synth;
    auto* sy = app.add_subcommand("synth", "Generate synthetic trajectories and a manifest");
    sy->add_option("spec", synth.spec, "Synth description (JSON)")->required();
    sy->add_option("-o,--output", synth.output, "Output directory")->required();

    SummaryArgs summary;
    auto* su = app.add_subcommand("summary", "Per-config accuracy table of a manifest");
    su->add_option("manifest", summary.manifest, "Manifest (JSONL)")->required();
    su->add_option("-o,--output", summary.output, "Write the CSV here instead of stdout");

    for (auto* sub : {an, fe, cl, pl, sy, su}) common.attach(sub);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        std::ostringstream o, er;
        const int code = app.exit(e, o, er);
        if (code == 0) {
            out << o.str() << er.str();
            return kExitOk;
        }
        err << o.str() << er.str();
        return kExitUsage;
    }

    try {
        if (*an) return do_analyze(analyze, common, out);
        if (*fe) return do_features(features, common, err);
        if (*cl) return do_classify(classify, common, out);
        if (*pl) return do_plot(plot, common);
        if (*sy) return do_synth(synth, common, sy->count("--seed") > 0, out);
        if (*su) return do_summary(summary, out);
    } catch (const Error& e) {
        err << "rqa: " << e.what() << "\n";
        return kExitDataError;
    } catch (const std::exception& e) {
        err << "rqa: " << e.what() << "\n";
        return kExitDataError;
    }
    return kExitUsage;
}

int run_cli(const std::vector<std::string>& args) { return run_cli(args, std::cout, std::cerr); }

}  // namespace lrqa::cli
