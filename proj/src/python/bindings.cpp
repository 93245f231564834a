#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "latent_rqa/dataset.hpp"
#include "latent_rqa/errors.hpp"
#include "latent_rqa/ml/cv.hpp"
#include "latent_rqa/recurrence.hpp"
#include "latent_rqa/rqa.hpp"
#include "latent_rqa/synth.hpp"
#include "latent_rqa/temporal.hpp"
#include "latent_rqa/trajectory_io.hpp"

namespace py = pybind11;
using namespace lrqa;

namespace {

Trajectory from_array(const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw ValidationError("trajectory array must be 2-D (steps x dim)");
    const auto n = static_cast<std::size_t>(a.shape(0));
    const auto d = static_cast<std::size_t>(a.shape(1));
    return Trajectory(n, d, std::vector<float>(a.data(), a.data() + n * d));
}

py::array_t<float> to_array(const Trajectory& t) {
    py::array_t<float> a({t.n_steps(), t.dim()});
    std::copy(t.data().begin(), t.data().end(), a.mutable_data());
    return a;
}

ThresholdSpec make_threshold(double quantile, std::optional<double> epsilon, bool exact, std::uint64_t seed) {
    ThresholdSpec t;
    t.quantile = quantile;
    t.fixed_epsilon = epsilon;
    t.mode = exact ? ThresholdSpec::Mode::exact : ThresholdSpec::Mode::sampled;
    t.seed = seed;
    t.validate();
    return t;
}

py::dict metrics_dict(const RqaMetrics& m, double eps) {
    py::dict d;
    d["epsilon"] = eps;
    d["rr"] = m.rr;
    d["det"] = m.det;
    d["lam"] = m.lam;
    d["entr"] = m.entr;
    d["degenerate"] = m.degenerate;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Recurrence quantification of latent trajectories";

    auto base = py::register_exception<Error>(m, "RqaError", PyExc_RuntimeError);
    py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
    py::register_exception<FormatError>(m, "FormatError", base.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());

    m.def("read_trajectory", [](const std::filesystem::path& p) {
        const auto loaded = read_trajectory(p);
        return py::make_tuple(to_array(loaded.trajectory), loaded.truncated);
    }, py::arg("path"), "Returns (array, truncated).");
    m.def("write_trajectory", [](const py::array_t<float, py::array::c_style | py::array::forcecast>& a,
                                 const std::filesystem::path& p) { write_trajectory(from_array(a), p); },
          py::arg("array"), py::arg("path"));

    m.def("cosine_distance", [](const std::vector<float>& x, const std::vector<float>& y) {
        return cosine_distance(x, y);
    });

    m.def("select_epsilon", [](const py::array_t<float, py::array::c_style | py::array::forcecast>& a,
                               double quantile, bool exact, std::uint64_t seed) {
        return select_epsilon(from_array(a), make_threshold(quantile, std::nullopt, exact, seed));
    }, py::arg("array"), py::arg("quantile") = 0.10, py::arg("exact") = false, py::arg("seed") = 0);

    m.def("recurrence_matrix", [](const py::array_t<float, py::array::c_style | py::array::forcecast>& a,
                                  double epsilon) {
        const RecurrenceMatrix r = recurrence_matrix(from_array(a), epsilon);
        const std::size_t n = r.size();
        py::array_t<std::uint8_t> out({n, n});
        auto* p = out.mutable_data();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) p[i * n + j] = r(i, j) ? 1 : 0;
        return out;
    }, py::arg("array"), py::arg("epsilon"));

    m.def("quantify_matrix", [](const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a,
                                std::size_t l_min, std::size_t v_min) {
        if (a.ndim() != 2 || a.shape(0) != a.shape(1)) throw ValidationError("matrix must be square");
        const auto n = static_cast<std::size_t>(a.shape(0));
        const auto r = RecurrenceMatrix::from_dense(n, {a.data(), n * n});
        RqaParams p;
        p.l_min = l_min;
        p.v_min = v_min;
        return metrics_dict(quantify(r, p), 0.0);
    }, py::arg("matrix"), py::arg("l_min") = 3, py::arg("v_min") = 3);

    m.def("analyze", [](const py::array_t<float, py::array::c_style | py::array::forcecast>& a, double quantile,
                        std::optional<double> epsilon, std::size_t l_min, std::size_t v_min, std::uint64_t seed,
                        unsigned threads) {
        const Trajectory t = from_array(a);
        RqaParams p;
        p.l_min = l_min;
        p.v_min = v_min;
        const double eps = select_epsilon(t, make_threshold(quantile, epsilon, false, seed));
        return metrics_dict(quantify(recurrence_matrix(t, eps, threads), p), eps);
    }, py::arg("array"), py::arg("quantile") = 0.10, py::arg("epsilon") = py::none(), py::arg("l_min") = 3,
       py::arg("v_min") = 3, py::arg("seed") = 0, py::arg("threads") = 1,
       "Global RQA: dict with epsilon, rr, det, lam, entr, degenerate.");

    m.def("metric_series", [](const py::array_t<float, py::array::c_style | py::array::forcecast>& a,
                              std::size_t window, std::size_t step, double quantile, std::uint64_t seed) {
        WindowConfig w;
        w.width = window;
        w.step = step;
        const MetricSeries s = metric_series(from_array(a), w, {}, make_threshold(quantile, std::nullopt, false, seed));
        py::dict d;
        d["window_start"] = s.window_starts;
        d["rr"] = s.rr;
        d["det"] = s.det;
        d["lam"] = s.lam;
        d["entr"] = s.entr;
        return d;
    }, py::arg("array"), py::arg("window") = 150, py::arg("step") = 15, py::arg("quantile") = 0.10,
       py::arg("seed") = 0);

    m.def("temporal_features", [](const py::array_t<float, py::array::c_style | py::array::forcecast>& a,
                                  std::size_t window, std::size_t step, double quantile, std::uint64_t seed) {
        WindowConfig w;
        w.width = window;
        w.step = step;
        const auto f = summarize_series(
            metric_series(from_array(a), w, {}, make_threshold(quantile, std::nullopt, false, seed)));
        py::dict d;
        for (std::size_t i = 0; i < kTemporalFeatureNames.size(); ++i) {
            d[py::str(std::string(kTemporalFeatureNames[i]))] =
                f.values[i] ? py::object(py::float_(*f.values[i])) : py::object(py::none());
        }
        return d;
    }, py::arg("array"), py::arg("window") = 150, py::arg("step") = 15, py::arg("quantile") = 0.10,
       py::arg("seed") = 0);

    m.def("dfa_exponent", [](const std::vector<double>& s) { return dfa_exponent(s); }, py::arg("series"));
    m.def("linear_slope", [](const std::vector<double>& s) { return linear_slope(s); }, py::arg("series"));

    m.def("search_space_size", [](int n, int m_) {
        return py::int_(py::str(search_space_size(n, m_).str()));
    }, py::arg("n"), py::arg("m"));

    m.def("build_features", [](const std::filesystem::path& manifest, const std::string& set,
                               const std::filesystem::path& out, unsigned threads) {
        FeatureOptions opt;
        opt.threads = threads;
        const auto build = build_feature_table(load_manifest(manifest), manifest.parent_path(),
                                               parse_feature_set(set), opt);
        write_feature_table(build.table, out);
        std::vector<std::pair<std::string, std::string>> errors;
        for (const auto& e : build.errors) errors.emplace_back(e.trace_id, e.message);
        return errors;
    }, py::arg("manifest"), py::arg("feature_set"), py::arg("output"), py::arg("threads") = 1,
       "Writes the feature CSV; returns [(trace_id, message)] for traces that failed.");

    m.def("classify", [](const std::filesystem::path& features, const std::string& target, const std::string& model,
                         int folds, std::uint64_t seed) {
        const FeatureTable table = read_feature_table(features);
        ml::ClassifierConfig cfg;
        cfg.kind = model == "lr" ? ml::ClassifierConfig::Kind::logistic : ml::ClassifierConfig::Kind::random_forest;
        if (model != "lr" && model != "rf") throw ConfigError("model must be lr or rf");
        cfg.seed = seed;
        const ml::Target t = ml::parse_target(target);
        const auto enc = ml::encode_labels(table, t);
        std::vector<std::string> groups;
        for (const auto& r : table.rows) groups.push_back(r.puzzle_id);
        const auto fa = ml::group_stratified_folds(groups, enc.y, static_cast<int>(enc.classes.size()), folds, seed);
        return ml::to_json(ml::evaluate_cv(table, cfg, fa, t)).dump();
    }, py::arg("features"), py::arg("target") = "complexity", py::arg("model") = "rf", py::arg("folds") = 8,
       py::arg("seed") = 0, "Cross-validated report as a JSON string.");

    m.def("mcnemar", [](std::uint64_t b, std::uint64_t c) {
        ml::Labels truth, a, bb;
        for (std::uint64_t i = 0; i < b; ++i) { truth.push_back(0); a.push_back(0); bb.push_back(1); }
        for (std::uint64_t i = 0; i < c; ++i) { truth.push_back(0); a.push_back(1); bb.push_back(0); }
        const auto r = ml::mcnemar_test(a, bb, truth);
        return py::make_tuple(r.statistic, r.p_value);
    }, py::arg("b"), py::arg("c"), "McNemar test from discordant counts: (statistic, p_value).");

    m.def("synth", [](const std::string& spec_json, const std::filesystem::path& dir) {
        return write_synth_corpus(synth_traces_from_json(nlohmann::json::parse(spec_json)), dir).size();
    }, py::arg("spec_json"), py::arg("directory"));
}
