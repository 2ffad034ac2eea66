#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <json.hpp>

#include "crowdloc/assign.hpp"
#include "crowdloc/cli.hpp"
#include "crowdloc/consist.hpp"
#include "crowdloc/core.hpp"
#include "crowdloc/eval.hpp"
#include "crowdloc/loss.hpp"
#include "crowdloc/metric.hpp"
#include "crowdloc/net.hpp"
#include "crowdloc/serialize.hpp"
#include "crowdloc/synth.hpp"
#include "crowdloc/trainer.hpp"

namespace py = pybind11;
using namespace crowdloc;

namespace {

py::array_t<float> field_to_numpy(const Field& f) {
    py::array_t<float> a({f.height, f.width});
    std::memcpy(a.mutable_data(), f.values.data(), f.values.size() * sizeof(float));
    return a;
}

Field field_from_numpy(const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw std::invalid_argument("field must be a 2d array");
    Field f = make_field(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
    std::memcpy(f.values.data(), a.data(), f.values.size() * sizeof(float));
    return f;
}

py::array_t<double> points_to_numpy(const PointSet& pts) {
    py::array_t<double> a({static_cast<py::ssize_t>(pts.size()), static_cast<py::ssize_t>(2)});
    auto view = a.mutable_unchecked<2>();
    for (py::ssize_t i = 0; i < view.shape(0); ++i) {
        view(i, 0) = pts[i].x;
        view(i, 1) = pts[i].y;
    }
    return a;
}

PointSet points_from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2 || a.shape(1) != 2) throw std::invalid_argument("points must be an (n, 2) array");
    PointSet pts(static_cast<std::size_t>(a.shape(0)));
    auto view = a.unchecked<2>();
    for (py::ssize_t i = 0; i < view.shape(0); ++i) pts[i] = Point2D{view(i, 0), view(i, 1)};
    return pts;
}

CostMatrix cost_from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw std::invalid_argument("cost must be a 2d array");
    CostMatrix d;
    d.n_targets = static_cast<int>(a.shape(0));
    d.m_proposals = static_cast<int>(a.shape(1));
    d.values.resize(static_cast<std::size_t>(d.n_targets) * d.m_proposals);
    std::memcpy(d.values.data(), a.data(), d.values.size() * sizeof(double));
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "semi-supervised point localization on synthetic crowd scenes";

    py::class_<Point2D>(m, "Point2D")
        .def(py::init<>())
        .def(py::init<double, double>(), py::arg("x"), py::arg("y"))
        .def_readwrite("x", &Point2D::x)
        .def_readwrite("y", &Point2D::y)
        .def("__repr__", [](const Point2D& p) {
            return "Point2D(" + std::to_string(p.x) + ", " + std::to_string(p.y) + ")";
        });

    m.def("euclidean_distance", &euclidean_distance, py::arg("a"), py::arg("b"));

    py::class_<AnchorGridMeta>(m, "AnchorGridMeta")
        .def_readonly("field_height", &AnchorGridMeta::field_height)
        .def_readonly("field_width", &AnchorGridMeta::field_width)
        .def_readonly("stride", &AnchorGridMeta::stride)
        .def_readonly("rows", &AnchorGridMeta::rows)
        .def_readonly("cols", &AnchorGridMeta::cols);
    m.def("make_grid", &make_grid, py::arg("field_height"), py::arg("field_width"), py::arg("stride"));
    m.def("anchor_center", &anchor_center, py::arg("grid"), py::arg("index"));
    m.def("cell_of", &cell_of, py::arg("grid"), py::arg("point"));

    py::class_<ScoredProposal>(m, "ScoredProposal")
        .def(py::init([](double x, double y, double score, int anchor) {
                 return ScoredProposal{Point2D{x, y}, score, anchor};
             }),
             py::arg("x"), py::arg("y"), py::arg("score"), py::arg("anchor_index") = 0)
        .def_readonly("position", &ScoredProposal::position)
        .def_readonly("score", &ScoredProposal::score)
        .def_readonly("anchor_index", &ScoredProposal::anchor_index);

    py::class_<ProposalSet>(m, "ProposalSet")
        .def_readonly("proposals", &ProposalSet::proposals)
        .def_readonly("grid_meta", &ProposalSet::grid_meta)
        .def("positions", [](const ProposalSet& ps) {
            PointSet pts;
            pts.reserve(ps.proposals.size());
            for (const auto& p : ps.proposals) pts.push_back(p.position);
            return points_to_numpy(pts);
        })
        .def("scores", [](const ProposalSet& ps) {
            py::array_t<double> a(static_cast<py::ssize_t>(ps.proposals.size()));
            auto view = a.mutable_unchecked<1>();
            for (py::ssize_t i = 0; i < view.shape(0); ++i) view(i) = ps.proposals[i].score;
            return a;
        });

    // synth
    py::class_<IntRange>(m, "IntRange")
        .def(py::init<int, int>(), py::arg("lo"), py::arg("hi"))
        .def_readwrite("lo", &IntRange::lo)
        .def_readwrite("hi", &IntRange::hi);

    py::class_<SynthConfig>(m, "SynthConfig")
        .def(py::init<>())
        .def_readwrite("field_size", &SynthConfig::field_size)
        .def_readwrite("n_scenes", &SynthConfig::n_scenes)
        .def_readwrite("heads_per_scene", &SynthConfig::heads_per_scene)
        .def_readwrite("cluster_count", &SynthConfig::cluster_count)
        .def_readwrite("cluster_spread", &SynthConfig::cluster_spread)
        .def_readwrite("blob_sigma", &SynthConfig::blob_sigma)
        .def_readwrite("amplitude_min", &SynthConfig::amplitude_min)
        .def_readwrite("amplitude_max", &SynthConfig::amplitude_max)
        .def_readwrite("ambiguous_fraction", &SynthConfig::ambiguous_fraction)
        .def_readwrite("ambiguous_amplitude_scale", &SynthConfig::ambiguous_amplitude_scale)
        .def_readwrite("noise_std", &SynthConfig::noise_std)
        .def_readwrite("seed", &SynthConfig::seed)
        .def_readwrite("labeled_ratio", &SynthConfig::labeled_ratio)
        .def_readwrite("holdout_fraction", &SynthConfig::holdout_fraction);

    py::class_<Scene>(m, "Scene")
        .def_readonly("scene_id", &Scene::scene_id)
        .def_readonly("is_labeled", &Scene::is_labeled)
        .def_property_readonly("field", [](const Scene& s) { return field_to_numpy(s.field); })
        .def_property_readonly("gt_points", [](const Scene& s) -> py::object {
            if (!s.gt_points) return py::none();
            return points_to_numpy(*s.gt_points);
        });

    py::class_<SynthDataset>(m, "SynthDataset")
        .def_readonly("labeled", &SynthDataset::labeled)
        .def_readonly("unlabeled", &SynthDataset::unlabeled)
        .def_readonly("holdout", &SynthDataset::holdout);

    m.def("generate_dataset", &generate_dataset, py::arg("config"));
    m.def(
        "save_dataset",
        [](const std::vector<Scene>& scenes, const std::filesystem::path& path) {
            save_dataset(scenes, path);
        },
        py::arg("scenes"), py::arg("path"));
    m.def("load_dataset", &load_dataset, py::arg("path"));
    m.def("load_dataset_dir", &load_dataset_dir, py::arg("dir"));

    // net
    py::class_<NetHyper>(m, "NetHyper")
        .def(py::init<>())
        .def(py::init<int, int, double>(), py::arg("patch_size"), py::arg("hidden_width"), py::arg("stride"))
        .def_readwrite("patch_size", &NetHyper::patch_size)
        .def_readwrite("hidden_width", &NetHyper::hidden_width)
        .def_readwrite("stride", &NetHyper::stride);

    py::class_<ModelParams>(m, "ModelParams")
        .def_readonly("hyper", &ModelParams::hyper)
        .def_property_readonly("theta", [](const ModelParams& p) {
            py::array_t<double> a(static_cast<py::ssize_t>(p.theta.size()));
            std::memcpy(a.mutable_data(), p.theta.data(), p.theta.size() * sizeof(double));
            return a;
        });

    m.def("param_count", &param_count, py::arg("hyper"));
    m.def("zero_params", &zero_params, py::arg("hyper") = NetHyper{});
    m.def(
        "init_params",
        [](const NetHyper& hyper, std::uint64_t seed) {
            Rng rng(seed);
            return init_params(hyper, rng);
        },
        py::arg("hyper") = NetHyper{}, py::arg("seed") = 0);
    m.def(
        "forward",
        [](const ModelParams& params, const py::array_t<float, py::array::c_style | py::array::forcecast>& field) {
            return forward(params, field_from_numpy(field));
        },
        py::arg("params"), py::arg("field"));
    m.def("save_params", &save_params, py::arg("params"), py::arg("path"));
    m.def("load_params", &load_params, py::arg("path"));

    // assign
    py::class_<MatchResult>(m, "MatchResult")
        .def_readonly("assignment", &MatchResult::assignment)
        .def_readonly("total_cost", &MatchResult::total_cost)
        .def_readonly("positive_set", &MatchResult::positive_set)
        .def_readonly("negative_set", &MatchResult::negative_set);

    m.def(
        "build_cost_matrix",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& targets,
           const ProposalSet& proposals, double score_weight) {
            const CostMatrix d = build_cost_matrix(points_from_numpy(targets), proposals, score_weight);
            py::array_t<double> a({d.n_targets, d.m_proposals});
            std::memcpy(a.mutable_data(), d.values.data(), d.values.size() * sizeof(double));
            return a;
        },
        py::arg("targets"), py::arg("proposals"), py::arg("score_weight"));
    m.def(
        "hungarian_match",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& cost) {
            return hungarian_match(cost_from_numpy(cost));
        },
        py::arg("cost"));

    // consist
    py::class_<PAConfig>(m, "PAConfig")
        .def(py::init<>())
        .def(py::init([](int k_aux) { return PAConfig{k_aux, true}; }), py::arg("k_aux"))
        .def_readwrite("k_aux", &PAConfig::k_aux);

    py::class_<ConsistentPseudoLabels>(m, "ConsistentPseudoLabels")
        .def_property_readonly("points", [](const ConsistentPseudoLabels& l) { return points_to_numpy(l.points); })
        .def_readonly("weights", &ConsistentPseudoLabels::weights)
        .def_readonly("source_scores", &ConsistentPseudoLabels::source_scores)
        .def_readonly("source_anchor_indices", &ConsistentPseudoLabels::source_anchor_indices)
        .def_readonly("aux_counts", &ConsistentPseudoLabels::aux_counts)
        .def("__len__", &ConsistentPseudoLabels::size);

    m.def(
        "extract_pseudo_points",
        [](const ProposalSet& props, double threshold) {
            const PseudoExtraction e = extract_pseudo_points(props, threshold);
            return py::make_tuple(e.anchor_indices, e.scores);
        },
        py::arg("teacher_proposals"), py::arg("threshold") = 0.5);
    m.def(
        "position_aggregate",
        [](int idx, const ProposalSet& props, const PAConfig& cfg) {
            return position_aggregate(idx, props, cfg);
        },
        py::arg("pseudo_anchor_index"), py::arg("teacher_proposals"), py::arg("config"));
    m.def("iuc_weight", &iuc_weight, py::arg("score"));
    m.def("build_consistent_labels", &build_consistent_labels, py::arg("teacher_proposals"), py::arg("config"));
    m.def(
        "variance_probe",
        [](double sigma, int k, long trials, std::uint64_t seed) {
            const VarianceProbeResult r = variance_probe(sigma, k, trials, seed);
            return py::make_tuple(py::make_tuple(r.var_single.x, r.var_single.y),
                                  py::make_tuple(r.var_aggregated.x, r.var_aggregated.y));
        },
        py::arg("sigma"), py::arg("k"), py::arg("trials"), py::arg("seed") = 0);

    // metric
    py::class_<LocalizationReport>(m, "LocalizationReport")
        .def_readonly("tp", &LocalizationReport::tp)
        .def_readonly("fp", &LocalizationReport::fp)
        .def_readonly("fn", &LocalizationReport::fn)
        .def_readonly("precision", &LocalizationReport::precision)
        .def_readonly("recall", &LocalizationReport::recall)
        .def_readonly("f1", &LocalizationReport::f1)
        .def_readonly("sigma", &LocalizationReport::sigma);

    py::class_<CountingReport>(m, "CountingReport")
        .def_readonly("mae", &CountingReport::mae)
        .def_readonly("mse", &CountingReport::mse)
        .def_readonly("n_images", &CountingReport::n_images);

    m.def(
        "localization_report",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& gt,
           const std::vector<ScoredProposal>& pred, double score_threshold, double sigma) {
            return localization_report(points_from_numpy(gt), pred, score_threshold, sigma);
        },
        py::arg("gt"), py::arg("pred"), py::arg("score_threshold"), py::arg("sigma"));
    m.def("counting_report", &counting_report, py::arg("gt_pred_counts"));

    // trainer
    py::class_<AdamConfig>(m, "AdamConfig")
        .def(py::init<>())
        .def_readwrite("learning_rate", &AdamConfig::learning_rate)
        .def_readwrite("beta1", &AdamConfig::beta1)
        .def_readwrite("beta2", &AdamConfig::beta2)
        .def_readwrite("eps", &AdamConfig::eps);

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("lambda_", &TrainConfig::lambda)
        .def_readwrite("lambda1", &TrainConfig::lambda1)
        .def_readwrite("lambda2", &TrainConfig::lambda2)
        .def_readwrite("pa", &TrainConfig::pa)
        .def_readwrite("use_iuc", &TrainConfig::use_iuc)
        .def_readwrite("weight_loc_loss", &TrainConfig::weight_loc_loss)
        .def_readwrite("ema_decay", &TrainConfig::ema_decay)
        .def_readwrite("optimizer", &TrainConfig::optimizer)
        .def_readwrite("net", &TrainConfig::net)
        .def_readwrite("crop_size", &TrainConfig::crop_size)
        .def_readwrite("batch_labeled", &TrainConfig::batch_labeled)
        .def_readwrite("batch_unlabeled", &TrainConfig::batch_unlabeled)
        .def_readwrite("steps", &TrainConfig::steps)
        .def_readwrite("flip_prob", &TrainConfig::flip_prob)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_readwrite("score_weight_mu", &TrainConfig::score_weight_mu)
        .def_readwrite("pseudo_threshold", &TrainConfig::pseudo_threshold)
        .def_readwrite("eval_every", &TrainConfig::eval_every)
        .def_readwrite("checkpoint_every", &TrainConfig::checkpoint_every)
        .def_readwrite("eval_sigmas", &TrainConfig::eval_sigmas);

    m.def(
        "run_training",
        [](const SynthDataset& data, const TrainConfig& cfg, py::object out_dir) {
            TrainerState state = init_trainer(cfg);
            RunReport report;
            if (out_dir.is_none()) {
                report = run(data, cfg, state);
            } else {
                const auto dir = out_dir.cast<std::filesystem::path>();
                std::filesystem::create_directories(dir);
                report = run(data, cfg, state, &dir);
            }
            return nlohmann::json(report).dump();
        },
        py::arg("dataset"), py::arg("config"), py::arg("out_dir") = py::none(),
        "Runs training and returns the run report as a JSON string.");

    m.def(
        "evaluate_scenes",
        [](const ModelParams& params, const std::vector<Scene>& scenes, const std::vector<double>& sigmas,
           double score_threshold) {
            return evaluate_scenes(params, scenes, sigmas, score_threshold);
        },
        py::arg("params"), py::arg("scenes"), py::arg("sigmas"), py::arg("score_threshold") = 0.5);

    py::class_<EvalResult>(m, "EvalResult")
        .def_readonly("localization", &EvalResult::localization)
        .def_readonly("counting", &EvalResult::counting);

    m.def("run_cli", &run_cli, py::arg("args"), "Invoke the command-line surface; returns the exit code.");

#ifdef VERSION_INFO
#define STR_(x) #x
#define STR(x) STR_(x)
    m.attr("__version__") = STR(VERSION_INFO);
#else
    m.attr("__version__") = "dev";
#endif
}
