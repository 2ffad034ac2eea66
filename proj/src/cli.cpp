#include "crowdloc/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <future>
#include <iostream>

#include "crowdloc/eval.hpp"
#include "crowdloc/serialize.hpp"
#include "crowdloc/trainer.hpp"

namespace crowdloc {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string iso_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json format_versions() {
    return json{{"dataset", 1}, {"checkpoint", 1}, {"params", 1}, {"report", 1}};
}

void write_json_file(const json& j, const fs::path& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
    os << j.dump(2) << '\n';
}

json load_json_file(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open '" + path.string() + "'");
    try {
        return json::parse(is);
    } catch (const json::exception& e) {
        throw std::invalid_argument("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

template <typename Config>
Config load_config(const std::string& path) {
    Config cfg{};
    if (path.empty()) return cfg;
    try {
        load_json_file(path).get_to(cfg);
    } catch (const json::exception& e) {
        throw std::invalid_argument("config '" + path + "': " + e.what());
    }
    return cfg;
}

fs::path resolve_out_dir(std::string out, const std::string& fallback_name) {
    if (out.empty()) {
        const char* root = std::getenv("CROWDLOC_OUT_ROOT");
        if (!root || !*root)
            throw std::invalid_argument("no --out given and CROWDLOC_OUT_ROOT is not set");
        return fs::path(root) / fallback_name;
    }
    return fs::path(out);
}

struct ManifestWriter {
    fs::path dir;
    json j;

    ManifestWriter(const fs::path& out_dir, const std::string& command,
                   const std::vector<std::string>& argv, const json& config, std::uint64_t seed)
        : dir(out_dir) {
        j["command"] = command;
        j["argv"] = argv;
        j["format_versions"] = format_versions();
        j["config"] = config;
        j["seed"] = seed;
        j["started_at"] = iso_now();
    }

    void finish(const json& artifacts) {
        j["artifacts"] = artifacts;
        j["finished_at"] = iso_now();
        write_json_file(j, dir / "manifest.json");
    }
};

json scene_index(const std::vector<Scene>& scenes, const std::string& file) {
    json list = json::array();
    for (const Scene& s : scenes) {
        list.push_back(json{{"id", s.scene_id},
                            {"heads", s.gt_points ? static_cast<long>(s.gt_points->size()) : -1},
                            {"height", s.field.height},
                            {"width", s.field.width}});
    }
    return json{{"file", file}, {"n_scenes", scenes.size()}, {"scenes", list}};
}

int cmd_gen(const std::vector<std::string>& argv, const std::string& config_path, std::string out) {
    const SynthConfig cfg = load_config<SynthConfig>(config_path);
    validate(cfg);
    const fs::path dir = resolve_out_dir(std::move(out), "dataset_" + std::to_string(cfg.seed));
    fs::create_directories(dir);

    ManifestWriter manifest(dir, "gen", argv, json(cfg), cfg.seed);

    const SynthDataset ds = generate_dataset(cfg);
    const std::string echo = json(cfg).dump();
    save_dataset(ds.labeled, dir / "labeled.bin", echo);
    save_dataset(ds.unlabeled, dir / "unlabeled.bin", echo);
    save_dataset(ds.holdout, dir / "holdout.bin", echo);

    json index{{"format_version", 1},
               {"config", cfg},
               {"splits",
                {{"labeled", scene_index(ds.labeled, "labeled.bin")},
                 {"unlabeled", scene_index(ds.unlabeled, "unlabeled.bin")},
                 {"holdout", scene_index(ds.holdout, "holdout.bin")}}}};
    write_json_file(index, dir / "index.json");

    manifest.finish(json{{"labeled", "labeled.bin"},
                         {"unlabeled", "unlabeled.bin"},
                         {"holdout", "holdout.bin"},
                         {"index", "index.json"}});
    std::cout << "dataset written to " << dir.string() << " (" << ds.labeled.size() << " labeled, "
              << ds.unlabeled.size() << " unlabeled, " << ds.holdout.size() << " holdout)\n";
    return kExitOk;
}

struct TrainFlags {
    bool labeled_only = false;
    bool no_pa = false;
    bool no_iuc = false;
    std::int64_t seed = -1;
    std::int64_t steps = -1;
    std::string resume;
};

TrainConfig apply_flags(TrainConfig cfg, const TrainFlags& flags) {
    if (flags.labeled_only) {
        cfg.lambda = 0.0;
        cfg.batch_unlabeled = 0;
    }
    if (flags.no_pa) cfg.pa.k_aux = 0;
    if (flags.no_iuc) cfg.use_iuc = false;
    if (flags.seed >= 0) cfg.seed = static_cast<std::uint64_t>(flags.seed);
    if (flags.steps >= 0) cfg.steps = flags.steps;
    return cfg;
}

int cmd_train(const std::vector<std::string>& argv, const std::string& config_path,
              const std::string& dataset_dir, std::string out, const TrainFlags& flags) {
    const TrainConfig cfg = apply_flags(load_config<TrainConfig>(config_path), flags);
    validate(cfg);
    const fs::path dir = resolve_out_dir(std::move(out), "train_" + std::to_string(cfg.seed));
    fs::create_directories(dir);

    const SynthDataset data = load_dataset_dir(dataset_dir);
    ManifestWriter manifest(dir, "train", argv, json(cfg), cfg.seed);

    TrainerState state = flags.resume.empty() ? init_trainer(cfg) : load_checkpoint(flags.resume);
    const RunReport report = run(data, cfg, state, &dir);

    manifest.finish(json{{"report", "report.json"},
                         {"checkpoint", report.checkpoint_file},
                         {"model", report.model_file}});

    if (!report.evals.empty()) {
        const EvalResult& last = report.evals.back().result;
        std::cout << "final holdout: mae " << last.counting.mae << ", mse " << last.counting.mse;
        for (const LocalizationReport& r : last.localization)
            std::cout << ", f1@" << r.sigma << " " << r.f1;
        std::cout << '\n';
    }
    std::cout << "run written to " << dir.string() << '\n';
    return kExitOk;
}

ModelParams load_eval_params(const fs::path& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw std::runtime_error("cannot open '" + path.string() + "'");
    char magic[4] = {0, 0, 0, 0};
    probe.read(magic, 4);
    probe.close();
    if (std::memcmp(magic, "CLCK", 4) == 0) return load_checkpoint(path).teacher;
    return load_params(path);
}

void write_metrics_csv(const EvalResult& result, const fs::path& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
    os << "kind,sigma,tp,fp,fn,precision,recall,f1,mae,mse,n_images\n";
    for (const LocalizationReport& r : result.localization)
        os << "localization," << r.sigma << ',' << r.tp << ',' << r.fp << ',' << r.fn << ','
           << r.precision << ',' << r.recall << ',' << r.f1 << ",,,\n";
    os << "counting,,,,,,,," << result.counting.mae << ',' << result.counting.mse << ','
       << result.counting.n_images << '\n';
}

int cmd_eval(const std::vector<std::string>& argv, const std::string& checkpoint,
             const std::string& dataset_dir, std::string out, std::vector<double> sigmas,
             double threshold) {
    if (sigmas.empty()) sigmas = {4.0, 8.0};
    const fs::path dir = resolve_out_dir(std::move(out), "eval");
    fs::create_directories(dir);

    const ModelParams params = load_eval_params(checkpoint);
    const SynthDataset data = load_dataset_dir(dataset_dir);
    if (data.holdout.empty()) throw std::invalid_argument("dataset has no holdout split to evaluate");

    ManifestWriter manifest(dir, "eval", argv, json{{"sigmas", sigmas}, {"score_threshold", threshold}},
                            0);
    const EvalResult result = evaluate_scenes(params, data.holdout, sigmas, threshold);

    write_json_file(json(result), dir / "metrics.json");
    write_metrics_csv(result, dir / "metrics.csv");
    manifest.finish(json{{"metrics_json", "metrics.json"}, {"metrics_csv", "metrics.csv"}});

    std::cout << "holdout (" << data.holdout.size() << " scenes): mae " << result.counting.mae
              << ", mse " << result.counting.mse;
    for (const LocalizationReport& r : result.localization)
        std::cout << ", f1@" << r.sigma << " " << r.f1;
    std::cout << '\n';
    return kExitOk;
}

int cmd_match(const std::string& dataset_dir, const std::string& scene_id,
              const std::string& checkpoint, double mu, const std::string& out) {
    const SynthDataset data = load_dataset_dir(dataset_dir);
    const Scene* scene = nullptr;
    for (const auto* split : {&data.labeled, &data.unlabeled, &data.holdout}) {
        for (const Scene& s : *split)
            if (s.scene_id == scene_id) scene = &s;
    }
    if (!scene) throw std::invalid_argument("scene '" + scene_id + "' not found in dataset");
    if (!scene->gt_points) throw std::invalid_argument("scene '" + scene_id + "' carries no ground truth");

    const ModelParams params = checkpoint.empty() ? zero_params(NetHyper{}) : load_eval_params(checkpoint);
    const ProposalSet props = forward(params, scene->field);
    const CostMatrix cost = build_cost_matrix(*scene->gt_points, props, mu);
    const MatchResult match = hungarian_match(cost);

    json pairs = json::array();
    for (std::size_t i = 0; i < match.assignment.size(); ++i) {
        const int j = match.assignment[i];
        const Point2D& t = (*scene->gt_points)[i];
        const ScoredProposal& p = props.proposals[j];
        pairs.push_back(json{{"target_index", i},
                             {"proposal_index", j},
                             {"target", {t.x, t.y}},
                             {"proposal", {p.position.x, p.position.y}},
                             {"score", p.score},
                             {"cost", cost.at(static_cast<int>(i), j)}});
    }
    const json dump{{"scene_id", scene_id},
                    {"mu", mu},
                    {"n_targets", cost.n_targets},
                    {"m_proposals", cost.m_proposals},
                    {"total_cost", match.total_cost},
                    {"pairs", pairs},
                    {"negative_count", match.negative_set.size()}};
    if (out.empty()) {
        std::cout << dump.dump(2) << '\n';
    } else {
        write_json_file(dump, out);
        std::cout << "assignment written to " << out << '\n';
    }
    return kExitOk;
}

struct SweepRow {
    std::string axis;
    double value = 0.0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    double mae = 0.0, mse = 0.0, f1_sigma4 = 0.0, f1_sigma8 = 0.0;
};

SweepRow run_sweep_point(const std::string& axis, double value, TrainConfig cfg,
                         const SynthDataset& data, const fs::path& run_dir) {
    SweepRow row;
    row.axis = axis;
    row.value = value;
    row.seed = cfg.seed;
    try {
        fs::create_directories(run_dir);
        TrainerState state = init_trainer(cfg);
        const RunReport report = run(data, cfg, state, &run_dir);
        if (report.evals.empty()) throw std::runtime_error("run produced no holdout evaluation");
        const EvalResult& last = report.evals.back().result;
        row.mae = last.counting.mae;
        row.mse = last.counting.mse;
        for (const LocalizationReport& r : last.localization) {
            if (r.sigma == 4.0) row.f1_sigma4 = r.f1;
            if (r.sigma == 8.0) row.f1_sigma8 = r.f1;
        }
        row.ok = true;
    } catch (const std::exception& e) {
        row.error = e.what();
    }
    return row;
}

int cmd_ablate(const std::vector<std::string>& argv, const std::string& config_path,
               const std::string& dataset_dir, std::string out, const std::string& axis,
               bool parallel) {
    TrainConfig base = load_config<TrainConfig>(config_path);
    validate(base);

    std::vector<double> values;
    if (axis == "k_aux") {
        values = {0.0, 4.0, 16.0};
    } else if (axis == "lambda") {
        values = {0.01, 0.05, 0.1, 0.5, 1.0};
    } else {
        throw std::invalid_argument("unknown ablation axis '" + axis + "' (expected k_aux or lambda)");
    }

    const fs::path dir = resolve_out_dir(std::move(out), "ablate_" + axis);
    fs::create_directories(dir);
    ManifestWriter manifest(dir, "ablate", argv, json(base), base.seed);

    auto value_config = [&](double v) {
        TrainConfig cfg = base;  // shared seed across the sweep
        if (axis == "k_aux")
            cfg.pa.k_aux = static_cast<int>(v);
        else
            cfg.lambda = v;
        return cfg;
    };
    auto value_name = [&](double v) {
        std::string name = axis + "_" + std::to_string(v);
        name.erase(name.find_last_not_of('0') + 1);
        if (!name.empty() && name.back() == '.') name.pop_back();
        return name;
    };

    const SynthDataset data = load_dataset_dir(dataset_dir);
    std::vector<SweepRow> rows(values.size());
    if (parallel) {
        std::vector<std::future<SweepRow>> futures;
        for (double v : values)
            futures.push_back(std::async(std::launch::async, run_sweep_point, axis, v, value_config(v),
                                         std::cref(data), dir / value_name(v)));
        for (std::size_t i = 0; i < futures.size(); ++i) rows[i] = futures[i].get();
    } else {
        for (std::size_t i = 0; i < values.size(); ++i)
            rows[i] = run_sweep_point(axis, values[i], value_config(values[i]), data, dir / value_name(values[i]));
    }

    json sweep = json::array();
    for (const SweepRow& r : rows) {
        json row{{"axis", r.axis},   {"value", r.value},
                 {"seed", r.seed},   {"status", r.ok ? "ok" : "failed"},
                 {"mae", r.mae},     {"mse", r.mse},
                 {"f1_sigma4", r.f1_sigma4}, {"f1_sigma8", r.f1_sigma8}};
        if (!r.ok) row["error"] = r.error;
        sweep.push_back(row);
    }
    write_json_file(json{{"axis", axis}, {"rows", sweep}}, dir / "sweep.json");

    std::ofstream csv(dir / "sweep.csv", std::ios::binary | std::ios::trunc);
    if (!csv) throw std::runtime_error("cannot write '" + (dir / "sweep.csv").string() + "'");
    csv << "axis,value,seed,status,mae,mse,f1_sigma4,f1_sigma8\n";
    for (const SweepRow& r : rows)
        csv << r.axis << ',' << r.value << ',' << r.seed << ',' << (r.ok ? "ok" : "failed") << ','
            << r.mae << ',' << r.mse << ',' << r.f1_sigma4 << ',' << r.f1_sigma8 << '\n';
    csv.close();

    manifest.finish(json{{"sweep_json", "sweep.json"}, {"sweep_csv", "sweep.csv"}});
    std::cout << "sweep written to " << dir.string() << '\n';

    for (const SweepRow& r : rows)
        if (!r.ok) std::cerr << "warning: " << r.axis << "=" << r.value << " failed: " << r.error << '\n';
    return kExitOk;
}

}  // namespace

SynthDataset load_dataset_dir(const fs::path& dir) {
    SynthDataset ds;
    ds.labeled = load_dataset(dir / "labeled.bin");
    ds.unlabeled = load_dataset(dir / "unlabeled.bin");
    ds.holdout = load_dataset(dir / "holdout.bin");
    return ds;
}

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"semi-supervised point localization on synthetic crowd scenes"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
    std::string gen_config, gen_out;
    gen->add_option("--config", gen_config, "synth config JSON (defaults when omitted)");
    gen->add_option("--out", gen_out, "output directory");

    // train
    auto* train = app.add_subcommand("train", "run mean-teacher training");
    std::string train_config, train_dataset, train_out;
    TrainFlags flags;
    train->add_option("--config", train_config, "train config JSON (defaults when omitted)");
    train->add_option("--dataset", train_dataset, "dataset directory from gen")->required();
    train->add_option("--out", train_out, "run output directory");
    train->add_flag("--labeled-only", flags.labeled_only, "supervised-only run (lambda = 0, no unlabeled batch)");
    train->add_flag("--no-pa", flags.no_pa, "disable position aggregation (k_aux = 0)");
    train->add_flag("--no-iuc", flags.no_iuc, "disable uncertainty calibration (all weights 1)");
    train->add_option("--seed", flags.seed, "override config seed");
    train->add_option("--steps", flags.steps, "override config steps");
    train->add_option("--resume", flags.resume, "resume from a trainer checkpoint");

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the holdout split");
    std::string eval_ckpt, eval_dataset, eval_out;
    std::vector<double> eval_sigmas;
    double eval_threshold = 0.5;
    eval->add_option("--checkpoint", eval_ckpt, "trainer checkpoint or params file")->required();
    eval->add_option("--dataset", eval_dataset, "dataset directory")->required();
    eval->add_option("--out", eval_out, "output directory");
    eval->add_option("--sigma", eval_sigmas, "localization thresholds (default 4 8)");
    eval->add_option("--threshold", eval_threshold, "score threshold for a detection");

    // match
    auto* match = app.add_subcommand("match", "dump a proposal-target assignment as JSON");
    std::string match_dataset, match_scene, match_ckpt, match_out;
    double match_mu = 0.05;
    match->add_option("--dataset", match_dataset, "dataset directory")->required();
    match->add_option("--scene", match_scene, "scene id")->required();
    match->add_option("--checkpoint", match_ckpt, "params/checkpoint (zero params when omitted)");
    match->add_option("--mu", match_mu, "score weight in the cost matrix");
    match->add_option("--out", match_out, "output file (stdout when omitted)");

    // ablate
    auto* ablate = app.add_subcommand("ablate", "sweep k_aux or lambda, one run per value");
    std::string ab_config, ab_dataset, ab_out, ab_axis;
    bool ab_parallel = false;
    ablate->add_option("--config", ab_config, "base train config JSON");
    ablate->add_option("--dataset", ab_dataset, "dataset directory")->required();
    ablate->add_option("--out", ab_out, "sweep output directory");
    ablate->add_option("--axis", ab_axis, "k_aux or lambda")->required();
    ablate->add_flag("--parallel", ab_parallel, "run sweep points concurrently");

    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("crowdloc");
    for (const std::string& a : args) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfigError;
    }

    try {
        if (gen->parsed()) return cmd_gen(args, gen_config, gen_out);
        if (train->parsed()) return cmd_train(args, train_config, train_dataset, train_out, flags);
        if (eval->parsed())
            return cmd_eval(args, eval_ckpt, eval_dataset, eval_out, eval_sigmas, eval_threshold);
        if (match->parsed()) return cmd_match(match_dataset, match_scene, match_ckpt, match_mu, match_out);
        if (ablate->parsed()) return cmd_ablate(args, ab_config, ab_dataset, ab_out, ab_axis, ab_parallel);
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumericError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIoError;
    }
    return kExitConfigError;
}

}  // namespace crowdloc
