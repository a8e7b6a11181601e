// cleverlabel: simulate proposal-biased annotations, repair them and
// evaluate the result.
//
//   cleverlabel simulate --dataset d.json --seed 1 --annotations 20 -o log.csv
//   cleverlabel correct --dataset d.json --log log.csv --transitions t.json -o gt.csv
//   cleverlabel calibrate --dataset d.json --log log.csv --method banded
//   cleverlabel estimate-transitions --dataset d.json --seed 1 -o t.json
//   cleverlabel compare-strategies --dataset d.json --log log.csv --seed 1
//   cleverlabel report --config run.json --seed 1 -o out/

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cleverlabel/experiment.hpp"
#include "cleverlabel/report.hpp"

using namespace cleverlabel;

namespace {

// Command-line values that override the config file, applied only when given.
struct Overrides {
    std::string config;
    std::string dataset;
    std::uint64_t seed = 0;
    std::string proposal_column;
    std::string strategy;
    double sim_delta = 0.0;
    double sim_upper_bound = 0.0;
    std::vector<std::uint64_t> annotations;
    std::string reject_fallback;
    double corr_delta = 0.0;
    double corr_upper_bound = 0.0;
    double mu = 0.0;
    bool no_bc = false;
    bool no_cb = false;
    std::string cb_input;
    std::string transitions;
    std::size_t transition_images = 0;
    std::size_t transition_annotations = 0;
    std::vector<std::string> metrics;
    std::vector<double> speedups;
    double initial_supervision = 0.0;
    double pct_annotated = 0.0;
    std::string aggregation;
    std::size_t repetitions = 0;
    std::vector<std::string> strategies;
    double band_low = 0.0;
    double band_high = 0.0;
    std::size_t n_target = 0;
    bool author_annotated = false;
    double threshold = 0.0;
    std::size_t threads = 0;

    std::vector<std::pair<CLI::Option*, void (*)(const Overrides&, ExperimentConfig&)>> setters;
};

#define CL_SET(body) [](const Overrides& o, ExperimentConfig& c) { body; }

void add_dataset(CLI::App* app, Overrides& o) {
    app->add_option("--config", o.config, "experiment config or run manifest (JSON)");
    o.setters.emplace_back(app->add_option("--dataset", o.dataset, "dataset metadata file"),
                           CL_SET(c.dataset = std::filesystem::absolute(o.dataset).lexically_normal()));
    o.setters.emplace_back(app->add_option("--proposal-column", o.proposal_column, "gt column holding proposals"),
                           CL_SET(c.proposal_column = o.proposal_column));
}

void add_seed(CLI::App* app, Overrides& o) {
    o.setters.emplace_back(app->add_option("--seed", o.seed, "master seed (required unless in --config)"),
                           CL_SET(c.seed = o.seed));
}

void add_simulation(CLI::App* app, Overrides& o) {
    o.setters.emplace_back(app->add_option("--strategy", o.strategy, "annotator strategy, e.g. ACCEPT_GT"),
                           CL_SET(c.strategy = parse_strategy(o.strategy)));
    o.setters.emplace_back(app->add_option("--sim-delta", o.sim_delta, "acceptance offset of the simulation"),
                           CL_SET(c.simulation.delta = o.sim_delta));
    o.setters.emplace_back(app->add_option("--sim-upper-bound", o.sim_upper_bound, "acceptance cap"),
                           CL_SET(c.simulation.upper_bound = o.sim_upper_bound));
    o.setters.emplace_back(app->add_option("--reject-fallback", o.reject_fallback, "first|random"),
                           CL_SET(c.simulation.reject_fallback = parse_reject_fallback(o.reject_fallback)));
}

void add_correction(CLI::App* app, Overrides& o) {
    o.setters.emplace_back(app->add_option("--delta", o.corr_delta, "acceptance offset assumed by the correction"),
                           CL_SET(c.correction.delta = o.corr_delta));
    o.setters.emplace_back(app->add_option("--upper-bound", o.corr_upper_bound, "acceptance cap of the correction"),
                           CL_SET(c.correction.upper_bound = o.corr_upper_bound));
    o.setters.emplace_back(app->add_option("--mu", o.mu, "blend weight of the label itself"),
                           CL_SET(c.correction.mu = o.mu));
    o.setters.emplace_back(app->add_flag("--no-bc", o.no_bc, "skip bias correction"),
                           CL_SET(c.clever.bias_correction = !o.no_bc));
    o.setters.emplace_back(app->add_flag("--no-cb", o.no_cb, "skip class blending"),
                           CL_SET(c.clever.class_blending = !o.no_cb));
    o.setters.emplace_back(app->add_option("--cb-input", o.cb_input, "corrected|biased"),
                           CL_SET(c.clever.blend_input = parse_blend_input(o.cb_input)));
    o.setters.emplace_back(app->add_option("--transitions", o.transitions, "transition matrix file"),
                           CL_SET(c.transitions = std::filesystem::absolute(o.transitions).lexically_normal()));
}

void add_transition_estimate(CLI::App* app, Overrides& o) {
    o.setters.emplace_back(app->add_option("--transition-images", o.transition_images, "images sampled"),
                           CL_SET(c.transition_images = o.transition_images));
    o.setters.emplace_back(app->add_option("--transition-annotations", o.transition_annotations,
                                           "annotations per sampled image"),
                           CL_SET(c.transition_annotations = o.transition_annotations));
}

void add_calibration(CLI::App* app, Overrides& o) {
    o.setters.emplace_back(app->add_option("--band-low", o.band_low, "band lower edge (exclusive)"),
                           CL_SET(c.banded.band_low = o.band_low));
    o.setters.emplace_back(app->add_option("--band-high", o.band_high, "band upper edge (inclusive)"),
                           CL_SET(c.banded.band_high = o.band_high));
    o.setters.emplace_back(app->add_option("--n-target", o.n_target, "in-band images to use, 0 = all"),
                           CL_SET(c.banded.n_target = o.n_target));
    o.setters.emplace_back(app->add_flag("--author-annotated", o.author_annotated, "apply the study rescale"),
                           CL_SET(c.banded.author_annotated = o.author_annotated));
    o.setters.emplace_back(app->add_option("--threshold", o.threshold, "two-proposal candidate cutoff"),
                           CL_SET(c.two_proposal.threshold = o.threshold));
}

ExperimentConfig build_config(const Overrides& o) {
    ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
    for (const auto& [opt, set] : o.setters) {
        if (opt->count() > 0) {
            set(o, cfg);
        }
    }
    return cfg;
}

Dataset load(const ExperimentConfig& cfg) {
    cfg.validate(true);
    return load_dataset(cfg.dataset, cfg.proposal_column);
}

void emit(const std::string& path, const std::string& contents) {
    if (path.empty() || path == "-") {
        std::cout << contents;
    } else {
        write_file(path, contents);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulate, repair and evaluate proposal-biased soft labels"};
    app.set_version_flag("--version", std::string(tool_version()));
    app.require_subcommand(1);

    Overrides o;
    std::string output;
    std::string log_path;
    std::string method = "banded";

    auto* simulate = app.add_subcommand("simulate", "simulate a proposal-acceptance log");
    add_dataset(simulate, o);
    add_seed(simulate, o);
    add_simulation(simulate, o);
    std::uint64_t n_annotations = 0;
    simulate->add_option("-n,--annotations", n_annotations, "annotations per image")->required();
    simulate->add_option("-o,--output", output, "log file (default stdout)");

    auto* correct = app.add_subcommand("correct", "repair a biased acceptance log");
    add_dataset(correct, o);
    add_seed(correct, o);
    add_correction(correct, o);
    add_transition_estimate(correct, o);
    correct->add_option("--log", log_path, "acceptance log")->required();
    correct->add_option("-o,--output", output, "ground-truth table (default stdout)");

    auto* calibrate = app.add_subcommand("calibrate", "estimate the acceptance offset from a log");
    add_dataset(calibrate, o);
    add_calibration(calibrate, o);
    calibrate->add_option("--log", log_path, "acceptance log")->required();
    calibrate->add_option("--method", method, "banded|two-proposal");
    calibrate->add_option("-o,--output", output, "report file (default stdout)");

    auto* estimate = app.add_subcommand("estimate-transitions", "estimate a transition matrix from the ground truth");
    add_dataset(estimate, o);
    add_seed(estimate, o);
    add_transition_estimate(estimate, o);
    estimate->add_option("-o,--output", output, "matrix file (default stdout)");

    auto* compare = app.add_subcommand("compare-strategies", "rank annotator strategies against a real log");
    add_dataset(compare, o);
    add_seed(compare, o);
    add_simulation(compare, o);
    o.setters.emplace_back(compare->add_option("--repetitions", o.repetitions, "repetitions per strategy"),
                           CL_SET(c.comparison_repetitions = o.repetitions));
    o.setters.emplace_back(compare->add_option("--strategies", o.strategies, "strategies to compare"),
                           CL_SET(c.comparison_strategies.clear();
                                  for (const auto& s : o.strategies) c.comparison_strategies.push_back(parse_strategy(s))));
    compare->add_option("--log", log_path, "acceptance log")->required();
    compare->add_option("-o,--output", output, "table file (default stdout)");

    auto* report = app.add_subcommand("report", "run a simulation experiment and write its report");
    add_dataset(report, o);
    add_seed(report, o);
    add_simulation(report, o);
    add_correction(report, o);
    add_transition_estimate(report, o);
    o.setters.emplace_back(report->add_option("-n,--annotations", o.annotations, "annotation counts"),
                           CL_SET(c.annotation_counts = o.annotations));
    o.setters.emplace_back(report->add_option("--metrics", o.metrics, "kl, budget; empty for manifest only"),
                           CL_SET(c.metrics = o.metrics));
    o.setters.emplace_back(report->add_option("--speedups", o.speedups, "speedup factors"),
                           CL_SET(c.speedups = o.speedups));
    o.setters.emplace_back(report->add_option("--initial-supervision", o.initial_supervision, "initial supervision"),
                           CL_SET(c.initial_supervision = o.initial_supervision));
    o.setters.emplace_back(report->add_option("--pct-annotated", o.pct_annotated, "fraction annotated"),
                           CL_SET(c.pct_annotated = o.pct_annotated));
    o.setters.emplace_back(report->add_option("--aggregation", o.aggregation, "median|mean"),
                           CL_SET(c.aggregation = parse_aggregation(o.aggregation)));
    o.setters.emplace_back(report->add_option("--threads", o.threads, "worker threads"),
                           CL_SET(c.threads = o.threads));
    std::string report_dir;
    report->add_option("-o,--output", report_dir, "output directory (default from config)");
    bool no_metrics = false;
    report->add_flag("--no-metrics", no_metrics, "write the manifest only");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        ExperimentConfig cfg = build_config(o);

        if (simulate->parsed()) {
            const Dataset ds = load(cfg);
            SimulationParams p = cfg.simulation;
            p.repetitions = n_annotations;
            emit(output, format_acceptance_log(simulate_log(ds, cfg.strategy, p, cfg.require_seed()), ds.meta));
        } else if (correct->parsed()) {
            const Dataset ds = load(cfg);
            const auto log = load_acceptance_log(log_path, ds.meta);
            std::optional<TransitionMatrix> t;
            if (cfg.clever.class_blending) {
                if (!cfg.transitions && !cfg.seed) {
                    throw Error("class blending needs --transitions, or --seed to estimate them (or --no-cb)");
                }
                t = resolve_transitions(cfg, ds).first;
            }
            const auto labels = correct_log(ds.meta.num_classes(), log, t ? &*t : nullptr, cfg.correction, cfg.clever);
            emit(output, format_gt_table(labels, ds.meta.num_classes()));
        } else if (calibrate->parsed()) {
            const Dataset ds = load(cfg);
            const auto log = load_acceptance_log(log_path, ds.meta);
            emit(output, format_calibration_report(run_calibration(cfg, ds, log, parse_calibration_method(method))));
        } else if (estimate->parsed()) {
            const Dataset ds = load(cfg);
            Rng rng = substream(cfg.require_seed(), "transition-matrix");
            const TransitionMatrix t = estimate_transition_matrix(ds.ground_truths(), cfg.transition_images,
                                                                  cfg.transition_annotations, rng);
            emit(output, format_transition_matrix(TransitionMatrixDocument::from_matrix(t, ds.meta.class_names, ds.name)));
        } else if (compare->parsed()) {
            const Dataset ds = load(cfg);
            cfg.require_seed();
            const auto log = load_acceptance_log(log_path, ds.meta);
            emit(output, format_strategy_table(run_strategy_comparison(cfg, ds, log)));
        } else if (report->parsed()) {
            if (no_metrics) cfg.metrics.clear();
            if (!report_dir.empty()) cfg.output = std::filesystem::absolute(report_dir).lexically_normal();
            cfg.require_seed();
            const Report r = run_simulation_experiment(cfg);
            for (const auto& path : emit_report(r, cfg.output)) {
                std::cout << path.string() << '\n';
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "cleverlabel: error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
