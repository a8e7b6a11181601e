#include "cleverlabel/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "json.hpp"

namespace cleverlabel {

namespace {

using json = nlohmann::ordered_json;

void check_keys(const json& obj, std::string_view where, std::initializer_list<std::string_view> allowed) {
    if (!obj.is_object()) {
        throw ParseError("config: '" + std::string(where) + "' must be an object");
    }
    for (const auto& [key, value] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw ParseError("config: unknown key '" + key + "' in " + std::string(where));
        }
    }
}

template <typename T>
void read_into(const json& obj, std::string_view key, T& out, std::string_view where) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        return;
    }
    try {
        out = it->template get<T>();
    } catch (const json::exception&) {
        throw ParseError("config: bad value for '" + std::string(key) + "' in " + std::string(where));
    }
}

std::string read_string(const json& obj, std::string_view key, std::string_view where) {
    std::string s;
    read_into(obj, key, s, where);
    return s;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    if (p.empty()) {
        return {};
    }
    std::filesystem::path path(p);
    if (path.is_relative() && !base.empty()) {
        path = base / path;
    }
    return path.lexically_normal();
}

bool uses_proposal(Strategy s) {
    return s != Strategy::Random && s != Strategy::Gt && s != Strategy::Likely;
}

ClassIndex proposal_for(const ImageRecord& img, bool& from_column) {
    from_column = img.proposal.has_value();
    return from_column ? *img.proposal : argmax_class(img.gt);
}

// Runs fn(i) for i in [0, n). The first failure in index order is rethrown,
// so errors do not depend on scheduling either.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn fn) {
    std::vector<std::exception_ptr> errors(n);
    auto run = [&](std::size_t i) {
        try {
            fn(i);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    threads = std::max<std::size_t>(1, std::min(threads, n));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) run(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) run(i);
            });
        }
        for (auto& th : pool) th.join();
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

[[noreturn]] void rethrow_with_image(const std::string& image_id) {
    try {
        throw;
    } catch (const InsufficientDataError& e) {
        throw InsufficientDataError("image '" + image_id + "': " + e.what());
    } catch (const std::exception& e) {
        throw Error("image '" + image_id + "': " + e.what());
    }
}

}  // namespace

std::string_view to_string(CalibrationMethod m) {
    return m == CalibrationMethod::Banded ? "banded" : "two-proposal";
}

CalibrationMethod parse_calibration_method(std::string_view name) {
    if (name == "banded") return CalibrationMethod::Banded;
    if (name == "two-proposal" || name == "two_proposal") return CalibrationMethod::TwoProposal;
    throw Error("unknown calibration method '" + std::string(name) + "' (expected banded|two-proposal)");
}

bool ExperimentConfig::wants_metric(std::string_view name) const {
    return std::find(metrics.begin(), metrics.end(), name) != metrics.end();
}

std::uint64_t ExperimentConfig::require_seed() const {
    if (!seed) {
        throw Error("a seed is required (--seed or \"seed\" in the config)");
    }
    return *seed;
}

void ExperimentConfig::validate(bool check_files) const {
    simulation.validate();
    correction.validate();
    if (annotation_counts.empty()) {
        throw Error("annotation_counts must not be empty");
    }
    for (auto n : annotation_counts) {
        if (n == 0) throw Error("annotation counts must be positive");
    }
    for (const auto& m : metrics) {
        if (m != "kl" && m != "budget") {
            throw Error("unknown metric '" + m + "' (expected kl|budget)");
        }
    }
    if (speedups.empty()) {
        throw Error("speedups must not be empty");
    }
    for (double s : speedups) {
        BudgetParams{initial_supervision, pct_annotated, 1.0, s}.validate();
    }
    if (transition_images == 0 || transition_annotations == 0) {
        throw Error("transition estimation needs positive image and annotation counts");
    }
    if (comparison_repetitions == 0) {
        throw Error("comparison repetitions must be positive");
    }
    if (comparison_strategies.empty()) {
        throw Error("comparison strategies must not be empty");
    }
    if (!(banded.band_low < banded.band_high) || banded.band_low < 0.0 || banded.band_high > 1.0) {
        throw Error("calibration band must satisfy 0 <= low < high <= 1");
    }
    if (threads == 0) {
        throw Error("threads must be at least 1");
    }
    if (check_files) {
        if (dataset.empty()) {
            throw Error("config: no dataset given");
        }
        if (!std::filesystem::exists(dataset)) {
            throw Error("dataset not found: " + dataset.string());
        }
        if (transitions && !std::filesystem::exists(*transitions)) {
            throw Error("transition matrix not found: " + transitions->string());
        }
    }
}

ExperimentConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("config: ") + e.what());
    }
    if (doc.is_object() && doc.contains("config") && doc.contains("format")) {
        doc = doc.at("config");
    }
    check_keys(doc, "config",
               {"seed", "dataset", "proposal_column", "strategy", "simulation", "correction", "transitions",
                "transition_estimate", "metrics", "speedups", "budget", "aggregation", "comparison", "calibration",
                "threads", "output"});

    ExperimentConfig cfg;
    if (auto it = doc.find("seed"); it != doc.end() && !it->is_null()) {
        if (!it->is_number_unsigned()) {
            throw ParseError("config: seed must be a non-negative 64-bit integer");
        }
        cfg.seed = it->get<std::uint64_t>();
    }
    if (doc.contains("dataset")) cfg.dataset = resolve(base_dir, read_string(doc, "dataset", "config"));
    if (doc.contains("proposal_column")) cfg.proposal_column = read_string(doc, "proposal_column", "config");
    if (doc.contains("strategy")) cfg.strategy = parse_strategy(read_string(doc, "strategy", "config"));

    if (auto it = doc.find("simulation"); it != doc.end()) {
        const json& s = *it;
        check_keys(s, "simulation", {"delta", "upper_bound", "annotation_counts", "reject_fallback"});
        read_into(s, "delta", cfg.simulation.delta, "simulation");
        read_into(s, "upper_bound", cfg.simulation.upper_bound, "simulation");
        read_into(s, "annotation_counts", cfg.annotation_counts, "simulation");
        if (s.contains("reject_fallback")) {
            cfg.simulation.reject_fallback = parse_reject_fallback(read_string(s, "reject_fallback", "simulation"));
        }
    }
    if (auto it = doc.find("correction"); it != doc.end()) {
        const json& c = *it;
        check_keys(c, "correction", {"delta", "upper_bound", "mu", "bias_correction", "class_blending", "cb_input"});
        read_into(c, "delta", cfg.correction.delta, "correction");
        read_into(c, "upper_bound", cfg.correction.upper_bound, "correction");
        read_into(c, "mu", cfg.correction.mu, "correction");
        read_into(c, "bias_correction", cfg.clever.bias_correction, "correction");
        read_into(c, "class_blending", cfg.clever.class_blending, "correction");
        if (c.contains("cb_input")) cfg.clever.blend_input = parse_blend_input(read_string(c, "cb_input", "correction"));
    }
    if (auto it = doc.find("transitions"); it != doc.end() && !it->is_null()) {
        cfg.transitions = resolve(base_dir, read_string(doc, "transitions", "config"));
    }
    if (auto it = doc.find("transition_estimate"); it != doc.end()) {
        check_keys(*it, "transition_estimate", {"images", "annotations"});
        read_into(*it, "images", cfg.transition_images, "transition_estimate");
        read_into(*it, "annotations", cfg.transition_annotations, "transition_estimate");
    }
    read_into(doc, "metrics", cfg.metrics, "config");
    read_into(doc, "speedups", cfg.speedups, "config");
    if (auto it = doc.find("budget"); it != doc.end()) {
        check_keys(*it, "budget", {"initial_supervision", "pct_annotated"});
        read_into(*it, "initial_supervision", cfg.initial_supervision, "budget");
        read_into(*it, "pct_annotated", cfg.pct_annotated, "budget");
    }
    if (doc.contains("aggregation")) cfg.aggregation = parse_aggregation(read_string(doc, "aggregation", "config"));
    if (auto it = doc.find("comparison"); it != doc.end()) {
        check_keys(*it, "comparison", {"repetitions", "strategies"});
        read_into(*it, "repetitions", cfg.comparison_repetitions, "comparison");
        if (it->contains("strategies")) {
            std::vector<std::string> names;
            read_into(*it, "strategies", names, "comparison");
            cfg.comparison_strategies.clear();
            for (const auto& n : names) cfg.comparison_strategies.push_back(parse_strategy(n));
        }
    }
    if (auto it = doc.find("calibration"); it != doc.end()) {
        const json& c = *it;
        check_keys(c, "calibration",
                   {"band_low", "band_high", "n_target", "rescale", "author_annotated", "aggregation", "threshold"});
        read_into(c, "band_low", cfg.banded.band_low, "calibration");
        read_into(c, "band_high", cfg.banded.band_high, "calibration");
        read_into(c, "n_target", cfg.banded.n_target, "calibration");
        read_into(c, "rescale", cfg.banded.rescale, "calibration");
        read_into(c, "author_annotated", cfg.banded.author_annotated, "calibration");
        if (c.contains("aggregation")) {
            cfg.banded.aggregation = parse_aggregation(read_string(c, "aggregation", "calibration"));
        }
        read_into(c, "threshold", cfg.two_proposal.threshold, "calibration");
    }
    read_into(doc, "threads", cfg.threads, "config");
    if (doc.contains("output")) cfg.output = resolve(base_dir, read_string(doc, "output", "config"));
    cfg.validate(false);
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    return parse_config(read_file(path), std::filesystem::absolute(path).parent_path());
}

std::string config_to_json(const ExperimentConfig& cfg) {
    json doc;
    if (cfg.seed) {
        doc["seed"] = *cfg.seed;
    } else {
        doc["seed"] = nullptr;
    }
    if (!cfg.dataset.empty()) doc["dataset"] = cfg.dataset.generic_string();
    if (cfg.proposal_column) doc["proposal_column"] = *cfg.proposal_column;
    doc["strategy"] = std::string(to_string(cfg.strategy));
    doc["simulation"] = {
        {"delta", cfg.simulation.delta},
        {"upper_bound", cfg.simulation.upper_bound},
        {"annotation_counts", cfg.annotation_counts},
        {"reject_fallback", std::string(to_string(cfg.simulation.reject_fallback))},
    };
    doc["correction"] = {
        {"delta", cfg.correction.delta},
        {"upper_bound", cfg.correction.upper_bound},
        {"mu", cfg.correction.mu},
        {"bias_correction", cfg.clever.bias_correction},
        {"class_blending", cfg.clever.class_blending},
        {"cb_input", std::string(to_string(cfg.clever.blend_input))},
    };
    doc["transitions"] = cfg.transitions ? json(cfg.transitions->generic_string()) : json(nullptr);
    doc["transition_estimate"] = {{"images", cfg.transition_images}, {"annotations", cfg.transition_annotations}};
    doc["metrics"] = cfg.metrics;
    doc["speedups"] = cfg.speedups;
    doc["budget"] = {{"initial_supervision", cfg.initial_supervision}, {"pct_annotated", cfg.pct_annotated}};
    doc["aggregation"] = std::string(to_string(cfg.aggregation));
    json strategies = json::array();
    for (auto s : cfg.comparison_strategies) strategies.push_back(std::string(to_string(s)));
    doc["comparison"] = {{"repetitions", cfg.comparison_repetitions}, {"strategies", strategies}};
    doc["calibration"] = {
        {"band_low", cfg.banded.band_low},
        {"band_high", cfg.banded.band_high},
        {"n_target", cfg.banded.n_target},
        {"rescale", cfg.banded.rescale},
        {"author_annotated", cfg.banded.author_annotated},
        {"aggregation", std::string(to_string(cfg.banded.aggregation))},
        {"threshold", cfg.two_proposal.threshold},
    };
    doc["threads"] = cfg.threads;
    doc["output"] = cfg.output.generic_string();
    return doc.dump(2) + "\n";
}

std::pair<TransitionMatrix, std::string> resolve_transitions(const ExperimentConfig& cfg, const Dataset& ds) {
    if (cfg.transitions) {
        TransitionMatrix t = load_transition_matrix(*cfg.transitions).matrix();
        if (t.size() != ds.meta.num_classes()) {
            throw Error("transition matrix has " + std::to_string(t.size()) + " classes, dataset has " +
                        std::to_string(ds.meta.num_classes()));
        }
        return {t, "file:" + cfg.transitions->filename().string()};
    }
    Rng rng = substream(cfg.require_seed(), "transition-matrix");
    const auto gts = ds.ground_truths();
    TransitionEstimate est = estimate_transition_rows(gts, cfg.transition_images, cfg.transition_annotations, rng);
    std::vector<LabelDistribution> rows;
    std::size_t uncovered = 0;
    for (std::size_t k = 0; k < est.rows.size(); ++k) {
        if (est.rows[k]) {
            rows.push_back(*est.rows[k]);
        } else {
            rows.push_back(LabelDistribution::one_hot(est.rows.size(), k));
            ++uncovered;
        }
    }
    std::string source = "estimated:" + std::to_string(std::min(cfg.transition_images, gts.size())) + "x" +
                         std::to_string(cfg.transition_annotations);
    if (uncovered > 0) {
        source += " (" + std::to_string(uncovered) + " uncovered rows one-hot)";
    }
    return {TransitionMatrix(std::move(rows)), source};
}

Report run_simulation_experiment(const ExperimentConfig& cfg) {
    cfg.validate(true);
    const Dataset ds = load_dataset(cfg.dataset, cfg.proposal_column);
    return run_simulation_experiment(cfg, ds);
}

Report run_simulation_experiment(const ExperimentConfig& cfg, const Dataset& ds) {
    cfg.validate(false);
    const std::uint64_t seed = cfg.require_seed();

    Report report;
    report.config = cfg;
    report.dataset_name = ds.name;
    report.class_names = ds.meta.class_names;
    report.num_images = ds.images.size();
    if (cfg.metrics.empty()) {
        return report;
    }
    if (ds.images.empty()) {
        throw InsufficientDataError("dataset has no images");
    }

    const std::size_t k = ds.meta.num_classes();
    TransitionMatrix transitions = TransitionMatrix::identity(k);
    if (cfg.clever.class_blending) {
        auto [t, source] = resolve_transitions(cfg, ds);
        transitions = std::move(t);
        report.transition_source = std::move(source);
    } else {
        report.transition_source = "none";
    }
    const bool correct = cfg.clever.bias_correction || cfg.clever.class_blending;

    const std::size_t n_images = ds.images.size();
    const std::size_t n_counts = cfg.annotation_counts.size();
    report.results.resize(n_images * n_counts);

    parallel_for(n_images, cfg.threads, [&](std::size_t i) {
        const ImageRecord& img = ds.images[i];
        try {
            bool from_column = false;
            const ClassIndex proposal = proposal_for(img, from_column);
            for (std::size_t c = 0; c < n_counts; ++c) {
                const std::uint64_t n = cfg.annotation_counts[c];
                SimulationParams sim = cfg.simulation;
                sim.repetitions = n;
                Rng rng = substream(seed, img.image_id, n);
                const AnnotationSet counts = simulate_strategy_set(cfg.strategy, img.gt, proposal, sim, rng);
                const LabelDistribution biased = soft_gt_from_annotations(counts);
                ImageResult& r = report.results[c * n_images + i];
                r.image_id = img.image_id;
                r.annotations = n;
                r.proposal = proposal;
                r.proposal_from_column = from_column;
                r.kl_biased = kl_divergence(img.gt, biased);
                r.kl_corrected = correct
                                     ? kl_divergence(img.gt, clever_label(counts, proposal, transitions,
                                                                          cfg.correction, cfg.clever))
                                     : r.kl_biased;
            }
        } catch (...) {
            rethrow_with_image(img.image_id);
        }
    });

    for (std::size_t c = 0; c < n_counts; ++c) {
        const std::uint64_t n = cfg.annotation_counts[c];
        std::vector<double> biased(n_images), corrected(n_images);
        for (std::size_t i = 0; i < n_images; ++i) {
            biased[i] = report.results[c * n_images + i].kl_biased;
            corrected[i] = report.results[c * n_images + i].kl_corrected;
        }
        for (auto [method, values] : {std::pair{kMethodBiased, &biased}, std::pair{kMethodCorrected, &corrected}}) {
            report.aggregates.push_back(
                {n, std::string(method), n_images, median_of(*values), mean_of(*values)});
        }
    }

    const std::vector<double> no_speedup = {1.0};
    const auto& speedups = uses_proposal(cfg.strategy) ? cfg.speedups : no_speedup;
    for (const AggregateRow& a : report.aggregates) {
        const double kl = cfg.aggregation == Aggregation::Median ? a.median : a.mean;
        for (double s : speedups) {
            const double b = budget({cfg.initial_supervision, cfg.pct_annotated, static_cast<double>(a.annotations), s});
            report.budget.push_back({a.method, a.annotations, s, b, kl});
        }
    }
    return report;
}

std::vector<LogEntry> simulate_log(const Dataset& ds, Strategy strategy, const SimulationParams& p,
                                   std::uint64_t seed) {
    p.validate();
    if (p.repetitions == 0) {
        throw Error("simulation needs at least one repetition");
    }
    std::vector<LogEntry> log;
    log.reserve(ds.images.size() * p.repetitions);
    for (const ImageRecord& img : ds.images) {
        try {
            bool from_column = false;
            const ClassIndex proposal = proposal_for(img, from_column);
            Rng rng = substream(seed, img.image_id, p.repetitions);
            for (std::uint64_t j = 0; j < p.repetitions; ++j) {
                log.push_back({img.image_id, proposal, simulate_with_strategy(strategy, img.gt, proposal, p, rng)});
            }
        } catch (...) {
            rethrow_with_image(img.image_id);
        }
    }
    return log;
}

std::vector<std::pair<std::string, LabelDistribution>> correct_log(std::size_t num_classes,
                                                                   const std::vector<LogEntry>& log,
                                                                   const TransitionMatrix* transitions,
                                                                   const CorrectionParams& p,
                                                                   const CleverLabelOptions& options) {
    p.validate();
    if (options.class_blending && transitions == nullptr) {
        throw Error("class blending needs a transition matrix");
    }
    struct Group {
        ClassIndex proposal;
        AnnotationSet counts;
    };
    std::vector<std::string> order;
    std::unordered_map<std::string, Group> groups;
    for (const LogEntry& e : log) {
        if (e.proposal >= num_classes || e.annotated >= num_classes) {
            throw Error("image '" + e.image_id + "': class index out of range");
        }
        auto [it, inserted] = groups.try_emplace(e.image_id, Group{e.proposal, AnnotationSet(num_classes)});
        if (inserted) {
            order.push_back(e.image_id);
        } else if (it->second.proposal != e.proposal) {
            throw Error("image '" + e.image_id + "': several proposals in one log; correct expects one per image");
        }
        it->second.counts.add(e.annotated);
    }
    const TransitionMatrix identity = TransitionMatrix::identity(num_classes);
    const TransitionMatrix& t = transitions ? *transitions : identity;
    std::vector<std::pair<std::string, LabelDistribution>> out;
    out.reserve(order.size());
    for (const auto& id : order) {
        const Group& g = groups.at(id);
        try {
            out.emplace_back(id, clever_label(g.counts, g.proposal, t, p, options));
        } catch (...) {
            rethrow_with_image(id);
        }
    }
    return out;
}

StrategyComparison run_strategy_comparison(const ExperimentConfig& cfg, const Dataset& ds,
                                           const std::vector<LogEntry>& log) {
    cfg.validate(false);
    const std::uint64_t seed = cfg.require_seed();
    if (log.empty()) {
        throw InsufficientDataError("acceptance log is empty");
    }
    const auto records = to_acceptance_records(ds, log);
    StrategyComparison table;
    table.records = records.size();
    table.repetitions = cfg.comparison_repetitions;
    for (Strategy s : cfg.comparison_strategies) {
        table.rows.push_back({s, compare_strategies(records, s, cfg.simulation, cfg.comparison_repetitions, seed)});
    }
    std::stable_sort(table.rows.begin(), table.rows.end(),
                     [](const StrategyRow& a, const StrategyRow& b) { return a.sod.mean < b.sod.mean; });
    return table;
}

StrategyComparison run_strategy_comparison(const ExperimentConfig& cfg, const std::filesystem::path& log_path) {
    cfg.validate(true);
    const Dataset ds = load_dataset(cfg.dataset, cfg.proposal_column);
    return run_strategy_comparison(cfg, ds, load_acceptance_log(log_path, ds.meta));
}

std::string format_strategy_table(const StrategyComparison& table) {
    std::ostringstream out;
    out << "rank,strategy,mean_sod,std_sod,repetitions,records\n";
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const StrategyRow& r = table.rows[i];
        out << i + 1 << ',' << to_string(r.strategy) << ',' << format_double(r.sod.mean) << ','
            << format_double(r.sod.stddev) << ',' << table.repetitions << ',' << table.records << '\n';
    }
    return out.str();
}

CalibrationReport run_calibration(const ExperimentConfig& cfg, const Dataset& ds, const std::vector<LogEntry>& log,
                                  CalibrationMethod method) {
    if (log.empty()) {
        throw InsufficientDataError("insufficient calibration data: acceptance log is empty");
    }
    CalibrationReport report;
    report.method = method;
    report.log_entries = log.size();
    if (method == CalibrationMethod::Banded) {
        report.banded = estimate_delta_banded(to_acceptance_records(ds, log), cfg.banded);
        report.delta = report.banded->delta;
    } else {
        const auto records = to_two_proposal_records(ds.meta.num_classes(), log);
        if (records.empty()) {
            throw InsufficientDataError("insufficient calibration data: none of the " + std::to_string(log.size()) +
                                        " log entries belongs to an image shown two distinct proposals");
        }
        report.two_proposal = estimate_delta_two_proposals(records, cfg.two_proposal);
        report.delta = report.two_proposal->delta;
    }
    return report;
}

CalibrationReport run_calibration(const ExperimentConfig& cfg, const std::filesystem::path& log_path,
                                  CalibrationMethod method) {
    cfg.validate(true);
    const Dataset ds = load_dataset(cfg.dataset, cfg.proposal_column);
    return run_calibration(cfg, ds, load_acceptance_log(log_path, ds.meta), method);
}

std::string format_calibration_report(const CalibrationReport& report) {
    json doc;
    doc["method"] = std::string(to_string(report.method));
    doc["delta"] = report.delta;
    doc["log_entries"] = report.log_entries;
    if (report.banded) {
        const BandedEstimate& b = *report.banded;
        doc["raw_delta"] = b.raw_delta;
        doc["images_used"] = b.images_used;
        doc["records_used"] = b.records_used;
        doc["records_in_band"] = b.records_in_band;
        doc["records_total"] = b.records_total;
    }
    if (report.two_proposal) {
        const TwoProposalEstimate& t = *report.two_proposal;
        doc["records"] = t.records;
        doc["candidates"] = t.candidates;
        doc["survivors"] = t.survivors;
        doc["corner_cases"] = t.corner_cases;
        std::vector<double> kept;
        for (const auto& c : t.kept) kept.push_back(c.value);
        if (!kept.empty()) {
            std::sort(kept.begin(), kept.end());
            doc["candidate_min"] = kept.front();
            doc["candidate_max"] = kept.back();
            doc["candidate_mean"] = mean_of(kept);
        }
    }
    return doc.dump(2) + "\n";
}

}  // namespace cleverlabel
