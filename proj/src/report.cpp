#include "cleverlabel/report.hpp"

#include <chrono>
#include <ctime>
#include <sstream>

#include "json.hpp"

#ifndef CLEVERLABEL_VERSION
#define CLEVERLABEL_VERSION "0.0.0"
#endif

namespace cleverlabel {

namespace {

std::string class_label(const Report& report, ClassIndex k) {
    return k < report.class_names.size() ? report.class_names[k] : std::to_string(k);
}

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

std::string_view tool_version() noexcept {
    return CLEVERLABEL_VERSION;
}

std::string format_results_table(const Report& report) {
    std::ostringstream out;
    out << "image_id,annotations,proposal,proposal_source,kl_biased,kl_corrected\n";
    for (const ImageResult& r : report.results) {
        out << r.image_id << ',' << r.annotations << ',' << class_label(report, r.proposal) << ','
            << (r.proposal_from_column ? "column" : "argmax-fallback") << ',' << format_double(r.kl_biased) << ','
            << format_double(r.kl_corrected) << '\n';
    }
    return out.str();
}

std::string format_summary_table(const Report& report) {
    std::ostringstream out;
    out << "annotations,method,images,kl_median,kl_mean\n";
    for (const AggregateRow& a : report.aggregates) {
        out << a.annotations << ',' << a.method << ',' << a.images << ',' << format_double(a.median) << ','
            << format_double(a.mean) << '\n';
    }
    return out.str();
}

std::string format_kl_vs_annotations(const Report& report) {
    std::ostringstream out;
    out << "method,annotations,statistic,kl\n";
    for (const AggregateRow& a : report.aggregates) {
        out << a.method << ',' << a.annotations << ",median," << format_double(a.median) << '\n';
        out << a.method << ',' << a.annotations << ",mean," << format_double(a.mean) << '\n';
    }
    return out.str();
}

std::string format_kl_vs_budget(const Report& report) {
    std::ostringstream out;
    out << "method,annotations,speedup,initial_supervision,pct_annotated,budget,kl\n";
    for (const BudgetRow& b : report.budget) {
        out << b.method << ',' << b.annotations << ',' << format_double(b.speedup) << ','
            << format_double(report.config.initial_supervision) << ',' << format_double(report.config.pct_annotated)
            << ',' << format_double(b.budget) << ',' << format_double(b.kl) << '\n';
    }
    return out.str();
}

std::string format_manifest(const Report& report, const std::vector<std::string>& files,
                            const std::string& timestamp) {
    nlohmann::ordered_json doc;
    doc["format"] = "cleverlabel-manifest";
    doc["version"] = std::string(tool_version());
    if (report.config.seed) {
        doc["seed"] = *report.config.seed;
    } else {
        doc["seed"] = nullptr;
    }
    doc["timestamp"] = timestamp;
    doc["dataset_name"] = report.dataset_name;
    doc["images"] = report.num_images;
    doc["transitions"] = report.transition_source;
    doc["files"] = files;
    doc["config"] = nlohmann::ordered_json::parse(config_to_json(report.config));
    return doc.dump(2) + "\n";
}

std::vector<std::filesystem::path> emit_report(const Report& report, const std::filesystem::path& dir,
                                               const std::optional<std::string>& timestamp) {
    std::vector<std::pair<std::string, std::string>> tables;
    if (report.config.wants_metric("kl")) {
        tables.emplace_back("results.csv", format_results_table(report));
        tables.emplace_back("summary.csv", format_summary_table(report));
        tables.emplace_back("kl_vs_annotations.csv", format_kl_vs_annotations(report));
    }
    if (report.config.wants_metric("budget")) {
        tables.emplace_back("kl_vs_budget.csv", format_kl_vs_budget(report));
    }
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;
    std::vector<std::string> names;
    for (const auto& [name, contents] : tables) {
        write_file(dir / name, contents);
        written.push_back(dir / name);
        names.push_back(name);
    }
    write_file(dir / "manifest.json", format_manifest(report, names, timestamp.value_or(utc_now())));
    written.push_back(dir / "manifest.json");
    return written;
}

}  // namespace cleverlabel
