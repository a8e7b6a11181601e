#include "cleverlabel/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

namespace cleverlabel {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr std::string_view kDatasetFormat = "cleverlabel-dataset";
constexpr std::string_view kMatrixFormat = "cleverlabel-transition-matrix";

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            break;
        }
        out.push_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
    return out;
}

struct CsvRow {
    std::size_t line = 0;
    std::vector<std::string_view> fields;
};

struct CsvTable {
    std::vector<std::string_view> header;
    std::size_t header_line = 0;
    std::vector<CsvRow> rows;
};

// Views point into `text`, which must outlive the table.
CsvTable parse_csv(std::string_view text, std::string_view source) {
    CsvTable table;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    bool have_header = false;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = trim(text.substr(pos, end - pos));
        ++line_no;
        pos = end + 1;
        if (line.empty()) {
            if (end == text.size()) break;
            continue;
        }
        auto fields = split_fields(line);
        if (!have_header) {
            table.header = std::move(fields);
            table.header_line = line_no;
            have_header = true;
        } else {
            if (fields.size() != table.header.size()) {
                std::ostringstream msg;
                msg << source << ":" << line_no << ": expected " << table.header.size() << " fields, got "
                    << fields.size();
                throw ParseError(msg.str());
            }
            table.rows.push_back({line_no, std::move(fields)});
        }
        if (end == text.size()) break;
    }
    if (!have_header) {
        throw ParseError(std::string(source) + ": missing header line");
    }
    return table;
}

[[noreturn]] void fail_at(std::string_view source, std::size_t line, const std::string& what) {
    std::ostringstream msg;
    msg << source << ":" << line << ": " << what;
    throw ParseError(msg.str());
}

double parse_number(std::string_view token, std::string_view source, std::size_t line) {
    double v = 0.0;
    const auto* first = token.data();
    const auto* last = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
        fail_at(source, line, "invalid number '" + std::string(token) + "'");
    }
    return v;
}

std::uint64_t parse_unsigned(std::string_view token, std::string_view source, std::size_t line) {
    std::uint64_t v = 0;
    const auto* last = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(token.data(), last, v);
    if (ec != std::errc() || ptr != last) {
        fail_at(source, line, "invalid non-negative integer '" + std::string(token) + "'");
    }
    return v;
}

ClassIndex parse_class_at(const DatasetMeta& meta, std::string_view token, std::string_view source,
                          std::size_t line) {
    try {
        return parse_class(meta, token);
    } catch (const Error& e) {
        fail_at(source, line, e.what());
    }
}

void expect_header(const CsvTable& t, const std::vector<std::string>& expected, std::string_view source) {
    bool ok = t.header.size() == expected.size();
    for (std::size_t i = 0; ok && i < expected.size(); ++i) {
        ok = t.header[i] == expected[i];
    }
    if (!ok) {
        std::string want;
        for (const auto& e : expected) want += (want.empty() ? "" : ",") + e;
        fail_at(source, t.header_line, "expected header '" + want + "'");
    }
}

ordered_json parse_json(std::string_view text, std::string_view source) {
    try {
        return ordered_json::parse(text.begin(), text.end());
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string(source) + ": " + e.what());
    }
}

std::string dump_json(const ordered_json& j) {
    return j.dump(2) + "\n";
}

std::string class_token(const DatasetMeta& meta, ClassIndex k) {
    return meta.class_names.at(k);
}

std::string table_name(const fs::path& dataset_path, std::string_view suffix) {
    return dataset_path.stem().string() + std::string(suffix);
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc()) {
        throw Error("format_double failed");
    }
    return std::string(buf, ptr);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open '" + path.string() + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, std::string_view contents) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot write '" + path.string() + "'");
    }
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) {
        throw Error("write failed for '" + path.string() + "'");
    }
}

ClassIndex parse_class(const DatasetMeta& meta, std::string_view token) {
    const auto it = std::find(meta.class_names.begin(), meta.class_names.end(), token);
    if (it != meta.class_names.end()) {
        return static_cast<ClassIndex>(it - meta.class_names.begin());
    }
    std::size_t idx = 0;
    const auto* last = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(token.data(), last, idx);
    if (ec == std::errc() && ptr == last && !token.empty() && idx < meta.num_classes()) {
        return idx;
    }
    throw Error("unknown class '" + std::string(token) + "'");
}

const ImageRecord* Dataset::find(std::string_view image_id) const {
    for (const auto& img : images) {
        if (img.image_id == image_id) return &img;
    }
    return nullptr;
}

std::vector<LabelDistribution> Dataset::ground_truths() const {
    std::vector<LabelDistribution> out;
    out.reserve(images.size());
    for (const auto& img : images) out.push_back(img.gt);
    return out;
}

namespace {

struct GtRow {
    std::string image_id;
    LabelDistribution gt;
    std::optional<ClassIndex> proposal;
};

std::vector<GtRow> parse_gt_table(std::string_view text, const DatasetMeta& meta, const std::string& proposal_column,
                                  std::string_view source) {
    const CsvTable t = parse_csv(text, source);
    const std::size_t k = meta.num_classes();
    if (t.header.empty() || t.header[0] != "image_id") {
        fail_at(source, t.header_line, "first column must be image_id");
    }
    std::optional<std::size_t> proposal_col;
    std::size_t prob_cols = 0;
    for (std::size_t c = 1; c < t.header.size(); ++c) {
        const std::string_view h = t.header[c];
        if (h == "p_" + std::to_string(prob_cols) && !proposal_col) {
            ++prob_cols;
        } else if (h == proposal_column && !proposal_col) {
            proposal_col = c;
        } else {
            fail_at(source, t.header_line, "unexpected column '" + std::string(h) + "'");
        }
    }
    if (prob_cols != k) {
        std::ostringstream msg;
        msg << "expected " << k << " probability columns p_0..p_" << (k - 1) << ", got " << prob_cols;
        fail_at(source, t.header_line, msg.str());
    }

    std::vector<GtRow> rows;
    std::unordered_set<std::string> seen;
    for (const auto& row : t.rows) {
        std::string id(row.fields[0]);
        if (id.empty()) {
            fail_at(source, row.line, "empty image_id");
        }
        if (!seen.insert(id).second) {
            fail_at(source, row.line, "duplicate image id '" + id + "'");
        }
        std::vector<double> p(k);
        for (std::size_t c = 0; c < k; ++c) {
            p[c] = parse_number(row.fields[1 + c], source, row.line);
        }
        std::optional<LabelDistribution> gt;
        try {
            gt.emplace(std::move(p));
        } catch (const Error& e) {
            fail_at(source, row.line, "image '" + id + "': " + e.what());
        }
        std::optional<ClassIndex> proposal;
        if (proposal_col && !row.fields[*proposal_col].empty()) {
            proposal = parse_class_at(meta, row.fields[*proposal_col], source, row.line);
        }
        rows.push_back({std::move(id), std::move(*gt), proposal});
    }
    return rows;
}

std::vector<std::pair<std::string, AnnotationSet>> parse_annotation_table(std::string_view text,
                                                                          const DatasetMeta& meta,
                                                                          std::string_view source) {
    const CsvTable t = parse_csv(text, source);
    expect_header(t, {"image_id", "annotator_idx", "class"}, source);
    std::vector<std::pair<std::string, AnnotationSet>> out;
    std::unordered_map<std::string, std::size_t> index;
    std::set<std::pair<std::string, std::uint64_t>> seen_pairs;
    for (const auto& row : t.rows) {
        std::string id(row.fields[0]);
        if (id.empty()) {
            fail_at(source, row.line, "empty image_id");
        }
        const std::uint64_t annotator = parse_unsigned(row.fields[1], source, row.line);
        if (!seen_pairs.emplace(id, annotator).second) {
            fail_at(source, row.line, "duplicate annotation of image '" + id + "' by annotator " +
                                          std::to_string(annotator));
        }
        const ClassIndex cls = parse_class_at(meta, row.fields[2], source, row.line);
        auto [it, inserted] = index.try_emplace(id, out.size());
        if (inserted) {
            out.emplace_back(id, AnnotationSet(meta.num_classes()));
        }
        out[it->second].second.add(cls);
    }
    return out;
}

}  // namespace

Dataset load_dataset(const fs::path& path, const std::optional<std::string>& proposal_column) {
    const std::string source = path.string();
    const ordered_json doc = parse_json(read_file(path), source);
    if (!doc.is_object()) {
        throw ParseError(source + ": dataset document must be an object");
    }

    Dataset ds;
    try {
        if (doc.contains("format") && doc.at("format").get<std::string>() != kDatasetFormat) {
            throw ParseError("unexpected format '" + doc.at("format").get<std::string>() + "'");
        }
        ds.name = doc.value("name", std::string{});
        ds.meta.class_names = doc.at("class_names").get<std::vector<std::string>>();
        ds.meta.delta = doc.value("delta", ds.meta.delta);
        ds.meta.upper_bound = doc.value("upper_bound", ds.meta.upper_bound);
        ds.meta.mu = doc.value("mu", ds.meta.mu);
        ds.proposal_column = doc.value("proposal_column", ds.proposal_column);
        ds.meta.validate();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(source + ": " + e.what());
    } catch (const Error& e) {
        throw ParseError(source + ": " + e.what());
    }
    if (proposal_column) {
        ds.proposal_column = *proposal_column;
    }

    const fs::path base = path.parent_path();
    auto table_path = [&](const char* key) -> std::optional<fs::path> {
        if (!doc.contains(key)) return std::nullopt;
        if (!doc.at(key).is_string()) throw ParseError(source + ": '" + key + "' must be a path string");
        return base / doc.at(key).get<std::string>();
    };
    const auto gt_path = table_path("gt");
    const auto ann_path = table_path("annotations");
    const auto log_path = table_path("acceptance_log");
    if (!gt_path && !ann_path) {
        throw ParseError(source + ": dataset needs a 'gt' or 'annotations' table");
    }

    std::unordered_map<std::string, std::size_t> index;
    if (gt_path) {
        const std::string text = read_file(*gt_path);
        for (auto& row : parse_gt_table(text, ds.meta, ds.proposal_column, gt_path->string())) {
            index.emplace(row.image_id, ds.images.size());
            ds.images.push_back({std::move(row.image_id), std::move(row.gt), true, std::nullopt, row.proposal});
        }
    }
    if (ann_path) {
        const std::string text = read_file(*ann_path);
        for (auto& [id, set] : parse_annotation_table(text, ds.meta, ann_path->string())) {
            auto it = index.find(id);
            if (it != index.end()) {
                ds.images[it->second].annotations = std::move(set);
            } else {
                LabelDistribution gt = soft_gt_from_annotations(set);
                index.emplace(id, ds.images.size());
                ds.images.push_back({id, std::move(gt), false, std::move(set), std::nullopt});
            }
        }
    }
    if (log_path) {
        ds.acceptance_log = load_acceptance_log(*log_path, ds.meta);
        for (const auto& e : ds.acceptance_log) {
            if (!index.count(e.image_id)) {
                throw ParseError(log_path->string() + ": image '" + e.image_id + "' not in dataset");
            }
        }
    }
    return ds;
}

void save_dataset(const Dataset& ds, const fs::path& path) {
    ds.meta.validate();
    const fs::path base = path.parent_path();
    const std::size_t k = ds.meta.num_classes();

    ordered_json doc;
    doc["format"] = kDatasetFormat;
    doc["version"] = 1;
    if (!ds.name.empty()) doc["name"] = ds.name;
    doc["class_names"] = ds.meta.class_names;
    doc["delta"] = ds.meta.delta;
    doc["upper_bound"] = ds.meta.upper_bound;
    doc["mu"] = ds.meta.mu;
    doc["proposal_column"] = ds.proposal_column;

    const bool any_gt = std::any_of(ds.images.begin(), ds.images.end(), [](const auto& i) { return i.gt_from_file; });
    const bool any_ann = std::any_of(ds.images.begin(), ds.images.end(), [](const auto& i) { return i.annotations.has_value(); });
    const bool any_proposal = std::any_of(ds.images.begin(), ds.images.end(), [](const auto& i) { return i.proposal.has_value(); });

    if (any_gt) {
        const std::string name = table_name(path, "_gt.csv");
        std::ostringstream out;
        out << "image_id";
        for (std::size_t c = 0; c < k; ++c) out << ",p_" << c;
        if (any_proposal) out << "," << ds.proposal_column;
        out << "\n";
        for (const auto& img : ds.images) {
            if (!img.gt_from_file) continue;
            out << img.image_id;
            for (double p : img.gt.probs()) out << "," << format_double(p);
            if (any_proposal) out << "," << (img.proposal ? class_token(ds.meta, *img.proposal) : std::string{});
            out << "\n";
        }
        write_file(base / name, out.str());
        doc["gt"] = name;
    }
    if (any_ann) {
        const std::string name = table_name(path, "_annotations.csv");
        std::ostringstream out;
        out << "image_id,annotator_idx,class\n";
        for (const auto& img : ds.images) {
            if (!img.annotations) continue;
            std::uint64_t annotator = 0;
            for (ClassIndex c = 0; c < k; ++c) {
                for (std::uint64_t i = 0; i < img.annotations->count(c); ++i) {
                    out << img.image_id << "," << annotator++ << "," << class_token(ds.meta, c) << "\n";
                }
            }
        }
        write_file(base / name, out.str());
        doc["annotations"] = name;
    }
    if (!ds.acceptance_log.empty()) {
        const std::string name = table_name(path, "_acceptance.csv");
        save_acceptance_log(ds.acceptance_log, ds.meta, base / name);
        doc["acceptance_log"] = name;
    }
    write_file(path, dump_json(doc));
}

std::vector<LogEntry> parse_acceptance_log(std::string_view text, const DatasetMeta& meta, std::string_view source) {
    const CsvTable t = parse_csv(text, source);
    expect_header(t, {"image_id", "proposal_class", "annotated_class"}, source);
    std::vector<LogEntry> out;
    out.reserve(t.rows.size());
    for (const auto& row : t.rows) {
        if (row.fields[0].empty()) {
            fail_at(source, row.line, "empty image_id");
        }
        out.push_back({std::string(row.fields[0]), parse_class_at(meta, row.fields[1], source, row.line),
                       parse_class_at(meta, row.fields[2], source, row.line)});
    }
    return out;
}

std::vector<LogEntry> load_acceptance_log(const fs::path& path, const DatasetMeta& meta) {
    return parse_acceptance_log(read_file(path), meta, path.string());
}

std::string format_acceptance_log(const std::vector<LogEntry>& entries, const DatasetMeta& meta) {
    std::ostringstream out;
    out << "image_id,proposal_class,annotated_class\n";
    for (const auto& e : entries) {
        out << e.image_id << "," << class_token(meta, e.proposal) << "," << class_token(meta, e.annotated) << "\n";
    }
    return out.str();
}

void save_acceptance_log(const std::vector<LogEntry>& entries, const DatasetMeta& meta, const fs::path& path) {
    write_file(path, format_acceptance_log(entries, meta));
}

std::vector<AcceptanceRecord> to_acceptance_records(const Dataset& dataset, const std::vector<LogEntry>& log) {
    std::unordered_map<std::string_view, const ImageRecord*> lookup;
    for (const auto& img : dataset.images) lookup.emplace(img.image_id, &img);
    std::vector<AcceptanceRecord> out;
    out.reserve(log.size());
    for (const auto& e : log) {
        auto it = lookup.find(e.image_id);
        if (it == lookup.end()) {
            throw Error("acceptance log image '" + e.image_id + "' has no ground truth in the dataset");
        }
        out.push_back({e.image_id, e.proposal, e.annotated, it->second->gt});
    }
    return out;
}

std::vector<TwoProposalRecord> to_two_proposal_records(std::size_t num_classes, const std::vector<LogEntry>& log) {
    struct Group {
        std::string id;
        std::vector<ClassIndex> proposals;
        std::vector<const LogEntry*> entries;
    };
    std::vector<Group> groups;
    std::unordered_map<std::string, std::size_t> index;
    for (const auto& e : log) {
        auto [it, inserted] = index.try_emplace(e.image_id, groups.size());
        if (inserted) groups.push_back({e.image_id, {}, {}});
        Group& g = groups[it->second];
        if (std::find(g.proposals.begin(), g.proposals.end(), e.proposal) == g.proposals.end()) {
            g.proposals.push_back(e.proposal);
        }
        g.entries.push_back(&e);
    }
    std::vector<TwoProposalRecord> out;
    for (const auto& g : groups) {
        if (g.proposals.size() != 2) continue;
        TwoProposalRecord r{g.id, g.proposals[0], g.proposals[1], AnnotationSet(num_classes), AnnotationSet(num_classes)};
        for (const LogEntry* e : g.entries) {
            (e->proposal == r.proposal_a ? r.annotations_a : r.annotations_b).add(e->annotated);
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::string format_gt_table(const std::vector<std::pair<std::string, LabelDistribution>>& rows,
                            std::size_t num_classes) {
    std::ostringstream out;
    out << "image_id";
    for (std::size_t c = 0; c < num_classes; ++c) out << ",p_" << c;
    out << "\n";
    for (const auto& [id, d] : rows) {
        if (d.size() != num_classes) throw Error("format_gt_table: class count mismatch for '" + id + "'");
        out << id;
        for (double p : d.probs()) out << "," << format_double(p);
        out << "\n";
    }
    return out.str();
}

TransitionMatrix TransitionMatrixDocument::matrix(double tolerance) const {
    std::vector<LabelDistribution> out;
    out.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const double sum = std::accumulate(rows[r].begin(), rows[r].end(), 0.0);
        if (std::abs(sum - 1.0) > tolerance) {
            std::ostringstream msg;
            msg << "transition row " << r << " sums to " << sum;
            throw Error(msg.str());
        }
        out.push_back(normalize(rows[r]));
    }
    return TransitionMatrix(std::move(out));
}

TransitionMatrixDocument TransitionMatrixDocument::from_matrix(const TransitionMatrix& m,
                                                               std::vector<std::string> class_names,
                                                               std::string name) {
    TransitionMatrixDocument doc;
    doc.name = std::move(name);
    doc.class_names = std::move(class_names);
    for (const auto& row : m.rows()) doc.rows.push_back(row.values());
    return doc;
}

TransitionMatrixDocument parse_transition_matrix(std::string_view text, std::string_view source) {
    const ordered_json j = parse_json(text, source);
    TransitionMatrixDocument doc;
    try {
        if (!j.is_object()) throw ParseError("document must be an object");
        if (j.contains("format") && j.at("format").get<std::string>() != kMatrixFormat) {
            throw ParseError("unexpected format '" + j.at("format").get<std::string>() + "'");
        }
        doc.name = j.value("name", std::string{});
        doc.class_names = j.at("class_names").get<std::vector<std::string>>();
        doc.rows = j.at("rows").get<std::vector<std::vector<double>>>();
        if (j.contains("blend_only_kl")) doc.blend_only_kl = j.at("blend_only_kl").get<double>();
        if (doc.rows.size() != doc.class_names.size()) {
            throw ParseError("row count does not match class_names");
        }
        for (const auto& row : doc.rows) {
            if (row.size() != doc.rows.size()) throw ParseError("matrix must be square");
            for (double v : row) {
                if (!(v >= 0.0 && v <= 1.0)) throw ParseError("matrix entries must lie in [0,1]");
            }
        }
        (void)doc.matrix();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string(source) + ": " + e.what());
    } catch (const Error& e) {
        throw ParseError(std::string(source) + ": " + e.what());
    }
    return doc;
}

TransitionMatrixDocument load_transition_matrix(const fs::path& path) {
    return parse_transition_matrix(read_file(path), path.string());
}

std::string format_transition_matrix(const TransitionMatrixDocument& doc) {
    std::ostringstream out;
    out << "{\n";
    out << "  \"format\": " << nlohmann::json(kMatrixFormat).dump() << ",\n";
    if (!doc.name.empty()) out << "  \"name\": " << nlohmann::json(doc.name).dump() << ",\n";
    out << "  \"class_names\": [";
    for (std::size_t i = 0; i < doc.class_names.size(); ++i) {
        out << (i ? ", " : "") << nlohmann::json(doc.class_names[i]).dump();
    }
    out << "],\n";
    out << "  \"rows\": [\n";
    for (std::size_t r = 0; r < doc.rows.size(); ++r) {
        out << "    [";
        for (std::size_t c = 0; c < doc.rows[r].size(); ++c) {
            out << (c ? ", " : "") << format_double(doc.rows[r][c]);
        }
        out << "]" << (r + 1 < doc.rows.size() ? "," : "") << "\n";
    }
    out << "  ]";
    if (doc.blend_only_kl) out << ",\n  \"blend_only_kl\": " << format_double(*doc.blend_only_kl);
    out << "\n}\n";
    return out.str();
}

void save_transition_matrix(const TransitionMatrixDocument& doc, const fs::path& path) {
    write_file(path, format_transition_matrix(doc));
}

}  // namespace cleverlabel
