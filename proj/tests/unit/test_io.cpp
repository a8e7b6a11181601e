#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "cleverlabel/io.hpp"

using namespace cleverlabel;
namespace fs = std::filesystem;

namespace {

const fs::path kData = CLEVERLABEL_DATA_DIR;

const char* const kMatrices[] = {"benthic", "cifar10h", "micebone",     "plankton",     "synthetic",
                                 "pig",     "turkey",   "treeversity1", "treeversity6", "qualitymri"};

class TempDir : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / ("cleverlabel-" + std::string(info->test_suite_name()) + "-" + info->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    fs::path write(const std::string& name, const std::string& text) {
        write_file(dir_ / name, text);
        return dir_ / name;
    }

    fs::path dir_;
};

fs::path write_meta(const fs::path& dir, const std::string& extra) {
    const std::string doc = R"({"format": "cleverlabel-dataset", "version": 1, "class_names": ["a", "b", "c"])" +
                            extra + "}";
    write_file(dir / "dataset.json", doc);
    return dir / "dataset.json";
}

bool same_dataset(const Dataset& a, const Dataset& b) {
    if (a.name != b.name || a.meta.class_names != b.meta.class_names || a.meta.delta != b.meta.delta ||
        a.meta.upper_bound != b.meta.upper_bound || a.meta.mu != b.meta.mu || a.images.size() != b.images.size() ||
        !(a.acceptance_log == b.acceptance_log)) {
        return false;
    }
    for (std::size_t i = 0; i < a.images.size(); ++i) {
        const auto &x = a.images[i], &y = b.images[i];
        if (x.image_id != y.image_id || !(x.gt == y.gt) || x.gt_from_file != y.gt_from_file ||
            x.annotations != y.annotations || x.proposal != y.proposal) {
            return false;
        }
    }
    return true;
}

}  // namespace

TEST(FormatDouble, ShortestRoundTrip) {
    EXPECT_EQ(format_double(0.18), "0.18");
    EXPECT_EQ(format_double(0.0), "0");
    EXPECT_EQ(format_double(1.0), "1");
    EXPECT_EQ(format_double(0.1822585877541493), "0.1822585877541493");
    std::mt19937_64 gen(51);
    for (int i = 0; i < 10000; ++i) {
        const double v = std::uniform_real_distribution<double>(-1e6, 1e6)(gen);
        EXPECT_EQ(std::stod(format_double(v)), v);
    }
}

TEST(TransitionFiles, MiceBoneByteIdentical) {
    const fs::path path = kData / "transitions/micebone.json";
    const auto doc = load_transition_matrix(path);
    EXPECT_EQ(doc.name, "MiceBone");
    EXPECT_EQ(doc.class_names, (std::vector<std::string>{"g", "nr", "ug"}));
    EXPECT_EQ(doc.rows[0], (std::vector<double>{0.727, 0.180, 0.093}));
    ASSERT_TRUE(doc.blend_only_kl);
    EXPECT_EQ(*doc.blend_only_kl, 0.1822585877541493);
    EXPECT_EQ(format_transition_matrix(doc), read_file(path));
}

TEST(TransitionFiles, AllPublishedRoundTrip) {
    for (const char* name : kMatrices) {
        const fs::path path = kData / "transitions" / (std::string(name) + ".json");
        const auto doc = load_transition_matrix(path);
        EXPECT_EQ(format_transition_matrix(doc), read_file(path)) << name;
        EXPECT_EQ(parse_transition_matrix(format_transition_matrix(doc)), doc) << name;
        const auto m = doc.matrix();
        EXPECT_EQ(m.size(), doc.class_names.size());
        for (std::size_t r = 0; r < m.size(); ++r) {
            double s = 0;
            for (double p : m.row(r).probs()) s += p;
            EXPECT_NEAR(s, 1.0, 1e-12) << name;
        }
    }
}

TEST(TransitionFiles, RejectsBrokenRows) {
    EXPECT_THROW(parse_transition_matrix(R"({"class_names": ["a","b"], "rows": [[0.5, 0.3], [0.5, 0.5]]})").matrix(),
                 Error);
    EXPECT_THROW(parse_transition_matrix(R"({"class_names": ["a","b"], "rows": [[0.5, 0.5]]})"), ParseError);
    EXPECT_THROW(parse_transition_matrix(R"({"class_names": ["a","b"], "rows": [[0.5, 0.5], [1.5, -0.5]]})"),
                 ParseError);
    EXPECT_THROW(parse_transition_matrix("{not json"), ParseError);
}

TEST(TransitionFiles, FromMatrix) {
    const auto m = TransitionMatrix::identity(2);
    const auto doc = TransitionMatrixDocument::from_matrix(m, {"x", "y"}, "id");
    EXPECT_EQ(parse_transition_matrix(format_transition_matrix(doc)).matrix(), m);
}

TEST_F(TempDir, GtFromAnnotations) {
    write("ann.csv", "image_id,annotator_idx,class\nx,0,a\nx,1,a\nx,2,b\nx,3,a\n");
    const auto ds = load_dataset(write_meta(dir_, R"(, "annotations": "ann.csv")"));
    ASSERT_EQ(ds.images.size(), 1u);
    EXPECT_EQ(ds.images[0].gt, (LabelDistribution{0.75, 0.25, 0.0}));
    EXPECT_FALSE(ds.images[0].gt_from_file);
}

TEST_F(TempDir, NonNormalizableRow) {
    write("gt.csv", "image_id,p_0,p_1,p_2\nok,0.2,0.3,0.5\nbad,0.2,0.3,0.4\n");
    try {
        load_dataset(write_meta(dir_, R"(, "gt": "gt.csv")"));
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("non-normalizable"), std::string::npos) << msg;
        EXPECT_NE(msg.find("gt.csv:3"), std::string::npos) << msg;
        EXPECT_NE(msg.find("bad"), std::string::npos) << msg;
    }
}

TEST_F(TempDir, SchemaErrors) {
    const auto meta = write_meta(dir_, R"(, "gt": "gt.csv")");
    write("gt.csv", "image_id,p_0,p_1,p_2\nx,0.2,0.3,0.5\nx,0.2,0.3,0.5\n");
    EXPECT_THROW(load_dataset(meta), ParseError);
    write("gt.csv", "image_id,p_0,p_1,p_2,extra\nx,0.2,0.3,0.5,1\n");
    EXPECT_THROW(load_dataset(meta), ParseError);
    write("gt.csv", "image_id,p_0,p_1\nx,0.5,0.5\n");
    EXPECT_THROW(load_dataset(meta), ParseError);
    write("gt.csv", "image_id,p_0,p_1,p_2\nx,0.2,0.3\n");
    EXPECT_THROW(load_dataset(meta), ParseError);
    write("gt.csv", "image_id,p_0,p_1,p_2\nx,0.2,abc,0.5\n");
    EXPECT_THROW(load_dataset(meta), ParseError);
    EXPECT_THROW(load_dataset(dir_ / "missing.json"), Error);
    write("ann.csv", "image_id,annotator_idx,class\nx,0,a\nx,0,b\n");
    EXPECT_THROW(load_dataset(write_meta(dir_, R"(, "annotations": "ann.csv")")), ParseError);
    write("ann.csv", "image_id,annotator_idx,class\nx,0,z\n");
    EXPECT_THROW(load_dataset(write_meta(dir_, R"(, "annotations": "ann.csv")")), ParseError);
    write("dataset.json", R"({"class_names": ["a","b"], "gt": "gt.csv", "colour": 1})");
    EXPECT_THROW(load_dataset(dir_ / "dataset.json"), ParseError);
}

TEST_F(TempDir, ProposalColumnOverride) {
    write("gt.csv", "image_id,p_0,p_1,p_2,model\nx,0.2,0.3,0.5,b\ny,0.2,0.3,0.5,\n");
    const auto meta = write_meta(dir_, R"(, "gt": "gt.csv")");
    EXPECT_THROW(load_dataset(meta), ParseError);
    const auto ds = load_dataset(meta, std::string("model"));
    EXPECT_EQ(ds.images[0].proposal, std::optional<ClassIndex>(1));
    EXPECT_FALSE(ds.images[1].proposal);
}

TEST_F(TempDir, ExampleDatasetRoundTrip) {
    const auto ds = load_dataset(kData / "examples/mice/dataset.json");
    EXPECT_EQ(ds.images.size(), 46u);
    save_dataset(ds, dir_ / "copy.json");
    const auto again = load_dataset(dir_ / "copy.json");
    EXPECT_TRUE(same_dataset(ds, again));
    save_dataset(again, dir_ / "copy2.json");
    EXPECT_EQ(read_file(dir_ / "copy_gt.csv"), read_file(dir_ / "copy2_gt.csv"));
    EXPECT_EQ(read_file(dir_ / "copy_annotations.csv"), read_file(dir_ / "copy2_annotations.csv"));
}

TEST_F(TempDir, AcceptanceLog) {
    DatasetMeta meta;
    meta.class_names = {"a", "b", "c"};
    const auto log = parse_acceptance_log("image_id,proposal_class,annotated_class\nx,a,b\nx,0,2\ny,c,c\n", meta);
    ASSERT_EQ(log.size(), 3u);
    EXPECT_EQ(log[1], (LogEntry{"x", 0, 2}));
    save_acceptance_log(log, meta, dir_ / "log.csv");
    EXPECT_EQ(load_acceptance_log(dir_ / "log.csv", meta), log);
    EXPECT_EQ(format_acceptance_log(load_acceptance_log(dir_ / "log.csv", meta), meta), read_file(dir_ / "log.csv"));
    EXPECT_THROW(parse_acceptance_log("image_id,proposal,annotated\n", meta), ParseError);
    EXPECT_THROW(parse_acceptance_log("image_id,proposal_class,annotated_class\nx,a,7\n", meta), ParseError);
}

TEST_F(TempDir, ExampleLogRoundTrip) {
    const auto ds = load_dataset(kData / "examples/mice/dataset.json");
    const fs::path path = kData / "examples/mice/acceptance.csv";
    const auto log = load_acceptance_log(path, ds.meta);
    EXPECT_EQ(format_acceptance_log(log, ds.meta), read_file(path));
    const auto records = to_acceptance_records(ds, log);
    EXPECT_EQ(records.size(), log.size());
}

TEST(TwoProposalRecords, Grouping) {
    const std::vector<LogEntry> log = {
        {"x", 0, 0}, {"x", 1, 2}, {"x", 0, 1}, {"y", 2, 2}, {"z", 0, 0}, {"z", 1, 1}, {"z", 2, 2},
    };
    const auto recs = to_two_proposal_records(3, log);
    ASSERT_EQ(recs.size(), 1u);
    EXPECT_EQ(recs[0].image_id, "x");
    EXPECT_EQ(recs[0].proposal_a, 0u);
    EXPECT_EQ(recs[0].proposal_b, 1u);
    EXPECT_EQ(recs[0].annotations_a, AnnotationSet({1, 1, 0}));
    EXPECT_EQ(recs[0].annotations_b, AnnotationSet({0, 0, 1}));
}

TEST(GtTable, Format) {
    const std::vector<std::pair<std::string, LabelDistribution>> rows = {{"x", LabelDistribution{0.25, 0.75}}};
    EXPECT_EQ(format_gt_table(rows, 2), "image_id,p_0,p_1\nx,0.25,0.75\n");
}
