#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tilted_sim/records.hpp"

using namespace tilted_sim;

namespace {

std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "tilted_sim_records_test";
    std::filesystem::create_directories(dir);
    return dir / name;
}

std::vector<std::string> lines_of(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

}  // namespace

TEST(Records, EveryLineIsAFullRecord) {
    const auto path = scratch("lines.jsonl");
    {
        RecordWriter w(path, "exp", "0123456789abcdef");
        w.write("a", 1.5, 0.1, {{"seed", 3}});
        w.write("b", std::nan(""), std::numeric_limits<double>::infinity());
        EXPECT_EQ(w.count(), 2u);
    }
    const auto lines = lines_of(path);
    ASSERT_EQ(lines.size(), 2u);
    for (const auto& line : lines) {
        const auto j = Json::parse(line);
        for (const char* key : {"experiment", "config_hash", "version", "timestamp", "metric", "value", "se", "metadata"})
            EXPECT_TRUE(j.contains(key)) << key;
    }
    const auto second = Json::parse(lines[1]);
    EXPECT_TRUE(second["value"].is_null());
    EXPECT_TRUE(second["se"].is_null());

    const auto recs = read_records(path);
    EXPECT_EQ(recs[0].metric, "a");
    EXPECT_DOUBLE_EQ(recs[0].value, 1.5);
    EXPECT_EQ(recs[0].metadata["seed"], 3);
    EXPECT_TRUE(std::isnan(recs[1].value));
    EXPECT_FALSE(recs[1].se.has_value());
}

TEST(Records, WriterTruncatesEarlierRun) {
    const auto path = scratch("trunc.jsonl");
    {
        RecordWriter w(path, "exp", "h");
        w.write("a", 1.0);
        w.write("a", 2.0);
    }
    {
        RecordWriter w(path, "exp", "h");
        w.write("a", 3.0);
    }
    EXPECT_EQ(lines_of(path).size(), 1u);
}

TEST(Records, TimestampIsIsoUtc) {
    const auto t = utc_timestamp();
    ASSERT_EQ(t.size(), 20u);
    EXPECT_EQ(t[4], '-');
    EXPECT_EQ(t[10], 'T');
    EXPECT_EQ(t.back(), 'Z');
}

TEST(Records, MalformedLineReportsItsNumber) {
    const auto path = scratch("bad.jsonl");
    {
        std::ofstream out(path);
        out << R"({"metric":"a","value":1})" << "\n{not json\n";
    }
    try {
        read_records(path);
        FAIL();
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos);
    }
}

class PlotData : public ::testing::Test {
protected:
    void SetUp() override {
        path_ = scratch("plot.jsonl");
        RecordWriter w(path_, "exp", "h");
        for (double t2 : {1e4, 1e3})
            for (const char* scheme : {"surrogate", "label"})
                for (int seed = 0; seed < 3; ++seed)
                    w.write("gap", (scheme[0] == 'l' ? 2.0 : 1.0) / t2 + seed * 1e-4, std::nullopt,
                            {{"scheme", scheme}, {"t2", t2}, {"seed", seed}});
        w.write("signed", -1.0, std::nullopt, {{"t2", 1e3}});
        w.write("signed", 0.0, std::nullopt, {{"t2", 1e3}});
        w.write("signed", 4.0, 0.4, {{"t2", 1e4}});
    }
    std::filesystem::path path_;
};

TEST_F(PlotData, AggregatesRepeatsAndSorts) {
    const auto csv = scratch("gap.csv");
    const auto s = emit_plot_data(path_, {"t2", "gap", {"scheme"}, PlotTransform::none}, csv);
    EXPECT_EQ(s.rows, 4u);
    EXPECT_EQ(s.selected, 12u);
    const auto lines = lines_of(csv);
    ASSERT_EQ(lines.size(), 5u);
    EXPECT_EQ(lines[0], "scheme,x,y,y_se");
    EXPECT_EQ(lines[1].rfind("label,1000,", 0), 0u);
    EXPECT_EQ(lines[2].rfind("label,10000,", 0), 0u);
    EXPECT_EQ(lines[3].rfind("surrogate,1000,", 0), 0u);

    std::stringstream row(lines[1]);
    std::string group, x, y, se;
    std::getline(row, group, ',');
    std::getline(row, x, ',');
    std::getline(row, y, ',');
    std::getline(row, se, ',');
    EXPECT_NEAR(std::stod(y), 2e-3 + 1e-4, 1e-12);
    EXPECT_NEAR(std::stod(se), 1e-4 / std::sqrt(3.0), 1e-12);
}

TEST_F(PlotData, LogTransformCountsDroppedRows) {
    const auto csv = scratch("signed.csv");
    const auto s = emit_plot_data(path_, {"t2", "signed", {}, PlotTransform::log}, csv);
    EXPECT_EQ(s.dropped, 2u);
    EXPECT_EQ(s.rows, 1u);
    const auto lines = lines_of(csv);
    ASSERT_EQ(lines.size(), 2u);
    EXPECT_EQ(lines[0], "x,y,y_se");
    std::stringstream row(lines[1]);
    std::string x, y, se;
    std::getline(row, x, ',');
    std::getline(row, y, ',');
    std::getline(row, se, ',');
    EXPECT_NEAR(std::stod(y), std::log(4.0), 1e-12);
    EXPECT_NEAR(std::stod(se), 0.1, 1e-12);
    EXPECT_FALSE(s.warnings.empty());
}

TEST_F(PlotData, FieldAsY) {
    const auto csv = scratch("field.csv");
    const auto s = emit_plot_data(path_, {"seed", "t2", {}, PlotTransform::none}, csv);
    EXPECT_EQ(s.rows, 3u);
}

TEST_F(PlotData, UnknownFieldListsAlternatives) {
    try {
        emit_plot_data(path_, {"t2", "gapp", {}, PlotTransform::none}, scratch("x.csv"));
        FAIL();
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("gapp"), std::string::npos);
        EXPECT_NE(msg.find("scheme"), std::string::npos);
        EXPECT_NE(msg.find("gap"), std::string::npos);
    }
    EXPECT_THROW(emit_plot_data(path_, {"t2", "gap", {"colour"}, PlotTransform::none}, scratch("x.csv")),
                 std::invalid_argument);
}

TEST(Plot, EmptySelectionWritesHeaderOnly) {
    const auto path = scratch("empty.jsonl");
    { RecordWriter w(path, "exp", "h"); }
    const auto csv = scratch("empty.csv");
    const auto s = emit_plot_data(path, {"t2", "gap", {"scheme"}, PlotTransform::none}, csv);
    EXPECT_EQ(s.rows, 0u);
    EXPECT_FALSE(s.warnings.empty());
    EXPECT_EQ(lines_of(csv), std::vector<std::string>{"scheme,x,y,y_se"});
}
