#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>
#include <stdexcept>

#include "tilted_sim/commands.hpp"

using namespace tilted_sim;

namespace {

std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "tilted_sim_commands_test" / name;
    std::filesystem::remove_all(dir);
    return dir;
}

// Records without the timestamp, in file order.
std::vector<std::string> stripped(const std::filesystem::path& p) {
    std::vector<std::string> out;
    for (const auto& r : read_records(p)) {
        auto j = to_json(r);
        j.erase("timestamp");
        out.push_back(j.dump());
    }
    return out;
}

double metric(const std::vector<ResultRecord>& recs, const std::string& name) {
    for (const auto& r : recs)
        if (r.metric == name) return r.value;
    throw std::runtime_error("no metric " + name);
}

ExperimentConfig tiny_pipeline() {
    return parse_config(Json::parse(R"({
        "experiment": "tiny",
        "link": "quad-down",
        "seeds": [0, 1],
        "recovery": {"d": 12, "neurons": 4, "epsilon": 0.05, "t_max": 200000,
                     "init": "exact_overlap", "compatible_readout": true},
        "ridge": {"t2": [2000], "beta2": [0.5], "schemes": ["label", "surrogate"], "c_lambda": 0.01, "radius": 3.0},
        "policy": {"mc_samples": 20000, "mc_shard": 4096, "t_points": 5}
    })"));
}

}  // namespace

TEST(Commands, ExponentsOfNegHe4) {
    const auto c = parse_config(Json::parse(R"({"experiment":"e","link":"neg-he4","exponents":{"beta1s":[1,10]}})"));
    RunOptions opt;
    opt.out_dir = scratch("exponents");
    std::ostringstream log;
    const auto s = run_experiment(c, "exponents", opt, log);
    EXPECT_EQ(s.exit_code, 0);
    EXPECT_EQ(s.failed_cells, 0u);
    const auto recs = read_records(s.records);
    EXPECT_EQ(metric(recs, "ie"), 4.0);
    EXPECT_EQ(metric(recs, "ge"), 2.0);
    EXPECT_EQ(metric(recs, "i_star"), 2.0);
    for (const auto& r : recs) {
        EXPECT_EQ(r.experiment, "e");
        EXPECT_EQ(r.config_hash, config_hash(c));
    }
}

TEST(Commands, FailingCellBecomesErrorRecord) {
    const auto path = scratch("cells") / "cells.jsonl";
    RecordWriter w(path, "cells", "h");
    std::vector<CellOutput> cells;
    for (int i = 0; i < 6; ++i) cells.emplace_back(Json{{"cell", i}});
    const auto failed = commands::run_cells(cells, 3, w, [](std::size_t i, CellOutput& out) {
        out.add("before", static_cast<double>(i));
        if (i == 2) throw NumericalError("singular");
        out.add("after", static_cast<double>(i));
    });
    EXPECT_EQ(failed, 1u);
    const auto recs = read_records(path);
    ASSERT_EQ(recs.size(), 12u);
    for (std::size_t k = 0; k < recs.size(); ++k) EXPECT_EQ(recs[k].metadata["cell"], static_cast<int>(k / 2));
    EXPECT_EQ(recs[5].metric, "error");
    EXPECT_EQ(recs[5].metadata["error"], "singular");
    EXPECT_EQ(recs[6].metric, "before");
}

TEST(Commands, OutputDoesNotDependOnWorkers) {
    const auto c = tiny_pipeline();
    std::ostringstream log;
    RunOptions one, many;
    one.out_dir = scratch("workers1");
    many.out_dir = scratch("workers4");
    one.workers = 1;
    many.workers = 4;
    const auto a = run_experiment(c, "value-gap", one, log);
    const auto b = run_experiment(c, "value-gap", many, log);
    EXPECT_GT(a.records_written, 0u);
    EXPECT_EQ(stripped(a.records), stripped(b.records));
    ASSERT_FALSE(a.plots.empty());
    EXPECT_TRUE(std::filesystem::exists(a.plots.front()));
}

TEST(Commands, SeedOffsetChangesSeedsAndHash) {
    const auto c = tiny_pipeline();
    std::ostringstream log;
    RunOptions base, shifted;
    base.out_dir = scratch("offset0");
    shifted.out_dir = scratch("offset5");
    shifted.seed_offset = 5;
    const auto a = read_records(run_experiment(c, "ridge", base, log).records);
    const auto b = read_records(run_experiment(c, "ridge", shifted, log).records);
    EXPECT_NE(a.front().config_hash, b.front().config_hash);
    EXPECT_EQ(a.front().metadata["seed"], 0);
    EXPECT_EQ(b.front().metadata["seed"], 5);
}

TEST(Commands, UnknownCommandThrows) {
    const auto c = tiny_pipeline();
    std::ostringstream log;
    RunOptions opt;
    opt.out_dir = scratch("unknown");
    EXPECT_THROW(run_experiment(c, "fit", opt, log), std::invalid_argument);
    EXPECT_TRUE(is_command("value-gap"));
}

TEST(Commands, AdmissibleRejectsUniformScheme) {
    auto c = tiny_pipeline();
    c.ridge.schemes = {WeightRule::uniform};
    std::ostringstream log;
    RunOptions opt;
    opt.out_dir = scratch("uniform");
    const auto s = run_experiment(c, "admissible", opt, log);
    EXPECT_GT(s.failed_cells, 0u);
}
