#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "tilted_sim/config.hpp"

using namespace tilted_sim;

namespace {

std::string path_of_error(const Json& j) {
    try {
        parse_config(j);
    } catch (const ConfigError& e) {
        return e.path();
    }
    return "";
}

}  // namespace

TEST(Config, DefaultsExpandAndRoundTrip) {
    const auto c = parse_config(Json::parse(R"({"experiment": "t", "link": "neg-he4"})"));
    EXPECT_EQ(c.link.name, "neg-he4");
    EXPECT_EQ(c.recovery.d, 64);
    const auto again = parse_config(to_json(c));
    EXPECT_EQ(config_hash(c), config_hash(again));
}

TEST(Config, HashIgnoresKeyOrderAndWhitespace) {
    const auto a = parse_config(Json::parse(R"({"experiment":"t","link":"quad-down","recovery":{"d":32,"neurons":4}})"));
    const auto b = parse_config(Json::parse(R"({
        "recovery": { "neurons": 4,   "d": 32 },
        "link": "quad-down",
        "experiment": "t"
    })"));
    EXPECT_EQ(config_hash(a), config_hash(b));
    EXPECT_EQ(config_hash(a).size(), 16u);

    const auto c = parse_config(Json::parse(R"({"experiment":"t","link":"quad-down","recovery":{"d":33,"neurons":4}})"));
    EXPECT_NE(config_hash(a), config_hash(c));
}

TEST(Config, ExplicitDefaultHashesLikeOmitted) {
    const auto a = parse_config(Json::parse(R"({"experiment":"t","link":"quad-down"})"));
    const auto b = parse_config(Json::parse(R"({"experiment":"t","link":"quad-down","tau":0.0,"recovery":{"d":64}})"));
    EXPECT_EQ(config_hash(a), config_hash(b));
}

TEST(Config, Fnv1aKnownValues) {
    EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ull);
    EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cull);
    EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ull);
}

TEST(Config, ErrorsNameTheField) {
    EXPECT_EQ(path_of_error(Json::parse(R"({"experiment":"t"})")), "link");
    EXPECT_EQ(path_of_error(Json::parse(R"({"experiment":"t","link":"nope"})")), "link");
    EXPECT_EQ(path_of_error(Json::parse(R"({"experiment":"t","link":"quad-down","recovery":{"d":1}})")), "recovery.d");
    EXPECT_EQ(path_of_error(Json::parse(R"({"experiment":"t","link":"quad-down","ridge":{"beta2":[1.5]}})")),
              "ridge.beta2[0]");
    EXPECT_EQ(path_of_error(Json::parse(R"({"experiment":"t","link":"quad-down","seeds":[1,1]})")), "seeds");
    EXPECT_EQ(path_of_error(Json::parse(R"({"experiment":"t","link":"quad-down","tau":-1})")), "tau");
}

TEST(Config, UnknownKeysAreRejected) {
    const auto top = path_of_error(Json::parse(R"({"experiment":"t","link":"quad-down","bogus":1})"));
    EXPECT_EQ(top, "bogus");
    const auto nested = path_of_error(Json::parse(R"({"experiment":"t","link":"quad-down","policy":{"betastar":0.3}})"));
    EXPECT_EQ(nested, "policy.betastar");
}

TEST(Config, CustomLinkCoefficients) {
    const auto c = parse_config(Json::parse(R"({"experiment":"t","link":[0,0,2,0,-1]})"));
    EXPECT_EQ(c.link.name, "custom");
    EXPECT_DOUBLE_EQ(c.link.poly(1.0), 1.0);
    EXPECT_EQ(c.activation.name, "quad-down");
}

TEST(Config, SeedOffsetShiftsAllSeeds) {
    auto c = parse_config(Json::parse(R"({"experiment":"t","link":"quad-down","seeds":[0,3],
                                          "admissible":{"calibration_seeds":[10]}})"));
    const auto before = config_hash(c);
    apply_seed_offset(c, 5);
    EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{5, 8}));
    EXPECT_EQ(c.admissible.calibration_seeds, (std::vector<std::uint64_t>{15}));
    EXPECT_NE(config_hash(c), before);
}

TEST(Config, LoadAcceptsComments) {
    const auto path = std::filesystem::temp_directory_path() / "tilted_sim_config_comments.json";
    {
        std::ofstream out(path);
        out << "{\n  // target\n  \"experiment\": \"t\",\n  \"link\": \"double-well\" /* preset */\n}\n";
    }
    EXPECT_EQ(load_config(path.string()).link.name, "double-well");
    std::filesystem::remove(path);
    EXPECT_THROW(load_config(path.string()), ConfigError);
}

TEST(Config, SampleConfigsParse) {
    const std::filesystem::path dir = TILTED_SIM_SOURCE_DIR "/configs";
    std::size_t n = 0;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().extension() != ".json") continue;
        SCOPED_TRACE(entry.path().string());
        EXPECT_NO_THROW(load_config(entry.path().string()));
        ++n;
    }
    EXPECT_GT(n, 0u);
}
