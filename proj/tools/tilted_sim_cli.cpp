/*
   Copyright 2026 The tilted-sim Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

        http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

// tilted-sim <command> --config <path> --out <dir> [--workers N] [--seed-offset K]
// tilted-sim plot --records <file> --x <field> --y <field> [--group <field>...] [--transform log] --out <csv>
//
// Exit status: 0 success, 1 failed acceptance check, 2 invalid configuration
// or arguments, 3 any other error.

#include <CLI11.hpp>

#include <iostream>
#include <map>

#include "tilted_sim/commands.hpp"
#include "tilted_sim/config.hpp"
#include "tilted_sim/parallel.hpp"
#include "tilted_sim/records.hpp"

namespace {

struct StudyArgs {
    std::string config;
    std::string out = "results";
    unsigned workers = 0;
    std::uint64_t seed_offset = 0;
};

int run_study(const std::string& command, const StudyArgs& a) {
    tilted_sim::ExperimentConfig cfg;
    try {
        cfg = tilted_sim::load_config(a.config);
    } catch (const tilted_sim::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    }
    tilted_sim::RunOptions opt;
    opt.out_dir = a.out;
    opt.workers = a.workers ? a.workers : tilted_sim::default_workers();
    opt.seed_offset = a.seed_offset;
    const auto s = tilted_sim::run_experiment(cfg, command, opt, std::cerr);
    std::cerr << command << ": " << s.records_written << " records -> " << s.records.string() << '\n';
    for (const auto& p : s.plots) std::cerr << "  plot data -> " << p.string() << '\n';
    return s.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tilted-sim: two-stage reward modeling in the Gaussian single-index model"};
    app.require_subcommand(1);

    StudyArgs study;
    std::map<std::string, CLI::App*> studies;
    const std::map<std::string, std::string> help{
        {"exponents", "information/generative exponents and teacher signals"},
        {"recover", "first-stage spherical SGD trajectories"},
        {"scaling", "weak-recovery time over the (d, beta1) grid"},
        {"ridge", "second-stage weighted ridge fits and label-shift offsets"},
        {"value-gap", "value-gap decomposition of the learned tilted policy"},
        {"coverage", "coverage functional and bridge bound"},
        {"admissible", "admissible deployment temperatures"},
        {"verify-all", "run the acceptance suite"},
    };
    for (auto name : tilted_sim::kCommands) {
        auto* sub = app.add_subcommand(std::string(name), help.at(std::string(name)));
        sub->add_option("--config", study.config, "experiment configuration (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", study.out, "output directory")->capture_default_str();
        sub->add_option("--workers", study.workers, "worker threads (default: TILTED_SIM_WORKERS or 1)");
        sub->add_option("--seed-offset", study.seed_offset, "added to every seed")->capture_default_str();
        studies[std::string(name)] = sub;
    }

    std::string records, x, y, out_csv, transform = "none";
    std::vector<std::string> groups;
    auto* plot = app.add_subcommand("plot", "tidy CSV (group..., x, y, y_se) from a records file");
    plot->add_option("--records", records, "JSON-lines records")->required()->check(CLI::ExistingFile);
    plot->add_option("--x", x, "x field")->required();
    plot->add_option("--y", y, "metric name or field")->required();
    plot->add_option("--group", groups, "grouping fields");
    plot->add_option("--transform", transform, "none or log")->check(CLI::IsMember({"none", "log"}));
    plot->add_option("--out", out_csv, "output CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (plot->parsed()) {
            tilted_sim::PlotSpec spec{x, y, groups,
                                      transform == "log" ? tilted_sim::PlotTransform::log : tilted_sim::PlotTransform::none};
            const auto s = tilted_sim::emit_plot_data(records, spec, out_csv);
            for (const auto& warning : s.warnings) std::cerr << "warning: " << warning << '\n';
            std::cerr << s.rows << " rows -> " << out_csv << '\n';
            return 0;
        }
        for (const auto& [name, sub] : studies)
            if (sub->parsed()) return run_study(name, study);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 3;
}
