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

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <CLI11.hpp>

#include <iostream>

#include "tilted_sim/acceptance.hpp"
#include "tilted_sim/parallel.hpp"

int main(int argc, char** argv) {
    CLI::App app{"tilted-sim acceptance suite"};
    tilted_sim::AcceptanceOptions opt;
    opt.workers = tilted_sim::default_workers();
    std::vector<int> only;
    app.add_option("--workers", opt.workers, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--only", only, "run only these criterion ids")->check(CLI::Range(1, 14));
    CLI11_PARSE(app, argc, argv);
    opt.only.insert(only.begin(), only.end());

    std::size_t failed = 0;
    const auto results = tilted_sim::run_acceptance(opt, [](const tilted_sim::CheckResult& r) {
        tilted_sim::print_check(std::cout, r);
    });
    for (const auto& r : results) failed += !r.passed;
    std::cout << results.size() - failed << "/" << results.size() << " criteria passed\n";
    return failed ? 1 : 0;
}
