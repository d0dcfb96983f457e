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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "rng.hpp"

namespace tilted_sim::stats {

inline double mean(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("mean of empty sample");
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Unbiased sample variance; zero for a single observation.
inline double variance(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

inline double standard_error(std::span<const double> v) {
    return v.size() < 2 ? 0.0 : std::sqrt(variance(v) / static_cast<double>(v.size()));
}

inline double median(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("median of empty sample");
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double hi = v[mid];
    if (v.size() % 2) return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
};

/// Ordinary least-squares line through (x, y).
inline LineFit least_squares_line(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("least_squares_line needs >= 2 paired points");
    const double mx = mean(x), my = mean(y);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    if (sxx == 0.0) throw std::invalid_argument("least_squares_line: degenerate abscissae");
    return {sxy / sxx, my - sxy / sxx * mx};
}

/// Slope of log y against log x.
inline double log_log_slope(std::span<const double> x, std::span<const double> y) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i) {
        lx.push_back(std::log(x[i]));
        ly.push_back(std::log(std::abs(y[i])));
    }
    return least_squares_line(lx, ly).slope;
}

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

/// Percentile bootstrap interval for the median. One observation gives a
/// degenerate interval at that value.
inline Interval bootstrap_median_ci(const std::vector<double>& v, std::uint64_t seed, int resamples = 1000,
                                    double level = 0.95) {
    if (v.empty()) throw std::invalid_argument("bootstrap of empty sample");
    if (v.size() == 1) return {v[0], v[0]};
    RandomStream rng(seed, 0xB007);
    std::vector<double> meds;
    meds.reserve(static_cast<std::size_t>(resamples));
    std::vector<double> draw(v.size());
    for (int r = 0; r < resamples; ++r) {
        for (auto& x : draw) x = v[static_cast<std::size_t>(rng.uniform01() * static_cast<double>(v.size())) % v.size()];
        meds.push_back(median(draw));
    }
    std::sort(meds.begin(), meds.end());
    const double a = 0.5 * (1.0 - level);
    auto at = [&](double q) {
        const auto idx = static_cast<std::size_t>(std::clamp(q * static_cast<double>(meds.size() - 1), 0.0,
                                                             static_cast<double>(meds.size() - 1)));
        return meds[idx];
    };
    return {at(a), at(1.0 - a)};
}

inline std::vector<double> log_space(double lo, double hi, std::size_t n) {
    std::vector<double> out(n);
    if (n == 1) {
        out[0] = lo;
        return out;
    }
    for (std::size_t i = 0; i < n; ++i)
        out[i] = std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * static_cast<double>(i) / static_cast<double>(n - 1));
    return out;
}

}  // namespace tilted_sim::stats
