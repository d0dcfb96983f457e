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

#include <array>
#include <stdexcept>
#include <string>
#include <string_view>

#include "polynomial.hpp"

namespace tilted_sim {

/// Named target links covering (p_gen, I*) ∈ {(1,1), (2,1), (2,2)} and a
/// two-maximizer case.
inline constexpr std::array<std::string_view, 4> kPresetNames{"quad-down", "shifted-quad", "neg-he4", "double-well"};

inline PolynomialLink link_preset(std::string_view name) {
    if (name == "quad-down") return PolynomialLink{0.0, 0.0, -1.0};
    if (name == "shifted-quad") return PolynomialLink{0.0, 2.0, -1.0};
    if (name == "neg-he4") return PolynomialLink{-3.0, 0.0, 6.0, 0.0, -1.0};
    if (name == "double-well") return PolynomialLink{-1.0, 0.0, 2.0, 0.0, -1.0};
    throw std::invalid_argument("unknown link preset '" + std::string(name) + "'");
}

inline bool is_preset(std::string_view name) {
    for (auto n : kPresetNames)
        if (n == name) return true;
    return false;
}

/// Student activation used with a preset target when none is configured.
/// Chosen so that V_{p_gen-1} != 0. For the even targets, -u² has V_k = 0
/// for k >= 2, so no higher Hermite term opposes the leading drift.
inline std::string_view default_activation_name(std::string_view link_name) {
    if (link_name == "shifted-quad") return "shifted-quad";
    return "quad-down";
}

}  // namespace tilted_sim
