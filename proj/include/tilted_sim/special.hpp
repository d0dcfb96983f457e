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

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace tilted_sim {

inline double normal_pdf(double u) { return std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi); }

inline double log_normal_pdf(double u) { return -0.5 * u * u - 0.5 * std::log(2.0 * std::numbers::pi); }

/// CDF of the chi-square law with `dof` degrees of freedom. dof = 0 is the
/// point mass at zero.
inline double chi_square_cdf(double x, int dof) {
    if (dof < 0) throw std::invalid_argument("chi_square_cdf: negative degrees of freedom");
    if (x <= 0.0) return dof == 0 && x == 0.0 ? 1.0 : 0.0;
    if (dof == 0) return 1.0;
    if (std::isinf(x)) return 1.0;
    return boost::math::gamma_p(0.5 * dof, 0.5 * x);
}

/// Upper tail 1 - F, computed directly to keep relative accuracy in the tail.
inline double chi_square_sf(double x, int dof) {
    if (dof < 0) throw std::invalid_argument("chi_square_sf: negative degrees of freedom");
    if (x <= 0.0) return dof == 0 && x == 0.0 ? 0.0 : 1.0;
    if (dof == 0 || std::isinf(x)) return 0.0;
    return boost::math::gamma_q(0.5 * dof, 0.5 * x);
}

}  // namespace tilted_sim
