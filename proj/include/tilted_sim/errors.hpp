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

#include <sstream>
#include <stdexcept>
#include <string>

namespace tilted_sim {

/// Base class for numerical failures raised by the library.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A refinement loop did not settle; carries the last two estimates.
class ConvergenceError : public NumericalError {
public:
    ConvergenceError(const std::string& what, double previous, double current)
        : NumericalError(format(what, previous, current)), previous_(previous), current_(current) {}

    double previous() const noexcept { return previous_; }
    double current() const noexcept { return current_; }

private:
    static std::string format(const std::string& what, double a, double b) {
        std::ostringstream os;
        os.precision(17);
        os << what << " (previous=" << a << ", current=" << b << ")";
        return os.str();
    }

    double previous_;
    double current_;
};

}  // namespace tilted_sim
