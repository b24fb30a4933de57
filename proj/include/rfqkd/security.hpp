// Copyright 2026 The rfqkd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Asymptotic secret-key fraction per conclusive result.
//
// Results projected outside S are conceded to the eavesdropper; results
// inside S are charged H(e_x^S). The inside-S error rate is not observable
// directly and is bounded from
//     e_x = p_S * e_x^S + (1 - p_S) * e_x^out
// with e_x^out = 1/2, since the dephased outside-S population gives random
// bits.

#pragma once

#include "rfqkd/tally.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace rfqkd {

inline constexpr double kOutsideSErrorRate = 0.5;

inline double binary_entropy(double p) {
    if (!(p >= 0.0 && p <= 1.0)) {
        throw std::domain_error("binary_entropy: p must lie in [0, 1], got " + std::to_string(p));
    }
    if (p == 0.0 || p == 1.0) {
        return 0.0;
    }
    return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

inline double bound_exS(double p_S, double e_x) {
    if (!(p_S > 0.0 && p_S <= 1.0)) {
        throw std::domain_error("bound_exS: p_S must lie in (0, 1]");
    }
    if (!(e_x >= 0.0 && e_x <= 0.5)) {
        throw std::domain_error("bound_exS: e_x must lie in [0, 1/2]");
    }
    return std::clamp((e_x - (1.0 - p_S) * kOutsideSErrorRate) / p_S, 0.0, 0.5);
}

/// p_S - H(e_x) - p_S * H(e_x^S). Negative values are returned unchanged.
inline double key_rate(double p_S, double e_x) {
    return p_S - binary_entropy(e_x) - p_S * binary_entropy(bound_exS(p_S, e_x));
}

struct SecurityReport {
    double p_S = 0.0;
    double e_x = 0.0;
    double e_x_S = 0.0;
    double rate_fraction = 0.0;
    double secret_bits_per_s = 0.0;
};

/// Estimates from a session's test sample and sifted key. A measured QBER
/// above 1/2 (statistical overshoot) is capped at 1/2.
inline SecurityReport report(const TallyCounts &t) {
    t.validate();
    if (t.sifted <= 0) {
        throw std::invalid_argument("report: no sifted results");
    }
    if (t.pS_sample_total <= 0) {
        throw std::invalid_argument("report: empty p^S sample");
    }
    if (t.pS_sample_inS <= 0) {
        throw std::domain_error("report: no test outcome inside S");
    }
    if (!(t.duration_s > 0.0)) {
        throw std::invalid_argument("report: session duration must be positive");
    }
    SecurityReport r;
    r.p_S = static_cast<double>(t.pS_sample_inS) / static_cast<double>(t.pS_sample_total);
    r.e_x = std::min(0.5, static_cast<double>(t.errors) / static_cast<double>(t.sifted));
    r.e_x_S = bound_exS(r.p_S, r.e_x);
    r.rate_fraction = key_rate(r.p_S, r.e_x);
    r.secret_bits_per_s = r.rate_fraction * static_cast<double>(t.sifted) / t.duration_s;
    return r;
}

}  // namespace rfqkd
