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

// Invariant suites run by `rfqkd selftest`.

#pragma once

#include "rfqkd/channel.hpp"
#include "rfqkd/detection.hpp"
#include "rfqkd/hilbert.hpp"
#include "rfqkd/protocol.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace rfqkd::selftest {

struct SuiteResult {
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

/// Replaceable pieces, so a negative control can plant a bug.
struct Hooks {
    std::function<DeltaParams(const CollectiveRotation &)> delta = delta_params;
};

inline constexpr std::uint64_t kSelftestSeed = 7;

inline SuiteResult delta_norm(const Hooks &hooks) {
    std::mt19937_64 rng(kSelftestSeed);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        worst = std::max(worst, std::abs(hooks.delta(haar_sample(rng)).norm_squared() - 1.0));
    }
    std::ostringstream d;
    d << "max | |d1|^2+|d2|^2+|d3|^2 - 1 | = " << worst << " over 1000 Haar rotations";
    return {"delta_norm", worst <= 1e-10, d.str()};
}

/// The logical state carried into the twice-tagged equal-bin sector.
inline PairState tagged_logical(LogicalState l) {
    using modes::H;
    using modes::V;
    auto [alpha, beta] = logical_coefficients(l);
    return pure_state({{{H(1), V(1)}, alpha}, {{V(1), H(1)}, beta}});
}

inline SuiteResult dfs_preservation(const Hooks &) {
    std::mt19937_64 rng(kSelftestSeed + 1);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const auto u = haar_sample(rng);
        for (LogicalState l : kLogicalStates) {
            for (BChoice b : {BChoice::identity, BChoice::flip}) {
                const auto s = bob_pipeline(alice_pipeline(prepare(l), b, u), PhaseMask::phi_0);
                const auto kept = project(s, equal_bin_sector());
                if (!kept.state || kept.probability < 1e-9) {
                    continue;  // nothing survives; fidelity undefined
                }
                worst = std::max(worst, std::abs(1.0 - fidelity(kept.state->normalized(), tagged_logical(l))));
            }
        }
    }
    std::ostringstream d;
    d << "max |1 - F| = " << worst << " over 100 rotations x 4 states x 2 B choices";
    return {"dfs_preservation", worst <= 1e-10, d.str()};
}

inline SuiteResult haar_average(const Hooks &) {
    std::mt19937_64 rng(kSelftestSeed + 2);
    constexpr int n = 100000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        sum += survival_probability(haar_sample(rng));
    }
    const double mean = sum / n;
    std::ostringstream d;
    d << "mean survival = " << mean << " (target 1/3 +- 0.005)";
    return {"haar_average", std::abs(mean - 1.0 / 3.0) <= 0.005, d.str()};
}

/// Largest |rho'| element connecting S to its complement, or the two
/// complement modes to each other.
inline double dephased_cross_coherence(const PairDensity &rho_avg) {
    using modes::H;
    using modes::V;
    const ModePair in_s[] = {{H(0), V(1)}, {V(1), H(0)}};
    const ModePair out_s[] = {{H(0), H(0)}, {V(1), V(1)}};
    double worst = 0.0;
    for (const auto &a : in_s) {
        for (const auto &b : out_s) {
            worst = std::max({worst, std::abs(rho_avg.element(a, b)), std::abs(rho_avg.element(b, a))});
        }
    }
    worst = std::max({worst, std::abs(rho_avg.element(out_s[0], out_s[1])),
                      std::abs(rho_avg.element(out_s[1], out_s[0]))});
    return worst;
}

template <class URBG>
PairDensity random_four_amplitude_mixture(URBG &rng, int components = 3) {
    using modes::H;
    using modes::V;
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<std::pair<PairDensity, double>> terms;
    std::vector<double> w(static_cast<std::size_t>(components));
    double wsum = 0.0;
    for (auto &x : w) {
        x = std::abs(g(rng)) + 1e-3;
        wsum += x;
    }
    for (int k = 0; k < components; ++k) {
        auto amp = [&] { return cplx{g(rng), g(rng)}; };
        auto s = pure_state({{{H(0), V(1)}, amp()}, {{V(1), H(0)}, amp()}, {{H(0), H(0)}, amp()}, {{V(1), V(1)}, amp()}});
        terms.emplace_back(PairDensity::from_pure(s), w[static_cast<std::size_t>(k)] / wsum * (1.0 - 1e-12));
    }
    return density_average(terms);
}

inline SuiteResult dephasing(const Hooks &) {
    std::mt19937_64 rng(kSelftestSeed + 3);
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
        worst = std::max(worst, dephased_cross_coherence(phase_mask_average(random_four_amplitude_mixture(rng))));
    }
    std::ostringstream d;
    d << "max cross-sector |rho'| = " << worst << " over 20 random mixtures";
    return {"dephasing", worst <= 1e-12, d.str()};
}

inline SuiteResult oracle_agreement(const Hooks &) {
    std::mt19937_64 rng(kSelftestSeed + 4);
    const NoiseConfig cfg = NoiseConfig::short_fiber();
    const auto sweep = five_setting_sweep();
    bool ok = true;
    std::ostringstream d;
    for (int k : {0, 2, 4}) {
        const auto u = from_waveplates(sweep[static_cast<std::size_t>(k)]);
        for (Randomization scheme : {Randomization::none, Randomization::flip_half}) {
            const double duration = 60.0;
            const auto t = simulate_session(cfg, u, scheme, duration, rng);
            const double survival = randomized_survival(u, scheme);
            const double rate_expected = expected_conclusive_rate(cfg, survival);
            const double rate_sigma = std::sqrt(rate_expected * duration) / duration;
            const double rate = static_cast<double>(t.conclusive) / duration;
            bool row_ok = std::abs(rate - rate_expected) <= 3.0 * rate_sigma;
            if (t.sifted > 0) {
                const double q_expected = expected_qber(cfg, survival);
                const double q = static_cast<double>(t.errors) / static_cast<double>(t.sifted);
                const double q_sigma = std::sqrt(q_expected * (1.0 - q_expected) / static_cast<double>(t.sifted));
                row_ok = row_ok && std::abs(q - q_expected) <= 3.0 * q_sigma;
            }
            ok = ok && row_ok;
            d << "[k=" << k << " " << to_string(scheme) << (row_ok ? " ok" : " FAIL") << "] ";
        }
    }
    return {"oracle_agreement", ok, d.str()};
}

/// Runs every suite, printing one line each with its timing. Returns true
/// iff all passed.
inline bool run_all(std::ostream &log, const Hooks &hooks = {}) {
    using Suite = SuiteResult (*)(const Hooks &);
    const Suite suites[] = {delta_norm, dfs_preservation, haar_average, dephasing, oracle_agreement};
    bool all = true;
    for (Suite suite : suites) {
        const auto start = std::chrono::steady_clock::now();
        SuiteResult r = suite(hooks);
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        all = all && r.passed;
        log << (r.passed ? "[PASS] " : "[FAIL] ") << r.name << " (" << r.seconds << " s): " << r.detail << "\n";
    }
    return all;
}

}  // namespace rfqkd::selftest
