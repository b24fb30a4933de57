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

// Counting statistics on top of the exact protocol: emission, loss,
// accidental coincidences, imperfect preparation and reduced fringe
// visibility.
//
// Rate conventions used throughout:
//   ceiling      = pair_rate * apparatus_efficiency * T^2       (T per photon)
//   true rate    C = ceiling * survival
//   sifted true  C_s = C / 2
//   accidentals  A = 2 * singles^2 * window, counted against the sifted key;
//                before sifting they arrive at 2A with uniform bases.
//   QBER         (e_true * C_s + A / 2) / (C_s + A)
// A fraction ps_sample_fraction of all coincidences is diverted to the p^S
// test and never reaches the key.

#pragma once

#include "rfqkd/channel.hpp"
#include "rfqkd/protocol.hpp"
#include "rfqkd/tally.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace rfqkd {

struct NoiseConfig {
    double pair_rate_hz = 12000.0;
    double apparatus_efficiency = 140.0 / 12000.0;
    double fiber_length_km = 0.004;
    double atten_db_per_km = 4.8;
    double extra_loss_db = 0.0;  // per photon
    double singles_rate_hz = 2000.0;
    double window_ns = 3.0;
    double source_error_prob = 0.04;
    double visibility = 0.95;
    double outside_s_weight = 0.0;  // fraction of coincidences replaced by outside-S states
    double ps_sample_fraction = 0.05;

    static NoiseConfig short_fiber();
    static NoiseConfig one_km();
    static NoiseConfig noiseless();

    void validate() const {
        auto fail = [](const std::string &what) { throw std::invalid_argument("NoiseConfig: " + what); };
        auto finite_nonneg = [&](double v, const char *name) {
            if (!std::isfinite(v) || v < 0.0) fail(std::string(name) + " must be finite and nonnegative");
        };
        auto probability = [&](double v, const char *name) {
            if (!(v >= 0.0 && v <= 1.0)) fail(std::string(name) + " must lie in [0, 1]");
        };
        finite_nonneg(pair_rate_hz, "pair_rate_hz");
        finite_nonneg(fiber_length_km, "fiber_length_km");
        finite_nonneg(atten_db_per_km, "atten_db_per_km");
        finite_nonneg(extra_loss_db, "extra_loss_db");
        finite_nonneg(singles_rate_hz, "singles_rate_hz");
        finite_nonneg(window_ns, "window_ns");
        if (!(apparatus_efficiency > 0.0 && apparatus_efficiency <= 1.0)) fail("apparatus_efficiency must lie in (0, 1]");
        if (!(visibility > 0.0 && visibility <= 1.0)) fail("visibility must lie in (0, 1]");
        probability(source_error_prob, "source_error_prob");
        probability(outside_s_weight, "outside_s_weight");
        if (!(ps_sample_fraction >= 0.0 && ps_sample_fraction < 1.0)) fail("ps_sample_fraction must lie in [0, 1)");
    }
};

/// Per-photon transmittance 10^(-(L * alpha + extra) / 10).
inline double transmittance(const NoiseConfig &cfg) {
    return std::pow(10.0, -(cfg.fiber_length_km * cfg.atten_db_per_km + cfg.extra_loss_db) / 10.0);
}

inline double pair_transmittance(const NoiseConfig &cfg) {
    const double t = transmittance(cfg);
    return t * t;
}

/// Post-selected coincidence rate at unit survival, before the p^S diversion.
inline double coincidence_ceiling(const NoiseConfig &cfg) {
    return cfg.pair_rate_hz * cfg.apparatus_efficiency * pair_transmittance(cfg);
}

inline double efficiency_for_ceiling(const NoiseConfig &cfg, double ceiling_hz) {
    return ceiling_hz / (cfg.pair_rate_hz * pair_transmittance(cfg));
}

/// Extra per-photon loss (dB) that brings the ceiling down to `ceiling_hz`.
inline double extra_loss_for_ceiling(const NoiseConfig &cfg, double ceiling_hz) {
    const double total_pair_db = -10.0 * std::log10(ceiling_hz / (cfg.pair_rate_hz * cfg.apparatus_efficiency));
    return total_pair_db / 2.0 - cfg.fiber_length_km * cfg.atten_db_per_km;
}

inline NoiseConfig NoiseConfig::short_fiber() {
    NoiseConfig cfg;
    cfg.fiber_length_km = 0.004;
    cfg.extra_loss_db = 0.0;
    cfg.apparatus_efficiency = efficiency_for_ceiling(cfg, 140.0);
    return cfg;
}

inline NoiseConfig NoiseConfig::one_km() {
    NoiseConfig cfg = short_fiber();
    const double short_ceiling = coincidence_ceiling(cfg);
    cfg.fiber_length_km = 1.0;
    cfg.extra_loss_db = 0.0;
    cfg.extra_loss_db = extra_loss_for_ceiling(cfg, short_ceiling / 100.0);
    return cfg;
}

inline NoiseConfig NoiseConfig::noiseless() {
    NoiseConfig cfg = short_fiber();
    cfg.singles_rate_hz = 0.0;
    cfg.source_error_prob = 0.0;
    cfg.visibility = 1.0;
    cfg.outside_s_weight = 0.0;
    return cfg;
}

/// Accidental coincidence rate (Hz): 2 * singles^2 * window.
inline double accidental_rate(const NoiseConfig &cfg) {
    return 2.0 * cfg.singles_rate_hz * cfg.singles_rate_hz * cfg.window_ns * 1e-9;
}

/// Bit error probability of a genuine post-selected pair: preparation flip
/// and fringe-contrast flip combine as independent flips; outside-S
/// replacements give random bits.
inline double true_error_probability(const NoiseConfig &cfg) {
    const double e_vis = 0.5 * (1.0 - cfg.visibility);
    const double e_in = cfg.source_error_prob + e_vis - 2.0 * cfg.source_error_prob * e_vis;
    return (1.0 - cfg.outside_s_weight) * e_in + 0.5 * cfg.outside_s_weight;
}

inline double sifted_true_rate(const NoiseConfig &cfg, double survival) {
    return 0.5 * coincidence_ceiling(cfg) * survival;
}

namespace detail {
inline void require_survival(double survival) {
    if (!(survival >= 0.0 && survival <= 1.0)) {
        throw std::invalid_argument("survival must lie in [0, 1]");
    }
}
}  // namespace detail

/// Analytic sifted QBER. NaN when there are no coincidences at all.
inline double expected_qber(const NoiseConfig &cfg, double survival) {
    detail::require_survival(survival);
    const double cs = sifted_true_rate(cfg, survival);
    const double a = accidental_rate(cfg);
    if (cs + a <= 0.0) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    return (true_error_probability(cfg) * cs + 0.5 * a) / (cs + a);
}

/// The part of the QBER caused by accidentals alone.
inline double accidental_qber_contribution(const NoiseConfig &cfg, double survival) {
    detail::require_survival(survival);
    const double cs = sifted_true_rate(cfg, survival);
    const double a = accidental_rate(cfg);
    if (cs + a <= 0.0) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    return 0.5 * a / (cs + a);
}

/// Expected conclusive (key-measurement) rate in Hz, before sifting.
inline double expected_conclusive_rate(const NoiseConfig &cfg, double survival) {
    detail::require_survival(survival);
    return (1.0 - cfg.ps_sample_fraction) * (coincidence_ceiling(cfg) * survival + 2.0 * accidental_rate(cfg));
}

/// Monte Carlo session over `duration_s` seconds.
///
/// Emitted pairs are Poisson; the joint per-photon and apparatus survival is
/// drawn as a binomial thinning of the emitted count, which has the same law
/// as independent per-pair draws. Every arriving pair then runs the exact
/// protocol round.
template <class URBG>
TallyCounts simulate_session(const NoiseConfig &cfg, const CollectiveRotation &channel, Randomization scheme,
                             double duration_s, URBG &rng) {
    if (!(duration_s > 0.0) || !std::isfinite(duration_s)) {
        throw std::invalid_argument("simulate_session: duration must be positive");
    }
    cfg.validate();

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::bernoulli_distribution coin(0.5);
    std::bernoulli_distribution source_flip(cfg.source_error_prob);
    std::bernoulli_distribution contrast_flip(0.5 * (1.0 - cfg.visibility));
    std::bernoulli_distribution outside_s(cfg.outside_s_weight);
    std::bernoulli_distribution test_round(cfg.ps_sample_fraction);

    TallyCounts t;
    t.duration_s = duration_s;

    const double emitted_mean = cfg.pair_rate_hz * duration_s;
    if (emitted_mean > 0.0) {
        t.rounds = std::poisson_distribution<std::int64_t>(emitted_mean)(rng);
    }
    const double arrive_p = cfg.apparatus_efficiency * pair_transmittance(cfg);
    std::int64_t arrived = 0;
    if (t.rounds > 0 && arrive_p > 0.0) {
        arrived = std::binomial_distribution<std::int64_t>(t.rounds, std::min(1.0, arrive_p))(rng);
    }

    // Post-Bob states indexed by [logical][B][mask]; only B in {identity, flip}
    // can be cached.
    const bool cacheable = scheme != Randomization::haar;
    std::array<std::array<std::array<std::optional<PairState>, 4>, 2>, 4> cache;
    auto evolve = [&](LogicalState l, const CollectiveRotation &b, PhaseMask m) {
        return bob_pipeline(alice_pipeline(prepare(l), b, channel), m);
    };

    const PairState outside_prepared = outside_s_state();

    for (std::int64_t i = 0; i < arrived; ++i) {
        const LogicalState recorded = draw_state(rng);
        const LogicalState sent = source_flip(rng) ? bit_partner(recorded) : recorded;
        const PhaseMask mask = draw_mask(rng);

        PairState state = [&] {
            if (!cacheable) {
                return evolve(sent, draw_b(scheme, rng), mask);
            }
            const int bi = (scheme == Randomization::flip_half && coin(rng)) ? 1 : 0;
            auto &slot = cache[static_cast<int>(sent)][bi][static_cast<int>(mask)];
            if (!slot) {
                slot = evolve(sent, bi ? CollectiveRotation::bit_flip() : CollectiveRotation::identity(), mask);
            }
            return *slot;
        }();

        if (cfg.outside_s_weight > 0.0 && outside_s(rng)) {
            if (unit(rng) >= conclusive_probability(state)) {
                continue;  // lost in post-selection either way
            }
            state = bob_pipeline(outside_prepared, mask);
        }

        if (test_round(rng)) {
            if (auto in_s = tagged_basis_test(state, rng)) {
                ++t.pS_sample_total;
                t.pS_sample_inS += *in_s ? 1 : 0;
            }
            continue;
        }

        const BasisChoice bob_basis = draw_basis(rng);
        RoundOutcome r = measure(state, bob_basis, rng);
        if (!r.conclusive) {
            continue;
        }
        int bit = *r.bit;
        if (contrast_flip(rng)) {
            bit ^= 1;
        }
        ++t.conclusive;
        if (bob_basis != basis_of(recorded)) {
            continue;
        }
        ++t.sifted;
        if (bit != encoded_bit(recorded)) {
            ++t.errors;
        }
    }

    // Accidentals: uniformly random detector patterns that pass the gate.
    const double accidental_mean = 2.0 * accidental_rate(cfg) * duration_s;
    std::int64_t accidentals = 0;
    if (accidental_mean > 0.0) {
        accidentals = std::poisson_distribution<std::int64_t>(accidental_mean)(rng);
    }
    for (std::int64_t i = 0; i < accidentals; ++i) {
        if (test_round(rng)) {
            ++t.pS_sample_total;
            t.pS_sample_inS += coin(rng) ? 1 : 0;
            continue;
        }
        ++t.conclusive;
        ++t.accidental_conclusive;
        const bool alice_basis = coin(rng);
        const bool bob_basis = coin(rng);
        if (alice_basis != bob_basis) {
            continue;
        }
        ++t.sifted;
        if (coin(rng)) {
            ++t.errors;
        }
    }
    return t;
}

template <class URBG>
TallyCounts simulate_session(const NoiseConfig &cfg, const RotatorSetting &setting, Randomization scheme,
                             double duration_s, URBG &rng) {
    return simulate_session(cfg, from_waveplates(setting), scheme, duration_s, rng);
}

inline constexpr double kPeakVisibility = 0.95;

inline double coherence_length_um(double filter_fwhm_nm, double wavelength_nm) {
    return wavelength_nm * wavelength_nm / filter_fwhm_nm * 1e-3;
}

/// Two-photon fringe visibility versus path mismatch between the two
/// tagging interferometers: V0 * exp(-(dx / l_c)^2), l_c = lambda^2 / dlambda.
inline double visibility_envelope(double path_mismatch_um, double filter_fwhm_nm, double wavelength_nm,
                                  double peak = kPeakVisibility) {
    if (!(filter_fwhm_nm > 0.0) || !(wavelength_nm > 0.0)) {
        throw std::invalid_argument("visibility_envelope: bandwidth and wavelength must be positive");
    }
    const double x = path_mismatch_um / coherence_length_um(filter_fwhm_nm, wavelength_nm);
    return peak * std::exp(-x * x);
}

}  // namespace rfqkd
