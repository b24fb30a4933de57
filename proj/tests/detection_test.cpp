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


#include "rfqkd/detection.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace rfqkd;

namespace {

struct Agreement {
    bool rate_ok;
    bool qber_ok;
    double rate;
    double rate_expected;
    double qber;
    double qber_expected;
};

Agreement check(const NoiseConfig &cfg, const CollectiveRotation &u, Randomization scheme, double duration,
                std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const auto t = simulate_session(cfg, u, scheme, duration, rng);
    const double survival = randomized_survival(u, scheme);
    Agreement a{};
    a.rate_expected = expected_conclusive_rate(cfg, survival);
    a.rate = static_cast<double>(t.conclusive) / duration;
    a.rate_ok = std::abs(a.rate - a.rate_expected) <= 3.0 * std::sqrt(a.rate_expected * duration) / duration;
    a.qber_expected = expected_qber(cfg, survival);
    a.qber = t.sifted > 0 ? static_cast<double>(t.errors) / static_cast<double>(t.sifted) : 0.0;
    a.qber_ok = t.sifted == 0 ||
                std::abs(a.qber - a.qber_expected) <=
                    3.0 * std::sqrt(a.qber_expected * (1 - a.qber_expected) / static_cast<double>(t.sifted));
    return a;
}

}  // namespace

TEST(detection, transmittance_examples) {
    NoiseConfig cfg;
    cfg.fiber_length_km = 0.0;
    cfg.extra_loss_db = 0.0;
    EXPECT_EQ(transmittance(cfg), 1.0);
    cfg.fiber_length_km = 1.0;
    EXPECT_NEAR(transmittance(cfg), 0.3311311, 1e-7);
    EXPECT_NEAR(pair_transmittance(cfg), 0.3311311 * 0.3311311, 1e-7);
}

TEST(detection, preset_ceilings) {
    EXPECT_NEAR(coincidence_ceiling(NoiseConfig::short_fiber()), 140.0, 1e-9);
    EXPECT_NEAR(coincidence_ceiling(NoiseConfig::one_km()), 1.4, 1e-12);
    EXPECT_NEAR(NoiseConfig::one_km().extra_loss_db, 5.2192, 1e-3);
    EXPECT_NO_THROW(NoiseConfig::short_fiber().validate());
    EXPECT_NO_THROW(NoiseConfig::one_km().validate());
    EXPECT_NO_THROW(NoiseConfig::noiseless().validate());
}

TEST(detection, config_validation) {
    NoiseConfig cfg;
    cfg.apparatus_efficiency = 0.0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg = NoiseConfig{};
    cfg.visibility = 1.2;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg = NoiseConfig{};
    cfg.singles_rate_hz = -1.0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg = NoiseConfig{};
    cfg.source_error_prob = 1.5;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg = NoiseConfig{};
    cfg.ps_sample_fraction = 1.0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(detection, accidental_rate_examples) {
    NoiseConfig cfg;
    EXPECT_NEAR(accidental_rate(cfg), 0.024, 1e-15);
    cfg.singles_rate_hz = 0.0;
    EXPECT_EQ(accidental_rate(cfg), 0.0);
    cfg.singles_rate_hz = 1000.0;
    EXPECT_NEAR(accidental_rate(cfg), 0.006, 1e-15);
}

TEST(detection, expected_qber_endpoints) {
    const auto cfg = NoiseConfig::one_km();
    EXPECT_NEAR(expected_qber(cfg, 0.0), 0.5, 1e-15);
    EXPECT_NEAR(accidental_qber_contribution(cfg, 1.0), 0.0165746, 1e-7);
    EXPECT_NEAR(accidental_qber_contribution(cfg, 0.5), 0.0320856, 1e-7);
    EXPECT_NEAR(accidental_qber_contribution(cfg, 0.25), 0.0603015, 1e-7);
    EXPECT_NEAR(accidental_qber_contribution(cfg, 0.0), 0.5, 1e-15);
    EXPECT_THROW(expected_qber(cfg, 1.5), std::invalid_argument);

    auto quiet = NoiseConfig::noiseless();
    EXPECT_EQ(expected_qber(quiet, 1.0), 0.0);
    EXPECT_TRUE(std::isnan(expected_qber(quiet, 0.0)));

    auto src_only = NoiseConfig::one_km();
    src_only.singles_rate_hz = 0.0;
    src_only.visibility = 1.0;
    EXPECT_NEAR(expected_qber(src_only, 0.7), 0.04, 1e-15);
}

TEST(detection, expected_qber_monotone_in_survival) {
    const auto cfg = NoiseConfig::one_km();
    double prev = expected_qber(cfg, 0.0);
    for (int i = 1; i <= 100; ++i) {
        const double q = expected_qber(cfg, i / 100.0);
        EXPECT_LT(q, prev);
        prev = q;
    }
}

TEST(detection, noiseless_identity_has_no_errors) {
    std::mt19937_64 rng(1);
    auto t = simulate_session(NoiseConfig::noiseless(), CollectiveRotation::identity(), Randomization::none, 60.0, rng);
    EXPECT_GT(t.sifted, 1000);
    EXPECT_EQ(t.errors, 0);
    EXPECT_EQ(t.accidental_conclusive, 0);
    EXPECT_EQ(t.pS_sample_inS, t.pS_sample_total);
}

TEST(detection, bit_flip_without_randomization) {
    const auto cfg = NoiseConfig::one_km();
    std::mt19937_64 rng(2);
    const double duration = 200000.0;
    auto t = simulate_session(cfg, five_setting_sweep().back(), Randomization::none, duration, rng);
    const double q = static_cast<double>(t.errors) / static_cast<double>(t.sifted);
    EXPECT_NEAR(q, 0.5, 3 * 0.5 / std::sqrt(static_cast<double>(t.sifted)));
    EXPECT_EQ(t.conclusive, t.accidental_conclusive);
    const double floor = 2.0 * accidental_rate(cfg) * (1 - cfg.ps_sample_fraction);
    EXPECT_NEAR(t.conclusive / duration, floor, 3 * std::sqrt(floor * duration) / duration);
}

TEST(detection, counters_consistent) {
    std::mt19937_64 rng(3);
    for (auto scheme : {Randomization::none, Randomization::flip_half, Randomization::haar}) {
        for (const auto &s : five_setting_sweep()) {
            auto t = simulate_session(NoiseConfig::short_fiber(), s, scheme, 20.0, rng);
            EXPECT_TRUE(t.consistent());
            EXPECT_LE(t.errors, t.sifted);
            EXPECT_LE(t.sifted, t.conclusive);
            EXPECT_LE(t.pS_sample_inS, t.pS_sample_total);
            if (t.conclusive > 100) {
                const double f = static_cast<double>(t.sifted) / static_cast<double>(t.conclusive);
                EXPECT_NEAR(f, 0.5, 3 * 0.5 / std::sqrt(static_cast<double>(t.conclusive)));
            }
        }
    }
}

TEST(detection, rejects_bad_duration) {
    std::mt19937_64 rng(4);
    auto u = CollectiveRotation::identity();
    EXPECT_THROW(simulate_session(NoiseConfig{}, u, Randomization::none, 0.0, rng), std::invalid_argument);
    EXPECT_THROW(simulate_session(NoiseConfig{}, u, Randomization::none, -1.0, rng), std::invalid_argument);
}

TEST(detection, rate_linearity) {
    const auto cfg = NoiseConfig::short_fiber();
    const auto u = from_waveplates(five_setting_sweep()[1]);
    std::mt19937_64 rng(5);
    auto t1 = simulate_session(cfg, u, Randomization::flip_half, 50.0, rng);
    auto t2 = simulate_session(cfg, u, Randomization::flip_half, 100.0, rng);
    const double mean = expected_conclusive_rate(cfg, randomized_survival(u, Randomization::flip_half)) * 50.0;
    // t2 - 2 t1 has variance 2 mean + 4 mean.
    EXPECT_NEAR(static_cast<double>(t2.conclusive) - 2.0 * static_cast<double>(t1.conclusive), 0.0,
                3 * std::sqrt(6 * mean));
}

TEST(detection, accidental_floor) {
    NoiseConfig cfg = NoiseConfig::short_fiber();
    cfg.pair_rate_hz = 0.0;
    cfg.ps_sample_fraction = 0.0;
    std::mt19937_64 rng(6);
    const double duration = 100000.0;
    auto t = simulate_session(cfg, CollectiveRotation::identity(), Randomization::none, duration, rng);
    const double a = accidental_rate(cfg);
    EXPECT_EQ(t.rounds, 0);
    EXPECT_NEAR(t.sifted / duration, a, 3 * std::sqrt(a * duration) / duration);
    EXPECT_NEAR(t.conclusive / duration, 2 * a, 3 * std::sqrt(2 * a * duration) / duration);
    const double q = static_cast<double>(t.errors) / static_cast<double>(t.sifted);
    EXPECT_NEAR(q, 0.5, 3 * 0.5 / std::sqrt(static_cast<double>(t.sifted)));
}

TEST(detection, oracle_agreement_presets) {
    std::uint64_t seed = 100;
    for (const auto &cfg : {NoiseConfig::short_fiber(), NoiseConfig::one_km()}) {
        const double duration = cfg.fiber_length_km > 0.5 ? 20000.0 : 200.0;
        for (const auto &s : five_setting_sweep()) {
            for (auto scheme : {Randomization::none, Randomization::flip_half}) {
                auto a = check(cfg, from_waveplates(s), scheme, duration, seed++);
                EXPECT_TRUE(a.rate_ok) << a.rate << " vs " << a.rate_expected;
                EXPECT_TRUE(a.qber_ok) << a.qber << " vs " << a.qber_expected;
            }
        }
    }
}

TEST(detection, oracle_agreement_random_configs) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < 20; ++i) {
        NoiseConfig cfg;
        cfg.pair_rate_hz = 2000.0 + 20000.0 * unit(rng);
        cfg.apparatus_efficiency = 0.002 + 0.02 * unit(rng);
        cfg.fiber_length_km = 2.0 * unit(rng);
        cfg.extra_loss_db = 3.0 * unit(rng);
        cfg.singles_rate_hz = 5000.0 * unit(rng);
        cfg.window_ns = 1.0 + 4.0 * unit(rng);
        cfg.source_error_prob = 0.1 * unit(rng);
        cfg.visibility = 0.8 + 0.2 * unit(rng);
        cfg.outside_s_weight = 0.1 * unit(rng);
        cfg.ps_sample_fraction = 0.1 * unit(rng);
        const auto scheme = static_cast<Randomization>(i % 3);
        auto u = haar_sample(rng);
        auto a = check(cfg, u, scheme, 2000.0, 1000 + static_cast<std::uint64_t>(i));
        EXPECT_TRUE(a.rate_ok) << "config " << i << ": " << a.rate << " vs " << a.rate_expected;
        EXPECT_TRUE(a.qber_ok) << "config " << i << ": " << a.qber << " vs " << a.qber_expected;
    }
}

TEST(detection, pS_sample_reflects_outside_weight) {
    NoiseConfig cfg = NoiseConfig::short_fiber();
    cfg.singles_rate_hz = 0.0;
    cfg.outside_s_weight = 0.09;
    cfg.ps_sample_fraction = 0.5;
    std::mt19937_64 rng(8);
    auto t = simulate_session(cfg, CollectiveRotation::identity(), Randomization::none, 500.0, rng);
    const double n = static_cast<double>(t.pS_sample_total);
    const double p = static_cast<double>(t.pS_sample_inS) / n;
    EXPECT_NEAR(p, 0.91, 3 * std::sqrt(0.91 * 0.09 / n));
}

TEST(detection, session_is_deterministic) {
    std::mt19937_64 r1(9);
    std::mt19937_64 r2(9);
    const auto s = five_setting_sweep()[2];
    auto a = simulate_session(NoiseConfig::short_fiber(), s, Randomization::haar, 30.0, r1);
    auto b = simulate_session(NoiseConfig::short_fiber(), s, Randomization::haar, 30.0, r2);
    EXPECT_EQ(a, b);
}

TEST(detection, visibility_envelope_examples) {
    EXPECT_EQ(visibility_envelope(0.0, 1.6, 702.0), 0.95);
    EXPECT_NEAR(coherence_length_um(1.6, 702.0), 308.0025, 1e-4);
    EXPECT_NEAR(visibility_envelope(100.0, 1.6, 702.0) / 0.95, 0.8999533, 1e-7);
    EXPECT_NEAR(visibility_envelope(99.0, 1.6, 702.0) / 0.95, 0.9018, 1e-4);
    EXPECT_EQ(visibility_envelope(1e6, 1.6, 702.0), 0.0);
    EXPECT_EQ(visibility_envelope(-50.0, 1.6, 702.0), visibility_envelope(50.0, 1.6, 702.0));
    EXPECT_THROW(visibility_envelope(0.0, 0.0, 702.0), std::invalid_argument);
    EXPECT_THROW(visibility_envelope(0.0, 1.6, -1.0), std::invalid_argument);
}
