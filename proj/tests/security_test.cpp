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


#include "rfqkd/security.hpp"

#include <gtest/gtest.h>

#include <random>

#include "rfqkd/detection.hpp"

using namespace rfqkd;

TEST(security, binary_entropy_examples) {
    EXPECT_EQ(binary_entropy(0.0), 0.0);
    EXPECT_EQ(binary_entropy(1.0), 0.0);
    EXPECT_EQ(binary_entropy(0.5), 1.0);
    EXPECT_NEAR(binary_entropy(0.102), 0.4753036, 1e-7);
    EXPECT_NEAR(binary_entropy(0.11), binary_entropy(0.89), 1e-15);
    EXPECT_THROW(binary_entropy(-0.01), std::domain_error);
    EXPECT_THROW(binary_entropy(1.01), std::domain_error);
    EXPECT_THROW(binary_entropy(std::nan("")), std::domain_error);
}

TEST(security, bound_exS_examples) {
    EXPECT_EQ(bound_exS(1.0, 0.07), 0.07);
    EXPECT_NEAR(bound_exS(0.91, 0.102), 0.06263736, 1e-8);
    EXPECT_NEAR(bound_exS(0.97, 0.068), 0.05463918, 1e-8);
    EXPECT_EQ(bound_exS(0.8, 0.05), 0.0);  // clamped below
    EXPECT_THROW(bound_exS(0.0, 0.1), std::domain_error);
    EXPECT_THROW(bound_exS(1.1, 0.1), std::domain_error);
    EXPECT_THROW(bound_exS(0.9, 0.6), std::domain_error);
    EXPECT_THROW(bound_exS(0.9, -0.1), std::domain_error);
}

TEST(security, key_rate_examples) {
    EXPECT_EQ(key_rate(1.0, 0.0), 1.0);
    EXPECT_NEAR(key_rate(0.91, 0.102), 0.1272743, 1e-7);
    EXPECT_NEAR(key_rate(0.97, 0.068), 0.3149721, 1e-7);
    EXPECT_GT(key_rate(0.91, 0.102), 0.0);
    EXPECT_LT(key_rate(0.9, 0.5), 0.0);
}

TEST(security, key_rate_monotone_in_error) {
    for (int i = 1; i <= 20; ++i) {
        const double p = 0.5 + 0.025 * i;
        double prev = key_rate(p, 0.0);
        for (int j = 1; j <= 250; ++j) {
            const double r = key_rate(p, j * 0.001);
            EXPECT_LE(r, prev + 1e-15) << "p_S=" << p << " e_x=" << j * 0.001;
            prev = r;
        }
    }
}

TEST(security, bound_consistency) {
    for (int i = 1; i <= 20; ++i) {
        const double p = 0.5 + 0.025 * i;
        for (int j = 0; j <= 50; ++j) {
            const double e = j * 0.01;
            const double es = bound_exS(p, e);
            const double raw = (e - (1 - p) * 0.5) / p;
            if (raw > 0.0 && raw < 0.5) {
                EXPECT_NEAR(p * es + (1 - p) * kOutsideSErrorRate, e, 1e-12);
            }
            EXPECT_LE(key_rate(p, e), p + 1e-15);
        }
    }
}

TEST(security, boundary_values) {
    for (double p : {0.6, 0.8, 0.91, 0.97, 1.0}) {
        EXPECT_NEAR(key_rate(p, 0.0), p, 1e-15);
        EXPECT_EQ(bound_exS(p, (1 - p) / 2), 0.0);
        EXPECT_NEAR(key_rate(p, (1 - p) / 2), p - binary_entropy((1 - p) / 2), 1e-15);
    }
}

TEST(security, report_perfect_session) {
    TallyCounts t;
    t.rounds = 1000;
    t.conclusive = 800;
    t.sifted = 400;
    t.pS_sample_total = 50;
    t.pS_sample_inS = 50;
    t.duration_s = 10.0;
    auto r = report(t);
    EXPECT_EQ(r.p_S, 1.0);
    EXPECT_EQ(r.e_x, 0.0);
    EXPECT_EQ(r.rate_fraction, 1.0);
    EXPECT_EQ(r.secret_bits_per_s, 40.0);
}

TEST(security, report_random_session_is_negative) {
    TallyCounts t;
    t.conclusive = 100;
    t.sifted = 50;
    t.errors = 25;
    t.pS_sample_total = 10;
    t.pS_sample_inS = 9;
    t.duration_s = 1.0;
    auto r = report(t);
    EXPECT_EQ(r.e_x, 0.5);
    EXPECT_LT(r.rate_fraction, 0.0);
    EXPECT_LT(r.secret_bits_per_s, 0.0);
}

TEST(security, report_caps_overshoot) {
    TallyCounts t;
    t.conclusive = 10;
    t.sifted = 4;
    t.errors = 3;
    t.pS_sample_total = 2;
    t.pS_sample_inS = 2;
    t.duration_s = 1.0;
    EXPECT_EQ(report(t).e_x, 0.5);
}

TEST(security, report_errors) {
    TallyCounts t;
    t.conclusive = 10;
    t.sifted = 5;
    t.pS_sample_total = 3;
    t.pS_sample_inS = 3;
    t.duration_s = 1.0;
    EXPECT_NO_THROW(report(t));

    auto no_sift = t;
    no_sift.sifted = 0;
    EXPECT_THROW(report(no_sift), std::invalid_argument);
    auto no_sample = t;
    no_sample.pS_sample_total = 0;
    no_sample.pS_sample_inS = 0;
    EXPECT_THROW(report(no_sample), std::invalid_argument);
    auto none_in_s = t;
    none_in_s.pS_sample_inS = 0;
    EXPECT_THROW(report(none_in_s), std::domain_error);
    auto broken = t;
    broken.errors = 7;
    EXPECT_THROW(report(broken), std::invalid_argument);
    auto no_time = t;
    no_time.duration_s = 0.0;
    EXPECT_THROW(report(no_time), std::invalid_argument);
}

TEST(security, one_km_session_is_positive) {
    const auto cfg = NoiseConfig::one_km();
    std::mt19937_64 rng(1);
    auto t = simulate_session(cfg, five_setting_sweep()[0], Randomization::flip_half, 10800.0, rng);
    auto r = report(t);
    EXPECT_GT(r.rate_fraction, 0.0);
    EXPECT_GT(r.secret_bits_per_s, 0.0);
    EXPECT_LE(r.rate_fraction, r.p_S);
}
