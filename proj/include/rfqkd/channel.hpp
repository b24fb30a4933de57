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

// Collective polarization rotations.
//
// A rotation is stored in special-unitary form [[a, -conj(b)], [b, conj(a)]].
// It maps Alice's {H, V} onto Bob's {H', V'} frame and acts identically on
// both photons of a pair.

#pragma once

#include "rfqkd/hilbert.hpp"

#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace rfqkd {

class CollectiveRotation {
   public:
    static CollectiveRotation from_coefficients(cplx a, cplx b) {
        double n2 = std::norm(a) + std::norm(b);
        if (!std::isfinite(n2) || std::abs(n2 - 1.0) > kNormTolerance) {
            throw std::invalid_argument("CollectiveRotation: |a|^2 + |b|^2 = " + std::to_string(n2) + " != 1");
        }
        return CollectiveRotation(a, b);
    }

    /// Strips the global phase of a unitary so that its determinant is 1.
    static CollectiveRotation from_matrix(const Mat2 &m) {
        detail::require_unitary(m, "CollectiveRotation::from_matrix");
        cplx root = std::sqrt(m.determinant());
        Mat2 su = m / root;
        cplx a = su(0, 0);
        cplx b = su(1, 0);
        double n = std::sqrt(std::norm(a) + std::norm(b));
        return CollectiveRotation(a / n, b / n);
    }

    static CollectiveRotation identity() { return CollectiveRotation(1.0, 0.0); }

    /// i * sigma_x, the determinant-one form of a polarization bit flip.
    static CollectiveRotation bit_flip() { return CollectiveRotation(0.0, cplx{0.0, 1.0}); }

    cplx a() const { return a_; }
    cplx b() const { return b_; }

    Mat2 matrix() const {
        Mat2 m;
        m << a_, -std::conj(b_), b_, std::conj(a_);
        return m;
    }

    /// Composition: (*this) applied after `first`.
    CollectiveRotation then_after(const CollectiveRotation &first) const {
        return from_matrix(matrix() * first.matrix());
    }

   private:
    CollectiveRotation(cplx a, cplx b) : a_(a), b_(b) {}

    cplx a_;
    cplx b_;
};

/// Coefficients of the twice-tagged expansion. With input a|HV> + b|VH>
/// (photon order early, late) the output is
///   (d1+1)/2 (a|H'_T V'_T> + b|V'_T H'_T>)
/// + (d1-1)/2 (a|V' H'_TT> + b|H'_TT V'>)
/// + (d2+d3)/2 (a|H'_T H'_TT> + b|H'_TT H'_T>)
/// + (d2-d3)/2 (a|V' V'_T> + b|V'_T V'>).
struct DeltaParams {
    cplx d1;
    cplx d2;
    cplx d3;

    double norm_squared() const { return std::norm(d1) + std::norm(d2) + std::norm(d3); }
};

inline DeltaParams delta_params(const CollectiveRotation &u) {
    const cplx a = u.a();
    const cplx b = u.b();
    const cplx ab = std::conj(a) * b;  // a* b
    return {std::norm(a) - std::norm(b), ab - std::conj(ab), -(ab + std::conj(ab))};
}

/// Probability that the equal-bin post-selection returns the input logical
/// state, |(d1 + 1)/2|^2 (= |a|^4).
inline double survival_probability(const CollectiveRotation &u) {
    const DeltaParams d = delta_params(u);
    return std::clamp(std::norm((d.d1 + 1.0) / 2.0), 0.0, 1.0);
}

enum class Randomization { none, flip_half, haar };

inline std::string_view to_string(Randomization r) {
    switch (r) {
        case Randomization::none:
            return "none";
        case Randomization::flip_half:
            return "flip_half";
        case Randomization::haar:
            return "haar";
    }
    return "?";
}

inline std::optional<Randomization> parse_randomization(std::string_view s) {
    if (s == "none") return Randomization::none;
    if (s == "flip_half") return Randomization::flip_half;
    if (s == "haar") return Randomization::haar;
    return std::nullopt;
}

/// Mean survival when a random B is inserted between the two tag stages.
/// flip_half draws B from {identity, bit flip}; haar draws B Haar-uniformly.
inline double randomized_survival(const CollectiveRotation &u, Randomization scheme) {
    switch (scheme) {
        case Randomization::none:
            return survival_probability(u);
        case Randomization::flip_half:
            return 0.5 * (survival_probability(u) + survival_probability(u.then_after(CollectiveRotation::bit_flip())));
        case Randomization::haar:
            return 1.0 / 3.0;
    }
    throw std::invalid_argument("randomized_survival: unknown scheme");
}

template <class URBG>
CollectiveRotation haar_sample(URBG &rng) {
    // A normalized 4-d Gaussian is uniform on S^3 ~ SU(2).
    std::normal_distribution<double> gauss(0.0, 1.0);
    double x[4];
    double r2 = 0.0;
    do {
        r2 = 0.0;
        for (double &xi : x) {
            xi = gauss(rng);
            r2 += xi * xi;
        }
    } while (r2 == 0.0);
    const double r = std::sqrt(r2);
    return CollectiveRotation::from_coefficients(cplx{x[0] / r, x[1] / r}, cplx{x[2] / r, x[3] / r});
}

struct RotatorSetting {
    double qwp1_deg = 0.0;
    double hwp_deg = 0.0;
    double qwp2_deg = 0.0;

    bool operator==(const RotatorSetting &) const = default;
};

/// Jones matrix of a linear retarder with fast axis at `angle_rad` from H:
/// R(angle) diag(1, e^{i retardance}) R(-angle).
inline Mat2 retarder_jones(double retardance, double angle_rad) {
    const double c = std::cos(angle_rad);
    const double s = std::sin(angle_rad);
    Mat2 rot;
    rot << c, -s, s, c;
    Mat2 plate = Mat2::Zero();
    plate(0, 0) = 1.0;
    plate(1, 1) = std::polar(1.0, retardance);
    return rot * plate * rot.transpose();
}

inline Mat2 qwp_jones(double angle_deg) {
    return retarder_jones(std::numbers::pi / 2.0, angle_deg * std::numbers::pi / 180.0);
}

inline Mat2 hwp_jones(double angle_deg) {
    return retarder_jones(std::numbers::pi, angle_deg * std::numbers::pi / 180.0);
}

/// QWP(q1) * HWP(h) * QWP(q2), rescaled to determinant 1.
inline CollectiveRotation from_waveplates(const RotatorSetting &r) {
    if (!std::isfinite(r.qwp1_deg) || !std::isfinite(r.hwp_deg) || !std::isfinite(r.qwp2_deg)) {
        throw std::invalid_argument("from_waveplates: non-finite plate angle");
    }
    return CollectiveRotation::from_matrix(qwp_jones(r.qwp1_deg) * hwp_jones(r.hwp_deg) * qwp_jones(r.qwp2_deg));
}

inline constexpr int kSweepSettings = 5;

/// The identity-to-bit-flip sweep. Both quarter-wave plates stay at 0 deg
/// and the half-wave plate steps by 11.25 deg, which gives
/// |a|^2 = cos^2(k pi / 8) for k = 0..4.
inline std::vector<RotatorSetting> five_setting_sweep() {
    std::vector<RotatorSetting> out;
    for (int k = 0; k < kSweepSettings; ++k) {
        out.push_back({0.0, 11.25 * k, 0.0});
    }
    return out;
}

}  // namespace rfqkd
