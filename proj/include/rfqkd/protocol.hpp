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

// The honest protocol at the amplitude level.
//
// Round order: prepare -> Alice tags V -> random B -> collective channel ->
// Bob's phase mask M_phi -> Bob tags H' -> basis transform -> detection with
// equal-bin post-selection. Bits decode as "same polarization" -> 0 and
// "different polarization" -> 1.

#pragma once

#include "rfqkd/channel.hpp"
#include "rfqkd/hilbert.hpp"
#include "rfqkd/tally.hpp"

#include <array>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace rfqkd {

enum class LogicalState { PsiPlus, PsiMinus, PsiPlusI, PsiMinusI };
enum class BasisChoice { PlusMinus, PlusMinusI };

inline constexpr std::array<LogicalState, 4> kLogicalStates = {
    LogicalState::PsiPlus, LogicalState::PsiMinus, LogicalState::PsiPlusI, LogicalState::PsiMinusI};

constexpr BasisChoice basis_of(LogicalState l) {
    return (l == LogicalState::PsiPlus || l == LogicalState::PsiMinus) ? BasisChoice::PlusMinus
                                                                       : BasisChoice::PlusMinusI;
}

constexpr int encoded_bit(LogicalState l) {
    return (l == LogicalState::PsiPlus || l == LogicalState::PsiPlusI) ? 0 : 1;
}

/// The other state of the same basis.
constexpr LogicalState bit_partner(LogicalState l) {
    switch (l) {
        case LogicalState::PsiPlus:
            return LogicalState::PsiMinus;
        case LogicalState::PsiMinus:
            return LogicalState::PsiPlus;
        case LogicalState::PsiPlusI:
            return LogicalState::PsiMinusI;
        case LogicalState::PsiMinusI:
            return LogicalState::PsiPlusI;
    }
    return l;
}

/// (alpha, beta) of alpha|HV> + beta|VH>.
inline std::pair<cplx, cplx> logical_coefficients(LogicalState l) {
    const double r = 1.0 / std::numbers::sqrt2;
    switch (l) {
        case LogicalState::PsiPlus:
            return {r, r};
        case LogicalState::PsiMinus:
            return {r, -r};
        case LogicalState::PsiPlusI:
            return {r, cplx{0.0, r}};
        case LogicalState::PsiMinusI:
            return {r, cplx{0.0, -r}};
    }
    throw std::invalid_argument("logical_coefficients: unknown state");
}

inline PairState prepare(LogicalState l) {
    using modes::H;
    using modes::V;
    auto [alpha, beta] = logical_coefficients(l);
    return pure_state({{{H(0), V(0)}, alpha}, {{V(0), H(0)}, beta}});
}

enum class PhaseMask { phi_0, phi_half_pi, phi_pi, phi_three_half_pi };

inline constexpr std::array<PhaseMask, 4> kPhaseMasks = {PhaseMask::phi_0, PhaseMask::phi_half_pi, PhaseMask::phi_pi,
                                                         PhaseMask::phi_three_half_pi};

inline double phase_angle(PhaseMask m) { return static_cast<int>(m) * std::numbers::pi / 2.0; }

/// diag(1, e^{i phi}); applied to both photons.
inline Mat2 phase_mask_matrix(PhaseMask m) {
    Mat2 out = Mat2::Zero();
    out(0, 0) = 1.0;
    out(1, 1) = std::polar(1.0, phase_angle(m));
    return out;
}

enum class BChoice { identity, flip };

inline CollectiveRotation b_rotation(BChoice b) {
    return b == BChoice::identity ? CollectiveRotation::identity() : CollectiveRotation::bit_flip();
}

/// Alice's tag (V delayed), then B on both photons, then the channel.
inline PairState alice_pipeline(const PairState &s, const CollectiveRotation &b, const CollectiveRotation &channel) {
    for (std::size_t i = 0; i < kPairDim; ++i) {
        if (s[i] != cplx{} && (pair_from_index(i).first.bin != 0 || pair_from_index(i).second.bin != 0)) {
            throw std::invalid_argument("alice_pipeline: input must be in time bin 0");
        }
    }
    auto tagged = tag(s, Pol::V);
    return apply_pol_unitary(tagged, channel.then_after(b).matrix(), Photons::both);
}

inline PairState alice_pipeline(const PairState &s, BChoice b, const CollectiveRotation &channel) {
    return alice_pipeline(s, b_rotation(b), channel);
}

/// M_phi on both photons, then Bob's tag (H' delayed).
inline PairState bob_pipeline(const PairState &s, PhaseMask mask) {
    return tag(apply_pol_unitary(s, phase_mask_matrix(mask), Photons::both), Pol::H);
}

/// S after both tags: span{|H'_T V'_T>, |V'_T H'_T>}.
inline ModeSet s_subspace_tagged() {
    using modes::H;
    using modes::V;
    return mode_set({{H(1), V(1)}, {V(1), H(1)}});
}

/// The four-amplitude sector just before Bob's tag that reaches equal bins:
/// S = {H'V'_T, V'_T H'} and its complement {H'H', V'_T V'_T}.
inline ModeSet s_subspace_pre_bob() {
    using modes::H;
    using modes::V;
    return mode_set({{H(0), V(1)}, {V(1), H(0)}});
}

inline ModeSet outside_s_pre_bob() {
    using modes::H;
    using modes::V;
    return mode_set({{H(0), H(0)}, {V(1), V(1)}});
}

/// An equal-weight outside-S state in the pre-Bob-tag frame. Every bit it
/// yields is random once Bob's phase mask is averaged.
inline PairState outside_s_state() {
    using modes::H;
    using modes::V;
    return pure_state({{{H(0), H(0)}, 1.0}, {{V(1), V(1)}, 1.0}});
}

/// phi-average of M_phi rho M_phi^dagger over the four masks, weight 1/4 each.
inline PairDensity phase_mask_average(const PairDensity &rho) {
    std::vector<std::pair<PairDensity, double>> terms;
    for (PhaseMask m : kPhaseMasks) {
        terms.emplace_back(conjugate(rho, phase_mask_matrix(m), Photons::both), 0.25);
    }
    return density_average(terms);
}

/// Waveplates in front of Bob's detectors: Hadamard on both photons, preceded
/// for the PlusMinusI basis by diag(1, -i) on the early photon.
inline PairState basis_transform(const PairState &s, BasisChoice basis) {
    Mat2 had;
    had << 1.0, 1.0, 1.0, -1.0;
    had /= std::numbers::sqrt2;
    PairState out = s;
    if (basis == BasisChoice::PlusMinusI) {
        Mat2 sdg = Mat2::Zero();
        sdg(0, 0) = 1.0;
        sdg(1, 1) = cplx{0.0, -1.0};
        out = apply_pol_unitary(out, sdg, Photons::first);
    }
    return apply_pol_unitary(out, had, Photons::both);
}

/// Joint probabilities P(coincident, pol1, pol2) after the basis transform,
/// indexed [pol1][pol2]. Different bins within the equal-bin sector are
/// orthogonal and are summed incoherently.
inline std::array<std::array<double, 2>, 2> outcome_probabilities(const PairState &s, BasisChoice basis) {
    const PairState t = basis_transform(s, basis);
    const double total = t.norm_squared();
    std::array<std::array<double, 2>, 2> p{};
    for (int p1 = 0; p1 < 2; ++p1) {
        for (int p2 = 0; p2 < 2; ++p2) {
            for (int bin = 0; bin <= kMaxBin; ++bin) {
                p[p1][p2] += std::norm(t.amplitude({{static_cast<Pol>(p1), bin}, {static_cast<Pol>(p2), bin}}));
            }
            p[p1][p2] /= total;
        }
    }
    return p;
}

inline double conclusive_probability(const PairState &s) {
    return project(s, equal_bin_sector()).probability;
}

struct RoundOutcome {
    bool conclusive = false;
    std::optional<int> bit;  // present iff conclusive
    BasisChoice basis_used = BasisChoice::PlusMinus;
    bool inside_S = false;  // diagnostic, never revealed to the parties
};

/// Samples one detection from exact Born probabilities.
template <class URBG>
RoundOutcome measure(const PairState &s, BasisChoice basis, URBG &rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    RoundOutcome out;
    out.basis_used = basis;
    const auto p = outcome_probabilities(s, basis);
    double u = unit(rng);
    for (int k = 0; k < 4 && !out.conclusive; ++k) {
        const int p1 = k / 2;
        const int p2 = k % 2;
        if (u < p[p1][p2]) {
            out.conclusive = true;
            out.bit = p1 == p2 ? 0 : 1;
        } else {
            u -= p[p1][p2];
        }
    }
    if (out.conclusive) {
        const double coincident = conclusive_probability(s);
        const double in_s = project(s, s_subspace_tagged()).probability;
        out.inside_S = unit(rng) * coincident < in_s;
    }
    return out;
}

/// The p^S test measurement: {H', V'} readout right after Bob's tag.
/// Returns nullopt when the pair misses the equal-bin window, otherwise
/// whether the outcome was H'_T V'_T or V'_T H'_T.
template <class URBG>
std::optional<bool> tagged_basis_test(const PairState &s, URBG &rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double total = s.norm_squared();
    double u = unit(rng) * total;
    const ModeSet eq = equal_bin_sector();
    const ModeSet in_s = s_subspace_tagged();
    for (std::size_t i = 0; i < kPairDim; ++i) {
        if (!eq.test(i)) {
            continue;
        }
        const double w = std::norm(s[i]);
        if (u < w) {
            return in_s.test(i);
        }
        u -= w;
    }
    return std::nullopt;
}

/// Fraction of p^S test outcomes landing in S, over states conditioned on
/// the coincidence window.
template <class URBG>
double estimate_pS(std::span<const PairState> sample, URBG &rng) {
    if (sample.empty()) {
        throw std::invalid_argument("estimate_pS: empty sample");
    }
    std::int64_t in_s = 0;
    for (const auto &s : sample) {
        auto coincident = project(s, equal_bin_sector());
        if (!coincident.state) {
            throw std::invalid_argument("estimate_pS: sample contains a non-coincident state");
        }
        auto r = tagged_basis_test(coincident.state->normalized(), rng);
        if (r && *r) {
            ++in_s;
        }
    }
    return static_cast<double>(in_s) / static_cast<double>(sample.size());
}

struct AliceRecord {
    LogicalState state = LogicalState::PsiPlus;
    BasisChoice basis = BasisChoice::PlusMinus;
};

/// Keeps conclusive rounds whose bases agree and counts bit errors.
inline TallyCounts sift(std::span<const AliceRecord> alice, std::span<const RoundOutcome> bob) {
    if (alice.size() != bob.size()) {
        throw std::invalid_argument("sift: Alice and Bob records differ in length");
    }
    TallyCounts t;
    t.rounds = static_cast<std::int64_t>(alice.size());
    for (std::size_t i = 0; i < alice.size(); ++i) {
        if (basis_of(alice[i].state) != alice[i].basis) {
            throw std::invalid_argument("sift: Alice record basis does not match its state");
        }
        if (!bob[i].conclusive) {
            continue;
        }
        ++t.conclusive;
        if (bob[i].basis_used != alice[i].basis) {
            continue;
        }
        ++t.sifted;
        if (*bob[i].bit != encoded_bit(alice[i].state)) {
            ++t.errors;
        }
    }
    return t;
}

template <class URBG>
CollectiveRotation draw_b(Randomization scheme, URBG &rng) {
    switch (scheme) {
        case Randomization::none:
            return CollectiveRotation::identity();
        case Randomization::flip_half:
            return std::bernoulli_distribution(0.5)(rng) ? CollectiveRotation::bit_flip()
                                                         : CollectiveRotation::identity();
        case Randomization::haar:
            return haar_sample(rng);
    }
    throw std::invalid_argument("draw_b: unknown scheme");
}

template <class URBG>
BasisChoice draw_basis(URBG &rng) {
    return std::bernoulli_distribution(0.5)(rng) ? BasisChoice::PlusMinusI : BasisChoice::PlusMinus;
}

template <class URBG>
LogicalState draw_state(URBG &rng) {
    return kLogicalStates[std::uniform_int_distribution<int>(0, 3)(rng)];
}

template <class URBG>
PhaseMask draw_mask(URBG &rng) {
    return kPhaseMasks[std::uniform_int_distribution<int>(0, 3)(rng)];
}

struct RoundLog {
    std::vector<AliceRecord> alice;
    std::vector<RoundOutcome> bob;
};

/// Noiseless rounds through a fixed collective channel with every random
/// choice drawn from `rng`.
template <class URBG>
RoundLog run_rounds(std::size_t n, const CollectiveRotation &channel, Randomization scheme, URBG &rng) {
    RoundLog log;
    log.alice.reserve(n);
    log.bob.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const LogicalState l = draw_state(rng);
        const CollectiveRotation b = draw_b(scheme, rng);
        const PhaseMask mask = draw_mask(rng);
        const BasisChoice basis = draw_basis(rng);
        const PairState s = bob_pipeline(alice_pipeline(prepare(l), b, channel), mask);
        log.alice.push_back({l, basis_of(l)});
        log.bob.push_back(measure(s, basis, rng));
    }
    return log;
}

}  // namespace rfqkd
