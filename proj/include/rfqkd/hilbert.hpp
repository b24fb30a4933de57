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

// Two-photon polarization x time-bin state space.
//
// Each photon lives in {H, V} x {0, T, 2T}, so a labeled pair has 36 basis
// modes. Photon 1 is always the early photon of the pair label; the two
// photons are treated as distinguishable. All types here are immutable
// values and every operation is a pure function.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <bitset>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rfqkd {

using cplx = std::complex<double>;
using Mat2 = Eigen::Matrix2cd;

inline constexpr int kMaxBin = 2;
inline constexpr std::size_t kModesPerPhoton = 2 * (kMaxBin + 1);
inline constexpr std::size_t kPairDim = kModesPerPhoton * kModesPerPhoton;

inline constexpr double kNormTolerance = 1e-12;
inline constexpr double kUnitaryTolerance = 1e-10;

enum class Pol : std::uint8_t { H = 0, V = 1 };

struct PhotonMode {
    Pol pol = Pol::H;
    int bin = 0;  // number of tag delays T accumulated, 0..kMaxBin

    constexpr PhotonMode() = default;
    constexpr PhotonMode(Pol p, int b) : pol(p), bin(b) {
        if (b < 0 || b > kMaxBin) {
            throw std::out_of_range("PhotonMode: time bin must be in [0, 2]");
        }
    }
    constexpr bool operator==(const PhotonMode &) const = default;
};

struct ModePair {
    PhotonMode first;   // early photon
    PhotonMode second;  // late photon
    constexpr bool operator==(const ModePair &) const = default;
};

namespace modes {
constexpr PhotonMode H(int bin = 0) { return {Pol::H, bin}; }
constexpr PhotonMode V(int bin = 0) { return {Pol::V, bin}; }
}  // namespace modes

constexpr std::size_t mode_index(PhotonMode m) {
    return static_cast<std::size_t>(m.pol) * (kMaxBin + 1) + static_cast<std::size_t>(m.bin);
}

constexpr std::size_t pair_index(ModePair m) {
    return mode_index(m.first) * kModesPerPhoton + mode_index(m.second);
}

constexpr PhotonMode mode_from_index(std::size_t i) {
    return {static_cast<Pol>(i / (kMaxBin + 1)), static_cast<int>(i % (kMaxBin + 1))};
}

constexpr ModePair pair_from_index(std::size_t i) {
    return {mode_from_index(i / kModesPerPhoton), mode_from_index(i % kModesPerPhoton)};
}

using ModeSet = std::bitset<kPairDim>;

inline ModeSet mode_set(std::initializer_list<ModePair> pairs) {
    ModeSet out;
    for (const auto &p : pairs) {
        out.set(pair_index(p));
    }
    return out;
}

/// Every mode pair whose two photons carry the same number of tags. After
/// both tagging stages these are exactly the detections that show the bare
/// pair-label separation between the photons.
inline ModeSet equal_bin_sector() {
    ModeSet out;
    for (std::size_t i = 0; i < kPairDim; ++i) {
        auto m = pair_from_index(i);
        if (m.first.bin == m.second.bin) {
            out.set(i);
        }
    }
    return out;
}

enum class NormKind { normalized, subnormalized };

class PairState {
   public:
    using Amplitudes = std::array<cplx, kPairDim>;

    /// Validates the norm invariant for `kind`; throws std::invalid_argument.
    static PairState from_amplitudes(const Amplitudes &amps, NormKind kind) {
        double n2 = squared_norm(amps);
        if (kind == NormKind::normalized) {
            if (std::abs(n2 - 1.0) > kNormTolerance) {
                throw std::invalid_argument("PairState: normalized state has squared norm " +
                                            std::to_string(n2));
            }
        } else if (!(n2 > 0.0) || n2 > 1.0 + kNormTolerance) {
            throw std::invalid_argument("PairState: subnormalized squared norm must lie in (0, 1], got " +
                                        std::to_string(n2));
        }
        return PairState(amps, kind);
    }

    cplx amplitude(ModePair m) const { return amps_[pair_index(m)]; }
    cplx operator[](std::size_t i) const { return amps_[i]; }
    const Amplitudes &amplitudes() const { return amps_; }
    NormKind norm_kind() const { return kind_; }
    double norm_squared() const { return squared_norm(amps_); }

    PairState normalized() const {
        double n = std::sqrt(norm_squared());
        Amplitudes out;
        for (std::size_t i = 0; i < kPairDim; ++i) {
            out[i] = amps_[i] / n;
        }
        return PairState(out, NormKind::normalized);
    }

    static double squared_norm(const Amplitudes &amps) {
        double n2 = 0.0;
        for (const auto &c : amps) {
            n2 += std::norm(c);
        }
        return n2;
    }

   private:
    PairState(const Amplitudes &amps, NormKind kind) : amps_(amps), kind_(kind) {}

    Amplitudes amps_;
    NormKind kind_;
};

/// Builds a normalized state from (mode pair, amplitude) assignments.
/// Repeated mode pairs accumulate.
inline PairState pure_state(std::span<const std::pair<ModePair, cplx>> assignments) {
    PairState::Amplitudes amps{};
    for (const auto &[mode, amp] : assignments) {
        amps[pair_index(mode)] += amp;
    }
    double n2 = PairState::squared_norm(amps);
    if (!(n2 > 0.0)) {
        throw std::invalid_argument("pure_state: all assigned amplitudes are zero");
    }
    double n = std::sqrt(n2);
    for (auto &c : amps) {
        c /= n;
    }
    return PairState::from_amplitudes(amps, NormKind::normalized);
}

inline PairState pure_state(std::initializer_list<std::pair<ModePair, cplx>> assignments) {
    return pure_state(std::span<const std::pair<ModePair, cplx>>(assignments.begin(), assignments.size()));
}

enum class Photons { first, second, both };

inline bool is_unitary(const Mat2 &u, double tol = kUnitaryTolerance) {
    return ((u.adjoint() * u) - Mat2::Identity()).cwiseAbs().maxCoeff() <= tol;
}

namespace detail {

inline void require_unitary(const Mat2 &u, const char *who) {
    if (!u.allFinite() || !is_unitary(u)) {
        throw std::invalid_argument(std::string(who) + ": polarization operator is not unitary");
    }
}

// Acts with u on the polarization index of one photon; bins are untouched.
inline PairState::Amplitudes act_on_photon(const PairState::Amplitudes &in, const Mat2 &u, int photon) {
    PairState::Amplitudes out{};
    for (std::size_t i = 0; i < kPairDim; ++i) {
        if (in[i] == cplx{}) {
            continue;
        }
        ModePair m = pair_from_index(i);
        PhotonMode &target = photon == 0 ? m.first : m.second;
        const int col = static_cast<int>(target.pol);
        for (int row = 0; row < 2; ++row) {
            target.pol = static_cast<Pol>(row);
            out[pair_index(m)] += u(row, col) * in[i];
        }
    }
    return out;
}

}  // namespace detail

inline PairState apply_pol_unitary(const PairState &s, const Mat2 &u, Photons which) {
    detail::require_unitary(u, "apply_pol_unitary");
    auto amps = s.amplitudes();
    if (which != Photons::second) {
        amps = detail::act_on_photon(amps, u, 0);
    }
    if (which != Photons::first) {
        amps = detail::act_on_photon(amps, u, 1);
    }
    // Unitaries preserve the norm up to rounding; keep the caller's kind.
    if (s.norm_kind() == NormKind::normalized) {
        return PairState::from_amplitudes(amps, NormKind::normalized);
    }
    return PairState::from_amplitudes(amps, NormKind::subnormalized);
}

/// Delays every photon whose polarization is `delayed` by one tag period.
/// Throws std::logic_error if a delayed mode already sits in the last bin.
inline PairState tag(const PairState &s, Pol delayed) {
    PairState::Amplitudes out{};
    for (std::size_t i = 0; i < kPairDim; ++i) {
        const cplx amp = s[i];
        if (amp == cplx{}) {
            continue;
        }
        ModePair m = pair_from_index(i);
        for (PhotonMode *photon : {&m.first, &m.second}) {
            if (photon->pol != delayed) {
                continue;
            }
            if (photon->bin == kMaxBin) {
                throw std::logic_error("tag: time-bin overflow (photon already tagged twice)");
            }
            ++photon->bin;
        }
        out[pair_index(m)] = amp;
    }
    return PairState::from_amplitudes(out, s.norm_kind());
}

struct Projection {
    std::optional<PairState> state;  // empty when probability is zero
    double probability = 0.0;
};

/// Keeps only amplitudes on `keep`. The returned state is subnormalized and
/// carries the squared norm of the kept part relative to the input.
inline Projection project(const PairState &s, const ModeSet &keep) {
    if (keep.none()) {
        throw std::invalid_argument("project: empty mode set");
    }
    PairState::Amplitudes out{};
    for (std::size_t i = 0; i < kPairDim; ++i) {
        if (keep.test(i)) {
            out[i] = s[i];
        }
    }
    double kept = PairState::squared_norm(out);
    double total = s.norm_squared();
    Projection p;
    p.probability = std::min(1.0, kept / total);
    if (kept > 0.0) {
        for (auto &c : out) {
            c /= std::sqrt(total);
        }
        p.state = PairState::from_amplitudes(out, NormKind::subnormalized);
    }
    return p;
}

inline cplx inner_product(const PairState &a, const PairState &b) {
    cplx acc{};
    for (std::size_t i = 0; i < kPairDim; ++i) {
        acc += std::conj(a[i]) * b[i];
    }
    return acc;
}

inline double fidelity(const PairState &a, const PairState &b) {
    if (a.norm_kind() != NormKind::normalized || b.norm_kind() != NormKind::normalized) {
        throw std::invalid_argument("fidelity: both states must be normalized");
    }
    return std::clamp(std::norm(inner_product(a, b)), 0.0, 1.0);
}

using DensityMatrix = Eigen::MatrixXcd;

inline constexpr double kHermitianTolerance = 1e-12;
inline constexpr double kPsdTolerance = 1e-10;

class PairDensity {
   public:
    /// Validates shape, Hermiticity, trace in (0, 1] and positivity.
    static PairDensity from_matrix(DensityMatrix m) {
        if (m.rows() != static_cast<Eigen::Index>(kPairDim) || m.cols() != static_cast<Eigen::Index>(kPairDim)) {
            throw std::invalid_argument("PairDensity: expected a 36x36 matrix, got " + std::to_string(m.rows()) +
                                        "x" + std::to_string(m.cols()));
        }
        if ((m - m.adjoint()).cwiseAbs().maxCoeff() > kHermitianTolerance) {
            throw std::invalid_argument("PairDensity: matrix is not Hermitian");
        }
        double tr = m.trace().real();
        if (!(tr > 0.0) || tr > 1.0 + kNormTolerance) {
            throw std::invalid_argument("PairDensity: trace must lie in (0, 1], got " + std::to_string(tr));
        }
        Eigen::SelfAdjointEigenSolver<DensityMatrix> eig(m, Eigen::EigenvaluesOnly);
        if (eig.eigenvalues().minCoeff() < -kPsdTolerance) {
            throw std::invalid_argument("PairDensity: matrix is not positive semidefinite");
        }
        return PairDensity(std::move(m));
    }

    static PairDensity from_pure(const PairState &s) {
        Eigen::VectorXcd v(static_cast<Eigen::Index>(kPairDim));
        for (std::size_t i = 0; i < kPairDim; ++i) {
            v(static_cast<Eigen::Index>(i)) = s[i];
        }
        return PairDensity(v * v.adjoint());
    }

    const DensityMatrix &matrix() const { return m_; }
    double trace() const { return m_.trace().real(); }

    /// <row| rho |col>
    cplx element(ModePair row, ModePair col) const {
        return m_(static_cast<Eigen::Index>(pair_index(row)), static_cast<Eigen::Index>(pair_index(col)));
    }

   private:
    explicit PairDensity(DensityMatrix m) : m_(std::move(m)) {}

    DensityMatrix m_;
};

/// The 36x36 operator that applies `u` to the polarization of the chosen photons.
inline DensityMatrix pol_operator(const Mat2 &u, Photons which) {
    detail::require_unitary(u, "pol_operator");
    DensityMatrix op(static_cast<Eigen::Index>(kPairDim), static_cast<Eigen::Index>(kPairDim));
    for (std::size_t col = 0; col < kPairDim; ++col) {
        PairState::Amplitudes basis{};
        basis[col] = 1.0;
        auto image = PairState::from_amplitudes(basis, NormKind::normalized);
        image = apply_pol_unitary(image, u, which);
        for (std::size_t row = 0; row < kPairDim; ++row) {
            op(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) = image[row];
        }
    }
    return op;
}

/// rho -> U rho U^dagger with U acting on polarization only.
inline PairDensity conjugate(const PairDensity &rho, const Mat2 &u, Photons which) {
    DensityMatrix op = pol_operator(u, which);
    DensityMatrix out = op * rho.matrix() * op.adjoint();
    // Restore exact Hermiticity lost to rounding.
    out = 0.5 * (out + out.adjoint()).eval();
    return PairDensity::from_matrix(std::move(out));
}

/// Weighted sum of densities. Weights must be nonnegative with sum <= 1.
inline PairDensity density_average(std::span<const std::pair<PairDensity, double>> terms) {
    if (terms.empty()) {
        throw std::invalid_argument("density_average: no terms");
    }
    double total = 0.0;
    DensityMatrix acc = DensityMatrix::Zero(static_cast<Eigen::Index>(kPairDim), static_cast<Eigen::Index>(kPairDim));
    for (const auto &[rho, w] : terms) {
        if (!(w >= 0.0)) {
            throw std::invalid_argument("density_average: negative weight");
        }
        if (rho.matrix().rows() != acc.rows() || rho.matrix().cols() != acc.cols()) {
            throw std::invalid_argument("density_average: dimension mismatch");
        }
        total += w;
        acc += w * rho.matrix();
    }
    if (total > 1.0 + kNormTolerance) {
        throw std::invalid_argument("density_average: weights sum to more than 1");
    }
    return PairDensity::from_matrix(std::move(acc));
}

inline PairDensity density_average(std::initializer_list<std::pair<PairDensity, double>> terms) {
    return density_average(std::span<const std::pair<PairDensity, double>>(terms.begin(), terms.size()));
}

}  // namespace rfqkd
