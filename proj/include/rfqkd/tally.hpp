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

#pragma once

#include <cstdint>
#include <stdexcept>

namespace rfqkd {

/// Counters accumulated over a session. Merging is plain addition.
struct TallyCounts {
    std::int64_t rounds = 0;
    std::int64_t conclusive = 0;
    std::int64_t sifted = 0;
    std::int64_t errors = 0;
    std::int64_t accidental_conclusive = 0;
    std::int64_t pS_sample_total = 0;
    std::int64_t pS_sample_inS = 0;
    double duration_s = 0.0;

    TallyCounts &operator+=(const TallyCounts &o) {
        rounds += o.rounds;
        conclusive += o.conclusive;
        sifted += o.sifted;
        errors += o.errors;
        accidental_conclusive += o.accidental_conclusive;
        pS_sample_total += o.pS_sample_total;
        pS_sample_inS += o.pS_sample_inS;
        duration_s += o.duration_s;
        return *this;
    }

    friend TallyCounts operator+(TallyCounts a, const TallyCounts &b) { return a += b; }

    bool operator==(const TallyCounts &) const = default;

    bool consistent() const {
        return rounds >= 0 && errors >= 0 && accidental_conclusive >= 0 && errors <= sifted && sifted <= conclusive &&
               accidental_conclusive <= conclusive && pS_sample_inS >= 0 && pS_sample_inS <= pS_sample_total &&
               duration_s >= 0.0;
    }

    void validate() const {
        if (!consistent()) {
            throw std::invalid_argument("TallyCounts: inconsistent counters");
        }
    }
};

}  // namespace rfqkd
