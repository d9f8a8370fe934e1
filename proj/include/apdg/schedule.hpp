/*
 Copyright 2026 The apdg-dmpc Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/
#ifndef APDG_SCHEDULE_HPP
#define APDG_SCHEDULE_HPP

#include "apdg/common.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace apdg {

enum class SyncMode { Async, Synchronous };

/**
 * Activation and delay model. Node i activates every U[tau_lo, tau_hi] * speed[i]
 * seconds (speed is a period multiplier, so 2 means half as fast); messages
 * take U[0, tau_delay] seconds, self-messages take none.
 */
struct Schedule {
    double tau_lo = 0.05;
    double tau_hi = 0.05;
    double tau_delay = 0.0;
    std::vector<double> speed; ///< empty means 1 for every node
    SyncMode mode = SyncMode::Async;

    double multiplier(int node) const {
        return speed.empty() ? 1.0 : speed.at(static_cast<std::size_t>(node));
    }
    double min_period(int M) const {
        double best = multiplier(0);
        for (int i = 1; i < M; ++i) best = std::min(best, multiplier(i));
        return tau_lo * best;
    }
    double max_period(int M) const {
        double best = multiplier(0);
        for (int i = 1; i < M; ++i) best = std::max(best, multiplier(i));
        return tau_hi * best;
    }
};

struct EtaBounds {
    long eta1 = 0;
    long eta2 = 0;
    long eta = 0;
};

/// Global-index windows: every node activates within eta1 steps, and data
/// sent at step k is consumed before step k + eta.
inline EtaBounds eta_bounds(int M, double tau_lo, double tau_hi, double tau) {
    if (!(tau_lo > 0.0)) {
        throw Error(ErrorCode::ConfigInvalid, "eta_bounds: tau_lo must be positive");
    }
    EtaBounds out;
    out.eta1 = static_cast<long>(M - 1) * static_cast<long>(std::floor(tau_hi / tau_lo)) + 1;
    out.eta2 = static_cast<long>(M) * static_cast<long>(std::floor(tau / tau_lo));
    out.eta = out.eta1 + out.eta2;
    return out;
}

/// Delay bound in activation ticks, ceil(tau / tau_lo).
inline long delay_ticks(double tau, double tau_lo) {
    return static_cast<long>(std::ceil(tau / tau_lo - 1e-12));
}

} // namespace apdg

#endif // APDG_SCHEDULE_HPP
