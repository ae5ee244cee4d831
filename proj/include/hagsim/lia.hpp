#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hagsim/sim_time.hpp"

namespace hagsim {

// Window/RTT view of one subflow, as seen by the coupled increase rule.
struct LiaTerm {
    double cwnd_bytes = 0.0;
    std::uint64_t srtt_us = 0;
};

// Linked-increases coupling factor across subflows:
//
//   alpha = cwnd_total * max_i(cwnd_i / rtt_i^2) / (sum_i cwnd_i / rtt_i)^2
//
// evaluated as
//
//   alpha = (cwnd_total / cwnd_M) / (sum_i s_i)^2,
//   s_i = (cwnd_i * rtt_M) / (cwnd_M * rtt_i),  M = argmax_i cwnd_i / rtt_i^2
//
// which is algebraically identical (rtt_M cancels) but makes the two
// identities exact in floating point: one subflow gives alpha = 1 and n
// identical subflows give alpha = 1/n, because every s_i collapses to 1.0.
// Subflows without an established srtt contribute nothing; with no usable
// term the factor is 1.0 (uncoupled until the first RTT sample).
inline double lia_alpha(std::span<const LiaTerm> subflows) {
    std::vector<LiaTerm> live;
    live.reserve(subflows.size());
    for (const auto& t : subflows)
        if (t.srtt_us > 0 && t.cwnd_bytes > 0.0) live.push_back(t);

    if (live.empty()) return 1.0;

    std::size_t m = 0;
    for (std::size_t i = 1; i < live.size(); ++i) {
        // cwnd_i/rtt_i^2 > cwnd_m/rtt_m^2  <=>  cwnd_i*rtt_m^2 > cwnd_m*rtt_i^2
        const double lhs = live[i].cwnd_bytes * static_cast<double>(live[m].srtt_us) *
                           static_cast<double>(live[m].srtt_us);
        const double rhs = live[m].cwnd_bytes * static_cast<double>(live[i].srtt_us) *
                           static_cast<double>(live[i].srtt_us);
        if (lhs > rhs) m = i;
    }

    double total = 0.0;
    double s_sum = 0.0;
    for (const auto& t : live) {
        total += t.cwnd_bytes;
        s_sum += (t.cwnd_bytes * static_cast<double>(live[m].srtt_us)) /
                 (live[m].cwnd_bytes * static_cast<double>(t.srtt_us));
    }
    return (total / live[m].cwnd_bytes) / (s_sum * s_sum);
}

} // namespace hagsim
