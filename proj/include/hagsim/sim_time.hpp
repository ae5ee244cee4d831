#pragma once

#include <compare>
#include <cstdint>

namespace hagsim {

// Microsecond clock. 64-bit microseconds cover ~584k years of simulated
// time, and one 1500-byte frame at 76 Mbps (~158 us) stays representable.
struct SimTime {
    std::uint64_t micros = 0;

    static constexpr SimTime zero() { return SimTime{0}; }
    static constexpr SimTime us(std::uint64_t v) { return SimTime{v}; }
    static constexpr SimTime ms(std::uint64_t v) { return SimTime{v * 1000u}; }
    static constexpr SimTime sec(std::uint64_t v) { return SimTime{v * 1000000u}; }

    constexpr double seconds() const { return static_cast<double>(micros) * 1e-6; }
    constexpr double millis() const { return static_cast<double>(micros) * 1e-3; }

    constexpr auto operator<=>(const SimTime&) const = default;

    constexpr SimTime operator+(SimTime o) const { return SimTime{micros + o.micros}; }
    constexpr SimTime operator-(SimTime o) const { return SimTime{micros - o.micros}; }
    SimTime& operator+=(SimTime o) {
        micros += o.micros;
        return *this;
    }
};

} // namespace hagsim
