#pragma once

#include <numbers>

// Internal convention: hbar = 1, every frequency is an angular frequency in
// rad/s and every time is in seconds. Conversions happen once, at the edges.
namespace qbattery {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Linear frequency (Omega/2pi) in MHz -> rad/s.
constexpr double from_mhz(double mhz) noexcept { return kTwoPi * mhz * 1e6; }
/// Linear frequency (Omega/2pi) in GHz -> rad/s.
constexpr double from_ghz(double ghz) noexcept { return kTwoPi * ghz * 1e9; }
constexpr double to_mhz(double rad_per_s) noexcept { return rad_per_s / (kTwoPi * 1e6); }
constexpr double to_ghz(double rad_per_s) noexcept { return rad_per_s / (kTwoPi * 1e9); }

constexpr double from_ns(double ns) noexcept { return ns * 1e-9; }
constexpr double from_us(double us) noexcept { return us * 1e-6; }
constexpr double to_ns(double s) noexcept { return s * 1e9; }

/// Decay rates are quoted as plain rates ("kHz" meaning 1e3 per second), no 2pi.
constexpr double from_khz_rate(double khz) noexcept { return khz * 1e3; }
constexpr double to_khz_rate(double per_s) noexcept { return per_s * 1e-3; }

namespace literals {
constexpr double operator""_MHz(long double v) { return from_mhz(static_cast<double>(v)); }
constexpr double operator""_MHz(unsigned long long v) { return from_mhz(static_cast<double>(v)); }
constexpr double operator""_GHz(long double v) { return from_ghz(static_cast<double>(v)); }
constexpr double operator""_ns(long double v) { return from_ns(static_cast<double>(v)); }
constexpr double operator""_ns(unsigned long long v) { return from_ns(static_cast<double>(v)); }
constexpr double operator""_us(long double v) { return from_us(static_cast<double>(v)); }
constexpr double operator""_us(unsigned long long v) { return from_us(static_cast<double>(v)); }
}  // namespace literals

}  // namespace qbattery
