#pragma once

#include <array>
#include <cstdint>

namespace mfg {

/// Philox4x32-10 block function (Salmon et al., SC'11). Stateless: the output
/// depends only on (counter, key).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key);

/// Independent random streams sharing one seed.
enum class Stream : std::uint32_t {
    brownian = 0,
    initial_ensemble = 1,
    projection = 2,
    value_paths = 3,
    test = 4,
};

/// Uniform variate in the open interval (0, 1) keyed by
/// (seed, stream, a, b, index). Two variates come out of each Philox block.
double counter_uniform(std::uint64_t seed, Stream stream, std::uint32_t a, std::uint32_t b, std::uint32_t index);

/// Standard normal variate by inverse CDF of counter_uniform.
double counter_normal(std::uint64_t seed, Stream stream, std::uint32_t a, std::uint32_t b, std::uint32_t index);

/// Inverse of the standard normal CDF; relative accuracy near machine
/// precision (Acklam's rational approximation plus one Halley step).
double inverse_normal_cdf(double p);

} // namespace mfg
