#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace peakinf {

// Philox4x32-10 counter-based generator. The key is the 64-bit seed; the
// upper three counter words carry (stream, replicate, cell) so every
// replicate owns an independent sequence that does not depend on scheduling.
class Philox4x32 {
public:
    using result_type = std::uint32_t;
    using Block = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    Philox4x32(std::uint64_t seed, std::uint32_t stream, std::uint32_t replicate,
               std::uint32_t cell = 0) noexcept;

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept;

    // The bare ten-round bijection, exposed for known-answer tests.
    [[nodiscard]] static Block bijection(Block counter, Key key) noexcept;

private:
    Key key_;
    Block counter_;
    Block buffer_{};
    int used_ = 4;
};

// Identifies one noise stream inside an experiment.
struct NoiseKey {
    std::uint64_t seed = 0;
    std::uint32_t replicate = 0;
    std::uint32_t stream = 0;
    std::uint32_t cell = 0;
};

// Well-known stream ids used by the harness.
inline constexpr std::uint32_t kNoiseStream = 0;
inline constexpr std::uint32_t kOmegaStream = 1;

}  // namespace peakinf
