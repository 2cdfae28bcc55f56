#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mksim {

/// Simulated time. One tick is one microsecond.
using Ticks = std::int64_t;
/// Processor cycles; converted to ticks through the host's cycles_per_tick.
using Cycles = std::int64_t;

using CoreId = std::int32_t;
using SandboxId = std::int32_t;
using VcpuId = std::int32_t;
using ThreadId = std::int32_t;
using ChannelId = std::int32_t;
using DeviceId = std::int32_t;
using PageIndex = std::int64_t;

inline constexpr Ticks kNever = std::numeric_limits<Ticks>::max();
inline constexpr std::int64_t kPageBytes = 4096;

enum class Errc {
    PastTime,
    EmptyQueue,
    UnknownCore,
    MalformedSpec,
    Overrun,
    NoAssociatedThread,
    CoreTaken,
    OutOfHostPages,
    SameSandbox,
    NotEndpoint,
    TooLarge,
    UnknownTarget,
    NoActiveFault,
    NoStandby,
    NotEligible,
    ParseError,
    UnresolvedReference,
    AdmissionFailed,
    Precondition,
    InvariantViolation,
};

std::string_view to_string(Errc code);

class SimError : public std::runtime_error {
public:
    SimError(Errc code, const std::string& what);
    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] void fail(Errc code, const std::string& what);

/// Non-negative rational in lowest terms. Used for utilization factors,
/// which scenarios give as decimal strings ("0.04") or fractions ("1/25").
struct Ratio {
    std::int64_t num = 0;
    std::int64_t den = 1;

    static Ratio make(std::int64_t num, std::int64_t den);
    /// Exact parse of "0.04", "1/25", "3" and similar.
    static Ratio parse(std::string_view text);

    double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }
    std::string str() const;

    friend bool operator==(const Ratio&, const Ratio&) = default;
};

/// Round-half-up of ticks * ratio, in integer arithmetic.
Ticks scale_round_half_up(Ticks ticks, const Ratio& r);

}  // namespace mksim
