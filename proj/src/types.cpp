#include "mksim/types.hpp"

#include <charconv>
#include <numeric>

namespace mksim {

std::string_view to_string(Errc code)
{
    switch (code) {
    case Errc::PastTime: return "PastTime";
    case Errc::EmptyQueue: return "EmptyQueue";
    case Errc::UnknownCore: return "UnknownCore";
    case Errc::MalformedSpec: return "MalformedSpec";
    case Errc::Overrun: return "Overrun";
    case Errc::NoAssociatedThread: return "NoAssociatedThread";
    case Errc::CoreTaken: return "CoreTaken";
    case Errc::OutOfHostPages: return "OutOfHostPages";
    case Errc::SameSandbox: return "SameSandbox";
    case Errc::NotEndpoint: return "NotEndpoint";
    case Errc::TooLarge: return "TooLarge";
    case Errc::UnknownTarget: return "UnknownTarget";
    case Errc::NoActiveFault: return "NoActiveFault";
    case Errc::NoStandby: return "NoStandby";
    case Errc::NotEligible: return "NotEligible";
    case Errc::ParseError: return "ParseError";
    case Errc::UnresolvedReference: return "UnresolvedReference";
    case Errc::AdmissionFailed: return "AdmissionFailed";
    case Errc::Precondition: return "Precondition";
    case Errc::InvariantViolation: return "InvariantViolation";
    }
    return "Unknown";
}

SimError::SimError(Errc code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code)
{
}

void fail(Errc code, const std::string& what)
{
    throw SimError(code, what);
}

Ratio Ratio::make(std::int64_t num, std::int64_t den)
{
    if (den <= 0 || num < 0)
        fail(Errc::MalformedSpec, "ratio must be non-negative with positive denominator");
    const std::int64_t g = std::gcd(num, den);
    return g == 0 ? Ratio{0, 1} : Ratio{num / g, den / g};
}

namespace {

std::int64_t parse_int(std::string_view s, std::string_view whole)
{
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size() || s.empty())
        fail(Errc::MalformedSpec, "bad ratio '" + std::string(whole) + "'");
    return v;
}

}  // namespace

Ratio Ratio::parse(std::string_view text)
{
    if (auto slash = text.find('/'); slash != std::string_view::npos)
        return make(parse_int(text.substr(0, slash), text), parse_int(text.substr(slash + 1), text));

    auto dot = text.find('.');
    if (dot == std::string_view::npos)
        return make(parse_int(text, text), 1);

    std::string_view ip = text.substr(0, dot);
    std::string_view fp = text.substr(dot + 1);
    if (fp.size() > 15)
        fail(Errc::MalformedSpec, "too many decimals in '" + std::string(text) + "'");
    std::int64_t den = 1;
    for (std::size_t i = 0; i < fp.size(); ++i)
        den *= 10;
    const std::int64_t whole = ip.empty() ? 0 : parse_int(ip, text);
    const std::int64_t frac = fp.empty() ? 0 : parse_int(fp, text);
    return make(whole * den + frac, den);
}

std::string Ratio::str() const
{
    return den == 1 ? std::to_string(num) : std::to_string(num) + "/" + std::to_string(den);
}

Ticks scale_round_half_up(Ticks ticks, const Ratio& r)
{
    const __int128 n = static_cast<__int128>(ticks) * r.num * 2 + r.den;
    return static_cast<Ticks>(n / (static_cast<__int128>(r.den) * 2));
}

}  // namespace mksim
