#include "mksim/scenario.hpp"

#include <doctest.h>

#include <string>

using namespace mksim;

namespace {

Errc load_error(const std::string& text)
{
    try {
        parse_scenario(text);
    } catch (const SimError& e) {
        return e.code();
    }
    FAIL("scenario loaded");
    return Errc::Precondition;
}

std::string load_message(const std::string& text)
{
    try {
        parse_scenario(text);
    } catch (const SimError& e) {
        return e.what();
    }
    return {};
}

const char* kHead = R"(
[scenario]
name = "t"
duration = "1s"

[host]
cores = 2

[[sandbox]]
name = "A"
core = 0

[[sandbox]]
name = "B"
core = 1
)";

}  // namespace

TEST_CASE("durations")
{
    CHECK(parse_duration("250") == 250);
    CHECK(parse_duration("250us") == 250);
    CHECK(parse_duration("5ms") == 5000);
    CHECK(parse_duration("1.7ms") == 1700);
    CHECK(parse_duration("2s") == 2'000'000);
    CHECK(parse_duration("0.5s") == 500'000);
    CHECK_THROWS_AS(parse_duration("1.5us"), SimError);
    CHECK_THROWS_AS(parse_duration("fast"), SimError);
    CHECK_THROWS_AS(parse_duration("3h"), SimError);
}

TEST_CASE("a small scenario loads")
{
    const Scenario s = parse_scenario(std::string(kHead) + R"(
[[vcpu]]
name = "v"
sandbox = "A"
budget = "2ms"
period = "5ms"

[[vcpu]]
name = "io"
sandbox = "A"
class = "io"
util = "1/25"

[[channel]]
name = "c"
a = "A"
b = "B"

[[thread]]
name = "t"
vcpu = "v"
workload = { type = "cpu_loop", work = "1ms", period = "5ms" }
)");
    CHECK(s.name == "t");
    CHECK(s.duration == 1'000'000);
    REQUIRE(s.vcpus.size() == 2);
    CHECK(s.vcpus[0].spec.budget == 2000);
    CHECK(s.vcpus[0].background);
    CHECK_FALSE(s.vcpus[1].background);
    CHECK(s.vcpus[1].spec.util == Ratio::make(1, 25));
    CHECK(s.channel_index("c") == 0);
    CHECK(std::get<wl::CpuLoop>(s.threads[0].workload).work == 1000);
}

TEST_CASE("unknown keys are rejected with their line")
{
    CHECK(load_error(std::string(kHead) + "\n[[vcpu]]\nname = \"v\"\nsandbox = \"A\"\nbudgett = 3\n") ==
          Errc::ParseError);
    const std::string msg = load_message(std::string(kHead) + "\n[[vcpu]]\nname = \"v\"\nsandbox = \"A\"\nbudgett = 3\n");
    CHECK(msg.find("line") != std::string::npos);
    CHECK(msg.find("budgett") != std::string::npos);
    CHECK(load_error("[scenario\nname=1") == Errc::ParseError);
}

TEST_CASE("three 40/100 Mains on one core fail admission")
{
    std::string text = kHead;
    for (int i = 0; i < 3; ++i)
        text += "\n[[vcpu]]\nname = \"v" + std::to_string(i) +
                "\"\nsandbox = \"A\"\nbudget = \"40ms\"\nperiod = \"100ms\"\n";
    CHECK(load_error(text) == Errc::AdmissionFailed);
    const std::string msg = load_message(text);
    CHECK(msg.find("v2") != std::string::npos);
    CHECK(msg.find("6/5") != std::string::npos);
}

TEST_CASE("dangling references")
{
    CHECK(load_error(std::string(kHead) + "\n[[channel]]\nname = \"c\"\na = \"A\"\nb = \"Z\"\n") ==
          Errc::UnresolvedReference);
    CHECK(load_error(std::string(kHead) + "\n[[thread]]\nname = \"t\"\nvcpu = \"none\"\n"
                                          "workload = { type = \"hog\" }\n") == Errc::UnresolvedReference);
    CHECK(load_error(std::string(kHead) +
                     "\n[[vcpu]]\nname = \"v\"\nsandbox = \"A\"\nbudget = 1\nperiod = 2\n"
                     "[[thread]]\nname = \"t\"\nvcpu = \"v\"\nworkload = { type = \"receiver\", channel = \"q\" }\n") ==
          Errc::UnresolvedReference);
}

TEST_CASE("malformed VCPU parameters")
{
    CHECK(load_error(std::string(kHead) + "\n[[vcpu]]\nname = \"v\"\nsandbox = \"A\"\nbudget = 5\nperiod = 2\n") ==
          Errc::ParseError);
    CHECK(load_error(std::string(kHead) + "\n[[vcpu]]\nname = \"v\"\nsandbox = \"A\"\nclass = \"gpu\"\n") ==
          Errc::ParseError);
}

TEST_CASE("core skews may be negative")
{
    const Scenario s = parse_scenario("[scenario]\nname = \"s\"\nduration = \"1s\"\n[host]\ncores = 3\n"
                                      "skews = [\"-10ms\", 0, \"2.5ms\"]\n");
    CHECK(s.host.skews == std::vector<Ticks>{-10000, 0, 2500});
}
