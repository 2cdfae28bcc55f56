#include "mksim/simcore.hpp"

#include <doctest.h>

using namespace mksim;

namespace {

Engine make_engine(int cores, Ticks skew1 = 0)
{
    std::vector<CoreClock> clocks;
    for (int i = 0; i < cores; ++i)
        clocks.push_back(CoreClock{i, i == 1 ? skew1 : 0, 0, 1});
    return Engine(std::move(clocks));
}

Errc code_of(auto&& fn)
{
    try {
        fn();
    } catch (const SimError& e) {
        return e.code();
    }
    FAIL("expected SimError");
    return Errc::Precondition;
}

}  // namespace

TEST_CASE("first insertion gets id 0")
{
    Engine e = make_engine(1);
    CHECK(e.schedule_event(50, ev::TimerFire{0}) == 0);
    CHECK(e.pending() == 1);
}

TEST_CASE("equal-time events come out in insertion order")
{
    Engine e = make_engine(1);
    e.schedule_event(100, ev::FaultInject{1});
    e.schedule_event(100, ev::FaultInject{2});
    CHECK(std::get<ev::FaultInject>(e.advance().kind).index == 1);
    CHECK(std::get<ev::FaultInject>(e.advance().kind).index == 2);
}

TEST_CASE("scheduling into the past fails")
{
    Engine e = make_engine(1);
    e.schedule_event(10, ev::TimerFire{0});
    e.advance();
    CHECK(code_of([&] { e.schedule_event(5, ev::TimerFire{0}); }) == Errc::PastTime);
}

TEST_CASE("advance extracts the minimum and moves time")
{
    Engine e = make_engine(1);
    e.schedule_event(5, ev::FaultInject{0});
    e.schedule_event(3, ev::FaultInject{1});
    Event first = e.advance();
    CHECK(first.fire_at == 3);
    CHECK(std::get<ev::FaultInject>(first.kind).index == 1);
    e.advance();
    CHECK(e.now() == 5);
    CHECK(e.empty());
    CHECK(code_of([&] { e.advance(); }) == Errc::EmptyQueue);
}

TEST_CASE("cancelled events never fire")
{
    Engine e = make_engine(1);
    const EventId a = e.schedule_event(5, ev::FaultInject{0});
    e.schedule_event(6, ev::FaultInject{1});
    CHECK(e.cancel(a));
    CHECK_FALSE(e.cancel(a));
    CHECK(e.peek_time() == 6);
    CHECK(std::get<ev::FaultInject>(e.advance().kind).index == 1);
}

TEST_CASE("read_tsc applies the core skew")
{
    Engine e = make_engine(4, 250);
    e.schedule_event(1000, ev::FaultInject{0});
    e.advance();
    CHECK(e.read_tsc(0) == 1000);
    CHECK(e.read_tsc(1) == 1250);
    CHECK(code_of([&] { e.read_tsc(9); }) == Errc::UnknownCore);
    CHECK(e.to_global(1, 1250) == 1000);
}

TEST_CASE("reprogramming a core timer supersedes the old deadline")
{
    Engine e = make_engine(2);
    e.program_oneshot_timer(0, 50);
    e.program_oneshot_timer(0, 30);
    CHECK(e.pending() == 1);
    Event ev = e.advance();
    CHECK(ev.fire_at == 30);
    CHECK(e.empty());
    CHECK_FALSE(e.pending_timer(0));
}

TEST_CASE("timers on different cores are independent")
{
    Engine e = make_engine(2);
    e.program_oneshot_timer(0, 50);
    e.program_oneshot_timer(1, 50);
    CHECK(std::get<ev::TimerFire>(e.advance().kind).core == 0);
    CHECK(std::get<ev::TimerFire>(e.advance().kind).core == 1);
}

TEST_CASE("timer in the past fails")
{
    Engine e = make_engine(1);
    e.schedule_event(10, ev::FaultInject{0});
    e.advance();
    CHECK(code_of([&] { e.program_oneshot_timer(0, 9); }) == Errc::PastTime);
}

TEST_CASE("random schedules dequeue in (time, insertion) order")
{
    Engine e = make_engine(1);
    std::uint64_t x = 12345;
    std::vector<std::pair<Ticks, std::size_t>> expected;
    for (std::size_t i = 0; i < 2000; ++i) {
        x = x * 6364136223846793005ull + 1442695040888963407ull;
        const Ticks t = static_cast<Ticks>((x >> 33) % 97);
        e.schedule_event(t, ev::FaultInject{i});
        expected.emplace_back(t, i);
    }
    std::stable_sort(expected.begin(), expected.end(),
                     [](auto& a, auto& b) { return a.first < b.first; });
    for (const auto& [t, i] : expected) {
        Event ev = e.advance();
        REQUIRE(ev.fire_at == t);
        REQUIRE(std::get<ev::FaultInject>(ev.kind).index == i);
    }
}
