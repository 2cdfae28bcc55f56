#include "mksim/comm.hpp"

#include <doctest.h>

using namespace mksim;

namespace {

struct Fixture {
    SandboxTable sandboxes{3, 1000};
    ChannelTable channels;
    Fixture()
    {
        sandboxes.create_sandbox("a", 0, 10);
        sandboxes.create_sandbox("b", 1, 10);
        sandboxes.create_sandbox("c", 2, 10);
    }
};

Errc code_of(auto&& fn)
{
    try {
        fn();
    } catch (const SimError& e) {
        return e.code();
    }
    FAIL("no error");
    return Errc::Precondition;
}

}  // namespace

TEST_CASE("channel creation maps the pages into both endpoints only")
{
    Fixture f;
    const ChannelId ch = f.channels.create_channel(f.sandboxes, 0, 1, 2, "x");
    const Channel& c = f.channels.at(ch);
    CHECK(c.to_a.capacity == 4096);
    CHECK(f.sandboxes.at(0).access(c.first_page + 1, AccessMode::Write).ok);
    CHECK(f.sandboxes.at(1).access(c.first_page, AccessMode::Read).ok);
    CHECK_FALSE(f.sandboxes.at(2).access(c.first_page, AccessMode::Read).ok);
    CHECK(code_of([&] { f.channels.create_channel(f.sandboxes, 1, 1, 1); }) == Errc::SameSandbox);
}

TEST_CASE("one message per direction: send, busy, poll")
{
    Fixture f;
    const ChannelId ch = f.channels.create_channel(f.sandboxes, 0, 1, 1);
    const auto p0 = message_payload(0, 100);

    CHECK(f.channels.writable(ch, 0));
    CHECK(f.channels.send(ch, 0, p0, 5) == SendResult::Sent);
    CHECK_FALSE(f.channels.writable(ch, 0));
    CHECK(f.channels.send(ch, 0, message_payload(1, 10), 6) == SendResult::Busy);
    // the reverse direction is independent
    CHECK(f.channels.writable(ch, 1));
    CHECK_FALSE(f.channels.poll(ch, 0));

    bool corrupt = true;
    CHECK(f.channels.peek(ch, 1, corrupt) == 100);
    CHECK_FALSE(corrupt);
    const auto m = f.channels.poll(ch, 1);
    REQUIRE(m);
    CHECK(m->bytes == p0);
    CHECK(m->seq == 0);
    CHECK(m->send_start == 5);
    CHECK_FALSE(f.channels.poll(ch, 1));
    CHECK(f.channels.send(ch, 0, message_payload(1, 10), 7) == SendResult::Sent);
    CHECK(f.channels.poll(ch, 1)->seq == 1);
}

TEST_CASE("channel errors")
{
    Fixture f;
    const ChannelId ch = f.channels.create_channel(f.sandboxes, 0, 1, 1);
    CHECK(code_of([&] { f.channels.send(ch, 2, message_payload(0, 1), 0); }) == Errc::NotEndpoint);
    CHECK(code_of([&] { f.channels.send(ch, 0, message_payload(0, 2049), 0); }) == Errc::TooLarge);
    CHECK(code_of([&] { f.channels.poll(ch, 2); }) == Errc::NotEndpoint);
}

TEST_CASE("corruption persists until reset")
{
    Fixture f;
    const ChannelId ch = f.channels.create_channel(f.sandboxes, 0, 1, 1);
    f.channels.send(ch, 0, message_payload(0, 10), 0);
    f.channels.corrupt(ch);
    for (int i = 0; i < 3; ++i) {
        const auto m = f.channels.poll(ch, 1);
        REQUIRE(m);
        CHECK(m->corrupt);
    }
    CHECK(f.channels.send(ch, 1, message_payload(0, 10), 0) == SendResult::Busy);
    f.channels.reset(ch);
    CHECK_FALSE(f.channels.poll(ch, 1));
    CHECK(f.channels.send(ch, 0, message_payload(1, 10), 0) == SendResult::Sent);
    CHECK_FALSE(f.channels.poll(ch, 1)->corrupt);
}

TEST_CASE("payloads are deterministic and differ by sequence number")
{
    CHECK(message_payload(3, 64) == message_payload(3, 64));
    CHECK(message_payload(3, 64) != message_payload(4, 64));
    CHECK(message_payload(0, 0).empty());
    CHECK(copy_cost(4096, 2) == 8192);
}
