#include "mksim/comm.hpp"

#include <algorithm>

namespace mksim {

std::vector<std::uint8_t> message_payload(std::uint64_t seq, std::int64_t size)
{
    std::vector<std::uint8_t> out(static_cast<std::size_t>(size));
    std::uint64_t x = seq * 0x9E3779B97F4A7C15ull + 1;
    for (auto& b : out) {
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        b = static_cast<std::uint8_t>(x);
    }
    return out;
}

ChannelId ChannelTable::create_channel(SandboxTable& sandboxes, SandboxId a, SandboxId b,
                                       PageIndex pages, std::string name)
{
    if (a == b)
        fail(Errc::SameSandbox, "channel endpoints must differ");
    Sandbox& sa = sandboxes.at(a);
    Sandbox& sb = sandboxes.at(b);
    const PageIndex first = sandboxes.memory().allocate(pages);

    Channel c;
    c.id = static_cast<ChannelId>(channels_.size());
    c.name = name.empty() ? "ch" + std::to_string(c.id) : std::move(name);
    c.a = a;
    c.b = b;
    c.first_page = first;
    c.pages = pages;
    c.to_a.capacity = c.to_b.capacity = pages * kPageBytes / 2;
    sa.map_channel(c.id, first, pages);
    sb.map_channel(c.id, first, pages);
    channels_.push_back(std::move(c));
    return channels_.back().id;
}

Channel& ChannelTable::at(ChannelId ch)
{
    if (ch < 0 || static_cast<std::size_t>(ch) >= channels_.size())
        fail(Errc::UnknownTarget, "no channel " + std::to_string(ch));
    return channels_[static_cast<std::size_t>(ch)];
}

const Channel& ChannelTable::at(ChannelId ch) const
{
    return const_cast<ChannelTable*>(this)->at(ch);
}

Channel& ChannelTable::endpoint_checked(ChannelId ch, SandboxId who)
{
    Channel& c = at(ch);
    if (!c.is_endpoint(who))
        fail(Errc::NotEndpoint, "sandbox " + std::to_string(who) + " is not an endpoint of " + c.name);
    return c;
}

bool ChannelTable::writable(ChannelId ch, SandboxId from)
{
    const Mailbox& box = endpoint_checked(ch, from).outbox(from);
    return box.status == MailboxStatus::Empty && !box.corrupted;
}

SendResult ChannelTable::send(ChannelId ch, SandboxId from, std::span<const std::uint8_t> bytes,
                              Ticks send_start)
{
    Mailbox& box = endpoint_checked(ch, from).outbox(from);
    if (static_cast<std::int64_t>(bytes.size()) > box.capacity)
        fail(Errc::TooLarge, std::to_string(bytes.size()) + " bytes exceed mailbox capacity " +
                                 std::to_string(box.capacity));
    if (box.status == MailboxStatus::Full || box.corrupted) {
        ++box.busy;
        return SendResult::Busy;
    }
    box.buffer.assign(bytes.begin(), bytes.end());
    box.status = MailboxStatus::Full;
    box.seq = box.next_seq++;
    box.send_start = send_start;
    ++box.sent;
    return SendResult::Sent;
}

std::optional<std::int64_t> ChannelTable::peek(ChannelId ch, SandboxId who, bool& corrupt)
{
    const Mailbox& box = endpoint_checked(ch, who).inbox(who);
    corrupt = box.corrupted;
    if (box.corrupted)
        return static_cast<std::int64_t>(box.buffer.size());
    if (box.status == MailboxStatus::Full)
        return static_cast<std::int64_t>(box.buffer.size());
    return std::nullopt;
}

std::optional<Message> ChannelTable::poll(ChannelId ch, SandboxId who)
{
    Mailbox& box = endpoint_checked(ch, who).inbox(who);
    if (box.corrupted) {
        ++box.corrupt_reads;
        return Message{box.buffer, box.seq, box.send_start, true};
    }
    if (box.status == MailboxStatus::Empty)
        return std::nullopt;
    Message m{std::move(box.buffer), box.seq, box.send_start, false};
    box.buffer.clear();
    box.status = MailboxStatus::Empty;
    ++box.received;
    return m;
}

void ChannelTable::corrupt(ChannelId ch)
{
    Channel& c = at(ch);
    for (Mailbox* box : {&c.to_a, &c.to_b}) {
        box->corrupted = true;
        box->buffer.assign(static_cast<std::size_t>(std::min<std::int64_t>(box->capacity, 64)), 0xA5);
    }
}

void ChannelTable::reset(ChannelId ch)
{
    Channel& c = at(ch);
    for (Mailbox* box : {&c.to_a, &c.to_b}) {
        box->corrupted = false;
        box->buffer.clear();
        box->status = MailboxStatus::Empty;
    }
}

}  // namespace mksim
