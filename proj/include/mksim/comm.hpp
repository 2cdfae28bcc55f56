#pragma once

#include "mksim/sandbox.hpp"
#include "mksim/types.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace mksim {

enum class MailboxStatus { Empty, Full };

/// One direction of a channel: a status bit plus a buffer in shared pages.
struct Mailbox {
    MailboxStatus status = MailboxStatus::Empty;
    std::vector<std::uint8_t> buffer;
    std::int64_t capacity = 0;
    bool corrupted = false;
    std::uint64_t seq = 0;       ///< sequence number of the message in the buffer
    Ticks send_start = 0;        ///< sender's global time when it began this message
    std::uint64_t next_seq = 0;
    std::int64_t sent = 0;
    std::int64_t received = 0;
    std::int64_t busy = 0;
    std::int64_t corrupt_reads = 0;
};

struct Channel {
    ChannelId id = 0;
    std::string name;
    SandboxId a = 0;
    SandboxId b = 0;
    PageIndex first_page = 0;
    PageIndex pages = 1;
    Mailbox to_a;  ///< read by a, written by b
    Mailbox to_b;  ///< read by b, written by a

    bool is_endpoint(SandboxId s) const noexcept { return s == a || s == b; }
    SandboxId peer(SandboxId s) const noexcept { return s == a ? b : a; }
    Mailbox& inbox(SandboxId s) { return s == a ? to_a : to_b; }
    Mailbox& outbox(SandboxId s) { return s == a ? to_b : to_a; }
    const Mailbox& inbox(SandboxId s) const { return s == a ? to_a : to_b; }
};

enum class SendResult { Sent, Busy };

struct Message {
    std::vector<std::uint8_t> bytes;
    std::uint64_t seq = 0;
    Ticks send_start = 0;
    bool corrupt = false;
};

/// Deterministic payload for message `seq` of `size` bytes.
std::vector<std::uint8_t> message_payload(std::uint64_t seq, std::int64_t size);

class ChannelTable {
public:
    /// Allocates the shared pages and has each endpoint's monitor map them RW.
    /// Throws SameSandbox, UnknownTarget or OutOfHostPages.
    ChannelId create_channel(SandboxTable& sandboxes, SandboxId a, SandboxId b, PageIndex pages,
                             std::string name = {});

    /// Throws NotEndpoint or TooLarge.
    SendResult send(ChannelId ch, SandboxId from, std::span<const std::uint8_t> bytes,
                    Ticks send_start = 0);
    /// Throws NotEndpoint. A corrupted mailbox yields a corrupt message and
    /// stays corrupted until reset.
    std::optional<Message> poll(ChannelId ch, SandboxId who);

    /// True if a send from `from` would be accepted right now.
    bool writable(ChannelId ch, SandboxId from);
    /// Size of the unconsumed message waiting for `who`; nullopt if none.
    std::optional<std::int64_t> peek(ChannelId ch, SandboxId who, bool& corrupt);

    /// Scrambles both mailboxes of the channel.
    void corrupt(ChannelId ch);
    /// Clears corruption and empties both mailboxes.
    void reset(ChannelId ch);

    Channel& at(ChannelId ch);
    const Channel& at(ChannelId ch) const;
    std::vector<Channel>& all() noexcept { return channels_; }
    const std::vector<Channel>& all() const noexcept { return channels_; }

private:
    Channel& endpoint_checked(ChannelId ch, SandboxId who);

    std::vector<Channel> channels_;
};

/// Copy cost of `bytes` at `cycles_per_byte`.
inline Cycles copy_cost(std::int64_t bytes, Cycles cycles_per_byte) { return bytes * cycles_per_byte; }

}  // namespace mksim
