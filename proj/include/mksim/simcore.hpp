#pragma once

#include "mksim/types.hpp"

#include <cstdint>
#include <optional>
#include <queue>
#include <unordered_set>
#include <utility>
#include <variant>
#include <vector>

namespace mksim {

using EventId = std::uint64_t;

struct CoreClock {
    CoreId core_id = 0;
    Ticks skew = 0;          ///< constant offset of this core's TSC from global time
    Ticks rdtsc_cost = 0;    ///< average cost of reading a TSC
    Ticks ipi_cost = 1;      ///< average one-way IPI latency
};

namespace ev {
struct TimerFire { CoreId core; };
struct Ipi { CoreId src; CoreId dst; std::uint64_t payload; };
struct DeviceInterrupt { DeviceId device; std::int64_t index; };
struct Replenishment { VcpuId vcpu; };
struct Wakeup { ThreadId thread; std::uint64_t generation; };
struct FaultInject { std::size_t index; };
struct RecoveryStart { std::size_t index; };
struct MigrationStart { std::size_t index; };
struct TraceSample { std::int64_t index; };
struct WorkDone { ThreadId worker; std::uint64_t token; };
}  // namespace ev

using EventKind = std::variant<ev::TimerFire, ev::Ipi, ev::DeviceInterrupt, ev::Replenishment,
                               ev::Wakeup, ev::FaultInject, ev::RecoveryStart,
                               ev::MigrationStart, ev::TraceSample, ev::WorkDone>;

struct Event {
    Ticks fire_at = 0;
    EventId seq = 0;
    EventKind kind;
};

/// Deterministic discrete-event engine. Events at equal time come out in
/// insertion order. Every core owns a one-shot timer with at most one
/// pending TimerFire.
class Engine {
public:
    explicit Engine(std::vector<CoreClock> clocks);

    Ticks now() const noexcept { return now_; }
    std::size_t core_count() const noexcept { return clocks_.size(); }
    const CoreClock& clock(CoreId core) const;

    EventId schedule_event(Ticks fire_at, EventKind kind);
    /// Returns false if the event already fired or was cancelled.
    bool cancel(EventId id);
    /// Removes and returns the earliest live event. Throws EmptyQueue.
    Event advance();
    bool empty() const noexcept { return live_ids_.empty(); }
    std::size_t pending() const noexcept { return live_ids_.size(); }
    std::optional<Ticks> peek_time();

    Ticks read_tsc(CoreId core);
    Ticks rdtsc_charged(CoreId core) const;
    Ticks to_local(CoreId core, Ticks global) const { return global + clock(core).skew; }
    Ticks to_global(CoreId core, Ticks local) const { return local - clock(core).skew; }

    EventId program_oneshot_timer(CoreId core, Ticks fire_at);
    void cancel_timer(CoreId core);
    std::optional<EventId> pending_timer(CoreId core) const;
    std::optional<Ticks> pending_timer_deadline(CoreId core) const;

private:
    struct Later {
        bool operator()(const Event& a, const Event& b) const
        {
            return a.fire_at != b.fire_at ? a.fire_at > b.fire_at : a.seq > b.seq;
        }
    };

    void check_core(CoreId core) const;
    void drop_cancelled_head();

    std::vector<CoreClock> clocks_;
    std::vector<Ticks> rdtsc_charged_;
    std::vector<std::optional<std::pair<EventId, Ticks>>> timers_;
    std::priority_queue<Event, std::vector<Event>, Later> queue_;
    std::unordered_set<EventId> live_ids_;
    Ticks now_ = 0;
    EventId next_seq_ = 0;
};

}  // namespace mksim
