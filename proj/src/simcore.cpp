#include "mksim/simcore.hpp"

#include <string>

namespace mksim {

Engine::Engine(std::vector<CoreClock> clocks)
    : clocks_(std::move(clocks)), rdtsc_charged_(clocks_.size(), 0), timers_(clocks_.size())
{
    for (std::size_t i = 0; i < clocks_.size(); ++i)
        clocks_[i].core_id = static_cast<CoreId>(i);
}

void Engine::check_core(CoreId core) const
{
    if (core < 0 || static_cast<std::size_t>(core) >= clocks_.size())
        fail(Errc::UnknownCore, "core " + std::to_string(core));
}

const CoreClock& Engine::clock(CoreId core) const
{
    check_core(core);
    return clocks_[static_cast<std::size_t>(core)];
}

EventId Engine::schedule_event(Ticks fire_at, EventKind kind)
{
    if (fire_at < now_)
        fail(Errc::PastTime,
             "event at " + std::to_string(fire_at) + " before now " + std::to_string(now_));
    const EventId id = next_seq_++;
    queue_.push(Event{fire_at, id, std::move(kind)});
    live_ids_.insert(id);
    return id;
}

bool Engine::cancel(EventId id)
{
    return live_ids_.erase(id) > 0;
}

void Engine::drop_cancelled_head()
{
    while (!queue_.empty() && !live_ids_.contains(queue_.top().seq))
        queue_.pop();
}

std::optional<Ticks> Engine::peek_time()
{
    drop_cancelled_head();
    if (queue_.empty())
        return std::nullopt;
    return queue_.top().fire_at;
}

Event Engine::advance()
{
    drop_cancelled_head();
    if (queue_.empty())
        fail(Errc::EmptyQueue, "no pending events");
    Event e = queue_.top();
    queue_.pop();
    live_ids_.erase(e.seq);
    now_ = e.fire_at;
    if (const auto* t = std::get_if<ev::TimerFire>(&e.kind)) {
        auto& slot = timers_[static_cast<std::size_t>(t->core)];
        if (slot && slot->first == e.seq)
            slot.reset();
    }
    return e;
}

Ticks Engine::read_tsc(CoreId core)
{
    check_core(core);
    rdtsc_charged_[static_cast<std::size_t>(core)] += clocks_[static_cast<std::size_t>(core)].rdtsc_cost;
    return now_ + clocks_[static_cast<std::size_t>(core)].skew;
}

Ticks Engine::rdtsc_charged(CoreId core) const
{
    check_core(core);
    return rdtsc_charged_[static_cast<std::size_t>(core)];
}

EventId Engine::program_oneshot_timer(CoreId core, Ticks fire_at)
{
    check_core(core);
    if (fire_at < now_)
        fail(Errc::PastTime, "timer at " + std::to_string(fire_at) + " before now " + std::to_string(now_));
    auto& slot = timers_[static_cast<std::size_t>(core)];
    if (slot && slot->second == fire_at)
        return slot->first;
    cancel_timer(core);
    const EventId id = schedule_event(fire_at, ev::TimerFire{core});
    slot = std::make_pair(id, fire_at);
    return id;
}

void Engine::cancel_timer(CoreId core)
{
    check_core(core);
    auto& slot = timers_[static_cast<std::size_t>(core)];
    if (slot) {
        cancel(slot->first);
        slot.reset();
    }
}

std::optional<EventId> Engine::pending_timer(CoreId core) const
{
    check_core(core);
    const auto& slot = timers_[static_cast<std::size_t>(core)];
    return slot ? std::optional<EventId>(slot->first) : std::nullopt;
}

std::optional<Ticks> Engine::pending_timer_deadline(CoreId core) const
{
    check_core(core);
    const auto& slot = timers_[static_cast<std::size_t>(core)];
    return slot ? std::optional<Ticks>(slot->second) : std::nullopt;
}

}  // namespace mksim
