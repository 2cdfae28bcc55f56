#include "mksim/sandbox.hpp"

#include <algorithm>

namespace mksim {

PageIndex HostMemory::allocate(PageIndex count)
{
    if (count <= 0)
        fail(Errc::MalformedSpec, "page count must be positive");
    if (next_ + count > total_)
        fail(Errc::OutOfHostPages, "need " + std::to_string(count) + " pages, " +
                                       std::to_string(total_ - next_) + " free");
    const PageIndex first = next_;
    next_ += count;
    return first;
}

std::string_view to_string(TrapCause c)
{
    switch (c) {
    case TrapCause::EptViolation: return "ept_violation";
    case TrapCause::ExplicitExit: return "explicit_exit";
    case TrapCause::MigrationAssist: return "migration_assist";
    case TrapCause::ChannelMap: return "channel_map";
    case TrapCause::Recovery: return "recovery";
    }
    return "?";
}

std::string_view to_string(ThreadState s)
{
    switch (s) {
    case ThreadState::Runnable: return "runnable";
    case ThreadState::Sleeping: return "sleeping";
    case ThreadState::BlockedIo: return "blocked_io";
    case ThreadState::Waiting: return "waiting";
    case ThreadState::Migrating: return "migrating";
    case ThreadState::Halted: return "halted";
    }
    return "?";
}

Sandbox::Sandbox(SandboxId id, std::string name, CoreId pcpu, Mapping private_range)
    : id_(id), name_(std::move(name)), pcpu_(pcpu), sched_(pcpu)
{
    private_range.channel = -1;
    mappings_.push_back(private_range);
}

std::optional<PagePerm> Sandbox::permission(PageIndex host_page) const
{
    for (const auto& m : mappings_)
        if (m.contains(host_page))
            return m.perm;
    return std::nullopt;
}

AccessResult Sandbox::access(PageIndex host_page, AccessMode mode)
{
    const auto perm = permission(host_page);
    if (perm && perm->allows(mode))
        return AccessResult{true, std::nullopt};
    return AccessResult{false, monitor_trap(TrapCause::EptViolation)};
}

MonitorAction Sandbox::monitor_trap(TrapCause cause)
{
    MonitorAction a;
    a.charged = costs.vm_exit + costs.vm_enter;
    switch (cause) {
    case TrapCause::EptViolation:
        ++monitor_.handled_violations;
        if (policy == TrapPolicy::RecoverLocal)
            a.kind = MonitorAction::Kind::StartRecovery;
        else if (policy == TrapPolicy::RecoverRemote) {
            a.kind = MonitorAction::Kind::StartRecovery;
            a.remote = true;
        }
        break;
    case TrapCause::ExplicitExit: ++monitor_.explicit_exits; break;
    case TrapCause::MigrationAssist:
        ++monitor_.migration_assists;
        a.kind = MonitorAction::Kind::Assist;
        break;
    case TrapCause::ChannelMap:
        ++monitor_.channel_maps;
        a.kind = MonitorAction::Kind::Assist;
        break;
    case TrapCause::Recovery:
        ++monitor_.recoveries;
        a.kind = MonitorAction::Kind::StartRecovery;
        a.remote = policy == TrapPolicy::RecoverRemote;
        break;
    }
    monitor_.cycles += a.charged;
    return a;
}

void Sandbox::map_channel(ChannelId channel, PageIndex first, PageIndex count)
{
    monitor_trap(TrapCause::ChannelMap);
    mappings_.push_back(Mapping{first, count, PagePerm::rw(), channel});
}

Sandbox& SandboxTable::create_sandbox(std::string name, CoreId pcpu, PageIndex private_pages)
{
    if (pcpu < 0 || pcpu >= cores_)
        fail(Errc::UnknownCore, "core " + std::to_string(pcpu) + " does not exist");
    if (on_core(pcpu))
        fail(Errc::CoreTaken, "core " + std::to_string(pcpu) + " already hosts a sandbox");
    const PageIndex first = memory_.allocate(private_pages);
    const auto id = static_cast<SandboxId>(sandboxes_.size());
    return sandboxes_.emplace_back(id, std::move(name), pcpu,
                                   Mapping{first, private_pages, PagePerm::rwx(), -1});
}

Sandbox& SandboxTable::at(SandboxId id)
{
    if (id < 0 || static_cast<std::size_t>(id) >= sandboxes_.size())
        fail(Errc::UnknownTarget, "no sandbox " + std::to_string(id));
    return sandboxes_[static_cast<std::size_t>(id)];
}

const Sandbox& SandboxTable::at(SandboxId id) const
{
    return const_cast<SandboxTable*>(this)->at(id);
}

Sandbox* SandboxTable::on_core(CoreId core)
{
    for (auto& s : sandboxes_)
        if (s.pcpu() == core)
            return &s;
    return nullptr;
}

void SimThread::add_work_cycles(Cycles c, Cycles cpt)
{
    cycle_acc += c;
    const Cycles whole = cycle_acc / cpt;
    cycle_acc -= whole * cpt;
    pending_work += whole;
}

namespace {

// Each step runs one workload action at local time `at`; it either adds
// pending work, or changes the thread state, or both.

struct Stepper {
    SimThread& t;
    WorkloadHost& host;
    Ticks at;

    void cycles(Cycles c) { t.add_work_cycles(c, host.cycles_per_tick()); }

    void sleep_to_next_release(Ticks period)
    {
        while (t.next_release <= at)
            t.next_release += period;
        host.sleep_until(t, t.next_release);
    }

    void operator()(const wl::CpuLoop& w)
    {
        if (t.phase == 0) {
            t.pending_work += w.work;
            t.phase = 1;
        } else {
            t.phase = 0;
            sleep_to_next_release(w.period);
        }
    }

    void operator()(const wl::Hog&) { t.pending_work = kEndlessWork; }

    void operator()(const wl::CannyLoop& w)
    {
        if (t.phase == 1) {
            ++t.frames;
            host.service_output(t, at);
        }
        t.phase = 1;
        t.pending_work += w.work_per_frame;
    }

    void operator()(const wl::MessageSender& w)
    {
        const bool periodic = w.interval > 0;
        switch (t.phase) {
        case 0:  // start of a round
            t.cursor = periodic ? 0 : t.cursor;
            t.phase = 1;
            [[fallthrough]];
        case 1:  // check the slot status bit
            t.msg_start = at;
            cycles(host.poll_cycles());
            t.phase = 2;
            return;
        case 2: {
            const ChannelId ch = periodic ? w.channels[t.cursor] : w.channels.front();
            if (host.channel_writable(ch, t.sandbox)) {
                cycles(host.copy_cycles(current_size(w)));
                t.phase = 3;
                return;
            }
            host.channel_busy(t, ch, at);
            if (!periodic) {
                t.phase = 1;
                host.spin_wait(t, ch);
                return;
            }
            break;
        }
        case 3: {
            const ChannelId ch = periodic ? w.channels[t.cursor] : w.channels.front();
            host.channel_send(t, ch, current_size(w), at);
            if (!periodic)
                advance_backlogged(w);
            break;
        }
        default: break;
        }
        if (!periodic)
            return;
        if (++t.cursor < w.channels.size()) {
            t.phase = 1;
            return;
        }
        t.phase = 0;
        sleep_to_next_release(w.interval);
    }

    std::int64_t current_size(const wl::MessageSender& w) const
    {
        return w.interval > 0 ? w.sizes.front() : w.sizes[t.cursor];
    }

    void advance_backlogged(const wl::MessageSender& w)
    {
        t.phase = 1;
        if (++t.done_in_size >= w.count_per_size) {
            t.done_in_size = 0;
            t.done_in_batch = 0;
            if (++t.cursor >= w.sizes.size()) {
                host.halt(t);
                return;
            }
            if (w.batch > 0)
                sleep_to_next_release(w.batch_interval);
            return;
        }
        if (w.batch > 0 && ++t.done_in_batch >= w.batch) {
            t.done_in_batch = 0;
            sleep_to_next_release(w.batch_interval);
        }
    }

    void operator()(const wl::MessageReceiver& w)
    {
        const bool periodic = w.interval > 0;
        switch (t.phase) {
        case 0:
            cycles(host.poll_cycles());
            t.phase = 1;
            return;
        case 1: {
            std::int64_t bytes = 0;
            switch (host.channel_peek(w.channel, t.sandbox, bytes)) {
            case WorkloadHost::Peek::Message:
                cycles(host.copy_cycles(bytes));
                t.phase = 2;
                return;
            case WorkloadHost::Peek::Corrupt:
                host.channel_receive(t, w.channel, at);
                if (!periodic) {
                    // Nothing will change until the channel is reset.
                    t.phase = 0;
                    host.spin_wait(t, w.channel);
                    return;
                }
                break;
            case WorkloadHost::Peek::Empty:
                if (!periodic) {
                    t.phase = 0;
                    host.spin_wait(t, w.channel);
                    return;
                }
                break;
            }
            break;
        }
        case 2: host.channel_receive(t, w.channel, at); break;
        default: break;
        }
        t.phase = 0;
        if (periodic)
            sleep_to_next_release(w.interval);
    }

    void operator()(const wl::DriverHandler& w)
    {
        if (t.phase == 1) {
            const IoRequest req = t.requests.front();
            t.requests.pop_front();
            t.phase = 0;
            host.io_complete(t, req, at);
            return;
        }
        if (t.requests.empty()) {
            host.block_on_io(t, w.device);
            return;
        }
        cycles(host.handler_cycles(w.device));
        t.phase = 1;
    }

    void operator()(const wl::IoWait& w)
    {
        switch (t.phase) {
        case 0:
            t.phase = 1;
            host.block_on_io(t, w.device);
            return;
        case 1:
            t.pending_work += w.work;
            t.phase = 2;
            return;
        default:
            host.service_output(t, at);
            t.phase = 1;
            host.block_on_io(t, w.device);
            return;
        }
    }

    void operator()(const wl::Worker&)
    {
        if (t.phase == 1) {
            const std::uint64_t token = t.jobs.front().token;
            t.jobs.pop_front();
            t.phase = 0;
            host.job_done(t, token, at);
            return;
        }
        if (t.jobs.empty()) {
            host.wait(t);
            return;
        }
        const WorkerJob& job = t.jobs.front();
        t.pending_work += job.ticks;
        cycles(job.cycles);
        t.phase = 1;
    }
};

// Actions that add no work (a poll shorter than a tick, a Busy channel) can
// repeat at one instant; a loop this long without time passing is a bug in
// the workload or the scenario.
constexpr int kMaxActionsPerInstant = 1 << 20;

}  // namespace

Ticks run_workload_slice(SimThread& t, Ticks slice, WorkloadHost& host, Ticks start)
{
    Ticks consumed = 0;
    int spins = 0;
    while (t.state == ThreadState::Runnable) {
        if (t.pending_work > 0) {
            const Ticks step = std::min(t.pending_work, slice - consumed);
            t.pending_work -= step;
            consumed += step;
            if (step > 0)
                spins = 0;
            if (t.pending_work > 0)
                break;
        }
        if (++spins > kMaxActionsPerInstant)
            fail(Errc::InvariantViolation, t.name + " makes no progress");
        std::visit(Stepper{t, host, start + consumed}, t.workload);
    }
    t.cpu_time += consumed;
    return consumed;
}

}  // namespace mksim
