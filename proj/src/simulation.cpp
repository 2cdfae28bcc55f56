#include "mksim/simulation.hpp"

#include <algorithm>
#include <sstream>

namespace mksim {

namespace {

enum class IpiKind : std::uint64_t { MigrationRequest = 1, MigrationAccept = 2, MigrationReject = 3, Notify = 4 };

std::uint64_t ipi_payload(IpiKind k, std::uint64_t index)
{
    return (static_cast<std::uint64_t>(k) << 32) | index;
}

std::vector<CoreClock> make_clocks(const HostConfig& h)
{
    std::vector<CoreClock> out;
    for (int i = 0; i < h.cores; ++i) {
        const Ticks skew = static_cast<std::size_t>(i) < h.skews.size() ? h.skews[static_cast<std::size_t>(i)] : 0;
        out.push_back(CoreClock{i, skew, h.rdtsc_cost, h.ipi_cost});
    }
    return out;
}

constexpr std::size_t kMaxViolations = 64;

// Job tokens carry their purpose in the top bits.
constexpr std::uint64_t kMigrationJob = 1ull << 62;
constexpr std::uint64_t kRecoveryJob = 2ull << 62;
constexpr std::uint64_t kJobMask = 3ull << 62;

}  // namespace

Simulation::Simulation(const Scenario& scenario, SimOptions options)
    : sc_(scenario),
      opt_(options),
      engine_(make_clocks(scenario.host)),
      trace_(options.trace),
      sandboxes_(scenario.host.cores, scenario.host.memory_pages)
{
    validate_scenario(sc_);
    build();
}

const Vcpu& Simulation::vcpu(VcpuId v) const
{
    const Vcpu* p = sandboxes_.at(vcpu_home_.at(static_cast<std::size_t>(v))).sched().find(v);
    if (!p)
        fail(Errc::InvariantViolation, "VCPU " + std::to_string(v) + " lost");
    return *p;
}

Vcpu& Simulation::vcpu_mut(VcpuId v)
{
    return const_cast<Vcpu&>(vcpu(v));
}

Sandbox& Simulation::sandbox_of_vcpu(VcpuId v)
{
    return sandboxes_.at(vcpu_home_.at(static_cast<std::size_t>(v)));
}

CoreId Simulation::core_of_sandbox(SandboxId s) const
{
    return sandboxes_.at(s).pcpu();
}

CoreId Simulation::core_of_thread(ThreadId t) const
{
    return core_of_sandbox(threads_.at(static_cast<std::size_t>(t)).sandbox);
}

void Simulation::record(CoreId core, SandboxId sb, std::string kind, std::string subject, std::string detail)
{
    if (trace_.enabled())
        trace_.add(TraceRecord{engine_.now(), core, sb, std::move(kind), std::move(subject), std::move(detail)});
}

void Simulation::note(const std::string& what)
{
    stats_.notes.push_back("t=" + std::to_string(engine_.now()) + " " + what);
}

// ---------------------------------------------------------------------------
// Setup

ThreadId Simulation::add_thread(SimThread t)
{
    t.id = static_cast<ThreadId>(threads_.size());
    vcpu_threads_[static_cast<std::size_t>(t.vcpu)].push_back(t.id);
    sandboxes_.at(t.sandbox).threads.push_back(t.id);
    threads_.push_back(std::move(t));
    return threads_.back().id;
}

void Simulation::build()
{
    const HostConfig& h = sc_.host;

    for (const auto& c : sc_.sandboxes) {
        Sandbox& sb = sandboxes_.create_sandbox(c.name, c.core, c.pages);
        sb.policy = c.policy;
        sb.costs = h.monitor;
    }

    for (std::size_t i = 0; i < sc_.vcpus.size(); ++i) {
        const VcpuConfig& c = sc_.vcpus[i];
        const auto sb = static_cast<SandboxId>(sc_.sandbox_index(c.sandbox));
        Vcpu v(static_cast<VcpuId>(i), c.name, c.spec, c.background);
        v.set_mutation_charge_background(opt_.mutate_charge_background);
        sandboxes_.at(sb).sched().add(std::move(v));
        vcpu_names_.push_back(c.name);
        vcpu_home_.push_back(sb);
    }
    vcpu_threads_.resize(sc_.vcpus.size());
    stats_.segments.resize(sc_.vcpus.size());

    for (const auto& c : sc_.channels)
        channels_.create_channel(sandboxes_, sc_.sandbox_index(c.a), sc_.sandbox_index(c.b), c.pages, c.name);

    for (std::size_t i = 0; i < sc_.devices.size(); ++i) {
        const DeviceConfig& c = sc_.devices[i];
        Device d;
        d.id = static_cast<DeviceId>(i);
        d.name = c.name;
        d.kind = c.kind;
        d.start = c.start;
        d.interval = c.interval;
        d.count = c.count;
        d.handler_cycles = c.handler_cycles;
        for (const auto& s : c.sandboxes) {
            const auto sb = static_cast<SandboxId>(sc_.sandbox_index(s));
            d.sandboxes.push_back(sb);
            d.health[sb] = DriverHealth::Healthy;
            sandboxes_.at(sb).devices.insert(d.id);
        }
        for (const auto& [s, v] : c.default_vcpu)
            d.default_vcpu[sc_.sandbox_index(s)] = sc_.vcpu_index(v);
        devices_.push_back(std::move(d));
    }
    stats_.device_events.assign(devices_.size(), 0);
    stats_.device_deliveries.assign(devices_.size(), 0);

    for (const auto& c : sc_.threads) {
        SimThread t;
        t.name = c.name;
        t.vcpu = sc_.vcpu_index(c.vcpu);
        t.sandbox = vcpu_home_[static_cast<std::size_t>(t.vcpu)];
        t.address_space_pages = c.pages;
        t.workload = c.workload;
        t.filtered = c.filtered;
        const bool io_vcpu = sc_.vcpus[static_cast<std::size_t>(t.vcpu)].spec.cls == VcpuClass::Io;
        const bool handler = std::holds_alternative<wl::DriverHandler>(t.workload);
        if (io_vcpu != handler)
            fail(Errc::MalformedSpec, "thread " + t.name +
                                          ": driver handlers run on I/O VCPUs and nothing else does");
        add_thread(std::move(t));
    }

    migrator_.assign(sc_.sandboxes.size(), -1);
    recoverer_.assign(sc_.sandboxes.size(), -1);
    for (std::size_t i = 0; i < sc_.sandboxes.size(); ++i) {
        const SandboxConfig& c = sc_.sandboxes[i];
        auto worker = [&](const std::string& vname, const char* suffix) {
            SimThread t;
            t.name = c.name + suffix;
            t.vcpu = sc_.vcpu_index(vname);
            t.sandbox = static_cast<SandboxId>(i);
            t.workload = wl::Worker{};
            t.state = ThreadState::Waiting;
            return add_thread(std::move(t));
        };
        if (!c.migration_vcpu.empty())
            migrator_[i] = worker(c.migration_vcpu, ".migrator");
        if (!c.recovery_vcpu.empty())
            recoverer_[i] = worker(c.recovery_vcpu, ".recovery");
    }

    // Initial thread states. Every core boots at global time 0, i.e. at
    // local time equal to its skew.
    for (auto& t : threads_) {
        const CoreId core = core_of_sandbox(t.sandbox);
        const Ticks boot = engine_.to_local(core, 0);
        Ticks offset = 0;
        if (const auto* w = std::get_if<wl::CpuLoop>(&t.workload))
            offset = w->offset;
        else if (const auto* w = std::get_if<wl::MessageSender>(&t.workload))
            offset = w->offset;
        else if (const auto* w = std::get_if<wl::MessageReceiver>(&t.workload))
            offset = w->offset;
        else if (const auto* w = std::get_if<wl::DriverHandler>(&t.workload)) {
            t.state = ThreadState::BlockedIo;
            t.blocked_on = w->device;
        } else if (const auto* w = std::get_if<wl::IoWait>(&t.workload)) {
            t.state = ThreadState::BlockedIo;
            t.blocked_on = w->device;
            t.phase = 1;
        }
        t.next_release = boot + offset;
        if (offset > 0) {
            t.state = ThreadState::Sleeping;
            t.wake_at = boot + offset;
            engine_.schedule_event(offset, ev::Wakeup{t.id, t.wake_generation});
        }
    }

    active_faults_.resize(sc_.sandboxes.size());
    dst_in_flight_.assign(sc_.sandboxes.size(), false);
    run_.resize(static_cast<std::size_t>(sc_.host.cores));
    dirty_.assign(static_cast<std::size_t>(sc_.host.cores), true);
    sample_acc_.resize(sc_.sandboxes.size());
    sample_fg_base_.assign(sc_.vcpus.size(), 0);

    for (std::size_t d = 0; d < devices_.size(); ++d)
        if (devices_[d].count != 0 || devices_[d].interval > 0)
            engine_.schedule_event(devices_[d].start, ev::DeviceInterrupt{static_cast<DeviceId>(d), 0});
    for (std::size_t i = 0; i < sc_.faults.size(); ++i)
        engine_.schedule_event(sc_.faults[i].at, ev::FaultInject{i});
    for (std::size_t i = 0; i < sc_.recoveries.size(); ++i)
        engine_.schedule_event(sc_.recoveries[i].at, ev::RecoveryStart{i});
    for (std::size_t i = 0; i < sc_.migrations.size(); ++i)
        engine_.schedule_event(sc_.migrations[i].at, ev::MigrationStart{i});
    if (sc_.sample_interval > 0)
        engine_.schedule_event(sc_.sample_interval, ev::TraceSample{1});
}

// ---------------------------------------------------------------------------
// Event loop

void Simulation::run()
{
    if (finished_)
        fail(Errc::Precondition, "simulation already ran");
    finished_ = true;
    const Ticks end = opt_.until.value_or(sc_.duration);

    reschedule_dirty();
    if (opt_.check_invariants)
        check_invariants();
    while (true) {
        const auto next = engine_.peek_time();
        if (!next || *next > end)
            break;
        const Event e = engine_.advance();
        dispatch(e);
        reschedule_dirty();
        // Migration requests are judged once every event of this instant
        // (replenishments in particular) has been applied.
        const auto following = engine_.peek_time();
        if (!following || *following > engine_.now()) {
            try_pending_migrations();
            reschedule_dirty();
        }
        if (opt_.check_invariants)
            check_invariants();
    }
    if (engine_.now() < end) {
        engine_.schedule_event(end, ev::TraceSample{-1});
        engine_.advance();
    }
    settle_all();
    for (CoreId c = 0; c < static_cast<CoreId>(run_.size()); ++c) {
        end_segment(c);
        run_[static_cast<std::size_t>(c)].seg_start = engine_.now();
    }
    stats_.ended_at = engine_.now();
}

void Simulation::dispatch(const Event& e)
{
    std::visit(
        [&](const auto& k) {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, ev::TimerFire>)
                on_timer(k.core);
            else if constexpr (std::is_same_v<K, ev::Ipi>)
                on_ipi(k);
            else if constexpr (std::is_same_v<K, ev::DeviceInterrupt>)
                on_interrupt(k.device, k.index);
            else if constexpr (std::is_same_v<K, ev::Replenishment>)
                on_replenishment(k.vcpu);
            else if constexpr (std::is_same_v<K, ev::Wakeup>)
                on_wakeup(k.thread, k.generation);
            else if constexpr (std::is_same_v<K, ev::FaultInject>)
                on_fault(k.index);
            else if constexpr (std::is_same_v<K, ev::RecoveryStart>)
                on_recovery(k.index);
            else if constexpr (std::is_same_v<K, ev::MigrationStart>)
                on_migration(k.index);
            else if constexpr (std::is_same_v<K, ev::TraceSample>)
                on_sample(k.index);
            else if constexpr (std::is_same_v<K, ev::WorkDone>)
                on_work_done(k.worker, k.token);
        },
        e.kind);
}

void Simulation::on_timer(CoreId core)
{
    settle(core);
    mark_dirty(core);
}

void Simulation::on_replenishment(VcpuId v)
{
    const CoreId core = core_of_sandbox(vcpu_home_[static_cast<std::size_t>(v)]);
    settle(core);
    Vcpu& vc = vcpu_mut(v);
    const auto out = vc.apply_replenishments(local_now(core));
    if (out.applied > 0) {
        record(core, vcpu_home_[static_cast<std::size_t>(v)], "REPL", vc.name(),
               "amount=" + std::to_string(out.applied) + ";budget=" + std::to_string(vc.remaining_budget()));
        mark_dirty(core);
    }
}

void Simulation::on_wakeup(ThreadId id, std::uint64_t generation)
{
    SimThread& t = threads_[static_cast<std::size_t>(id)];
    if (t.wake_generation != generation || t.state != ThreadState::Sleeping)
        return;
    const CoreId core = core_of_thread(id);
    settle(core);
    t.state = ThreadState::Runnable;
    stats_.wakeups.push_back(Wake{engine_.now(), id});
    mark_dirty(core);
}

// ---------------------------------------------------------------------------
// Scheduling

void Simulation::mark_dirty(CoreId core)
{
    dirty_[static_cast<std::size_t>(core)] = true;
}

void Simulation::settle_all()
{
    for (CoreId c = 0; c < static_cast<CoreId>(run_.size()); ++c)
        settle(c);
}

void Simulation::settle(CoreId core)
{
    CoreRun& rs = run_[static_cast<std::size_t>(core)];
    const Ticks now = engine_.now();
    if (rs.settling)
        return;
    if (!rs.vcpu) {
        rs.last_settle = now;
        return;
    }
    const Ticks elapsed = now - rs.last_settle;
    if (elapsed <= 0)
        return;

    rs.settling = true;
    SimThread& t = threads_[static_cast<std::size_t>(rs.thread)];
    const Ticks from = rs.last_settle;
    const Ticks local_from = engine_.to_local(core, from);
    const Ticks consumed =
        t.state == ThreadState::Runnable ? run_workload_slice(t, elapsed, *this, local_from) : 0;
    rs.settling = false;

    if (consumed > 0) {
        const VcpuId v = *rs.vcpu;
        Vcpu& vc = vcpu_mut(v);
        if (rs.band == Band::Foreground) {
            if (vc.charge_and_post(local_from, consumed))
                post_replenishment_events(v);
        } else {
            const std::size_t before = vc.replenishments().size();
            vc.background_run(consumed);
            if (vc.replenishments().size() != before)
                post_replenishment_events(v);
        }
        auto& segs = stats_.segments[static_cast<std::size_t>(v)];
        if (!segs.empty() && segs.back().end == from && segs.back().band == rs.band)
            segs.back().end = from + consumed;
        else
            segs.push_back(Segment{from, from + consumed, rs.band});
    }
    if (consumed < elapsed && opt_.check_invariants && stats_.violations.size() < kMaxViolations)
        stats_.violations.push_back(
            Violation{now, "dispatch: " + t.name + " stopped before its slice ended on core " + std::to_string(core)});
    rs.last_settle = now;
}

void Simulation::post_replenishment_events(VcpuId v)
{
    const Vcpu& vc = vcpu(v);
    if (vc.replenishments().empty())
        return;
    const CoreId core = core_of_sandbox(vcpu_home_[static_cast<std::size_t>(v)]);
    const Ticks at = engine_.to_global(core, vc.replenishments().back().due_at);
    engine_.schedule_event(std::max(at, engine_.now()), ev::Replenishment{v});
}

bool Simulation::vcpu_has_runnable(VcpuId v) const
{
    for (ThreadId t : vcpu_threads_[static_cast<std::size_t>(v)])
        if (threads_[static_cast<std::size_t>(t)].state == ThreadState::Runnable)
            return true;
    return false;
}

ThreadId Simulation::pick_thread(VcpuId v) const
{
    ThreadId best = -1;
    for (ThreadId t : vcpu_threads_[static_cast<std::size_t>(v)])
        if (threads_[static_cast<std::size_t>(t)].state == ThreadState::Runnable && (best < 0 || t < best))
            best = t;
    return best;
}

void Simulation::reschedule_dirty()
{
    for (int round = 0;; ++round) {
        bool any = false;
        for (CoreId c = 0; c < static_cast<CoreId>(dirty_.size()); ++c) {
            if (!dirty_[static_cast<std::size_t>(c)])
                continue;
            dirty_[static_cast<std::size_t>(c)] = false;
            any = true;
            reschedule(c);
        }
        if (!any)
            return;
        if (round > 100000)
            fail(Errc::InvariantViolation, "rescheduling does not converge");
    }
}

void Simulation::end_segment(CoreId core)
{
    CoreRun& rs = run_[static_cast<std::size_t>(core)];
    const Ticks now = engine_.now();
    if (!rs.vcpu || now <= rs.seg_start)
        return;
    const SimThread& t = threads_[static_cast<std::size_t>(rs.thread)];
    record(core, vcpu_home_[static_cast<std::size_t>(*rs.vcpu)], "RUN", vcpu_names_[static_cast<std::size_t>(*rs.vcpu)],
           "thread=" + t.name + ";band=" + std::string(to_string(rs.band)) +
               ";start=" + std::to_string(rs.seg_start) + ";len=" + std::to_string(now - rs.seg_start));
}

void Simulation::reschedule(CoreId core)
{
    settle(core);
    Sandbox* sb = sandboxes_.on_core(core);
    CoreRun& rs = run_[static_cast<std::size_t>(core)];
    const Ticks now = engine_.now();
    if (!sb) {
        engine_.cancel_timer(core);
        return;
    }

    for (int guard = 0;; ++guard) {
        if (guard > 1'000'000)
            fail(Errc::InvariantViolation, "core " + std::to_string(core) + " cannot settle on a thread");
        const auto pick = sb->sched().pick_next([&](VcpuId v) { return vcpu_has_runnable(v); });
        const ThreadId th = pick ? pick_thread(pick->vcpu) : -1;
        const bool same = pick && rs.vcpu == pick->vcpu && rs.thread == th && rs.band == pick->band;
        if (!same) {
            const bool keep_interval = pick && rs.vcpu == pick->vcpu && rs.band == Band::Foreground &&
                                       pick->band == Band::Foreground;
            if (rs.vcpu && rs.band == Band::Foreground && !keep_interval)
                vcpu_mut(*rs.vcpu).end_busy_interval();
            end_segment(core);
            if (pick) {
                rs.vcpu = pick->vcpu;
                rs.thread = th;
                rs.band = pick->band;
                record(core, sb->id(), "SCHED", vcpu_names_[static_cast<std::size_t>(pick->vcpu)],
                       "thread=" + threads_[static_cast<std::size_t>(th)].name +
                           ";band=" + std::string(to_string(pick->band)));
            } else {
                rs.vcpu.reset();
                rs.thread = -1;
            }
            rs.seg_start = now;
        }
        rs.last_settle = now;
        if (!pick) {
            engine_.cancel_timer(core);
            return;
        }
        SimThread& t = threads_[static_cast<std::size_t>(th)];
        if (t.pending_work == 0) {
            rs.settling = true;
            run_workload_slice(t, 0, *this, local_now(core));
            rs.settling = false;
        }
        if (t.state == ThreadState::Runnable && t.pending_work > 0)
            break;
    }

    const SimThread& t = threads_[static_cast<std::size_t>(rs.thread)];
    Ticks horizon = t.pending_work;
    if (rs.band == Band::Foreground)
        horizon = std::min(horizon, vcpu(*rs.vcpu).remaining_budget());
    if (horizon >= kEndlessWork / 2)
        engine_.cancel_timer(core);
    else
        engine_.program_oneshot_timer(core, now + horizon);
}

void Simulation::check_invariants()
{
    auto violate = [&](std::string what) {
        if (stats_.violations.size() < kMaxViolations)
            stats_.violations.push_back(Violation{engine_.now(), std::move(what)});
    };
    for (const auto& sb : sandboxes_.all()) {
        for (const auto& [id, v] : sb.sched().vcpus()) {
            if (!v.capacity_ok())
                violate("capacity: " + v.name());
            const Ticks period = v.cls() == VcpuClass::Main ? v.spec().period : v.current_io_period();
            for (const auto& r : v.replenishments())
                if (r.due_at - r.busy_start < period)
                    violate("distance: " + v.name());
        }
        const CoreRun& rs = run_[static_cast<std::size_t>(sb.pcpu())];
        if (rs.thread >= 0 && threads_[static_cast<std::size_t>(rs.thread)].state != ThreadState::Runnable)
            violate("dispatch: picked a " +
                    std::string(to_string(threads_[static_cast<std::size_t>(rs.thread)].state)) +
                    " thread: " + threads_[static_cast<std::size_t>(rs.thread)].name);
        if (rs.vcpu && rs.band == Band::Background) {
            for (const auto& [id, v] : sb.sched().vcpus())
                if (v.band() == Band::Foreground && v.priority_period() && vcpu_has_runnable(id))
                    violate("background: ran while " + v.name() + " had budget");
        }
    }
}

// ---------------------------------------------------------------------------
// Workload host

Cycles Simulation::handler_cycles(DeviceId device) const
{
    return devices_.at(static_cast<std::size_t>(device)).handler_cycles;
}

bool Simulation::channel_writable(ChannelId ch, SandboxId from)
{
    return channels_.writable(ch, from);
}

void Simulation::channel_send(SimThread& sender, ChannelId ch, std::int64_t bytes, Ticks)
{
    Channel& c = channels_.at(ch);
    const Mailbox& box = c.outbox(sender.sandbox);
    const auto payload = message_payload(box.next_seq, bytes);
    const CoreId core = core_of_sandbox(sender.sandbox);
    if (channels_.send(ch, sender.sandbox, payload, engine_.to_global(core, sender.msg_start)) == SendResult::Busy) {
        ++stats_.busy_sends;
        return;
    }
    ++stats_.messages_sent;
    record(core, sender.sandbox, "MSG_SEND", c.name,
           "thread=" + sender.name + ";seq=" + std::to_string(box.seq) + ";bytes=" + std::to_string(bytes));
    const SandboxId peer = c.peer(sender.sandbox);
    wake_spinners(ch, peer, sender);
    if (sc_.channels[static_cast<std::size_t>(ch)].notify)
        engine_.schedule_event(engine_.now() + sc_.host.ipi_cost,
                               ev::Ipi{core, core_of_sandbox(peer),
                                       ipi_payload(IpiKind::Notify, static_cast<std::uint64_t>(ch))});
}

void Simulation::channel_busy(SimThread&, ChannelId, Ticks)
{
    ++stats_.busy_sends;
}

WorkloadHost::Peek Simulation::channel_peek(ChannelId ch, SandboxId who, std::int64_t& bytes)
{
    bool corrupt = false;
    const auto n = channels_.peek(ch, who, corrupt);
    if (corrupt)
        return Peek::Corrupt;
    if (!n)
        return Peek::Empty;
    bytes = *n;
    return Peek::Message;
}

void Simulation::channel_receive(SimThread& rcv, ChannelId ch, Ticks)
{
    auto m = channels_.poll(ch, rcv.sandbox);
    if (!m)
        return;
    const CoreId core = core_of_sandbox(rcv.sandbox);
    const auto size = static_cast<std::int64_t>(m->bytes.size());
    Reception r{engine_.now(), rcv.id, rcv.sandbox, ch, m->seq, size, m->send_start, m->corrupt};
    stats_.receptions.push_back(r);
    SampleRow& acc = sample_acc_[static_cast<std::size_t>(rcv.sandbox)];
    const std::string& name = channels_.at(ch).name;
    if (m->corrupt) {
        ++acc.corrupt;
        record(core, rcv.sandbox, "MSG_CORRUPT", name, "thread=" + rcv.name);
        return;
    }
    if (m->bytes != message_payload(m->seq, size))
        ++stats_.payload_mismatches;
    ++acc.received;
    record(core, rcv.sandbox, "MSG_RECV", name,
           "thread=" + rcv.name + ";seq=" + std::to_string(m->seq) + ";bytes=" + std::to_string(size) +
               ";latency=" + std::to_string(engine_.now() - m->send_start));
    wake_spinners(ch, channels_.at(ch).peer(rcv.sandbox), rcv);
}

void Simulation::wake_spinners(ChannelId ch, SandboxId side, const SimThread& committer)
{
    for (ThreadId id : sandboxes_.at(side).threads) {
        SimThread& t = threads_[static_cast<std::size_t>(id)];
        if (t.spinning_on != ch)
            continue;
        const CoreId core = core_of_sandbox(side);
        settle(core);
        t.spinning_on = -1;
        t.pending_work = 0;
        // A spinner that is on the CPU notices the change one poll after the
        // commit, at the committer's position within the current tick.
        if (run_[static_cast<std::size_t>(core)].thread == id)
            t.cycle_acc = committer.cycle_acc;
        mark_dirty(core);
    }
}

void Simulation::spin_wait(SimThread& t, ChannelId ch)
{
    const CoreId core = core_of_sandbox(t.sandbox);
    if (sc_.channels[static_cast<std::size_t>(ch)].notify &&
        std::holds_alternative<wl::MessageReceiver>(t.workload)) {
        t.state = ThreadState::Waiting;
    } else {
        t.spinning_on = ch;
        t.pending_work = kEndlessWork;
    }
    mark_dirty(core);
}

void Simulation::sleep_until(SimThread& t, Ticks local_wake)
{
    const CoreId core = core_of_sandbox(t.sandbox);
    t.state = ThreadState::Sleeping;
    t.wake_at = local_wake;
    ++t.wake_generation;
    engine_.schedule_event(std::max(engine_.now(), engine_.to_global(core, local_wake)),
                           ev::Wakeup{t.id, t.wake_generation});
    mark_dirty(core);
}

void Simulation::block_on_io(SimThread& t, DeviceId device)
{
    t.state = ThreadState::BlockedIo;
    t.blocked_on = device;
    mark_dirty(core_of_sandbox(t.sandbox));
}

void Simulation::wait(SimThread& t)
{
    t.state = ThreadState::Waiting;
    mark_dirty(core_of_sandbox(t.sandbox));
}

void Simulation::halt(SimThread& t)
{
    t.state = ThreadState::Halted;
    mark_dirty(core_of_sandbox(t.sandbox));
}

void Simulation::service_output(SimThread& t, Ticks)
{
    const CoreId core = core_of_sandbox(t.sandbox);
    if (t.filtered) {
        record(core, t.sandbox, "OUTPUT", t.name, "filtered=1");
        return;
    }
    ++t.outputs;
    SampleRow& acc = sample_acc_[static_cast<std::size_t>(t.sandbox)];
    ++acc.outputs;
    if (std::holds_alternative<wl::CannyLoop>(t.workload))
        ++acc.frames;
    stats_.outputs.push_back(Output{engine_.now(), t.id, t.sandbox});
    record(core, t.sandbox, "OUTPUT", t.name, "n=" + std::to_string(t.outputs));
}

void Simulation::io_complete(SimThread& handler, const IoRequest& req, Ticks at)
{
    if (req.requester >= 0) {
        SimThread& r = threads_[static_cast<std::size_t>(req.requester)];
        if (r.state == ThreadState::BlockedIo) {
            const CoreId core = core_of_thread(r.id);
            settle(core);
            r.state = ThreadState::Runnable;
            mark_dirty(core);
        }
        return;
    }
    service_output(handler, at);
}

void Simulation::job_done(SimThread& worker, std::uint64_t token, Ticks)
{
    engine_.schedule_event(engine_.now(), ev::WorkDone{worker.id, token});
}

void Simulation::enqueue_job(ThreadId worker, WorkerJob job)
{
    SimThread& w = threads_[static_cast<std::size_t>(worker)];
    const CoreId core = core_of_thread(worker);
    settle(core);
    w.jobs.push_back(job);
    if (w.state == ThreadState::Waiting)
        w.state = ThreadState::Runnable;
    mark_dirty(core);
}

void Simulation::wake_thread(ThreadId id)
{
    SimThread& t = threads_[static_cast<std::size_t>(id)];
    const CoreId core = core_of_thread(id);
    settle(core);
    t.state = ThreadState::Runnable;
    mark_dirty(core);
}

// ---------------------------------------------------------------------------
// Devices

void Simulation::on_interrupt(DeviceId d, std::int64_t index)
{
    Device& dev = devices_[static_cast<std::size_t>(d)];
    ++stats_.device_events[static_cast<std::size_t>(d)];
    for (SandboxId sb : dev.sandboxes) {
        Sandbox& s = sandboxes_.at(sb);
        const CoreId core = s.pcpu();
        ++dev.delivered;
        ++stats_.interrupts_delivered;
        ++stats_.device_deliveries[static_cast<std::size_t>(d)];
        ++sample_acc_[static_cast<std::size_t>(sb)].interrupts;

        std::string outcome;
        ThreadId handler = -1;
        for (ThreadId t : s.threads) {
            const auto* w = std::get_if<wl::DriverHandler>(&threads_[static_cast<std::size_t>(t)].workload);
            if (w && w->device == d) {
                handler = t;
                break;
            }
        }
        if (dev.health[sb] == DriverHealth::Broken)
            outcome = "dropped=driver_fault";
        else if (handler < 0)
            outcome = "dropped=no_handler";

        ThreadId requester = -1;
        Ticks period = 0;
        if (outcome.empty()) {
            SimThread& h = threads_[static_cast<std::size_t>(handler)];
            for (ThreadId t : s.threads) {
                const SimThread& c = threads_[static_cast<std::size_t>(t)];
                if (c.state != ThreadState::BlockedIo || c.blocked_on != d || t == handler)
                    continue;
                const bool queued = std::any_of(h.requests.begin(), h.requests.end(),
                                                [&](const IoRequest& r) { return r.requester == t; });
                if (!queued) {
                    requester = t;
                    break;
                }
            }
            if (requester >= 0) {
                period = vcpu(threads_[static_cast<std::size_t>(requester)].vcpu).spec().period;
            } else if (auto it = dev.default_vcpu.find(sb); it != dev.default_vcpu.end()) {
                period = vcpu(it->second).spec().period;
            } else {
                ++stats_.unassociated_interrupts;
                outcome = "dropped=no_associated_thread";
            }
        }
        record(core, sb, "IRQ", dev.name,
               "index=" + std::to_string(index) + (outcome.empty() ? "" : ";" + outcome));
        if (!outcome.empty())
            continue;

        settle(core);
        SimThread& h = threads_[static_cast<std::size_t>(handler)];
        vcpu_mut(h.vcpu).io_service_request(period);
        h.requests.push_back(IoRequest{requester, index});
        if (h.state == ThreadState::BlockedIo)
            h.state = ThreadState::Runnable;
        ++stats_.activations;
        mark_dirty(core);
    }
    if (dev.count == 0 || index + 1 < dev.count)
        engine_.schedule_event(dev.start + (index + 1) * dev.interval, ev::DeviceInterrupt{d, index + 1});
}

// ---------------------------------------------------------------------------
// Faults and recovery

void Simulation::on_fault(std::size_t index)
{
    const FaultConfig& c = sc_.faults[index];
    const auto target = static_cast<SandboxId>(sc_.sandbox_index(c.sandbox));
    const CoreId core = core_of_sandbox(target);
    FaultSpec spec;
    spec.at = engine_.now();
    spec.target = target;

    if (c.kind == "driver") {
        const DeviceId d = sc_.device_index(c.target);
        Device& dev = devices_[static_cast<std::size_t>(d)];
        if (!dev.health.contains(target)) {
            note("UnknownTarget: " + c.sandbox + " has no access to " + c.target);
            return;
        }
        dev.health[target] = DriverHealth::Broken;
        spec.kind = fault::DriverFault{d};
    } else if (c.kind == "channel") {
        const ChannelId ch = sc_.channel_index(c.target);
        Channel& chan = channels_.at(ch);
        if (!chan.is_endpoint(target)) {
            note("UnknownTarget: channel " + c.target + " is not established at " + c.sandbox);
            return;
        }
        channels_.corrupt(ch);
        spec.kind = fault::ChannelCorrupt{ch};
        const SimThread none{};
        wake_spinners(ch, chan.a, none);
        wake_spinners(ch, chan.b, none);
    } else if (c.kind == "cross_write") {
        const auto victim = static_cast<SandboxId>(sc_.sandbox_index(c.target));
        Sandbox& attacker = sandboxes_.at(target);
        const PageIndex page = sandboxes_.at(victim).private_range().first;
        const AccessResult r = attacker.access(page, AccessMode::Write);
        spec.kind = fault::CrossSandboxWrite{victim};
        if (!r.ok) {
            ++stats_.cross_writes_blocked;
            const bool recover = r.trap && r.trap->kind == MonitorAction::Kind::StartRecovery;
            record(core, target, "EPT_VIOLATION", sandboxes_.at(victim).name(),
                   "page=" + std::to_string(page) + ";action=" + (recover ? "recover" : "log"));
        }
    } else {
        const ThreadId th = sc_.thread_index(c.target);
        SimThread& t = threads_[static_cast<std::size_t>(th)];
        if (t.sandbox != target) {
            note("UnknownTarget: thread " + c.target + " is not in " + c.sandbox);
            return;
        }
        settle(core);
        t.state = ThreadState::Halted;
        ++t.wake_generation;
        t.spinning_on = -1;
        mark_dirty(core);
        spec.kind = fault::ThreadCrash{th};
    }
    record(core, target, "FAULT", c.kind, "target=" + c.target);
    active_faults_[static_cast<std::size_t>(target)].push_back(spec);

    // A denied write under a recovery policy starts recovery on its own.
    if (c.kind == "cross_write" && sandboxes_.at(target).policy == TrapPolicy::RecoverLocal)
        start_recovery(sc_.recoveries.size(), target, RecoveryMode::Local, -1);
}

void Simulation::on_recovery(std::size_t index)
{
    const RecoveryConfig& c = sc_.recoveries[index];
    const auto faulty = static_cast<SandboxId>(sc_.sandbox_index(c.sandbox));
    const SandboxId standby = c.mode == RecoveryMode::Remote ? sc_.sandbox_index(c.standby) : -1;
    start_recovery(index, faulty, c.mode, standby);
}

void Simulation::start_recovery(std::size_t, SandboxId faulty, RecoveryMode mode, SandboxId standby)
{
    const CoreId core = core_of_sandbox(faulty);
    auto reject = [&](const std::string& why) {
        note(why + " (recovery of " + sandboxes_.at(faulty).name() + ")");
        record(core, faulty, "RECOVER_PHASE", "rejected", "error=" + why);
    };
    if (active_faults_[static_cast<std::size_t>(faulty)].empty())
        return reject("NoActiveFault");
    for (const auto& r : recoveries_)
        if (r.faulty == faulty)
            return reject("RecoveryInProgress");
    if (mode == RecoveryMode::Remote && standby < 0)
        return reject("NoStandby");
    const SandboxId runs_on = mode == RecoveryMode::Local ? faulty : standby;
    ThreadId worker = recoverer_[static_cast<std::size_t>(runs_on)];
    if (worker < 0)
        return reject("NoRecoveryVcpu");

    sandboxes_.at(faulty).monitor_trap(TrapCause::Recovery);
    RecoveryPlan plan;
    plan.mode = mode;
    plan.standby = standby;
    plan.costs = sc_.host.recovery;

    RecoveryReport rep;
    rep.sandbox = faulty;
    rep.mode = mode;
    rep.started_at = engine_.now();
    stats_.recoveries.push_back(rep);

    ActiveRecovery ar;
    ar.report = stats_.recoveries.size() - 1;
    ar.faulty = faulty;
    ar.standby = standby;
    ar.worker = worker;
    ar.phases = plan_phases(plan);
    recoveries_.push_back(ar);
    record(core, faulty, "RECOVER_PHASE", "start", "mode=" + std::string(to_string(mode)));
    enqueue_job(worker, WorkerJob{ar.phases[0].second, 0, kRecoveryJob | next_token_++});
    // Remember which job belongs to which recovery through the worker id.
}

void Simulation::finish_recovery(ActiveRecovery& ar)
{
    RecoveryReport& rep = stats_.recoveries[ar.report];
    const SandboxId faulty = ar.faulty;
    const CoreId core = core_of_sandbox(faulty);
    settle_all();

    std::vector<ThreadId> activated;
    for (const FaultSpec& f : active_faults_[static_cast<std::size_t>(faulty)]) {
        if (const auto* df = std::get_if<fault::DriverFault>(&f.kind)) {
            Device& dev = devices_[static_cast<std::size_t>(df->device)];
            if (rep.mode == RecoveryMode::Local) {
                dev.health[faulty] = DriverHealth::Healthy;
            } else {
                std::erase(dev.sandboxes, faulty);
                dev.health.erase(faulty);
                sandboxes_.at(faulty).devices.erase(dev.id);
                if (std::find(dev.sandboxes.begin(), dev.sandboxes.end(), ar.standby) == dev.sandboxes.end())
                    dev.sandboxes.push_back(ar.standby);
                dev.health[ar.standby] = DriverHealth::Healthy;
                sandboxes_.at(ar.standby).devices.insert(dev.id);
            }
        } else if (const auto* cc = std::get_if<fault::ChannelCorrupt>(&f.kind)) {
            channels_.reset(cc->channel);
            const Channel& chan = channels_.at(cc->channel);
            const SimThread none{};
            wake_spinners(cc->channel, chan.a, none);
            wake_spinners(cc->channel, chan.b, none);
        } else if (const auto* tc = std::get_if<fault::ThreadCrash>(&f.kind)) {
            if (rep.mode == RecoveryMode::Local) {
                SimThread& t = threads_[static_cast<std::size_t>(tc->thread)];
                t.phase = 0;
                t.pending_work = 0;
                t.cycle_acc = 0;
                wake_thread(t.id);
            }
        }
    }
    if (rep.mode == RecoveryMode::Remote) {
        for (ThreadId id : sandboxes_.at(ar.standby).threads) {
            SimThread& t = threads_[static_cast<std::size_t>(id)];
            if (t.filtered) {
                t.filtered = false;
                activated.push_back(id);
                record(core_of_sandbox(ar.standby), ar.standby, "RECOVER_PHASE", "activate", "thread=" + t.name);
            }
        }
        if (activated.empty())
            note("NoStandby: no filtered thread in " + sandboxes_.at(ar.standby).name());
    }
    active_faults_[static_cast<std::size_t>(faulty)].clear();
    rep.completed = true;
    rep.completed_at = engine_.now();
    rep.downtime_ticks = rep.completed_at - rep.started_at;
    record(core, faulty, "RECOVER_PHASE", "complete",
           "total_cycles=" + std::to_string(rep.total_cycles) + ";downtime=" + std::to_string(rep.downtime_ticks));
    for (CoreId c = 0; c < static_cast<CoreId>(run_.size()); ++c)
        mark_dirty(c);
}

void Simulation::on_work_done(ThreadId worker, std::uint64_t token)
{
    if ((token & kJobMask) == kRecoveryJob) {
        auto it = std::find_if(recoveries_.begin(), recoveries_.end(),
                               [&](const ActiveRecovery& r) { return r.worker == worker; });
        if (it == recoveries_.end())
            fail(Errc::InvariantViolation, "recovery job without a recovery");
        ActiveRecovery& ar = *it;
        RecoveryReport& rep = stats_.recoveries[ar.report];
        const auto& [phase, cycles] = ar.phases[ar.next_phase];
        rep.per_phase.emplace_back(phase, cycles);
        rep.total_cycles += cycles;
        const SandboxId where = threads_[static_cast<std::size_t>(worker)].sandbox;
        record(core_of_sandbox(where), where, "RECOVER_PHASE", std::string(to_string(phase)),
               "cycles=" + std::to_string(cycles));
        if (++ar.next_phase < ar.phases.size()) {
            enqueue_job(worker, WorkerJob{ar.phases[ar.next_phase].second, 0, kRecoveryJob | next_token_++});
            return;
        }
        finish_recovery(ar);
        recoveries_.erase(it);
        return;
    }
    if ((token & kJobMask) == kMigrationJob) {
        const std::uint64_t idx = token & ~kJobMask;
        for (auto& m : migrations_)
            if (m.index == idx && m.stage == PendingMigration::Stage::Copying)
                return finish_migration(m);
        fail(Errc::InvariantViolation, "copy finished for an unknown migration");
    }
}

// ---------------------------------------------------------------------------
// Migration

void Simulation::on_migration(std::size_t index)
{
    const MigrationConfig& c = sc_.migrations[index];
    PendingMigration m;
    m.index = index;
    m.report.thread = sc_.thread_index(c.thread);
    m.report.src = threads_[static_cast<std::size_t>(m.report.thread)].sandbox;
    m.report.dst = sc_.sandbox_index(c.dst);
    m.report.requested_at = engine_.now();
    m.report.best_effort = c.best_effort;
    migrations_.push_back(m);
}

void Simulation::try_pending_migrations()
{
    for (auto& m : migrations_) {
        if (m.stage != PendingMigration::Stage::Waiting)
            continue;
        SimThread& t = threads_[static_cast<std::size_t>(m.report.thread)];
        m.report.src = t.sandbox;
        if (t.sandbox == m.report.dst) {
            reject_migration(m, "SameSandbox");
            continue;
        }
        const Vcpu& v = vcpu(t.vcpu);
        EligibilityInput in;
        in.vcpu_budget_expired = v.band() == Band::Background;
        in.sleeping = t.state == ThreadState::Sleeping;
        in.blocked_on_io = t.state == ThreadState::BlockedIo;
        in.destination_busy = dst_in_flight_[static_cast<std::size_t>(m.report.dst)];
        in.other_state = t.state == ThreadState::Waiting || t.state == ThreadState::Halted ||
                         t.state == ThreadState::Migrating ||
                         vcpu_threads_[static_cast<std::size_t>(t.vcpu)].size() != 1 ||
                         v.cls() != VcpuClass::Main || migrator_[static_cast<std::size_t>(t.sandbox)] < 0;
        const auto why = eligible(in);
        if (!why)
            start_migration(m);
        else if (*why != NotEligibleReason::RunnableWithBudget)
            reject_migration(m, std::string(to_string(*why)));
    }
}

void Simulation::start_migration(PendingMigration& m)
{
    MigrationReport& r = m.report;
    SimThread& t = threads_[static_cast<std::size_t>(r.thread)];
    const CoreId src = core_of_sandbox(r.src);
    settle(src);
    const Vcpu& v = vcpu(t.vcpu);
    const Ticks now_local = local_now(src);

    std::optional<Ticks> e_s;
    if (t.state == ThreadState::Sleeping)
        e_s = t.wake_at - now_local;
    if (v.band() == Band::Background && v.next_replenishment()) {
        const Ticks until_repl = *v.next_replenishment() - now_local;
        e_s = e_s ? std::min(*e_s, until_repl) : until_repl;
    }
    r.e_s = e_s.value_or(0);
    r.delta_s = estimate_delta(t.address_space_pages, sc_.host.migration);
    r.delta_actual = sc_.migrations[m.index].delta_actual.value_or(r.delta_s);
    const Vcpu& mig = vcpu(threads_[static_cast<std::size_t>(migrator_[static_cast<std::size_t>(r.src)])].vcpu);
    r.budget = mig.spec().budget;
    r.period = mig.spec().period;
    if (!r.best_effort && check_condition(r.e_s, r.delta_s, r.budget, r.period) == Safety::Unsafe)
        return reject_migration(m, "Unsafe");

    m.saved_state = t.state;
    t.state = ThreadState::Migrating;
    mark_dirty(src);
    sandboxes_.at(r.src).monitor_trap(TrapCause::MigrationAssist);
    r.tsc_s = engine_.read_tsc(src);
    dst_in_flight_[static_cast<std::size_t>(r.dst)] = true;
    m.stage = PendingMigration::Stage::Requested;
    record(src, r.src, "MIGRATE_REQ", t.name,
           "dst=" + sandboxes_.at(r.dst).name() + ";e_s=" + std::to_string(r.e_s) +
               ";delta_s=" + std::to_string(r.delta_s) + ";tsc_s=" + std::to_string(r.tsc_s));
    engine_.schedule_event(engine_.now() + sc_.host.rdtsc_cost + sc_.host.ipi_cost,
                           ev::Ipi{src, core_of_sandbox(r.dst),
                                   ipi_payload(IpiKind::MigrationRequest, m.index)});
}

void Simulation::on_ipi(const ev::Ipi& ipi)
{
    const auto kind = static_cast<IpiKind>(ipi.payload >> 32);
    const std::uint64_t index = ipi.payload & 0xffffffffull;

    if (kind == IpiKind::Notify) {
        const auto ch = static_cast<ChannelId>(index);
        const Channel& c = channels_.at(ch);
        for (SandboxId side : {c.a, c.b}) {
            if (core_of_sandbox(side) != ipi.dst)
                continue;
            for (ThreadId id : sandboxes_.at(side).threads) {
                SimThread& t = threads_[static_cast<std::size_t>(id)];
                const auto* w = std::get_if<wl::MessageReceiver>(&t.workload);
                if (w && w->channel == ch && t.state == ThreadState::Waiting)
                    wake_thread(id);
            }
        }
        record(ipi.dst, -1, "IPI", c.name, "notify=1");
        return;
    }

    PendingMigration* m = nullptr;
    for (auto& p : migrations_)
        if (p.index == index && p.stage == PendingMigration::Stage::Requested)
            m = &p;
    if (!m)
        fail(Errc::InvariantViolation, "IPI for an unknown migration");
    MigrationReport& r = m->report;

    if (kind == IpiKind::MigrationRequest) {
        const CoreId dst = ipi.dst;
        // The value is taken when the destination's read completes, which is
        // what the 2 * rdtsc_cost term of the adjustment accounts for.
        r.tsc_d = engine_.read_tsc(dst) + sc_.host.rdtsc_cost;
        r.delta_adj = clock_adjust(r.tsc_d, r.tsc_s, sc_.host.rdtsc_cost, sc_.host.ipi_cost);
        const SimThread& t = threads_[static_cast<std::size_t>(r.thread)];
        const AdmissionResult a = sandboxes_.at(r.dst).sched().admit(vcpu(t.vcpu).spec());
        const IpiKind reply = a.accepted ? IpiKind::MigrationAccept : IpiKind::MigrationReject;
        if (!a.accepted)
            r.reason = "DestinationOverUtilized lhs=" + a.lhs;
        record(dst, r.dst, a.accepted ? "MIGRATE_ACK" : "MIGRATE_REJECT", t.name,
               "tsc_d=" + std::to_string(r.tsc_d) + ";delta_adj=" + std::to_string(r.delta_adj));
        engine_.schedule_event(engine_.now() + sc_.host.ipi_cost,
                               ev::Ipi{dst, ipi.src, ipi_payload(reply, index)});
    } else if (kind == IpiKind::MigrationAccept) {
        m->stage = PendingMigration::Stage::Copying;
        enqueue_job(migrator_[static_cast<std::size_t>(r.src)],
                    WorkerJob{0, r.delta_actual, kMigrationJob | index});
    } else {
        reject_migration(*m, r.reason.empty() ? "Rejected" : r.reason);
    }
}

void Simulation::reject_migration(PendingMigration& m, const std::string& why)
{
    MigrationReport& r = m.report;
    SimThread& t = threads_[static_cast<std::size_t>(r.thread)];
    const CoreId src = core_of_sandbox(t.sandbox);
    if (t.state == ThreadState::Migrating) {
        settle(src);
        t.state = m.saved_state;
        if (t.state == ThreadState::Sleeping && engine_.to_global(src, t.wake_at) <= engine_.now()) {
            t.state = ThreadState::Runnable;
            stats_.wakeups.push_back(Wake{engine_.now(), t.id});
        }
        mark_dirty(src);
        dst_in_flight_[static_cast<std::size_t>(r.dst)] = false;
    }
    r.completed = false;
    r.reason = why;
    m.stage = PendingMigration::Stage::Done;
    stats_.migrations.push_back(r);
    record(src, t.sandbox, "MIGRATE_REJECT", t.name, "reason=" + why);
}

void Simulation::finish_migration(PendingMigration& m)
{
    MigrationReport& r = m.report;
    SimThread& t = threads_[static_cast<std::size_t>(r.thread)];
    const CoreId src = core_of_sandbox(r.src);
    const CoreId dst = core_of_sandbox(r.dst);
    settle(src);
    settle(dst);

    Sandbox& from = sandboxes_.at(r.src);
    Sandbox& to = sandboxes_.at(r.dst);
    Vcpu moved = from.sched().remove(t.vcpu);
    moved.shift_times(r.delta_adj);
    t.wake_at += r.delta_adj;
    t.next_release += r.delta_adj;
    std::erase(from.threads, t.id);
    to.threads.push_back(t.id);
    t.sandbox = r.dst;
    vcpu_home_[static_cast<std::size_t>(t.vcpu)] = r.dst;
    const VcpuId vid = t.vcpu;
    to.sched().add(std::move(moved));
    to.monitor_trap(TrapCause::MigrationAssist);

    for (const auto& item : vcpu(vid).replenishments())
        engine_.schedule_event(std::max(engine_.now(), engine_.to_global(dst, item.due_at)),
                               ev::Replenishment{vid});

    if (m.saved_state == ThreadState::Sleeping) {
        ++t.wake_generation;
        const Ticks wake_global = engine_.to_global(dst, t.wake_at);
        if (wake_global <= engine_.now()) {
            t.state = ThreadState::Runnable;
            stats_.wakeups.push_back(Wake{engine_.now(), t.id});
        } else {
            t.state = ThreadState::Sleeping;
            engine_.schedule_event(wake_global, ev::Wakeup{t.id, t.wake_generation});
        }
    } else {
        t.state = m.saved_state;
    }
    dst_in_flight_[static_cast<std::size_t>(r.dst)] = false;
    r.completed = true;
    r.completed_at = engine_.now();
    m.stage = PendingMigration::Stage::Done;
    stats_.migrations.push_back(r);
    record(dst, r.dst, "MIGRATE_DONE", t.name,
           "src=" + from.name() + ";delta_adj=" + std::to_string(r.delta_adj) +
               ";copy=" + std::to_string(r.delta_actual));
    mark_dirty(src);
    mark_dirty(dst);
}

// ---------------------------------------------------------------------------
// Sampling

void Simulation::on_sample(std::int64_t index)
{
    if (index < 0)
        return;
    settle_all();
    for (std::size_t s = 0; s < sandboxes_.size(); ++s) {
        SampleRow row = sample_acc_[s];
        row.at = engine_.now();
        row.sandbox = static_cast<SandboxId>(s);
        std::ostringstream detail;
        detail << "recv=" << row.received << ";corrupt=" << row.corrupt << ";out=" << row.outputs
               << ";frames=" << row.frames << ";irq=" << row.interrupts;
        for (const auto& [id, v] : sandboxes_.at(static_cast<SandboxId>(s)).sched().vcpus()) {
            const Ticks fg = v.foreground_runtime() - sample_fg_base_[static_cast<std::size_t>(id)];
            sample_fg_base_[static_cast<std::size_t>(id)] = v.foreground_runtime();
            row.foreground.emplace_back(id, fg);
            detail << ";fg:" << v.name() << '=' << fg;
        }
        record(-1, static_cast<SandboxId>(s), "SAMPLE", sandboxes_.at(static_cast<SandboxId>(s)).name(),
               detail.str());
        stats_.samples.push_back(std::move(row));
        sample_acc_[s] = SampleRow{};
    }
    const Ticks next = (index + 1) * sc_.sample_interval;
    if (next <= opt_.until.value_or(sc_.duration))
        engine_.schedule_event(next, ev::TraceSample{index + 1});
}

}  // namespace mksim
