#include "mksim/report.hpp"

#include <algorithm>
#include <iomanip>
#include <memory>
#include <set>
#include <sstream>

namespace mksim {

Ticks foreground_in(const std::vector<Segment>& segs, Ticks from, Ticks to)
{
    Ticks sum = 0;
    for (const auto& s : segs) {
        if (s.band != Band::Foreground || s.end <= from || s.start >= to)
            continue;
        sum += std::min(s.end, to) - std::max(s.start, from);
    }
    return sum;
}

Ticks max_window_runtime(const std::vector<Segment>& segs, Ticks len)
{
    std::vector<Segment> fg;
    for (const auto& s : segs)
        if (s.band == Band::Foreground)
            fg.push_back(s);
    // The maximum over all windows is attained by a window starting at the
    // start of some segment.
    Ticks best = 0;
    std::size_t j = 0;
    Ticks inside = 0;  // full segments in [fg[i].start, ...) before index j
    for (std::size_t i = 0; i < fg.size(); ++i) {
        const Ticks w_end = fg[i].start + len;
        if (j < i) {
            j = i;
            inside = 0;
        }
        while (j < fg.size() && fg[j].end <= w_end) {
            inside += fg[j].end - fg[j].start;
            ++j;
        }
        Ticks partial = 0;
        if (j < fg.size() && fg[j].start < w_end)
            partial = w_end - fg[j].start;
        best = std::max(best, inside + partial);
        if (j > i)
            inside -= fg[i].end - fg[i].start;
    }
    return best;
}

std::vector<Ticks> window_runtimes(const std::vector<Segment>& segs, Ticks len, Ticks end)
{
    std::vector<Ticks> out;
    for (Ticks w = 0; w < end; w += len)
        out.push_back(foreground_in(segs, w, std::min(w + len, end)));
    return out;
}

std::map<std::int64_t, double> transfer_times(const RunStats& stats, ChannelId ch, std::int64_t batch)
{
    std::vector<const Reception*> rx;
    for (const auto& r : stats.receptions)
        if (r.channel == ch && !r.corrupt)
            rx.push_back(&r);

    std::map<std::int64_t, Ticks> elapsed;
    std::map<std::int64_t, std::int64_t> count;
    std::size_t i = 0;
    while (i < rx.size()) {
        const std::int64_t size = rx[i]->bytes;
        std::size_t j = i;
        while (j < rx.size() && rx[j]->bytes == size && (batch <= 0 || static_cast<std::int64_t>(j - i) < batch))
            ++j;
        elapsed[size] += rx[j - 1]->at - rx[i]->send_start;
        count[size] += static_cast<std::int64_t>(j - i);
        i = j;
    }
    std::map<std::int64_t, double> out;
    for (const auto& [size, e] : elapsed)
        out[size] = static_cast<double>(e) / static_cast<double>(count[size]);
    return out;
}

std::vector<SandboxId> affected_sandboxes(const Scenario& sc)
{
    std::set<SandboxId> out;
    for (const auto& f : sc.faults) {
        out.insert(sc.sandbox_index(f.sandbox));
        if (f.kind == "channel") {
            const auto& c = sc.channels[static_cast<std::size_t>(sc.channel_index(f.target))];
            out.insert(sc.sandbox_index(c.a));
            out.insert(sc.sandbox_index(c.b));
        }
    }
    for (const auto& r : sc.recoveries) {
        out.insert(sc.sandbox_index(r.sandbox));
        if (!r.standby.empty())
            out.insert(sc.sandbox_index(r.standby));
    }
    return {out.begin(), out.end()};
}

Scenario without_faults(Scenario sc)
{
    sc.faults.clear();
    sc.recoveries.clear();
    return sc;
}

Scenario without_migrations(Scenario sc)
{
    sc.migrations.clear();
    return sc;
}

std::string summary_text(const Simulation& sim)
{
    const Scenario& sc = sim.scenario();
    const RunStats& st = sim.stats();
    std::ostringstream os;
    os << "scenario " << sc.name << ": duration " << sc.duration << " ticks, ended at " << st.ended_at << '\n';

    os << "\nvcpus\n";
    for (std::size_t v = 0; v < sim.vcpu_count(); ++v) {
        const Vcpu& vc = sim.vcpu(static_cast<VcpuId>(v));
        const auto& segs = st.segments[v];
        Ticks fg = 0, bg = 0;
        for (const auto& s : segs)
            (s.band == Band::Foreground ? fg : bg) += s.end - s.start;
        os << "  " << vc.name() << " sandbox=" << sim.sandboxes().at(sim.vcpu_sandbox(static_cast<VcpuId>(v))).name()
           << " class=" << to_string(vc.cls());
        if (vc.cls() == VcpuClass::Main)
            os << " C=" << vc.spec().budget << " T=" << vc.spec().period;
        else
            os << " U=" << vc.spec().util.str();
        os << " fg=" << fg << " bg=" << bg;
        if (st.ended_at > 0)
            os << " util=" << std::fixed << std::setprecision(4)
               << static_cast<double>(fg) / static_cast<double>(st.ended_at) << std::defaultfloat;
        os << '\n';
        if (sc.sample_interval > 0) {
            os << "    fg per " << sc.sample_interval << ":";
            for (Ticks w : window_runtimes(segs, sc.sample_interval, st.ended_at))
                os << ' ' << w;
            os << '\n';
        }
    }

    if (!st.samples.empty()) {
        os << "\nsamples (recv corrupt out frames irq)\n";
        for (const auto& s : st.samples)
            os << "  t=" << s.at << ' ' << sim.sandboxes().at(s.sandbox).name() << ' ' << s.received << ' '
               << s.corrupt << ' ' << s.outputs << ' ' << s.frames << ' ' << s.interrupts << '\n';
    }

    os << "\nmessages: sent=" << st.messages_sent << " busy=" << st.busy_sends
       << " receptions=" << st.receptions.size() << " payload_mismatches=" << st.payload_mismatches << '\n';
    for (const auto& t : sc.threads) {
        const auto* s = std::get_if<wl::MessageSender>(&t.workload);
        if (!s || s->interval > 0)
            continue;
        for (ChannelId ch : s->channels)
            for (const auto& [size, us] : transfer_times(st, ch, s->batch))
                os << "  ipc " << sc.channels[static_cast<std::size_t>(ch)].name << " size=" << size
                   << " transfer_ticks=" << std::fixed << std::setprecision(4) << us << std::defaultfloat << '\n';
    }

    os << "\ninterrupts: delivered=" << st.interrupts_delivered << " activations=" << st.activations
       << " unassociated=" << st.unassociated_interrupts << '\n';
    for (std::size_t d = 0; d < sim.devices().size(); ++d)
        os << "  " << sim.devices()[d].name << " arrivals=" << st.device_events[d]
           << " deliveries=" << st.device_deliveries[d] << '\n';

    for (const auto& m : st.migrations) {
        os << "\nmigration " << sim.threads()[static_cast<std::size_t>(m.thread)].name << ' '
           << sim.sandboxes().at(m.src).name() << "->" << sim.sandboxes().at(m.dst).name()
           << (m.completed ? " completed" : " rejected") << '\n'
           << "  requested_at=" << m.requested_at << " e_s=" << m.e_s << " delta_s=" << m.delta_s
           << " delta_actual=" << m.delta_actual << " C=" << m.budget << " T=" << m.period;
        if (m.budget > 0 && m.period > 0)
            os << " horizon=" << migration_horizon(m.delta_s, m.budget, m.period);
        os << " delta_adj=" << m.delta_adj;
        if (m.completed)
            os << " completed_at=" << m.completed_at;
        if (!m.reason.empty())
            os << " reason=" << m.reason;
        os << '\n';
    }

    for (const auto& r : st.recoveries) {
        os << "\nrecovery " << sim.sandboxes().at(r.sandbox).name() << " mode=" << to_string(r.mode)
           << (r.completed ? "" : " (incomplete)") << '\n';
        for (const auto& [phase, cycles] : r.per_phase)
            os << "  " << to_string(phase) << ' ' << cycles << '\n';
        os << "  total_cycles=" << r.total_cycles << " downtime_ticks=" << r.downtime_ticks << '\n';
    }

    if (!st.notes.empty()) {
        os << "\nnotes\n";
        for (const auto& n : st.notes)
            os << "  " << n << '\n';
    }
    os << "\nviolations: " << st.violations.size() << '\n';
    for (const auto& v : st.violations)
        os << "  t=" << v.at << ' ' << v.what << '\n';
    return os.str();
}

namespace {

std::unique_ptr<Simulation> run_once(const Scenario& sc, bool mutate = false)
{
    SimOptions o;
    o.mutate_charge_background = mutate;
    auto sim = std::make_unique<Simulation>(sc, o);
    sim->run();
    return sim;
}

std::int64_t expected_arrivals(const DeviceConfig& d, Ticks end)
{
    if (d.start > end)
        return 0;
    const std::int64_t fit = d.interval > 0 ? (end - d.start) / d.interval + 1 : 1;
    return d.count > 0 ? std::min(d.count, fit) : fit;
}

}  // namespace

std::vector<CheckResult> verify(const Scenario& sc, VerifyOptions opt)
{
    std::vector<CheckResult> out;
    auto main = run_once(sc, opt.mutate_charge_background);
    const RunStats& st = main->stats();

    for (const char* cat : {"capacity", "distance", "background", "dispatch"}) {
        CheckResult c{cat, true, "0 violations"};
        const std::string prefix = std::string(cat) + ":";
        std::int64_t n = 0;
        for (const auto& v : st.violations)
            if (v.what.rfind(prefix, 0) == 0) {
                if (n++ == 0)
                    c.detail = "first at t=" + std::to_string(v.at) + ": " + v.what;
            }
        c.pass = n == 0;
        if (n > 0)
            c.detail = std::to_string(n) + " violation(s); " + c.detail;
        out.push_back(c);
    }

    {
        CheckResult c{"utilization_ceiling", true, ""};
        for (std::size_t v = 0; v < main->vcpu_count(); ++v) {
            const Vcpu& vc = main->vcpu(static_cast<VcpuId>(v));
            if (vc.cls() != VcpuClass::Main)
                continue;
            const Ticks worst = max_window_runtime(st.segments[v], vc.spec().period);
            if (worst > vc.spec().budget) {
                c.pass = false;
                c.detail = vc.name() + " ran " + std::to_string(worst) + " in one period";
                break;
            }
        }
        if (c.pass)
            c.detail = "every Main VCPU runs at most C foreground ticks in any window of length T";
        out.push_back(c);
    }

    {
        CheckResult c{"monitor_minimality", true, ""};
        std::int64_t extra = 0;
        for (const auto& sb : main->sandboxes().all())
            extra += sb.monitor().invocations() - sb.monitor().channel_maps;
        const bool quiet = sc.faults.empty() && sc.migrations.empty() && sc.recoveries.empty();
        c.pass = !quiet || extra == 0;
        c.detail = std::to_string(extra) + " monitor entries after boot" +
                   (quiet ? "" : " (faults, migrations or recoveries present)");
        out.push_back(c);
    }

    {
        CheckResult c{"interrupt_accounting", true, ""};
        std::int64_t total = 0;
        for (std::size_t d = 0; d < sc.devices.size(); ++d) {
            const std::int64_t want = expected_arrivals(sc.devices[d], st.ended_at);
            total += st.device_deliveries[d];
            if (st.device_events[d] != want) {
                c.pass = false;
                c.detail = sc.devices[d].name + ": " + std::to_string(st.device_events[d]) + " arrivals, expected " +
                           std::to_string(want);
            }
        }
        if (total != st.interrupts_delivered) {
            c.pass = false;
            c.detail = "deliveries do not add up";
        }
        if (c.pass)
            c.detail = std::to_string(st.interrupts_delivered) + " deliveries";
        out.push_back(c);
    }

    {
        CheckResult c{"conservation", true, ""};
        std::int64_t good = 0;
        for (const auto& r : st.receptions)
            good += r.corrupt ? 0 : 1;
        c.pass = st.payload_mismatches == 0 && good <= st.messages_sent;
        c.detail = std::to_string(st.messages_sent) + " sent, " + std::to_string(good) + " received intact, " +
                   std::to_string(st.payload_mismatches) + " payload mismatches";
        out.push_back(c);
    }

    {
        auto again = run_once(sc, opt.mutate_charge_background);
        const bool same = again->trace().csv() == main->trace().csv();
        out.push_back({"determinism", same,
                       same ? std::to_string(main->trace().records().size()) + " identical records"
                            : "trace differs between two runs"});
    }

    if (!sc.faults.empty()) {
        CheckResult c{"containment", true, ""};
        auto control = run_once(without_faults(sc));
        const auto affected = affected_sandboxes(sc);
        std::string checked;
        for (std::size_t s = 0; s < sc.sandboxes.size(); ++s) {
            const auto sb = static_cast<SandboxId>(s);
            if (std::find(affected.begin(), affected.end(), sb) != affected.end())
                continue;
            auto key = [&](const RunStats& r) {
                std::vector<std::tuple<Ticks, ChannelId, std::uint64_t, std::int64_t, bool>> rx;
                for (const auto& m : r.receptions)
                    if (m.sandbox == sb)
                        rx.emplace_back(m.at, m.channel, m.seq, m.bytes, m.corrupt);
                std::vector<std::pair<Ticks, ThreadId>> outs;
                for (const auto& o : r.outputs)
                    if (o.sandbox == sb)
                        outs.emplace_back(o.at, o.thread);
                return std::make_pair(rx, outs);
            };
            if (key(st) != key(control->stats())) {
                c.pass = false;
                c.detail = sc.sandboxes[s].name + " deviates from the fault-free run";
                break;
            }
            checked += (checked.empty() ? "" : ",") + sc.sandboxes[s].name;
        }
        if (c.pass)
            c.detail = "identical receptions and outputs in " + (checked.empty() ? std::string("(none)") : checked);
        out.push_back(c);
    }

    if (!sc.migrations.empty()) {
        CheckResult c{"migration_utilization", true, ""};
        auto control = run_once(without_migrations(sc));
        std::set<VcpuId> skip;
        for (const auto& t : main->threads())
            if (std::holds_alternative<wl::Worker>(t.workload) && t.name.ends_with(".migrator"))
                skip.insert(t.vcpu);
        std::int64_t compared = 0;
        for (std::size_t v = 0; v < main->vcpu_count() && c.pass; ++v) {
            const Vcpu& vc = main->vcpu(static_cast<VcpuId>(v));
            if (skip.contains(static_cast<VcpuId>(v)) || vc.cls() != VcpuClass::Main)
                continue;
            const Ticks T = vc.spec().period;
            if (window_runtimes(st.segments[v], T, st.ended_at) !=
                window_runtimes(control->stats().segments[v], T, st.ended_at)) {
                c.pass = false;
                c.detail = vc.name() + " per-period runtime differs from the run without migration";
            }
            ++compared;
        }
        for (const auto& m : st.migrations)
            if (!m.completed) {
                c.pass = false;
                c.detail = "migration rejected: " + m.reason;
            }
        if (c.pass)
            c.detail = std::to_string(compared) + " VCPUs with identical per-period runtime";
        out.push_back(c);
    }

    if (!sc.recoveries.empty()) {
        CheckResult c{"recovery", true, ""};
        for (const auto& r : st.recoveries) {
            if (!r.completed || r.downtime_ticks >= 500'000) {
                c.pass = false;
                c.detail = "recovery of " + sc.sandboxes[static_cast<std::size_t>(r.sandbox)].name +
                           (r.completed ? " took " + std::to_string(r.downtime_ticks) + " ticks" : " did not finish");
            }
        }
        if (st.recoveries.size() < sc.recoveries.size()) {
            c.pass = false;
            c.detail = "a recovery directive was rejected";
        }
        if (c.pass)
            c.detail = std::to_string(st.recoveries.size()) + " recoveries under 0.5 s";
        out.push_back(c);
    }
    return out;
}

}  // namespace mksim
