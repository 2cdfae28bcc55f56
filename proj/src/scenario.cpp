#include "mksim/scenario.hpp"

#include <toml.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace mksim {

namespace {

template <typename T>
int index_of(const std::vector<T>& v, std::string_view name)
{
    for (std::size_t i = 0; i < v.size(); ++i)
        if (v[i].name == name)
            return static_cast<int>(i);
    return -1;
}

[[noreturn]] void parse_fail(const toml::node& n, const std::string& what)
{
    fail(Errc::ParseError, "line " + std::to_string(n.source().begin.line) + ": " + what);
}

Ticks duration_of(const toml::node& n, std::string_view key)
{
    if (auto i = n.value<std::int64_t>())
        return *i;
    if (auto s = n.value<std::string>()) {
        try {
            return parse_duration(*s);
        } catch (const SimError& e) {
            parse_fail(n, std::string(key) + ": " + e.what());
        }
    }
    parse_fail(n, std::string(key) + " must be a duration string or integer ticks");
}

// Typed, strict access to one TOML table: every key must be consumed, so a
// misspelled key is an error instead of a silent default.
class Table {
public:
    Table(const toml::table& t, std::string what) : t_(t), what_(std::move(what)) {}

    const toml::node* find(std::string_view key)
    {
        used_.insert(std::string(key));
        return t_.get(key);
    }

    const toml::node& require(std::string_view key)
    {
        const toml::node* n = find(key);
        if (!n)
            parse_fail(t_, what_ + " is missing '" + std::string(key) + "'");
        return *n;
    }

    std::string str(std::string_view key, std::optional<std::string> def = std::nullopt)
    {
        const toml::node* n = def ? find(key) : &require(key);
        if (!n)
            return *def;
        if (auto v = n->value<std::string>())
            return *v;
        parse_fail(*n, std::string(key) + " must be a string");
    }

    std::int64_t integer(std::string_view key, std::optional<std::int64_t> def = std::nullopt)
    {
        const toml::node* n = def ? find(key) : &require(key);
        if (!n)
            return *def;
        if (auto v = n->value<std::int64_t>())
            return *v;
        parse_fail(*n, std::string(key) + " must be an integer");
    }

    bool boolean(std::string_view key, bool def)
    {
        const toml::node* n = find(key);
        if (!n)
            return def;
        if (auto v = n->value<bool>())
            return *v;
        parse_fail(*n, std::string(key) + " must be true or false");
    }

    Ticks duration(std::string_view key, std::optional<Ticks> def = std::nullopt)
    {
        const toml::node* n = def ? find(key) : &require(key);
        if (!n)
            return *def;
        return duration_of(*n, key);
    }

    std::optional<Ticks> opt_duration(std::string_view key)
    {
        const toml::node* n = find(key);
        if (!n)
            return std::nullopt;
        return duration_of(*n, key);
    }

    Ratio ratio(std::string_view key)
    {
        const toml::node& n = require(key);
        auto s = n.value<std::string>();
        if (!s)
            parse_fail(n, std::string(key) + " must be a string such as \"0.04\" or \"1/25\"");
        try {
            return Ratio::parse(*s);
        } catch (const SimError& e) {
            parse_fail(n, e.what());
        }
    }

    std::vector<std::string> strings(std::string_view key)
    {
        std::vector<std::string> out;
        const toml::node* n = find(key);
        if (!n)
            return out;
        const toml::array* a = n->as_array();
        if (!a)
            parse_fail(*n, std::string(key) + " must be an array of strings");
        for (const auto& e : *a) {
            auto s = e.value<std::string>();
            if (!s)
                parse_fail(e, std::string(key) + " must be an array of strings");
            out.push_back(*s);
        }
        return out;
    }

    std::vector<std::int64_t> integers(std::string_view key, std::vector<std::int64_t> def)
    {
        const toml::node* n = find(key);
        if (!n)
            return def;
        const toml::array* a = n->as_array();
        if (!a || a->empty())
            parse_fail(*n, std::string(key) + " must be a non-empty array of integers");
        std::vector<std::int64_t> out;
        for (const auto& e : *a) {
            auto v = e.value<std::int64_t>();
            if (!v)
                parse_fail(e, std::string(key) + " must be an array of integers");
            out.push_back(*v);
        }
        return out;
    }

    const toml::table* subtable(std::string_view key)
    {
        const toml::node* n = find(key);
        if (!n)
            return nullptr;
        if (!n->as_table())
            parse_fail(*n, std::string(key) + " must be a table");
        return n->as_table();
    }

    void done() const
    {
        for (const auto& [k, v] : t_)
            if (!used_.contains(std::string(k.str())))
                parse_fail(v, "unknown key '" + std::string(k.str()) + "' in " + what_);
    }

    const toml::table& raw() const { return t_; }

private:
    const toml::table& t_;
    std::string what_;
    std::set<std::string> used_;
};

template <typename F>
void each_table(Table& root, std::string_view key, F&& fn)
{
    const toml::node* n = root.find(key);
    if (!n)
        return;
    const toml::array* arr = n->as_array();
    if (!arr)
        parse_fail(*n, "'" + std::string(key) + "' must be an array of tables ([[" + std::string(key) + "]])");
    for (const auto& e : *arr) {
        const toml::table* t = e.as_table();
        if (!t)
            parse_fail(e, "'" + std::string(key) + "' entries must be tables");
        Table tt(*t, std::string(key));
        try {
            fn(tt);
        } catch (const SimError&) {
            // a misspelt key usually explains the missing one; report it first
            tt.done();
            throw;
        }
        tt.done();
    }
}

struct NameMaps {
    const std::vector<ChannelConfig>& channels;
    const std::vector<DeviceConfig>& devices;

    ChannelId channel(const toml::node& at, const std::string& name) const
    {
        const int i = index_of(channels, name);
        if (i < 0)
            fail(Errc::UnresolvedReference, "line " + std::to_string(at.source().begin.line) +
                                                ": unknown channel '" + name + "'");
        return i;
    }
    DeviceId device(const toml::node& at, const std::string& name) const
    {
        const int i = index_of(devices, name);
        if (i < 0)
            fail(Errc::UnresolvedReference, "line " + std::to_string(at.source().begin.line) +
                                                ": unknown device '" + name + "'");
        return i;
    }
};

WorkloadSpec parse_workload(Table& w, const NameMaps& names)
{
    const std::string type = w.str("type");
    const toml::table& at = w.raw();
    if (type == "cpu_loop")
        return wl::CpuLoop{w.duration("work"), w.duration("period"), w.duration("offset", 0)};
    if (type == "hog")
        return wl::Hog{};
    if (type == "canny")
        return wl::CannyLoop{w.duration("work_per_frame")};
    if (type == "sender") {
        wl::MessageSender s;
        for (const auto& c : w.strings("channels"))
            s.channels.push_back(names.channel(at, c));
        if (s.channels.empty())
            parse_fail(at, "sender needs at least one channel");
        s.interval = w.duration("interval", 0);
        s.offset = w.duration("offset", 0);
        s.sizes = w.integers("sizes", {64});
        s.count_per_size = w.integer("count", 0);
        s.batch = w.integer("batch", 0);
        s.batch_interval = w.duration("batch_interval", 0);
        if (s.interval == 0 && s.count_per_size <= 0)
            parse_fail(at, "a back-to-back sender needs count > 0");
        if (s.batch > 0 && s.batch_interval <= 0)
            parse_fail(at, "batch needs batch_interval");
        return s;
    }
    if (type == "receiver") {
        wl::MessageReceiver r;
        r.channel = names.channel(at, w.str("channel"));
        r.interval = w.duration("interval", 0);
        r.offset = w.duration("offset", 0);
        return r;
    }
    if (type == "driver")
        return wl::DriverHandler{names.device(at, w.str("device"))};
    if (type == "io_wait")
        return wl::IoWait{names.device(at, w.str("device")), w.duration("work")};
    if (type == "worker")
        return wl::Worker{};
    parse_fail(at, "unknown workload type '" + type + "'");
}

TrapPolicy parse_policy(const toml::node& at, const std::string& s)
{
    if (s == "log")
        return TrapPolicy::LogAndResume;
    if (s == "recover_local")
        return TrapPolicy::RecoverLocal;
    if (s == "recover_remote")
        return TrapPolicy::RecoverRemote;
    parse_fail(at, "trap_policy must be log, recover_local or recover_remote");
}

}  // namespace

int Scenario::sandbox_index(std::string_view n) const { return index_of(sandboxes, n); }
int Scenario::vcpu_index(std::string_view n) const { return index_of(vcpus, n); }
int Scenario::thread_index(std::string_view n) const { return index_of(threads, n); }
int Scenario::channel_index(std::string_view n) const { return index_of(channels, n); }
int Scenario::device_index(std::string_view n) const { return index_of(devices, n); }

Ticks parse_duration(std::string_view text)
{
    struct Unit {
        std::string_view suffix;
        Ticks scale;
    };
    static constexpr Unit units[] = {{"us", 1}, {"ms", 1000}, {"s", 1'000'000}};
    for (const auto& u : units) {
        if (text.size() > u.suffix.size() && text.ends_with(u.suffix)) {
            const std::string_view num = text.substr(0, text.size() - u.suffix.size());
            if (u.suffix == "s" && (num.ends_with('m') || num.ends_with('u')))
                continue;
            const Ratio r = Ratio::parse(num);
            const __int128 scaled = static_cast<__int128>(r.num) * u.scale;
            if (scaled % r.den != 0)
                fail(Errc::ParseError, "'" + std::string(text) + "' is not a whole number of microseconds");
            return static_cast<Ticks>(scaled / r.den);
        }
    }
    Ticks v = 0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || p != text.data() + text.size())
        fail(Errc::ParseError, "bad duration '" + std::string(text) + "'");
    return v;
}

Scenario parse_scenario(std::string_view text, const std::string& source)
{
    toml::table doc;
    try {
        doc = toml::parse(text, source);
    } catch (const toml::parse_error& e) {
        fail(Errc::ParseError, "line " + std::to_string(e.source().begin.line) + ": " +
                                   std::string(e.description()));
    }

    Scenario s;
    Table root(doc, "scenario file");

    if (const toml::table* t = root.subtable("scenario")) {
        Table sc(*t, "[scenario]");
        s.name = sc.str("name");
        s.description = sc.str("description", "");
        s.duration = sc.duration("duration");
        s.sample_interval = sc.duration("sample_interval", 0);
        sc.done();
    } else {
        fail(Errc::ParseError, "line 1: missing [scenario] table");
    }

    if (const toml::table* t = root.subtable("host")) {
        Table h(*t, "[host]");
        HostConfig& hc = s.host;
        hc.cores = static_cast<int>(h.integer("cores", 1));
        hc.memory_pages = h.integer("memory_pages", hc.memory_pages);
        hc.cycles_per_tick = h.integer("cycles_per_tick", hc.cycles_per_tick);
        if (const toml::node* n = h.find("skews")) {
            const toml::array* a = n->as_array();
            if (!a)
                parse_fail(*n, "skews must be an array");
            for (const auto& e : *a) {
                // skews may be negative
                const auto str = e.value<std::string>();
                if (str && str->starts_with('-')) {
                    toml::value<std::string> rest(str->substr(1));
                    hc.skews.push_back(-duration_of(rest, "skews"));
                } else {
                    hc.skews.push_back(duration_of(e, "skews"));
                }
            }
        }
        hc.rdtsc_cost = h.duration("rdtsc_cost", hc.rdtsc_cost);
        hc.ipi_cost = h.duration("ipi_cost", hc.ipi_cost);
        hc.migration.per_page = h.duration("per_page_copy_cost", hc.migration.per_page);
        hc.migration.tss = h.duration("tss_copy_cost", hc.migration.tss);
        hc.copy_cycles_per_byte = h.integer("copy_cycles_per_byte", hc.copy_cycles_per_byte);
        hc.poll_cycles = h.integer("poll_cycles", hc.poll_cycles);
        hc.monitor.vm_exit = h.integer("vm_exit_cycles", hc.monitor.vm_exit);
        hc.monitor.vm_enter = h.integer("vm_enter_cycles", hc.monitor.vm_enter);
        hc.recovery.vm_exit = hc.monitor.vm_exit;
        hc.recovery.vm_enter = hc.monitor.vm_enter;
        hc.recovery.driver_replacement = h.integer("driver_replacement_cycles", hc.recovery.driver_replacement);
        hc.recovery.ipi_round_trip = h.integer("ipi_round_trip_cycles", hc.recovery.ipi_round_trip);
        hc.recovery.driver_reinit = h.integer("driver_reinit_cycles", hc.recovery.driver_reinit);
        hc.recovery.netif_restart = h.integer("netif_restart_cycles", hc.recovery.netif_restart);
        h.done();
        if (hc.cores < 1 || hc.cycles_per_tick < 1)
            parse_fail(*t, "cores and cycles_per_tick must be positive");
    }

    each_table(root, "sandbox", [&](Table& t) {
        SandboxConfig c;
        c.name = t.str("name");
        c.core = static_cast<CoreId>(t.integer("core"));
        c.pages = t.integer("pages", c.pages);
        c.policy = parse_policy(t.raw(), t.str("trap_policy", "log"));
        c.migration_vcpu = t.str("migration_vcpu", "");
        c.recovery_vcpu = t.str("recovery_vcpu", "");
        s.sandboxes.push_back(std::move(c));
    });

    each_table(root, "vcpu", [&](Table& t) {
        VcpuConfig c;
        c.name = t.str("name");
        c.sandbox = t.str("sandbox");
        const std::string cls = t.str("class", "main");
        if (cls == "main") {
            c.spec = VcpuSpec::main(t.duration("budget"), t.duration("period"));
            c.background = t.boolean("background", true);
        } else if (cls == "io") {
            c.spec = VcpuSpec::io(t.ratio("util"));
            c.background = t.boolean("background", false);
        } else {
            parse_fail(t.raw(), "class must be main or io");
        }
        try {
            c.spec.validate();
        } catch (const SimError& e) {
            parse_fail(t.raw(), "VCPU " + c.name + ": " + e.what());
        }
        s.vcpus.push_back(std::move(c));
    });

    each_table(root, "channel", [&](Table& t) {
        ChannelConfig c;
        c.name = t.str("name");
        c.a = t.str("a");
        c.b = t.str("b");
        c.pages = t.integer("pages", 1);
        c.notify = t.boolean("notify", false);
        s.channels.push_back(std::move(c));
    });

    each_table(root, "device", [&](Table& t) {
        DeviceConfig c;
        c.name = t.str("name");
        const std::string kind = t.str("kind", "nic");
        if (kind == "nic")
            c.kind = DeviceKind::Nic;
        else if (kind == "timer")
            c.kind = DeviceKind::TimerSource;
        else
            parse_fail(t.raw(), "device kind must be nic or timer");
        c.start = t.duration("start", 0);
        c.interval = t.duration("interval", 0);
        c.count = t.integer("count", 0);
        c.handler_cycles = t.integer("handler_cycles", 0);
        c.sandboxes = t.strings("sandboxes");
        if (const toml::table* dv = t.subtable("default_vcpu")) {
            for (const auto& [k, v] : *dv) {
                auto name = v.value<std::string>();
                if (!name)
                    parse_fail(v, "default_vcpu values must be VCPU names");
                c.default_vcpu[std::string(k.str())] = *name;
            }
        }
        if (c.interval <= 0 && c.count != 1)
            parse_fail(t.raw(), "device needs a positive interval (or count = 1)");
        s.devices.push_back(std::move(c));
    });

    const NameMaps names{s.channels, s.devices};
    each_table(root, "thread", [&](Table& t) {
        ThreadConfig c;
        c.name = t.str("name");
        c.vcpu = t.str("vcpu");
        c.pages = t.integer("pages", 1);
        c.filtered = t.boolean("filtered", false);
        const toml::table* w = t.subtable("workload");
        if (!w)
            parse_fail(t.raw(), "thread " + c.name + " needs a workload");
        Table wt(*w, "workload of " + c.name);
        c.workload = parse_workload(wt, names);
        wt.done();
        s.threads.push_back(std::move(c));
    });

    each_table(root, "fault", [&](Table& t) {
        FaultConfig c;
        c.at = t.duration("at");
        c.sandbox = t.str("sandbox");
        c.kind = t.str("kind");
        c.target = t.str("target");
        static const std::set<std::string> kinds{"driver", "channel", "cross_write", "thread_crash"};
        if (!kinds.contains(c.kind))
            parse_fail(t.raw(), "fault kind must be driver, channel, cross_write or thread_crash");
        s.faults.push_back(std::move(c));
    });

    each_table(root, "recovery", [&](Table& t) {
        RecoveryConfig c;
        c.at = t.duration("at");
        c.sandbox = t.str("sandbox");
        const std::string mode = t.str("mode", "local");
        if (mode == "local")
            c.mode = RecoveryMode::Local;
        else if (mode == "remote")
            c.mode = RecoveryMode::Remote;
        else
            parse_fail(t.raw(), "recovery mode must be local or remote");
        c.standby = t.str("standby", "");
        s.recoveries.push_back(std::move(c));
    });

    each_table(root, "migration", [&](Table& t) {
        MigrationConfig c;
        c.at = t.duration("at");
        c.thread = t.str("thread");
        c.dst = t.str("dst");
        c.best_effort = t.boolean("best_effort", false);
        c.delta_actual = t.opt_duration("delta_actual");
        s.migrations.push_back(std::move(c));
    });

    root.done();
    validate_scenario(s);
    return s;
}

Scenario load_scenario(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        fail(Errc::ParseError, "cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str(), path.string());
}

void validate_scenario(const Scenario& s)
{
    auto unresolved = [](const std::string& what) { fail(Errc::UnresolvedReference, what); };

    if (s.duration <= 0)
        fail(Errc::ParseError, "scenario duration must be positive");

    std::set<std::string> seen;
    auto unique = [&](const std::string& kind, const std::string& name) {
        if (name.empty())
            fail(Errc::ParseError, kind + " with an empty name");
        if (!seen.insert(kind + ":" + name).second)
            fail(Errc::ParseError, "duplicate " + kind + " '" + name + "'");
    };
    for (const auto& x : s.sandboxes) unique("sandbox", x.name);
    for (const auto& x : s.vcpus) unique("vcpu", x.name);
    for (const auto& x : s.threads) unique("thread", x.name);
    for (const auto& x : s.channels) unique("channel", x.name);
    for (const auto& x : s.devices) unique("device", x.name);

    for (const auto& sb : s.sandboxes) {
        for (const std::string* v : {&sb.migration_vcpu, &sb.recovery_vcpu}) {
            if (v->empty())
                continue;
            const int i = s.vcpu_index(*v);
            if (i < 0 || s.vcpus[static_cast<std::size_t>(i)].sandbox != sb.name)
                unresolved("sandbox " + sb.name + " names VCPU '" + *v + "' it does not own");
        }
    }
    for (const auto& v : s.vcpus)
        if (s.sandbox_index(v.sandbox) < 0)
            unresolved("VCPU " + v.name + " refers to unknown sandbox '" + v.sandbox + "'");
    for (const auto& t : s.threads)
        if (s.vcpu_index(t.vcpu) < 0)
            unresolved("thread " + t.name + " refers to unknown VCPU '" + t.vcpu + "'");
    for (const auto& c : s.channels) {
        if (s.sandbox_index(c.a) < 0 || s.sandbox_index(c.b) < 0)
            unresolved("channel " + c.name + " has an unknown endpoint");
    }
    for (const auto& d : s.devices) {
        for (const auto& sb : d.sandboxes)
            if (s.sandbox_index(sb) < 0)
                unresolved("device " + d.name + " lists unknown sandbox '" + sb + "'");
        for (const auto& [sb, v] : d.default_vcpu) {
            const int vi = s.vcpu_index(v);
            if (s.sandbox_index(sb) < 0 || vi < 0 ||
                s.vcpus[static_cast<std::size_t>(vi)].spec.cls != VcpuClass::Main)
                unresolved("device " + d.name + " default VCPU '" + v + "' is not a Main VCPU");
        }
    }
    for (const auto& f : s.faults) {
        if (s.sandbox_index(f.sandbox) < 0)
            unresolved("fault targets unknown sandbox '" + f.sandbox + "'");
        const bool ok = (f.kind == "driver" && s.device_index(f.target) >= 0) ||
                        (f.kind == "channel" && s.channel_index(f.target) >= 0) ||
                        (f.kind == "cross_write" && s.sandbox_index(f.target) >= 0) ||
                        (f.kind == "thread_crash" && s.thread_index(f.target) >= 0);
        if (!ok)
            unresolved("fault " + f.kind + " refers to unknown '" + f.target + "'");
    }
    for (const auto& r : s.recoveries) {
        if (s.sandbox_index(r.sandbox) < 0)
            unresolved("recovery of unknown sandbox '" + r.sandbox + "'");
        if (r.mode == RecoveryMode::Remote && s.sandbox_index(r.standby) < 0)
            unresolved("remote recovery needs a known standby sandbox");
    }
    for (const auto& m : s.migrations) {
        if (s.thread_index(m.thread) < 0 || s.sandbox_index(m.dst) < 0)
            unresolved("migration of '" + m.thread + "' to '" + m.dst + "' does not resolve");
    }

    // Admission, in declaration order per sandbox so the report names the
    // first VCPU that does not fit.
    for (const auto& sb : s.sandboxes) {
        std::vector<VcpuSpec> set;
        for (const auto& v : s.vcpus) {
            if (v.sandbox != sb.name)
                continue;
            set.push_back(v.spec);
            const AdmissionResult r = evaluate_admission(set);
            if (!r.accepted) {
                std::ostringstream os;
                os << "VCPU " << v.name << " does not fit on sandbox " << sb.name << ": lhs " << r.lhs
                   << " (" << r.lhs_value << ") > bound " << r.bound;
                fail(Errc::AdmissionFailed, os.str());
            }
        }
    }
}

}  // namespace mksim
