#include "mksim/report.hpp"
#include "mksim/simulation.hpp"

#include <doctest.h>

#include <string>

using namespace mksim;

namespace {

Scenario two_cores(const std::string& body, const std::string& host_extra = "")
{
    return parse_scenario(R"(
[scenario]
name = "t"
duration = "200ms"
sample_interval = "50ms"

[host]
cores = 2
)" + host_extra + R"(

[[sandbox]]
name = "A"
core = 0
migration_vcpu = "a_mig"
recovery_vcpu = "a_rec"

[[sandbox]]
name = "B"
core = 1
migration_vcpu = "b_mig"

[[vcpu]]
name = "a_mig"
sandbox = "A"
budget = "10ms"
period = "50ms"

[[vcpu]]
name = "a_rec"
sandbox = "A"
budget = "10ms"
period = "50ms"

[[vcpu]]
name = "b_mig"
sandbox = "B"
budget = "10ms"
period = "50ms"
)" + body);
}

Simulation run(const Scenario& sc)
{
    Simulation sim(sc);
    sim.run();
    return sim;
}

std::int64_t count_kind(const Trace& t, const std::string& kind)
{
    std::int64_t n = 0;
    for (const auto& r : t.records())
        n += r.kind == kind;
    return n;
}

}  // namespace

TEST_CASE("a scenario without threads only samples")
{
    const Scenario sc = parse_scenario(R"(
[scenario]
name = "empty"
duration = "1s"
sample_interval = "100ms"

[[sandbox]]
name = "A"
core = 0
)");
    Simulation sim(sc);
    sim.run();
    CHECK(sim.trace().records().size() == 10);
    CHECK(count_kind(sim.trace(), "SAMPLE") == 10);
    CHECK(sim.stats().violations.empty());
    CHECK(sim.trace().csv().rfind("time_tick,pcpu,sandbox,kind,subject,detail\n", 0) == 0);
}

TEST_CASE("a Main VCPU never exceeds its budget and background fills the idle time")
{
    const Scenario sc = two_cores(R"(
[[vcpu]]
name = "v"
sandbox = "A"
budget = "3ms"
period = "10ms"

[[thread]]
name = "hog"
vcpu = "v"
workload = { type = "hog" }
)");
    Simulation sim(sc);
    sim.run();
    const VcpuId v = sc.vcpu_index("v");
    const auto& segs = sim.stats().segments[static_cast<std::size_t>(v)];
    CHECK(max_window_runtime(segs, 10'000) == 3000);
    for (Ticks w : window_runtimes(segs, 10'000, 200'000))
        CHECK(w == 3000);
    Ticks bg = 0;
    for (const auto& s : segs)
        bg += s.band == Band::Background ? s.end - s.start : 0;
    CHECK(bg == 200'000 - 20 * 3000);
    CHECK(sim.stats().violations.empty());
}

TEST_CASE("the mutation hook trips the capacity invariant")
{
    const Scenario sc = two_cores(R"(
[[vcpu]]
name = "v"
sandbox = "A"
budget = "3ms"
period = "10ms"

[[thread]]
name = "hog"
vcpu = "v"
workload = { type = "hog" }
)");
    SimOptions o;
    o.mutate_charge_background = true;
    Simulation sim(sc, o);
    sim.run();
    REQUIRE_FALSE(sim.stats().violations.empty());
    CHECK(sim.stats().violations.front().what.rfind("capacity:", 0) == 0);
}

TEST_CASE("an interrupt for a blocked thread runs its handler on the I/O VCPU")
{
    const Scenario sc = two_cores(R"(
[[vcpu]]
name = "v"
sandbox = "A"
budget = "10ms"
period = "50ms"

[[vcpu]]
name = "io"
sandbox = "A"
class = "io"
util = "0.04"

[[device]]
name = "nic"
start = "1ms"
interval = "20ms"
count = 3
handler_cycles = 2133000
sandboxes = ["A"]

[[thread]]
name = "user"
vcpu = "v"
workload = { type = "io_wait", device = "nic", work = "1ms" }

[[thread]]
name = "drv"
vcpu = "io"
workload = { type = "driver", device = "nic" }
)");
    Simulation sim(sc);
    sim.run();
    const Vcpu& io = sim.vcpu(sc.vcpu_index("io"));
    CHECK(io.current_io_period() == 50'000);
    CHECK(io.current_io_budget() == 2000);
    CHECK(sim.stats().activations == 3);
    CHECK(sim.stats().outputs.size() == 3);
    // 1 ms of handler work, then 1 ms of the user's work
    CHECK(sim.stats().outputs[0].at == 1000 + 1000 + 1000);
    CHECK(sim.stats().violations.empty());
}

TEST_CASE("migrating a sleeping thread moves it with its VCPU")
{
    const Scenario sc = two_cores(R"(
[[vcpu]]
name = "v"
sandbox = "A"
budget = "2ms"
period = "20ms"

[[thread]]
name = "t"
vcpu = "v"
pages = 100
workload = { type = "cpu_loop", work = "2ms", period = "20ms" }

[[migration]]
at = "45ms"
thread = "t"
dst = "B"
)");
    Simulation sim(sc);
    sim.run();
    REQUIRE(sim.stats().migrations.size() == 1);
    const MigrationReport& m = sim.stats().migrations[0];
    CHECK(m.completed);
    CHECK(m.delta_s == 100 * 5 + 280);
    CHECK(m.e_s == 15'000);
    CHECK(m.completed_at == 45'000 + 1 + 1 + m.delta_actual);
    CHECK(sim.vcpu_sandbox(sc.vcpu_index("v")) == 1);
    CHECK(sim.threads()[static_cast<std::size_t>(sc.thread_index("t"))].sandbox == 1);
    CHECK(count_kind(sim.trace(), "MIGRATE_DONE") == 1);
    // The thread keeps its 20 ms release pattern on the new core.
    const auto& segs = sim.stats().segments[static_cast<std::size_t>(sc.vcpu_index("v"))];
    for (Ticks w : window_runtimes(segs, 20'000, 200'000))
        CHECK(w == 2000);
    CHECK(sim.stats().violations.empty());
}

TEST_CASE("a full destination rejects the migration and the source keeps the thread")
{
    const Scenario sc = two_cores(R"(
[[vcpu]]
name = "v"
sandbox = "A"
budget = "20ms"
period = "100ms"

[[vcpu]]
name = "big"
sandbox = "B"
budget = "60ms"
period = "100ms"

[[thread]]
name = "t"
vcpu = "v"
workload = { type = "cpu_loop", work = "1ms", period = "100ms" }

[[migration]]
at = "50ms"
thread = "t"
dst = "B"
)");
    Simulation sim(sc);
    sim.run();
    REQUIRE(sim.stats().migrations.size() == 1);
    const MigrationReport& m = sim.stats().migrations[0];
    CHECK_FALSE(m.completed);
    CHECK(m.reason.find("DestinationOverUtilized") != std::string::npos);
    CHECK(sim.vcpu_sandbox(sc.vcpu_index("v")) == 0);
    CHECK(count_kind(sim.trace(), "MIGRATE_REJECT") >= 1);

    Scenario control = sc;
    control.migrations.clear();
    Simulation c(control);
    c.run();
    const auto v = static_cast<std::size_t>(sc.vcpu_index("v"));
    CHECK(window_runtimes(sim.stats().segments[v], 100'000, 200'000) ==
          window_runtimes(c.stats().segments[v], 100'000, 200'000));
}

TEST_CASE("an unsafe migration is refused unless best effort")
{
    const std::string body = R"(
[[vcpu]]
name = "v"
sandbox = "A"
budget = "2ms"
period = "20ms"

[[thread]]
name = "t"
vcpu = "v"
pages = 5000
workload = { type = "cpu_loop", work = "2ms", period = "20ms" }
)";
    const Scenario strict = two_cores(body + "[[migration]]\nat = \"45ms\"\nthread = \"t\"\ndst = \"B\"\n");
    Simulation a(strict);
    a.run();
    REQUIRE(a.stats().migrations.size() == 1);
    CHECK(a.stats().migrations[0].reason == "Unsafe");

    const Scenario loose =
        two_cores(body + "[[migration]]\nat = \"45ms\"\nthread = \"t\"\ndst = \"B\"\nbest_effort = true\n");
    Simulation b(loose);
    b.run();
    REQUIRE(b.stats().migrations.size() == 1);
    CHECK(b.stats().migrations[0].completed);
}

TEST_CASE("a cross-sandbox write is denied and the victim is untouched")
{
    const Scenario sc = two_cores(R"(
[[fault]]
at = "10ms"
sandbox = "A"
kind = "cross_write"
target = "B"
)");
    Simulation sim(sc);
    sim.run();
    CHECK(sim.stats().cross_writes_blocked == 1);
    CHECK(count_kind(sim.trace(), "EPT_VIOLATION") == 1);
    CHECK(sim.sandboxes().at(0).monitor().handled_violations == 1);
    CHECK(sim.sandboxes().at(1).monitor().handled_violations == 0);
}

TEST_CASE("directive errors are reported, not fatal")
{
    const Scenario sc = two_cores(R"(
[[channel]]
name = "c"
a = "A"
b = "B"

[[recovery]]
at = "10ms"
sandbox = "A"
)");
    Simulation sim(sc);
    sim.run();
    REQUIRE(sim.stats().notes.size() == 1);
    CHECK(sim.stats().notes[0].find("NoActiveFault") != std::string::npos);
    CHECK(sim.stats().recoveries.empty());
}

TEST_CASE("a filtered standby is traced but produces no service output")
{
    const Scenario sc = two_cores(R"(
[[vcpu]]
name = "v"
sandbox = "B"
budget = "2ms"
period = "10ms"

[[thread]]
name = "standby"
vcpu = "v"
filtered = true
workload = { type = "canny", work_per_frame = "1ms" }
)");
    Simulation sim(sc);
    sim.run();
    CHECK(sim.stats().outputs.empty());
    CHECK(count_kind(sim.trace(), "OUTPUT") > 0);
}

TEST_CASE("local recovery repairs a broken driver")
{
    const Scenario sc = two_cores(R"(
[[vcpu]]
name = "v"
sandbox = "A"
budget = "10ms"
period = "50ms"

[[vcpu]]
name = "io"
sandbox = "A"
class = "io"
util = "0.05"

[[device]]
name = "nic"
start = "5ms"
interval = "10ms"
handler_cycles = 2133
sandboxes = ["A"]
default_vcpu = { A = "v" }

[[thread]]
name = "drv"
vcpu = "io"
workload = { type = "driver", device = "nic" }

[[fault]]
at = "50ms"
sandbox = "A"
kind = "driver"
target = "nic"

[[recovery]]
at = "100ms"
sandbox = "A"
)");
    Simulation sim(sc);
    sim.run();
    REQUIRE(sim.stats().recoveries.size() == 1);
    const RecoveryReport& r = sim.stats().recoveries[0];
    CHECK(r.completed);
    CHECK(r.total_cycles == 14'590'402);
    CHECK(r.downtime_ticks < 500'000);
    std::int64_t during = 0, after = 0;
    for (const auto& o : sim.stats().outputs) {
        during += o.at > 50'000 && o.at < 100'000;
        after += o.at > r.completed_at;
    }
    CHECK(during == 0);
    CHECK(after > 0);
    CHECK(sim.stats().violations.empty());
}
