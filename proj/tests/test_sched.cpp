#include "mksim/sched.hpp"

#include "admission_oracle.hpp"

#include <doctest.h>

#include <random>

using namespace mksim;

TEST_CASE("admission: two 20/100 mains and a 4% I/O VCPU fit")
{
    const std::vector<VcpuSpec> set{VcpuSpec::main(20, 100), VcpuSpec::main(20, 100),
                                    VcpuSpec::io(Ratio::parse("0.04"))};
    const AdmissionResult r = evaluate_admission(set);
    CHECK(r.accepted);
    // 0.2 + 0.2 + (2 - 0.04) * 0.04 = 0.4784
    CHECK(r.lhs == "299/625");
    CHECK(r.bound == doctest::Approx(0.828427).epsilon(1e-6));
}

TEST_CASE("admission: three 40/100 mains are rejected")
{
    const std::vector<VcpuSpec> set(3, VcpuSpec::main(40, 100));
    const AdmissionResult r = evaluate_admission(set);
    CHECK_FALSE(r.accepted);
    CHECK(r.lhs == "6/5");
    CHECK(r.bound == doctest::Approx(0.779763).epsilon(1e-6));
}

TEST_CASE("admission: a single main is checked against 1")
{
    PcpuScheduler p(0);
    CHECK(p.admit(VcpuSpec::main(1, 1000)).accepted);
    CHECK(p.admit(VcpuSpec::main(1000, 1000)).accepted);
}

TEST_CASE("admission agrees with an exact rational oracle on random sets")
{
    std::mt19937_64 rng(20240611);
    int disagreements = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<VcpuSpec> set;
        std::vector<oracle::Vcpu> mirror;
        const int n = std::uniform_int_distribution<int>(0, 5)(rng);
        const int m = std::uniform_int_distribution<int>(0, 3)(rng);
        for (int i = 0; i < n; ++i) {
            const Ticks t = std::uniform_int_distribution<Ticks>(1, 200)(rng);
            const Ticks c = std::uniform_int_distribution<Ticks>(1, t)(rng) / (1 + i);
            set.push_back(VcpuSpec::main(std::max<Ticks>(c, 1), t));
            mirror.push_back({true, std::max<Ticks>(c, 1), t});
        }
        for (int j = 0; j < m; ++j) {
            const std::int64_t den = std::uniform_int_distribution<std::int64_t>(2, 100)(rng);
            const std::int64_t num = std::uniform_int_distribution<std::int64_t>(1, den / 4 + 1)(rng);
            if (num >= den)
                continue;
            set.push_back(VcpuSpec::io(Ratio::make(num, den)));
            mirror.push_back({false, num, den});
        }
        if (evaluate_admission(set).accepted != oracle::admits(mirror))
            ++disagreements;
    }
    CHECK(disagreements == 0);
}

TEST_CASE("I/O VCPU parameters follow the requesting main period")
{
    CHECK(io_vcpu_params(50000, Ratio::parse("0.04")) == IoParams{2000, 50000});
    CHECK(io_vcpu_params(10000, Ratio::parse("0.10")) == IoParams{1000, 10000});
    CHECK_THROWS_AS(io_vcpu_params(50000, Ratio::make(0, 1)), SimError);
}

TEST_CASE("charge_and_post: one busy interval yields one credit")
{
    Vcpu v(0, "v1", VcpuSpec::main(20, 50));
    CHECK(v.charge_and_post(0, 20));
    CHECK(v.remaining_budget() == 0);
    REQUIRE(v.replenishments().size() == 1);
    CHECK(v.replenishments()[0] == ReplenishmentItem{20, 50, 0});
    CHECK(v.band() == Band::Background);
}

TEST_CASE("charge_and_post: separate busy intervals yield separate credits")
{
    Vcpu v(0, "v1", VcpuSpec::main(20, 50));
    v.charge_and_post(0, 5);
    v.end_busy_interval();
    v.charge_and_post(10, 5);
    REQUIRE(v.replenishments().size() == 2);
    CHECK(v.replenishments()[0] == ReplenishmentItem{5, 50, 0});
    CHECK(v.replenishments()[1] == ReplenishmentItem{5, 60, 10});
    CHECK(v.remaining_budget() == 10);
    CHECK(v.capacity_ok());
}

TEST_CASE("charge_and_post: contiguous slices extend the open interval")
{
    Vcpu v(0, "v1", VcpuSpec::main(20, 50));
    CHECK(v.charge_and_post(0, 5));
    CHECK_FALSE(v.charge_and_post(5, 7));
    REQUIRE(v.replenishments().size() == 1);
    CHECK(v.replenishments()[0] == ReplenishmentItem{12, 50, 0});
}

TEST_CASE("charge_and_post: zero length and overrun")
{
    Vcpu v(0, "v1", VcpuSpec::main(20, 50));
    CHECK_FALSE(v.charge_and_post(3, 0));
    CHECK(v.replenishments().empty());
    CHECK(v.remaining_budget() == 20);
    CHECK_THROWS_AS(v.charge_and_post(0, 21), SimError);
}

TEST_CASE("apply_replenishments releases due credits only")
{
    Vcpu v(0, "v1", VcpuSpec::main(20, 50));
    v.charge_and_post(0, 20);
    auto out = v.apply_replenishments(49);
    CHECK(out.applied == 0);
    out = v.apply_replenishments(50);
    CHECK(out.applied == 20);
    CHECK(out.resumed);
    CHECK(v.replenishments().empty());
    CHECK(v.remaining_budget() == 20);

    Vcpu w(1, "w", VcpuSpec::main(20, 50));
    w.charge_and_post(10, 5);
    CHECK(w.apply_replenishments(50).applied == 0);
    CHECK(w.replenishments().size() == 1);
    CHECK(w.apply_replenishments(50).applied == 0);
}

TEST_CASE("background execution is free")
{
    Vcpu v(0, "v1", VcpuSpec::main(20, 50));
    CHECK_THROWS_AS(v.background_run(5), SimError);
    v.charge_and_post(0, 20);
    v.background_run(10);
    v.background_run(0);
    CHECK(v.remaining_budget() == 0);
    CHECK(v.replenishments().size() == 1);
    CHECK(v.background_runtime() == 10);
    CHECK(v.capacity_ok());
}

TEST_CASE("the mutation hook breaks the capacity invariant")
{
    Vcpu v(0, "v1", VcpuSpec::main(20, 50));
    v.set_mutation_charge_background(true);
    v.charge_and_post(0, 20);
    v.background_run(10);
    CHECK_FALSE(v.capacity_ok());
}

TEST_CASE("I/O VCPU inherits the requester's period")
{
    Vcpu io(0, "io", VcpuSpec::io(Ratio::parse("0.04")));
    CHECK_FALSE(io.priority_period());
    io.io_service_request(50000);
    CHECK(io.current_io_budget() == 2000);
    CHECK(io.current_io_period() == 50000);
    CHECK(io.remaining_budget() == 2000);

    Vcpu io2(1, "io2", VcpuSpec::io(Ratio::parse("0.10")));
    io2.io_service_request(100000);
    CHECK(io2.current_io_budget() == 10000);
    CHECK(io2.priority_period() == 100000);
}

TEST_CASE("I/O VCPU retargets only after its credit drains")
{
    Vcpu io(0, "io", VcpuSpec::io(Ratio::parse("0.1")));
    io.io_service_request(10000);
    io.charge_and_post(0, 400);
    io.end_busy_interval();
    io.io_service_request(50000);
    CHECK(io.current_io_period() == 10000);
    CHECK(io.capacity_ok());
    io.apply_replenishments(10000);
    CHECK(io.current_io_period() == 50000);
    CHECK(io.current_io_budget() == 5000);
    CHECK(io.capacity_ok());
}

TEST_CASE("pick_next orders by period then band")
{
    PcpuScheduler p(0);
    p.add(Vcpu(0, "a", VcpuSpec::main(10, 50)));
    p.add(Vcpu(1, "b", VcpuSpec::main(10, 100)));
    auto all = [](VcpuId) { return true; };
    CHECK(p.pick_next(all) == Pick{0, Band::Foreground});

    p.find(0)->charge_and_post(0, 10);
    CHECK(p.pick_next(all) == Pick{1, Band::Foreground});

    p.find(1)->charge_and_post(10, 10);
    CHECK(p.pick_next(all) == Pick{0, Band::Background});
    CHECK_FALSE(p.pick_next([](VcpuId) { return false; }));
}

TEST_CASE("replenishment list never exceeds its cap")
{
    Vcpu v(0, "v", VcpuSpec::main(100, 1000));
    for (Ticks i = 0; i < 60; ++i) {
        v.charge_and_post(i * 3, 1);
        v.end_busy_interval();
        CHECK(v.replenishments().size() <= Vcpu::kMaxReplenishments);
        CHECK(v.capacity_ok());
    }
    for (const auto& r : v.replenishments())
        CHECK(r.due_at - r.busy_start >= 1000);
}
