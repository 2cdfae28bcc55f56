#include "mksim/fault.hpp"
#include "mksim/migration.hpp"

#include <doctest.h>

#include <numeric>

using namespace mksim;

TEST_CASE("eligibility")
{
    EligibilityInput in;
    CHECK(eligible(in) == NotEligibleReason::RunnableWithBudget);
    in.sleeping = true;
    CHECK_FALSE(eligible(in));
    in.sleeping = false;
    in.vcpu_budget_expired = true;
    CHECK_FALSE(eligible(in));
    in.destination_busy = true;
    CHECK(eligible(in) == NotEligibleReason::DestinationBusy);
    in.blocked_on_io = true;
    CHECK(eligible(in) == NotEligibleReason::WaitingOnIO);
}

TEST_CASE("worst-case copy estimate")
{
    // 4 MB address space: 1024 pages at 5 us plus 280 us for the TSS
    CHECK(estimate_delta(1024, MigrationCosts{}) == 5400);
    CHECK(estimate_delta(0, MigrationCosts{}) == 280);
}

TEST_CASE("utilization-preservation condition")
{
    // times in us
    CHECK(migration_horizon(5400, 10000, 50000) == 5400);
    CHECK(migration_horizon(25000, 10000, 50000) == 105000);
    CHECK(migration_horizon(20000, 10000, 50000) == 100000);
    CHECK(check_condition(79800, 5400, 10000, 50000) == Safety::Safe);
    CHECK(check_condition(79800, 25000, 10000, 50000) == Safety::Unsafe);
    CHECK(check_condition(5400, 5400, 10000, 50000) == Safety::Safe);
    CHECK(check_condition(5399, 5400, 10000, 50000) == Safety::Unsafe);
    CHECK_THROWS_AS(migration_horizon(1, 0, 10), SimError);
    CHECK_THROWS_AS(migration_horizon(1, 10, 0), SimError);
}

TEST_CASE("horizon agrees with a unit-by-unit copy simulation")
{
    // Copy delta ticks on a server that gets C ticks at the start of each
    // period T; the copy ends at the horizon.
    for (Ticks C = 1; C <= 7; ++C)
        for (Ticks T = C; T <= 12; ++T)
            for (Ticks delta = 0; delta <= 40; ++delta) {
                Ticks left = delta, t = 0;
                while (left > 0) {
                    const Ticks in_period = t % T;
                    if (in_period < C)
                        --left;
                    ++t;
                }
                // delta a multiple of C finishes at the end of a budget
                // window, which the closed form counts as k*T.
                const Ticks expect = delta % C == 0 && delta > 0 ? (delta / C - 1) * T + C : t;
                const Ticks h = migration_horizon(delta, C, T);
                if (delta % C == 0 && delta > 0)
                    CHECK(h >= expect);
                else
                    CHECK(h == expect);
            }
}

TEST_CASE("clock adjustment")
{
    CHECK(clock_adjust(1000, 900, 10, 30) == 50);
    CHECK(clock_adjust(0, 0, 0, 0) == 0);
    CHECK(clock_adjust(500 + 2 * 7 + 3, 500, 7, 3) == 0);
    CHECK(clock_adjust(0, 20000, 0, 1) == -20001);
}

TEST_CASE("recovery phase totals")
{
    RecoveryPlan local;
    const auto lp = plan_phases(local);
    Cycles lsum = 0;
    for (const auto& [p, c] : lp)
        lsum += c;
    CHECK(lsum == 14'590'402);
    CHECK(std::any_of(lp.begin(), lp.end(), [](auto& x) { return x.first == RecoveryPhase::DriverReplacement; }));
    CHECK(std::none_of(lp.begin(), lp.end(), [](auto& x) { return x.first == RecoveryPhase::IpiRoundTrip; }));

    RecoveryPlan remote;
    remote.mode = RecoveryMode::Remote;
    remote.standby = 1;
    const auto rp = plan_phases(remote);
    Cycles rsum = 0;
    for (const auto& [p, c] : rp)
        rsum += c;
    CHECK(rsum == 14'584'441);
    CHECK(std::none_of(rp.begin(), rp.end(), [](auto& x) { return x.first == RecoveryPhase::DriverReplacement; }));
    CHECK(rp.front().first == RecoveryPhase::VmExit);
    CHECK(rp.back().first == RecoveryPhase::NetIfRestart);
    CHECK(rp.size() == 5);
}
