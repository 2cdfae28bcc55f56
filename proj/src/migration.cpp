#include "mksim/migration.hpp"

namespace mksim {

std::string_view to_string(NotEligibleReason r)
{
    switch (r) {
    case NotEligibleReason::RunnableWithBudget: return "RunnableWithBudget";
    case NotEligibleReason::WaitingOnIO: return "WaitingOnIO";
    case NotEligibleReason::DestinationBusy: return "DestinationBusy";
    case NotEligibleReason::NotMigratable: return "NotMigratable";
    }
    return "?";
}

std::string_view to_string(Safety s)
{
    return s == Safety::Safe ? "Safe" : "Unsafe";
}

std::optional<NotEligibleReason> eligible(const EligibilityInput& in)
{
    if (in.blocked_on_io)
        return NotEligibleReason::WaitingOnIO;
    if (in.destination_busy)
        return NotEligibleReason::DestinationBusy;
    if (in.other_state)
        return NotEligibleReason::NotMigratable;
    if (in.sleeping || in.vcpu_budget_expired)
        return std::nullopt;
    return NotEligibleReason::RunnableWithBudget;
}

Ticks estimate_delta(PageIndex pages, const MigrationCosts& costs)
{
    if (pages < 0)
        fail(Errc::Precondition, "negative page count");
    return pages * costs.per_page + costs.tss;
}

Ticks migration_horizon(Ticks delta_s, Ticks budget, Ticks period)
{
    if (budget <= 0 || period <= 0)
        fail(Errc::Precondition, "check_condition needs C > 0 and T > 0");
    return (delta_s / budget) * period + delta_s % budget;
}

Safety check_condition(Ticks e_s, Ticks delta_s, Ticks budget, Ticks period)
{
    return e_s >= migration_horizon(delta_s, budget, period) ? Safety::Safe : Safety::Unsafe;
}

Ticks clock_adjust(Ticks tsc_d, Ticks tsc_s, Ticks rdtsc_cost, Ticks ipi_cost)
{
    return tsc_d - tsc_s - 2 * rdtsc_cost - ipi_cost;
}

}  // namespace mksim
