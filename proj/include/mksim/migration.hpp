#pragma once

#include "mksim/types.hpp"

#include <optional>
#include <string_view>

namespace mksim {

enum class NotEligibleReason { RunnableWithBudget, WaitingOnIO, DestinationBusy, NotMigratable };
std::string_view to_string(NotEligibleReason r);

/// What eligibility needs to know about the thread and its VCPU.
struct EligibilityInput {
    bool vcpu_budget_expired = false;  ///< VCPU at background band
    bool sleeping = false;             ///< timed sleep
    bool blocked_on_io = false;
    bool destination_busy = false;     ///< another migration to the same dst in flight
    bool other_state = false;          ///< halted, waiting untimed or already migrating
};

/// nullopt means eligible.
std::optional<NotEligibleReason> eligible(const EligibilityInput& in);

struct MigrationCosts {
    Ticks per_page = 5;  ///< worst-case uncached copy of one 4KB page
    Ticks tss = 280;     ///< fixed cost of copying the thread control block
};

/// Worst-case copy cost of an address space.
Ticks estimate_delta(PageIndex address_space_pages, const MigrationCosts& costs);

enum class Safety { Safe, Unsafe };
std::string_view to_string(Safety s);

/// Right-hand side of the utilization-preservation test:
/// floor(delta / C) * T + delta mod C.
Ticks migration_horizon(Ticks delta_s, Ticks budget, Ticks period);

/// Safe iff e_s >= floor(delta_s / C) * T + delta_s mod C.
Safety check_condition(Ticks e_s, Ticks delta_s, Ticks budget, Ticks period);

/// tsc_d - tsc_s - 2 * rdtsc_cost - ipi_cost.
Ticks clock_adjust(Ticks tsc_d, Ticks tsc_s, Ticks rdtsc_cost, Ticks ipi_cost);

struct MigrationReport {
    ThreadId thread = -1;
    SandboxId src = -1;
    SandboxId dst = -1;
    Ticks requested_at = 0;
    Ticks e_s = 0;
    Ticks delta_s = 0;
    Ticks delta_actual = 0;
    Ticks budget = 0;
    Ticks period = 0;
    Ticks tsc_s = 0;
    Ticks tsc_d = 0;
    Ticks delta_adj = 0;
    bool best_effort = false;
    bool completed = false;
    std::string reason;  ///< why it was rejected or deferred
    Ticks completed_at = 0;
};

}  // namespace mksim
