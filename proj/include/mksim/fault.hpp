#pragma once

#include "mksim/types.hpp"

#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace mksim {

namespace fault {
struct DriverFault { DeviceId device = -1; };
struct ChannelCorrupt { ChannelId channel = -1; };
/// The target sandbox attempts a write into the victim's private pages.
struct CrossSandboxWrite { SandboxId victim = -1; };
/// A service thread in the target stops producing output.
struct ThreadCrash { ThreadId thread = -1; };
}  // namespace fault

using FaultKind = std::variant<fault::DriverFault, fault::ChannelCorrupt, fault::CrossSandboxWrite,
                               fault::ThreadCrash>;

std::string_view fault_name(const FaultKind& k);

struct FaultSpec {
    Ticks at = 0;
    SandboxId target = -1;
    FaultKind kind;
};

enum class RecoveryMode { Local, Remote };
std::string_view to_string(RecoveryMode m);

enum class RecoveryPhase { VmExit, DriverReplacement, IpiRoundTrip, VmEnter, DriverReinit, NetIfRestart };
std::string_view to_string(RecoveryPhase p);

struct PhaseCosts {
    Cycles vm_exit = 885;
    Cycles driver_replacement = 10503;
    Cycles ipi_round_trip = 4542;
    Cycles vm_enter = 663;
    Cycles driver_reinit = 14'500'000;
    Cycles netif_restart = 78351;
};

struct RecoveryPlan {
    RecoveryMode mode = RecoveryMode::Local;
    SandboxId standby = -1;  ///< Remote only
    PhaseCosts costs;
    bool filter_standby = true;
};

/// The phases of a plan in execution order with their costs. Local runs
/// Driver Replacement, Remote runs the IPI round trip instead.
std::vector<std::pair<RecoveryPhase, Cycles>> plan_phases(const RecoveryPlan& plan);

struct RecoveryReport {
    SandboxId sandbox = -1;
    RecoveryMode mode = RecoveryMode::Local;
    std::vector<std::pair<RecoveryPhase, Cycles>> per_phase;
    Cycles total_cycles = 0;
    Ticks started_at = 0;
    Ticks completed_at = 0;
    Ticks downtime_ticks = 0;  ///< completed_at - started_at
    bool completed = false;
};

}  // namespace mksim
