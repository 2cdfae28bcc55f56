#include "mksim/fault.hpp"

namespace mksim {

std::string_view fault_name(const FaultKind& k)
{
    struct V {
        std::string_view operator()(const fault::DriverFault&) const { return "driver"; }
        std::string_view operator()(const fault::ChannelCorrupt&) const { return "channel"; }
        std::string_view operator()(const fault::CrossSandboxWrite&) const { return "cross_write"; }
        std::string_view operator()(const fault::ThreadCrash&) const { return "thread_crash"; }
    };
    return std::visit(V{}, k);
}

std::string_view to_string(RecoveryMode m)
{
    return m == RecoveryMode::Local ? "local" : "remote";
}

std::string_view to_string(RecoveryPhase p)
{
    switch (p) {
    case RecoveryPhase::VmExit: return "vm_exit";
    case RecoveryPhase::DriverReplacement: return "driver_replacement";
    case RecoveryPhase::IpiRoundTrip: return "ipi_round_trip";
    case RecoveryPhase::VmEnter: return "vm_enter";
    case RecoveryPhase::DriverReinit: return "driver_reinit";
    case RecoveryPhase::NetIfRestart: return "netif_restart";
    }
    return "?";
}

std::vector<std::pair<RecoveryPhase, Cycles>> plan_phases(const RecoveryPlan& plan)
{
    const PhaseCosts& c = plan.costs;
    std::vector<std::pair<RecoveryPhase, Cycles>> out;
    out.emplace_back(RecoveryPhase::VmExit, c.vm_exit);
    if (plan.mode == RecoveryMode::Local)
        out.emplace_back(RecoveryPhase::DriverReplacement, c.driver_replacement);
    else
        out.emplace_back(RecoveryPhase::IpiRoundTrip, c.ipi_round_trip);
    out.emplace_back(RecoveryPhase::VmEnter, c.vm_enter);
    out.emplace_back(RecoveryPhase::DriverReinit, c.driver_reinit);
    out.emplace_back(RecoveryPhase::NetIfRestart, c.netif_restart);
    return out;
}

}  // namespace mksim
