#pragma once

#include "mksim/fault.hpp"
#include "mksim/migration.hpp"
#include "mksim/sandbox.hpp"
#include "mksim/sched.hpp"
#include "mksim/types.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mksim {

struct HostConfig {
    int cores = 1;
    PageIndex memory_pages = 1 << 20;
    Cycles cycles_per_tick = 2133;
    std::vector<Ticks> skews;  ///< per core; missing entries are 0
    Ticks rdtsc_cost = 0;
    Ticks ipi_cost = 1;
    MigrationCosts migration;
    Cycles copy_cycles_per_byte = 2;
    Cycles poll_cycles = 200;
    MonitorCosts monitor;
    PhaseCosts recovery;
};

struct SandboxConfig {
    std::string name;
    CoreId core = 0;
    PageIndex pages = 256;
    TrapPolicy policy = TrapPolicy::LogAndResume;
    std::string migration_vcpu;  ///< runs address-space copies out of this sandbox
    std::string recovery_vcpu;   ///< runs recovery phases in this sandbox
};

struct VcpuConfig {
    std::string name;
    std::string sandbox;
    VcpuSpec spec;
    bool background = true;
};

struct ThreadConfig {
    std::string name;
    std::string vcpu;
    PageIndex pages = 1;
    bool filtered = false;
    WorkloadSpec workload;
};

struct ChannelConfig {
    std::string name;
    std::string a;
    std::string b;
    PageIndex pages = 1;
    bool notify = false;
};

struct DeviceConfig {
    std::string name;
    DeviceKind kind = DeviceKind::Nic;
    Ticks start = 0;
    Ticks interval = 0;
    std::int64_t count = 0;
    Cycles handler_cycles = 0;
    std::vector<std::string> sandboxes;
    std::map<std::string, std::string> default_vcpu;  ///< sandbox -> Main VCPU
};

struct FaultConfig {
    Ticks at = 0;
    std::string sandbox;
    std::string kind;  ///< driver | channel | cross_write | thread_crash
    std::string target;  ///< device, channel, victim sandbox or thread name
};

struct RecoveryConfig {
    Ticks at = 0;
    std::string sandbox;
    RecoveryMode mode = RecoveryMode::Local;
    std::string standby;  ///< Remote: sandbox taking over the service
};

struct MigrationConfig {
    Ticks at = 0;
    std::string thread;
    std::string dst;
    bool best_effort = false;
    std::optional<Ticks> delta_actual;  ///< default: the worst-case estimate
};

struct Scenario {
    std::string name;
    std::string description;
    Ticks duration = 0;
    Ticks sample_interval = 0;  ///< 0: no samples
    HostConfig host;
    std::vector<SandboxConfig> sandboxes;
    std::vector<VcpuConfig> vcpus;
    std::vector<ThreadConfig> threads;
    std::vector<ChannelConfig> channels;
    std::vector<DeviceConfig> devices;
    std::vector<FaultConfig> faults;
    std::vector<RecoveryConfig> recoveries;
    std::vector<MigrationConfig> migrations;

    int sandbox_index(std::string_view name) const;
    int vcpu_index(std::string_view name) const;
    int thread_index(std::string_view name) const;
    int channel_index(std::string_view name) const;
    int device_index(std::string_view name) const;
};

/// "20ms", "1.7ms", "500us", "2s" or a bare tick count.
Ticks parse_duration(std::string_view text);

/// Throws ParseError (with line), UnresolvedReference or AdmissionFailed.
Scenario parse_scenario(std::string_view text, const std::string& source = "<string>");
Scenario load_scenario(const std::filesystem::path& path);

/// Static checks: references resolve and every sandbox's VCPU set is admitted.
void validate_scenario(const Scenario& s);

}  // namespace mksim
