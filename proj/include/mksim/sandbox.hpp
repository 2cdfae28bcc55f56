#pragma once

#include "mksim/sched.hpp"
#include "mksim/types.hpp"

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace mksim {

// ---------------------------------------------------------------------------
// Memory isolation

enum class AccessMode { Read, Write, Execute };

struct PagePerm {
    bool read = false;
    bool write = false;
    bool execute = false;

    bool allows(AccessMode m) const noexcept
    {
        switch (m) {
        case AccessMode::Read: return read;
        case AccessMode::Write: return write;
        case AccessMode::Execute: return execute;
        }
        return false;
    }
    static constexpr PagePerm rwx() { return {true, true, true}; }
    static constexpr PagePerm rw() { return {true, true, false}; }
};

/// A run of host pages mapped into a sandbox with one permission set.
struct Mapping {
    PageIndex first = 0;
    PageIndex count = 0;
    PagePerm perm;
    ChannelId channel = -1;  ///< -1 for the private range

    bool contains(PageIndex p) const noexcept { return p >= first && p < first + count; }
};

/// Bump allocator over host physical pages.
class HostMemory {
public:
    explicit HostMemory(PageIndex total_pages) : total_(total_pages) {}
    /// Throws OutOfHostPages.
    PageIndex allocate(PageIndex count);
    PageIndex total() const noexcept { return total_; }
    PageIndex used() const noexcept { return next_; }

private:
    PageIndex total_;
    PageIndex next_ = 0;
};

// ---------------------------------------------------------------------------
// Monitor

enum class TrapCause { EptViolation, ExplicitExit, MigrationAssist, ChannelMap, Recovery };
enum class TrapPolicy { LogAndResume, RecoverLocal, RecoverRemote };

std::string_view to_string(TrapCause c);

struct MonitorCosts {
    Cycles vm_exit = 885;
    Cycles vm_enter = 663;
};

struct MonitorAction {
    enum class Kind { LogAndResume, StartRecovery, Assist };
    Kind kind = Kind::LogAndResume;
    bool remote = false;
    Cycles charged = 0;
};

struct MonitorState {
    std::int64_t handled_violations = 0;
    std::int64_t explicit_exits = 0;
    std::int64_t migration_assists = 0;
    std::int64_t channel_maps = 0;
    std::int64_t recoveries = 0;
    Cycles cycles = 0;
    int code_size_pages = 1;

    std::int64_t invocations() const noexcept
    {
        return handled_violations + explicit_exits + migration_assists + channel_maps + recoveries;
    }
};

struct AccessResult {
    bool ok = false;
    std::optional<MonitorAction> trap;  ///< set on an EPT violation
};

class Sandbox {
public:
    Sandbox(SandboxId id, std::string name, CoreId pcpu, Mapping private_range);

    SandboxId id() const noexcept { return id_; }
    const std::string& name() const noexcept { return name_; }
    CoreId pcpu() const noexcept { return pcpu_; }
    const Mapping& private_range() const noexcept { return mappings_.front(); }
    const std::vector<Mapping>& mappings() const noexcept { return mappings_; }

    /// Permission check at page granularity. A denied access traps to this
    /// sandbox's monitor and the access itself is suppressed.
    AccessResult access(PageIndex host_page, AccessMode mode);
    std::optional<PagePerm> permission(PageIndex host_page) const;

    MonitorAction monitor_trap(TrapCause cause);
    void map_channel(ChannelId channel, PageIndex first, PageIndex count);

    MonitorState& monitor() noexcept { return monitor_; }
    const MonitorState& monitor() const noexcept { return monitor_; }
    TrapPolicy policy = TrapPolicy::LogAndResume;
    MonitorCosts costs;

    PcpuScheduler& sched() noexcept { return sched_; }
    const PcpuScheduler& sched() const noexcept { return sched_; }
    std::vector<ThreadId> threads;
    std::set<DeviceId> devices;

private:
    SandboxId id_;
    std::string name_;
    CoreId pcpu_;
    std::vector<Mapping> mappings_;
    MonitorState monitor_;
    PcpuScheduler sched_;
};

/// Owns the host memory pool and one sandbox per core.
class SandboxTable {
public:
    SandboxTable(int cores, PageIndex host_pages) : cores_(cores), memory_(host_pages) {}

    /// Throws CoreTaken, UnknownCore or OutOfHostPages.
    Sandbox& create_sandbox(std::string name, CoreId pcpu, PageIndex private_pages);

    Sandbox& at(SandboxId id);
    const Sandbox& at(SandboxId id) const;
    Sandbox* on_core(CoreId core);
    std::vector<Sandbox>& all() noexcept { return sandboxes_; }
    const std::vector<Sandbox>& all() const noexcept { return sandboxes_; }
    HostMemory& memory() noexcept { return memory_; }
    std::size_t size() const noexcept { return sandboxes_.size(); }

private:
    int cores_;
    HostMemory memory_;
    std::vector<Sandbox> sandboxes_;
};

// ---------------------------------------------------------------------------
// Devices

enum class DeviceKind { Nic, TimerSource };
enum class DriverHealth { Healthy, Broken };

struct Device {
    DeviceId id = 0;
    std::string name;
    DeviceKind kind = DeviceKind::Nic;
    Ticks start = 0;           ///< global time of the first interrupt
    Ticks interval = 0;        ///< arrival spacing
    std::int64_t count = 0;    ///< number of arrivals; 0 = unbounded
    Cycles handler_cycles = 0; ///< driver work per interrupt
    std::vector<SandboxId> sandboxes;              ///< sandboxes with access
    std::map<SandboxId, VcpuId> default_vcpu;      ///< target for unsolicited interrupts
    std::map<SandboxId, DriverHealth> health;
    std::int64_t delivered = 0;
};

// ---------------------------------------------------------------------------
// Threads and workloads

namespace wl {
/// `work` ticks every `period`, first release at `offset`.
struct CpuLoop { Ticks work = 0; Ticks period = 0; Ticks offset = 0; };
/// Never blocks, never finishes.
struct Hog {};
/// Completes a frame per `work_per_frame` ticks of execution.
struct CannyLoop { Ticks work_per_frame = 0; };
/// interval > 0: one message to each channel per interval.
/// interval == 0: back-to-back on the first channel, `count_per_size`
/// messages of each size in turn; with batch > 0, pauses until the next
/// multiple of batch_interval after every `batch` messages.
struct MessageSender {
    std::vector<ChannelId> channels;
    Ticks interval = 0;
    Ticks offset = 0;
    std::vector<std::int64_t> sizes{64};
    std::int64_t count_per_size = 0;
    std::int64_t batch = 0;
    Ticks batch_interval = 0;
};
/// interval > 0: one poll per interval. interval == 0: spin on the status bit.
struct MessageReceiver { ChannelId channel = -1; Ticks interval = 0; Ticks offset = 0; };
/// Interrupt handler thread; runs on an I/O VCPU.
struct DriverHandler { DeviceId device = -1; };
/// Issues a device read, blocks until it completes, then computes `work`.
struct IoWait { DeviceId device = -1; Ticks work = 0; };
/// Executes queued jobs (address-space copies, recovery phases).
struct Worker {};
}  // namespace wl

using WorkloadSpec = std::variant<wl::CpuLoop, wl::Hog, wl::CannyLoop, wl::MessageSender,
                                  wl::MessageReceiver, wl::DriverHandler, wl::IoWait, wl::Worker>;

enum class ThreadState { Runnable, Sleeping, BlockedIo, Waiting, Migrating, Halted };
std::string_view to_string(ThreadState s);

struct IoRequest {
    ThreadId requester = -1;  ///< -1: unsolicited
    std::int64_t index = 0;
};

struct WorkerJob {
    Cycles cycles = 0;
    Ticks ticks = 0;
    std::uint64_t token = 0;
};

struct SimThread {
    ThreadId id = 0;
    std::string name;
    SandboxId sandbox = 0;
    VcpuId vcpu = 0;
    PageIndex address_space_pages = 1;
    WorkloadSpec workload;

    ThreadState state = ThreadState::Runnable;
    Ticks wake_at = kNever;           ///< local time, valid while Sleeping
    std::uint64_t wake_generation = 0;
    DeviceId blocked_on = -1;         ///< valid while BlockedIo

    Ticks pending_work = 0;           ///< ticks until the next workload action
    Cycles cycle_acc = 0;             ///< sub-tick remainder
    int phase = 0;
    Ticks next_release = 0;           ///< local time of the next periodic release
    std::size_t cursor = 0;           ///< channel or size index
    std::int64_t done_in_size = 0;
    std::int64_t done_in_batch = 0;
    Ticks msg_start = 0;              ///< local time the current message attempt began
    ChannelId spinning_on = -1;       ///< channel whose status bit the thread spins on
    std::deque<IoRequest> requests;
    std::deque<WorkerJob> jobs;

    bool filtered = false;            ///< hot standby output suppressed
    std::string service;

    std::int64_t frames = 0;
    std::int64_t outputs = 0;
    Ticks cpu_time = 0;

    void add_work_cycles(Cycles c, Cycles cycles_per_tick);
};

/// Services a workload needs from the running system.
class WorkloadHost {
public:
    virtual ~WorkloadHost() = default;

    virtual Cycles cycles_per_tick() const = 0;
    virtual Cycles poll_cycles() const = 0;
    virtual Cycles copy_cycles(std::int64_t bytes) const = 0;
    virtual Cycles handler_cycles(DeviceId device) const = 0;

    enum class Peek { Empty, Message, Corrupt };
    virtual bool channel_writable(ChannelId ch, SandboxId from) = 0;
    virtual void channel_send(SimThread& sender, ChannelId ch, std::int64_t bytes, Ticks at) = 0;
    virtual void channel_busy(SimThread& sender, ChannelId ch, Ticks at) = 0;
    virtual Peek channel_peek(ChannelId ch, SandboxId who, std::int64_t& bytes) = 0;
    virtual void channel_receive(SimThread& receiver, ChannelId ch, Ticks at) = 0;
    /// Nothing to do until the channel's status bit changes: spin on it (or
    /// sleep until notified). The host resumes the thread at the phase it
    /// was left in.
    virtual void spin_wait(SimThread& t, ChannelId ch) = 0;

    virtual void sleep_until(SimThread& t, Ticks local_wake) = 0;
    virtual void block_on_io(SimThread& t, DeviceId device) = 0;
    virtual void wait(SimThread& t) = 0;
    virtual void halt(SimThread& t) = 0;

    virtual void service_output(SimThread& t, Ticks at) = 0;
    virtual void io_complete(SimThread& handler, const IoRequest& req, Ticks at) = 0;
    virtual void job_done(SimThread& worker, std::uint64_t token, Ticks at) = 0;
};

/// Work left before a Hog would finish; effectively never.
inline constexpr Ticks kEndlessWork = Ticks{1} << 60;

/// Runs `thread` for up to `slice` ticks starting at local time `start`.
/// Workload actions fire exactly when their pending work reaches zero.
/// Returns ticks consumed; less than `slice` only if the thread stopped
/// being runnable.
Ticks run_workload_slice(SimThread& thread, Ticks slice, WorkloadHost& host, Ticks start);

}  // namespace mksim
