#pragma once

#include "mksim/comm.hpp"
#include "mksim/fault.hpp"
#include "mksim/migration.hpp"
#include "mksim/sandbox.hpp"
#include "mksim/scenario.hpp"
#include "mksim/sched.hpp"
#include "mksim/simcore.hpp"
#include "mksim/trace.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mksim {

struct SimOptions {
    bool trace = true;
    bool check_invariants = true;
    /// Stop at this global time instead of the scenario duration.
    std::optional<Ticks> until;
    /// Fault-injection test hook: post replenishments for background time.
    bool mutate_charge_background = false;
};

struct Segment {
    Ticks start = 0;  ///< global
    Ticks end = 0;
    Band band = Band::Foreground;
};

struct Reception {
    Ticks at = 0;  ///< global time the copy-out finished
    ThreadId thread = -1;
    SandboxId sandbox = -1;
    ChannelId channel = -1;
    std::uint64_t seq = 0;
    std::int64_t bytes = 0;
    Ticks send_start = 0;
    bool corrupt = false;
};

struct Output {
    Ticks at = 0;
    ThreadId thread = -1;
    SandboxId sandbox = -1;
};

struct Wake {
    Ticks at = 0;
    ThreadId thread = -1;
};

struct SampleRow {
    Ticks at = 0;
    SandboxId sandbox = -1;
    std::int64_t received = 0;
    std::int64_t corrupt = 0;
    std::int64_t outputs = 0;
    std::int64_t frames = 0;
    std::int64_t interrupts = 0;
    std::vector<std::pair<VcpuId, Ticks>> foreground;  ///< runtime in the interval
};

struct Violation {
    Ticks at = 0;
    std::string what;
};

struct RunStats {
    std::vector<std::vector<Segment>> segments;  ///< by VCPU id
    std::vector<Reception> receptions;           ///< including corrupt reads
    std::vector<Output> outputs;
    std::vector<Wake> wakeups;
    std::vector<SampleRow> samples;
    std::vector<std::int64_t> device_events;     ///< arrivals per device
    std::vector<std::int64_t> device_deliveries; ///< arrivals x accessible sandboxes
    std::int64_t interrupts_delivered = 0;
    std::int64_t activations = 0;
    std::int64_t unassociated_interrupts = 0;
    std::int64_t messages_sent = 0;
    std::int64_t busy_sends = 0;
    std::int64_t payload_mismatches = 0;
    std::int64_t cross_writes_blocked = 0;
    std::vector<MigrationReport> migrations;
    std::vector<RecoveryReport> recoveries;
    std::vector<Violation> violations;
    std::vector<std::string> notes;  ///< directive errors such as NoActiveFault
    Ticks ended_at = 0;
};

/// Runs one scenario: owns the engine, the sandboxes, their schedulers,
/// channels, devices and threads, and executes faults, recoveries and
/// migrations as engine events.
class Simulation final : private WorkloadHost {
public:
    explicit Simulation(const Scenario& scenario, SimOptions options = {});

    /// Runs to the scenario duration (or options.until).
    void run();

    const Scenario& scenario() const noexcept { return sc_; }
    const Trace& trace() const noexcept { return trace_; }
    const RunStats& stats() const noexcept { return stats_; }
    const Engine& engine() const noexcept { return engine_; }
    const SandboxTable& sandboxes() const noexcept { return sandboxes_; }
    const ChannelTable& channels() const noexcept { return channels_; }
    const std::vector<SimThread>& threads() const noexcept { return threads_; }
    const std::vector<Device>& devices() const noexcept { return devices_; }

    const std::string& vcpu_name(VcpuId v) const { return vcpu_names_.at(static_cast<std::size_t>(v)); }
    std::size_t vcpu_count() const noexcept { return vcpu_names_.size(); }
    /// Sandbox currently hosting the VCPU.
    SandboxId vcpu_sandbox(VcpuId v) const { return vcpu_home_.at(static_cast<std::size_t>(v)); }
    const Vcpu& vcpu(VcpuId v) const;

private:
    struct CoreRun {
        std::optional<VcpuId> vcpu;
        ThreadId thread = -1;
        Band band = Band::Foreground;
        Ticks seg_start = 0;    ///< global
        Ticks last_settle = 0;  ///< global
        bool settling = false;
    };

    struct PendingMigration {
        std::size_t index = 0;
        MigrationReport report;
        ThreadState saved_state = ThreadState::Runnable;
        enum class Stage { Waiting, Requested, Copying, Done } stage = Stage::Waiting;
    };

    struct ActiveRecovery {
        std::size_t report = 0;  ///< index into stats_.recoveries
        SandboxId faulty = -1;
        SandboxId standby = -1;
        ThreadId worker = -1;
        std::vector<std::pair<RecoveryPhase, Cycles>> phases;
        std::size_t next_phase = 0;
    };

    // setup
    void build();
    ThreadId add_thread(SimThread t);

    // event loop
    void dispatch(const Event& e);
    void on_timer(CoreId core);
    void on_replenishment(VcpuId v);
    void on_wakeup(ThreadId t, std::uint64_t generation);
    void on_interrupt(DeviceId d, std::int64_t index);
    void on_ipi(const ev::Ipi& ipi);
    void on_fault(std::size_t index);
    void on_recovery(std::size_t index);
    void on_migration(std::size_t index);
    void on_sample(std::int64_t index);
    void on_work_done(ThreadId worker, std::uint64_t token);

    // scheduling
    void settle(CoreId core);
    void settle_all();
    void mark_dirty(CoreId core);
    void reschedule_dirty();
    void reschedule(CoreId core);
    void end_segment(CoreId core);
    bool vcpu_has_runnable(VcpuId v) const;
    ThreadId pick_thread(VcpuId v) const;
    void post_replenishment_events(VcpuId v);
    void check_invariants();

    // helpers
    Sandbox& sandbox_of_vcpu(VcpuId v);
    Vcpu& vcpu_mut(VcpuId v);
    CoreId core_of_thread(ThreadId t) const;
    CoreId core_of_sandbox(SandboxId s) const;
    Ticks local_now(CoreId core) const { return engine_.to_local(core, engine_.now()); }
    void record(CoreId core, SandboxId sb, std::string kind, std::string subject, std::string detail);
    void note(const std::string& what);
    void wake_thread(ThreadId t);
    void wake_spinners(ChannelId ch, SandboxId reader, const SimThread& committer);
    void try_pending_migrations();
    void start_migration(PendingMigration& m);
    void finish_migration(PendingMigration& m);
    void reject_migration(PendingMigration& m, const std::string& why);
    void start_recovery(std::size_t directive, SandboxId faulty, RecoveryMode mode, SandboxId standby);
    void finish_recovery(ActiveRecovery& r);
    void enqueue_job(ThreadId worker, WorkerJob job);

    // WorkloadHost
    Cycles cycles_per_tick() const override { return sc_.host.cycles_per_tick; }
    Cycles poll_cycles() const override { return sc_.host.poll_cycles; }
    Cycles copy_cycles(std::int64_t bytes) const override { return copy_cost(bytes, sc_.host.copy_cycles_per_byte); }
    Cycles handler_cycles(DeviceId device) const override;
    bool channel_writable(ChannelId ch, SandboxId from) override;
    void channel_send(SimThread& sender, ChannelId ch, std::int64_t bytes, Ticks at) override;
    void channel_busy(SimThread& sender, ChannelId ch, Ticks at) override;
    Peek channel_peek(ChannelId ch, SandboxId who, std::int64_t& bytes) override;
    void channel_receive(SimThread& receiver, ChannelId ch, Ticks at) override;
    void spin_wait(SimThread& t, ChannelId ch) override;
    void sleep_until(SimThread& t, Ticks local_wake) override;
    void block_on_io(SimThread& t, DeviceId device) override;
    void wait(SimThread& t) override;
    void halt(SimThread& t) override;
    void service_output(SimThread& t, Ticks at) override;
    void io_complete(SimThread& handler, const IoRequest& req, Ticks at) override;
    void job_done(SimThread& worker, std::uint64_t token, Ticks at) override;

    Scenario sc_;
    SimOptions opt_;
    Engine engine_;
    Trace trace_;
    RunStats stats_;
    SandboxTable sandboxes_;
    ChannelTable channels_;
    std::vector<Device> devices_;
    std::vector<SimThread> threads_;
    std::vector<std::string> vcpu_names_;
    std::vector<SandboxId> vcpu_home_;
    std::vector<std::vector<ThreadId>> vcpu_threads_;
    std::vector<CoreRun> run_;
    std::vector<bool> dirty_;
    std::vector<ThreadId> migrator_;  ///< per sandbox, -1 if none
    std::vector<ThreadId> recoverer_; ///< per sandbox, -1 if none
    std::vector<std::vector<FaultSpec>> active_faults_;  ///< per sandbox
    std::vector<PendingMigration> migrations_;
    std::vector<bool> dst_in_flight_;
    std::vector<ActiveRecovery> recoveries_;
    std::vector<SampleRow> sample_acc_;  ///< running counts per sandbox
    std::vector<Ticks> sample_fg_base_; ///< fg runtime per VCPU at the last sample
    std::uint64_t next_token_ = 1;
    bool finished_ = false;
};

}  // namespace mksim
