#pragma once

#include "mksim/types.hpp"

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mksim {

enum class VcpuClass { Main, Io };
enum class Band { Foreground, Background };

std::string_view to_string(VcpuClass c);
std::string_view to_string(Band b);

/// Budget and period of a VCPU. Main VCPUs give (C, T) directly and
/// util == C/T; I/O VCPUs give only util, and derive C and T per request.
struct VcpuSpec {
    VcpuClass cls = VcpuClass::Main;
    Ticks budget = 0;
    Ticks period = 0;
    Ratio util;

    static VcpuSpec main(Ticks budget, Ticks period);
    static VcpuSpec io(Ratio util);
    /// Throws MalformedSpec.
    void validate() const;
};

struct ReplenishmentItem {
    Ticks amount = 0;
    Ticks due_at = 0;
    Ticks busy_start = 0;  ///< earliest start of the busy interval(s) this credit covers

    friend bool operator==(const ReplenishmentItem&, const ReplenishmentItem&) = default;
};

struct IoParams {
    Ticks budget = 0;
    Ticks period = 0;
    friend bool operator==(const IoParams&, const IoParams&) = default;
};

/// C_IO = round_half_up(T_V * U_IO), T_IO = T_V.
IoParams io_vcpu_params(Ticks main_period, const Ratio& util);

struct AdmissionResult {
    bool accepted = false;
    std::string lhs;        ///< exact left-hand side as "p/q"
    double lhs_value = 0.0;
    double bound = 0.0;
    int mains = 0;
    int ios = 0;
};

/// n(2^(1/n) - 1) rounded to double, for reporting. Admission itself
/// compares against a 100-digit value. With no Main VCPUs the bound is 1.
double utilization_bound(int mains);

/// Evaluates the rate-monotonic admission test over a complete VCPU set:
/// sum C_i/T_i + sum (2 - U_j) U_j <= n (2^(1/n) - 1).
AdmissionResult evaluate_admission(std::span<const VcpuSpec> set);

/// A budgeted server. Main VCPUs behave as sporadic servers; I/O VCPUs are
/// bandwidth-preserving servers whose C and T follow the requesting thread.
///
/// All times are in the owning core's local clock.
class Vcpu {
public:
    static constexpr std::size_t kMaxReplenishments = 32;

    Vcpu(VcpuId id, std::string name, VcpuSpec spec, bool background_allowed = true);

    VcpuId id() const noexcept { return id_; }
    const std::string& name() const noexcept { return name_; }
    const VcpuSpec& spec() const noexcept { return spec_; }
    VcpuClass cls() const noexcept { return spec_.cls; }
    bool background_allowed() const noexcept { return background_allowed_; }

    Ticks remaining_budget() const noexcept { return remaining_; }
    const std::vector<ReplenishmentItem>& replenishments() const noexcept { return repl_; }
    Band band() const noexcept { return remaining_ > 0 ? Band::Foreground : Band::Background; }
    /// Exactly C for Main; the current C_IO for Io.
    Ticks capacity() const noexcept;
    /// Rate-monotonic key. Empty for an I/O VCPU that has never served a request.
    std::optional<Ticks> priority_period() const noexcept;
    Ticks current_io_budget() const noexcept { return io_budget_; }
    Ticks current_io_period() const noexcept { return io_period_; }

    /// Charges foreground execution over [ran_from, ran_from + ran_for) and
    /// credits it back one period after the start of the busy interval.
    /// Returns true when a new list item was created.
    bool charge_and_post(Ticks ran_from, Ticks ran_for);
    /// Closes the open busy interval (the VCPU stopped running at foreground).
    void end_busy_interval() noexcept { interval_open_ = false; }
    bool interval_open() const noexcept { return interval_open_; }

    struct ReplenishOutcome {
        Ticks applied = 0;
        bool resumed = false;  ///< budget went from zero to positive
    };
    ReplenishOutcome apply_replenishments(Ticks now);

    /// Background execution is tracked but never charged.
    void background_run(Ticks ran_for);

    /// Retargets an I/O VCPU at the period of the Main VCPU that issued the
    /// request. Applied at once when no credit is outstanding, otherwise when
    /// the replenishment list drains.
    void io_service_request(Ticks main_period);

    /// Moves every future replenishment by delta (clock re-basing on migration).
    void shift_times(Ticks delta);

    bool capacity_ok() const noexcept;
    std::optional<Ticks> next_replenishment() const;

    Ticks foreground_runtime() const noexcept { return fg_runtime_; }
    Ticks background_runtime() const noexcept { return bg_runtime_; }

    /// Test hook: post credits for background time as well. Breaks the
    /// capacity invariant; exists so the verifier can be shown to catch it.
    void set_mutation_charge_background(bool on) noexcept { mutate_bg_ = on; }

private:
    Ticks charge_period() const noexcept;
    void maybe_retarget();

    VcpuId id_;
    std::string name_;
    VcpuSpec spec_;
    bool background_allowed_;
    Ticks remaining_ = 0;
    std::vector<ReplenishmentItem> repl_;
    bool interval_open_ = false;
    Ticks interval_start_ = 0;
    Ticks interval_end_ = 0;
    Ticks io_budget_ = 0;
    Ticks io_period_ = 0;
    std::optional<Ticks> io_retarget_;
    Ticks fg_runtime_ = 0;
    Ticks bg_runtime_ = 0;
    bool mutate_bg_ = false;
};

struct Pick {
    VcpuId vcpu = -1;
    Band band = Band::Foreground;
    friend bool operator==(const Pick&, const Pick&) = default;
};

/// Per-PCPU run queue of VCPUs, ordered rate-monotonically.
class PcpuScheduler {
public:
    explicit PcpuScheduler(CoreId pcpu) : pcpu_(pcpu) {}

    CoreId pcpu() const noexcept { return pcpu_; }

    /// Admission test over the current set plus candidate.
    AdmissionResult admit(const VcpuSpec& candidate) const;

    Vcpu& add(Vcpu vcpu);
    Vcpu remove(VcpuId id);
    Vcpu* find(VcpuId id);
    const Vcpu* find(VcpuId id) const;
    std::map<VcpuId, Vcpu>& vcpus() noexcept { return vcpus_; }
    const std::map<VcpuId, Vcpu>& vcpus() const noexcept { return vcpus_; }
    std::vector<VcpuSpec> specs() const;

    /// Highest-priority foreground VCPU with budget and a runnable thread,
    /// else the highest-priority background-eligible one, else nothing.
    std::optional<Pick> pick_next(const std::function<bool(VcpuId)>& has_runnable) const;

private:
    CoreId pcpu_;
    std::map<VcpuId, Vcpu> vcpus_;
};

}  // namespace mksim
