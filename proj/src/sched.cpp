#include "mksim/sched.hpp"

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

namespace mksim {

namespace mp = boost::multiprecision;

std::string_view to_string(VcpuClass c)
{
    return c == VcpuClass::Main ? "main" : "io";
}

std::string_view to_string(Band b)
{
    return b == Band::Foreground ? "fg" : "bg";
}

VcpuSpec VcpuSpec::main(Ticks budget, Ticks period)
{
    VcpuSpec s;
    s.cls = VcpuClass::Main;
    s.budget = budget;
    s.period = period;
    if (budget > 0 && period > 0)
        s.util = Ratio::make(budget, period);
    return s;
}

VcpuSpec VcpuSpec::io(Ratio util)
{
    VcpuSpec s;
    s.cls = VcpuClass::Io;
    s.util = util;
    return s;
}

void VcpuSpec::validate() const
{
    if (cls == VcpuClass::Main) {
        if (budget <= 0 || period <= 0 || budget > period)
            fail(Errc::MalformedSpec, "main VCPU needs 0 < C <= T");
        if (!(util == Ratio::make(budget, period)))
            fail(Errc::MalformedSpec, "main VCPU utilization must equal C/T");
    } else {
        if (util.num <= 0 || util.num >= util.den)
            fail(Errc::MalformedSpec, "I/O VCPU needs 0 < U < 1");
    }
}

IoParams io_vcpu_params(Ticks main_period, const Ratio& util)
{
    if (main_period <= 0 || util.num <= 0 || util.num >= util.den)
        fail(Errc::Precondition, "io_vcpu_params needs T > 0 and 0 < U < 1");
    return IoParams{scale_round_half_up(main_period, util), main_period};
}

namespace {

using Float = mp::cpp_bin_float_100;

// The bound is irrational for n >= 2; 100 digits leave no room for a
// rational sum of tick ratios to land between the approximation and the
// true value.
Float precise_bound(int mains)
{
    if (mains <= 1)
        return Float(1);
    const Float n(mains);
    return n * (mp::pow(Float(2), Float(1) / n) - 1);
}

}  // namespace

double utilization_bound(int mains)
{
    return static_cast<double>(precise_bound(mains));
}

AdmissionResult evaluate_admission(std::span<const VcpuSpec> set)
{
    AdmissionResult r;
    mp::cpp_rational lhs = 0;
    for (const auto& s : set) {
        s.validate();
        if (s.cls == VcpuClass::Main) {
            ++r.mains;
            lhs += mp::cpp_rational(s.budget, s.period);
        } else {
            ++r.ios;
            const mp::cpp_rational u(s.util.num, s.util.den);
            lhs += (2 - u) * u;
        }
    }
    r.bound = utilization_bound(r.mains);
    // A binary float is a dyadic rational, so the conversion is exact.
    r.accepted = lhs <= mp::cpp_rational(precise_bound(r.mains));
    r.lhs = lhs.str();
    r.lhs_value = static_cast<double>(lhs);
    return r;
}

Vcpu::Vcpu(VcpuId id, std::string name, VcpuSpec spec, bool background_allowed)
    : id_(id), name_(std::move(name)), spec_(spec), background_allowed_(background_allowed)
{
    spec_.validate();
    if (spec_.cls == VcpuClass::Main)
        remaining_ = spec_.budget;
}

Ticks Vcpu::capacity() const noexcept
{
    return spec_.cls == VcpuClass::Main ? spec_.budget : io_budget_;
}

std::optional<Ticks> Vcpu::priority_period() const noexcept
{
    if (spec_.cls == VcpuClass::Main)
        return spec_.period;
    if (io_period_ > 0)
        return io_period_;
    return std::nullopt;
}

Ticks Vcpu::charge_period() const noexcept
{
    return spec_.cls == VcpuClass::Main ? spec_.period : io_period_;
}

bool Vcpu::charge_and_post(Ticks ran_from, Ticks ran_for)
{
    if (ran_for < 0)
        fail(Errc::Precondition, "negative run length");
    if (ran_for == 0)
        return false;
    if (ran_for > remaining_)
        fail(Errc::Overrun, name_ + " ran " + std::to_string(ran_for) + " with " +
                                std::to_string(remaining_) + " left");

    remaining_ -= ran_for;
    fg_runtime_ += ran_for;

    bool created = false;
    if (interval_open_ && ran_from == interval_end_ && !repl_.empty() &&
        repl_.back().due_at == interval_start_ + charge_period()) {
        repl_.back().amount += ran_for;
    } else {
        interval_open_ = true;
        interval_start_ = ran_from;
        repl_.push_back(ReplenishmentItem{ran_for, ran_from + charge_period(), ran_from});
        created = true;
        if (repl_.size() > kMaxReplenishments) {
            // Merge the two latest credits: keep the later due time.
            auto last = repl_.back();
            repl_.pop_back();
            repl_.back().amount += last.amount;
            repl_.back().due_at = last.due_at;
            created = false;
        }
    }
    interval_end_ = ran_from + ran_for;
    if (remaining_ == 0)
        interval_open_ = false;
    return created;
}

Vcpu::ReplenishOutcome Vcpu::apply_replenishments(Ticks now)
{
    ReplenishOutcome out;
    const bool was_empty = remaining_ == 0;
    auto it = repl_.begin();
    while (it != repl_.end() && it->due_at <= now) {
        out.applied += it->amount;
        ++it;
    }
    if (it != repl_.begin()) {
        // The open interval's credit is the list tail; releasing it closes the interval.
        if (it == repl_.end())
            interval_open_ = false;
        repl_.erase(repl_.begin(), it);
        remaining_ += out.applied;
    }
    maybe_retarget();
    out.resumed = was_empty && remaining_ > 0;
    return out;
}

void Vcpu::background_run(Ticks ran_for)
{
    if (remaining_ > 0)
        fail(Errc::Precondition, name_ + " is not in the background band");
    if (ran_for <= 0)
        return;
    bg_runtime_ += ran_for;
    if (mutate_bg_)
        repl_.push_back(ReplenishmentItem{ran_for, interval_end_ + charge_period(), interval_end_});
}

void Vcpu::io_service_request(Ticks main_period)
{
    if (spec_.cls != VcpuClass::Io)
        fail(Errc::Precondition, name_ + " is not an I/O VCPU");
    io_retarget_ = main_period;
    maybe_retarget();
}

void Vcpu::maybe_retarget()
{
    if (!io_retarget_ || !repl_.empty() || interval_open_)
        return;
    const IoParams p = io_vcpu_params(*io_retarget_, spec_.util);
    io_budget_ = p.budget;
    io_period_ = p.period;
    remaining_ = io_budget_;
    io_retarget_.reset();
}

void Vcpu::shift_times(Ticks delta)
{
    for (auto& r : repl_) {
        r.due_at += delta;
        r.busy_start += delta;
    }
    interval_start_ += delta;
    interval_end_ += delta;
}

bool Vcpu::capacity_ok() const noexcept
{
    Ticks sum = remaining_;
    for (const auto& r : repl_)
        sum += r.amount;
    return sum == capacity();
}

std::optional<Ticks> Vcpu::next_replenishment() const
{
    if (repl_.empty())
        return std::nullopt;
    return repl_.front().due_at;
}

AdmissionResult PcpuScheduler::admit(const VcpuSpec& candidate) const
{
    std::vector<VcpuSpec> set = specs();
    set.push_back(candidate);
    return evaluate_admission(set);
}

Vcpu& PcpuScheduler::add(Vcpu vcpu)
{
    const VcpuId id = vcpu.id();
    auto [it, inserted] = vcpus_.emplace(id, std::move(vcpu));
    if (!inserted)
        fail(Errc::Precondition, "duplicate VCPU id " + std::to_string(id));
    return it->second;
}

Vcpu PcpuScheduler::remove(VcpuId id)
{
    auto node = vcpus_.extract(id);
    if (node.empty())
        fail(Errc::Precondition, "no VCPU " + std::to_string(id) + " on pcpu " + std::to_string(pcpu_));
    return std::move(node.mapped());
}

Vcpu* PcpuScheduler::find(VcpuId id)
{
    auto it = vcpus_.find(id);
    return it == vcpus_.end() ? nullptr : &it->second;
}

const Vcpu* PcpuScheduler::find(VcpuId id) const
{
    auto it = vcpus_.find(id);
    return it == vcpus_.end() ? nullptr : &it->second;
}

std::vector<VcpuSpec> PcpuScheduler::specs() const
{
    std::vector<VcpuSpec> out;
    out.reserve(vcpus_.size());
    for (const auto& [id, v] : vcpus_)
        out.push_back(v.spec());
    return out;
}

std::optional<Pick> PcpuScheduler::pick_next(const std::function<bool(VcpuId)>& has_runnable) const
{
    using Key = std::tuple<Ticks, VcpuId>;
    std::optional<Key> best_fg;
    std::optional<Key> best_bg;
    for (const auto& [id, v] : vcpus_) {
        const auto period = v.priority_period();
        if (!period || !has_runnable(id))
            continue;
        const Key key{*period, id};
        if (v.band() == Band::Foreground) {
            if (!best_fg || key < *best_fg)
                best_fg = key;
        } else if (v.background_allowed()) {
            if (!best_bg || key < *best_bg)
                best_bg = key;
        }
    }
    if (best_fg)
        return Pick{std::get<1>(*best_fg), Band::Foreground};
    if (best_bg)
        return Pick{std::get<1>(*best_bg), Band::Background};
    return std::nullopt;
}

}  // namespace mksim
