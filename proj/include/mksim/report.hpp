#pragma once

#include "mksim/simulation.hpp"

#include <map>
#include <string>
#include <vector>

namespace mksim {

/// Foreground ticks of a segment list inside [from, to), global time.
Ticks foreground_in(const std::vector<Segment>& segs, Ticks from, Ticks to);

/// Largest foreground runtime of the VCPU over any window of `len` ticks.
Ticks max_window_runtime(const std::vector<Segment>& segs, Ticks len);

/// Foreground runtime per aligned window [k*len, (k+1)*len) up to `end`.
std::vector<Ticks> window_runtimes(const std::vector<Segment>& segs, Ticks len, Ticks end);

/// Mean transfer time per message size for a back-to-back sender: each
/// batch contributes (last copy-out - first send start), divided by the
/// number of messages of that size.
std::map<std::int64_t, double> transfer_times(const RunStats& stats, ChannelId ch, std::int64_t batch);

/// Sandboxes a fault plan may legitimately disturb: fault targets, peers on
/// corrupted channels, victims of denied writes, and recovery standbys.
std::vector<SandboxId> affected_sandboxes(const Scenario& sc);

Scenario without_faults(Scenario sc);
Scenario without_migrations(Scenario sc);

std::string summary_text(const Simulation& sim);

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct VerifyOptions {
    bool mutate_charge_background = false;
};

/// Runs the scenario plus its control runs and evaluates every invariant.
std::vector<CheckResult> verify(const Scenario& sc, VerifyOptions opt = {});

}  // namespace mksim
