#pragma once

#include "mksim/types.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace mksim {

struct TraceRecord {
    Ticks time = 0;
    CoreId pcpu = -1;       ///< -1: not tied to a core
    SandboxId sandbox = -1;
    std::string kind;
    std::string subject;
    std::string detail;     ///< key=value pairs separated by ';'
};

/// Append-only record list; CSV with a fixed header.
class Trace {
public:
    static constexpr const char* kHeader = "time_tick,pcpu,sandbox,kind,subject,detail";

    explicit Trace(bool enabled = true) : enabled_(enabled) {}

    bool enabled() const noexcept { return enabled_; }
    void add(TraceRecord r);
    const std::vector<TraceRecord>& records() const noexcept { return records_; }

    void write_csv(std::ostream& out) const;
    std::string csv() const;

private:
    bool enabled_;
    std::vector<TraceRecord> records_;
};

}  // namespace mksim
