#include "mksim/trace.hpp"

#include <ostream>
#include <sstream>

namespace mksim {

void Trace::add(TraceRecord r)
{
    if (!enabled_)
        return;
    if (!records_.empty() && r.time < records_.back().time)
        fail(Errc::InvariantViolation, "trace record at " + std::to_string(r.time) +
                                           " after one at " + std::to_string(records_.back().time));
    records_.push_back(std::move(r));
}

void Trace::write_csv(std::ostream& out) const
{
    out << kHeader << '\n';
    for (const auto& r : records_) {
        out << r.time << ',';
        if (r.pcpu >= 0)
            out << r.pcpu;
        out << ',';
        if (r.sandbox >= 0)
            out << r.sandbox;
        out << ',' << r.kind << ',' << r.subject << ',' << r.detail << '\n';
    }
}

std::string Trace::csv() const
{
    std::ostringstream os;
    write_csv(os);
    return os.str();
}

}  // namespace mksim
