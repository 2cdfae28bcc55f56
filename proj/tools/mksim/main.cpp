// mksim: run, verify and list multikernel scenarios.

#include "mksim/report.hpp"
#include "mksim/scenario.hpp"
#include "mksim/simulation.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace mksim;

namespace {

enum Exit { kOk = 0, kUsage = 1, kAdmission = 2, kInvariant = 3 };

fs::path resolve(const std::string& arg)
{
    if (fs::exists(arg))
        return arg;
    const fs::path bundled = fs::path(MKSIM_SCENARIO_DIR) / (arg + ".toml");
    if (fs::exists(bundled))
        return bundled;
    fail(Errc::ParseError, "no scenario file or bundled scenario named '" + arg + "'");
}

int exit_for(const SimError& e)
{
    switch (e.code()) {
    case Errc::AdmissionFailed: return kAdmission;
    case Errc::InvariantViolation:
    case Errc::Overrun: return kInvariant;
    default: return kUsage;
    }
}

int cmd_run(const std::string& name, const std::string& trace_path, const std::string& summary_path,
            const std::string& until)
{
    const Scenario sc = load_scenario(resolve(name));
    SimOptions opt;
    opt.trace = !trace_path.empty();
    if (!until.empty())
        opt.until = parse_duration(until);
    Simulation sim(sc, opt);
    sim.run();

    if (!trace_path.empty()) {
        std::ofstream out(trace_path, std::ios::binary);
        if (!out)
            fail(Errc::ParseError, "cannot write " + trace_path);
        sim.trace().write_csv(out);
    }
    const std::string summary = summary_text(sim);
    if (summary_path.empty()) {
        std::cout << summary;
    } else {
        std::ofstream out(summary_path);
        if (!out)
            fail(Errc::ParseError, "cannot write " + summary_path);
        out << summary;
    }
    if (!sim.stats().violations.empty()) {
        std::cerr << "invariant violation: " << sim.stats().violations.front().what << '\n';
        return kInvariant;
    }
    return kOk;
}

int cmd_verify(const std::string& name, bool mutate)
{
    const Scenario sc = load_scenario(resolve(name));
    VerifyOptions opt;
    opt.mutate_charge_background = mutate;
    bool all = true;
    for (const auto& c : verify(sc, opt)) {
        std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
        all = all && c.pass;
    }
    return all ? kOk : kInvariant;
}

int cmd_list()
{
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(MKSIM_SCENARIO_DIR))
        if (e.path().extension() == ".toml")
            files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        const Scenario sc = load_scenario(f);
        std::cout << f.stem().string() << "  " << sc.description << '\n';
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Discrete-event simulator of a partitioned multikernel"};
    app.require_subcommand(1);

    std::string run_name, trace_path, summary_path, until;
    auto* run = app.add_subcommand("run", "run a scenario");
    run->add_option("scenario", run_name, "scenario file or bundled name")->required();
    run->add_option("--trace", trace_path, "write the CSV trace here");
    run->add_option("--summary", summary_path, "write the summary here instead of stdout");
    run->add_option("--until", until, "stop at this time (ticks, or 250ms style)");

    std::string verify_name;
    bool mutate = false;
    auto* ver = app.add_subcommand("verify", "run the invariant suite on a scenario");
    ver->add_option("scenario", verify_name, "scenario file or bundled name")->required();
    ver->add_flag("--mutate-charge-background", mutate, "test hook: charge background time as foreground");

    auto* list = app.add_subcommand("list-scenarios", "list bundled scenarios");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        if (*run)
            return cmd_run(run_name, trace_path, summary_path, until);
        if (*ver)
            return cmd_verify(verify_name, mutate);
        if (*list)
            return cmd_list();
    } catch (const SimError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    }
    return kUsage;
}
