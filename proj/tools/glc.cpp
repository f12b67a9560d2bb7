// glc: command-line driver for the global/local coupling runs.
//
// Exit codes: 0 success, 2 scenario or usage error, 3 solver failure,
// 4 coupling did not converge, 1 anything else (including a failed
// selfcheck).

#include "glc/errors.hpp"
#include "glc/report.hpp"
#include "glc/scenario.hpp"

#include "CLI11.hpp"
#include <fmt/format.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace glc;

namespace {

constexpr int kUsage = 2;
constexpr int kSolver = 3;
constexpr int kNotConverged = 4;

struct Overrides {
    std::string mode;
    std::optional<double> dp_max;
    std::optional<double> tol;
    std::string aitken;
    std::optional<int> max_gl_iters;
    std::optional<double> omega;
    std::optional<std::uint64_t> seed;
};

void apply(Scenario& s, const Overrides& o)
{
    if (!o.mode.empty()) s.mode = run_mode_from_string(o.mode);
    if (o.dp_max) s.policy.dp_max = *o.dp_max;
    if (o.tol) s.coupling.tol = *o.tol;
    if (o.aitken == "on") s.coupling.acceleration = Acceleration::aitken;
    if (o.aitken == "off") s.coupling.acceleration = Acceleration::fixed;
    if (o.max_gl_iters) s.coupling.max_iters = *o.max_gl_iters;
    if (o.omega) s.coupling.omega = *o.omega;
    try {
        s.policy.validate();
        s.coupling.validate();
    } catch (const std::invalid_argument& ex) {
        throw ScenarioError(ex.what());
    }
}

TimeGrid grid_for(const Scenario& s)
{
    if (s.global_mesh.empty()) return TimeGrid::from_cycle(s.cycle);
    return prediscretize(global_model(s), s.cycle, s.policy);
}

void print_summary(const RunReport& r, const fs::path& out)
{
    fmt::print("scenario {}  mode {}  dp_max {}\n", r.scenario, to_string(r.mode), format_double(r.policy.dp_max));
    for (const auto& m : r.models) {
        fmt::print("  {:<16} stations {:>5}  steps {:>5}  global_ATS {:>4}  local_ATS {:>4}  cutback {:>4}\n", m.model,
                   m.grid.size(), m.steps.size(), m.grid.count(Provenance::global_ats), m.grid.count(Provenance::local_ats),
                   m.grid.count(Provenance::cutback));
    }
    if (r.mode == RunMode::weak || r.mode == RunMode::full) {
        fmt::print("  gl iterations {}\n", r.gl_iterations_total());
    }
    fmt::print("  end max p_f {:.6e} at ({:.4f}, {:.4f})  max von Mises {:.4f} MPa\n", r.end.max_p_f, r.end.p_f_location.x(),
               r.end.p_f_location.y(), r.end.max_von_mises);
    fmt::print("  wall time {:.2f} s, artifacts in {}\n", r.wall_time, out.string());
}

fs::path report_path(const fs::path& p)
{
    return fs::is_directory(p) ? p / "report.json" : p;
}

int cmd_material_test(const std::string& scenario, double rate, double dp_max, double strain)
{
    MaterialParams params;
    if (!scenario.empty()) params = Scenario::read(scenario).material;
    SteppingPolicy policy;
    policy.dp_max = dp_max;
    SteppingPolicy overkill;
    overkill.dp_max = 1e-5;
    const TensionCurve run = tension_test(params, rate, strain, policy);
    const TensionCurve ref = dp_max == overkill.dp_max ? run : tension_test(params, rate, strain, overkill);
    fmt::print("rate,dp_max,strain,stress,stress_reference,error_percent,steps\n");
    fmt::print("{},{},{},{},{},{},{}\n", format_double(rate), format_double(dp_max), format_double(strain),
               format_double(run.stress.back()), format_double(ref.stress.back()),
               format_double(100.0 * std::abs(final_stress_error(run, ref))), run.step_count());
    return 0;
}

int cmd_prediscretize(const std::string& scenario, const Overrides& o, const std::string& out)
{
    Scenario s = Scenario::read(scenario);
    apply(s, o);
    std::vector<StepRecord> steps;
    const TimeGrid grid = prediscretize(global_model(s), s.cycle, s.policy, &steps);
    const fs::path dir = out.empty() ? s.outputs : fs::path(out);
    fs::create_directories(dir);
    write_grid_csv(grid, dir / "grid_global.csv");
    fmt::print("prediscretization of {}: {} stations ({} from the cycle), {} steps\n", s.name, grid.size(),
               grid.count(Provenance::cycle), steps.size());
    return 0;
}

int cmd_run(const std::string& scenario, const Overrides& o, const std::string& out)
{
    Scenario s = Scenario::read(scenario);
    apply(s, o);
    s.validate_for(s.mode);
    RunReport report;
    switch (s.mode) {
    case RunMode::monolithic:
        report = run_monolithic(reference_model(s), s.cycle, grid_for(s), s.policy);
        break;
    case RunMode::submodeling:
        report = run_submodeling(build_problem(s, o.seed), s.cycle, grid_for(s), s.policy);
        break;
    case RunMode::weak:
    case RunMode::full:
        report = run_coupled(build_problem(s, o.seed), s.cycle, grid_for(s), s.policy, s.coupling, s.mode);
        break;
    }
    report.scenario = s.name;
    const fs::path dir = out.empty() ? s.outputs : fs::path(out);
    write_run_artifacts(report, dir);
    print_summary(report, dir);
    return 0;
}

int cmd_compare(const std::string& a, const std::string& b, const std::string& out)
{
    const RunReport ra = read_report(report_path(a));
    const RunReport rb = read_report(report_path(b));
    const Comparison c = compare_runs(ra, rb);
    fmt::print("reference {} ({}), run {} ({})\n", ra.scenario, to_string(ra.mode), rb.scenario, to_string(rb.mode));
    fmt::print("location ({:.4f}, {:.4f}), matched ({:.4f}, {:.4f})\n", c.location.x(), c.location.y(), c.matched.x(),
               c.matched.y());
    fmt::print("{:<10} {:>14} {:>14} {:>10}\n", "quantity", "reference", "run", "error %");
    fmt::print("{:<10} {:>14.6e} {:>14.6e} {:>10.4f}\n", "p_f", c.p_f_reference, c.p_f_run, 100.0 * c.p_f_error());
    fmt::print("{:<10} {:>14.6f} {:>14.6f} {:>10.4f}\n", "von_mises", c.von_mises_reference, c.von_mises_run,
               100.0 * c.von_mises_error());
    if (!out.empty()) {
        fs::create_directories(out);
        std::ofstream f(fs::path(out) / "compare.csv");
        f << "quantity,reference,run,relative_error\n";
        f << "p_f," << format_double(c.p_f_reference) << ',' << format_double(c.p_f_run) << ','
          << format_double(c.p_f_error()) << '\n';
        f << "von_mises," << format_double(c.von_mises_reference) << ',' << format_double(c.von_mises_run) << ','
          << format_double(c.von_mises_error()) << '\n';
    }
    return 0;
}

int cmd_selfcheck(const std::string& dir)
{
    const auto problems = selfcheck(dir);
    for (const auto& p : problems) fmt::print(stderr, "{}\n", p);
    if (!problems.empty()) return 1;
    fmt::print("{}: all artifacts valid\n", dir);
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Non-invasive global/local coupling with adaptive time stepping"};
    app.require_subcommand(1);

    std::string scenario, out, mode, aitken;
    double dp_max = 1e-4, tol = 0.0, omega = 0.0, rate = 1e-3, strain = 0.01;
    int max_gl_iters = 0;
    std::uint64_t seed = 0;

    auto add_run_flags = [&](CLI::App* cmd) {
        cmd->add_option("--scenario", scenario, "scenario JSON file")->required()->check(CLI::ExistingFile);
        cmd->add_option("--mode", mode, "run mode")->check(CLI::IsMember({"monolithic", "submodel", "weak", "full"}));
        cmd->add_option("--dpmax", dp_max, "maximal fast plasticity increment per step")->check(CLI::PositiveNumber);
        cmd->add_option("--tol", tol, "relative tolerance of the global/local loop")->check(CLI::PositiveNumber);
        cmd->add_option("--aitken", aitken, "Aitken acceleration")->check(CLI::IsMember({"on", "off"}));
        cmd->add_option("--max-gl-iters", max_gl_iters, "iteration cap of the global/local loop")->check(CLI::PositiveNumber);
        cmd->add_option("--omega", omega, "fixed relaxation factor")->check(CLI::PositiveNumber);
        cmd->add_option("--out", out, "output directory");
        cmd->add_option("--seed", seed, "perturb the local meshes with this seed");
    };

    auto* material = app.add_subcommand("material-test", "single-element tension against the dp_max = 1e-5 overkill");
    material->add_option("--scenario", scenario, "take the material from this scenario")->check(CLI::ExistingFile);
    material->add_option("--rate", rate, "strain rate [1/s]")->check(CLI::PositiveNumber);
    material->add_option("--dpmax", dp_max, "maximal fast plasticity increment per step")->check(CLI::PositiveNumber);
    material->add_option("--strain", strain, "final strain")->check(CLI::PositiveNumber);

    auto* pre = app.add_subcommand("prediscretize", "time grid of the global model alone");
    add_run_flags(pre);
    auto* run = app.add_subcommand("run", "run a scenario and write its artifacts");
    add_run_flags(run);

    std::string report_a, report_b;
    auto* compare = app.add_subcommand("compare", "end-of-cycle errors of run B against reference A");
    compare->add_option("a", report_a, "reference report (file or run directory)")->required()->check(CLI::ExistingPath);
    compare->add_option("b", report_b, "compared report (file or run directory)")->required()->check(CLI::ExistingPath);
    compare->add_option("--out", out, "write compare.csv here");

    std::string check_dir;
    auto* check = app.add_subcommand("selfcheck", "validate the artifacts of a run directory");
    check->add_option("dir", check_dir, "run directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kUsage;
    }

    auto given = [](CLI::App* cmd, const char* name) { return cmd->count(name) > 0; };
    try {
        if (material->parsed()) return cmd_material_test(scenario, rate, dp_max, strain);
        if (compare->parsed()) return cmd_compare(report_a, report_b, out);
        if (check->parsed()) return cmd_selfcheck(check_dir);

        CLI::App* cmd = pre->parsed() ? pre : run;
        Overrides o;
        o.mode = mode;
        if (given(cmd, "--dpmax")) o.dp_max = dp_max;
        if (given(cmd, "--tol")) o.tol = tol;
        o.aitken = aitken;
        if (given(cmd, "--max-gl-iters")) o.max_gl_iters = max_gl_iters;
        if (given(cmd, "--omega")) o.omega = omega;
        if (given(cmd, "--seed")) o.seed = seed;
        return pre->parsed() ? cmd_prediscretize(scenario, o, out) : cmd_run(scenario, o, out);
    } catch (const ScenarioError& e) {
        fmt::print(stderr, "scenario error: {}\n", e.what());
        return kUsage;
    } catch (const UnknownSet& e) {
        fmt::print(stderr, "scenario error: {}\n", e.what());
        return kUsage;
    } catch (const ProjectionFailure& e) {
        fmt::print(stderr, "partition error: {}\n", e.what());
        return kUsage;
    } catch (const IncompatibleRuns& e) {
        fmt::print(stderr, "incompatible runs: {}\n", e.what());
        return kUsage;
    } catch (const MaxIterations& e) {
        fmt::print(stderr, "not converged: {}\n", e.what());
        return kNotConverged;
    } catch (const Error& e) {
        // StepFailure, ElementFailure and the material errors.
        fmt::print(stderr, "solver failure: {}\n", e.what());
        return kSolver;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
}
