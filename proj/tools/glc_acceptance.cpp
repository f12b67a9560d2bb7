// Acceptance run: one PASS/FAIL line per criterion. Expects to be started
// from anywhere; scenarios and test binaries are located through paths baked
// in at configure time. The desk criteria take several minutes.

#include "glc/report.hpp"
#include "glc/scenario.hpp"

#include <fmt/format.h>
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <optional>

using namespace glc;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void criterion(int id, const std::function<Outcome()>& body)
{
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, fmt::format("exception: {}", e.what())};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failures;
    fmt::print("criterion {}: {}  {}  [{:.1f} s]\n", id, o.pass ? "PASS" : "FAIL", o.detail, s);
    std::fflush(stdout);
}

double elapsed_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

SteppingPolicy with_dp(double dp_max)
{
    SteppingPolicy p;
    p.dp_max = dp_max;
    return p;
}

Scenario scenario(const std::string& name) { return Scenario::read(fs::path(GLC_SCENARIO_DIR) / (name + ".json")); }

Mat4 fd_tangent(const MaterialState& st, const Vec4& e0, const Vec4& e1, double dt, const MaterialParams& p)
{
    const double h = 1e-7;
    Mat4 fd;
    for (int j = 0; j < 4; ++j) {
        Vec4 ep = e1, em = e1;
        ep[j] += h;
        em[j] -= h;
        fd.col(j) = (integrate_point(st, e0, ep, dt, p).stress.sigma - integrate_point(st, e0, em, dt, p).stress.sigma) /
                    (2.0 * h);
    }
    return fd;
}

double tangent_error(const MaterialState& st, const Vec4& e0, const Vec4& e1, double dt, const MaterialParams& p)
{
    const Mat4 fd = fd_tangent(st, e0, e1, dt, p);
    return (integrate_point(st, e0, e1, dt, p).tangent - fd).norm() / fd.norm();
}

double displacement_gap(const FieldCloud& reference, const FieldCloud& run)
{
    double diff = 0.0, norm = 0.0;
    for (std::size_t i = 0; i < reference.node_xy.size(); ++i) {
        const int j = run.nearest_node(reference.node_xy[i]);
        diff += std::pow(reference.ux[i] - run.ux[j], 2) + std::pow(reference.uy[i] - run.uy[j], 2);
        norm += reference.ux[i] * reference.ux[i] + reference.uy[i] * reference.uy[i];
    }
    return std::sqrt(diff / norm);
}

const StationRecord& station_ending_at(const RunReport& r, double t)
{
    for (const auto& s : r.stations) {
        if (s.t_end == t) return s;
    }
    throw std::runtime_error(fmt::format("no station ends at t = {}", t));
}

std::vector<double> relative(const std::vector<double>& r)
{
    std::vector<double> out;
    for (double v : r) out.push_back(v / r.front());
    return out;
}

/// Desk-scale runs shared by criteria 5 to 8.
struct DeskRuns {
    RunReport mono, sub, weak, full, fixed;
};

DeskRuns desk_runs(const Scenario& s)
{
    DeskRuns d;
    auto t0 = std::chrono::steady_clock::now();
    auto lap = [&](const char* what) {
        fmt::print("  {:<28} {:8.1f} s\n", what, elapsed_since(t0));
        std::fflush(stdout);
        t0 = std::chrono::steady_clock::now();
    };
    const SteppingPolicy overkill = with_dp(1e-5);
    d.mono = run_monolithic(reference_model(s), s.cycle, prediscretize(global_model(s), s.cycle, overkill), overkill);
    lap("monolithic dp_max 1e-5");

    const CoupledProblem p = build_problem(s);
    const TimeGrid grid = prediscretize(global_model(s), s.cycle, s.policy);
    d.sub = run_submodeling(p, s.cycle, grid, s.policy);
    lap("submodeling");
    d.weak = run_weak(p, s.cycle, grid, s.policy, s.coupling);
    lap("weak coupling, Aitken");
    CouplingOptions fixed = s.coupling;
    fixed.acceleration = Acceleration::fixed;
    fixed.omega = 1.0;
    d.fixed = run_weak(p, s.cycle, grid, s.policy, fixed);
    lap("weak coupling, fixed omega");
    d.full = run_full(p, s.cycle, grid, s.policy, s.coupling);
    lap("full coupling");
    return d;
}

}  // namespace

int main()
{
    const MaterialParams in100;

    criterion(1, [&] {
        const TensionCurve coarse = tension_test(in100, 1e-3, 0.01, with_dp(1e-3));
        const TensionCurve fine = tension_test(in100, 1e-3, 0.01, with_dp(1e-4));
        const TensionCurve overkill = tension_test(in100, 1e-3, 0.01, with_dp(1e-5));
        const double e3 = std::abs(final_stress_error(coarse, overkill));
        const double e4 = std::abs(final_stress_error(fine, overkill));
        const int n4 = fine.step_count();
        const bool pass = e4 < 6e-3 && e3 >= 5e-3 && e3 <= 6e-2 && n4 >= 45 && n4 <= 85;
        return Outcome{pass, fmt::format("rate 1e-3: dp_max 1e-4 error {:.3f}% ({} steps), dp_max 1e-3 error {:.3f}% "
                                         "({} steps); bands < 0.6%, [0.5%, 6%], [45, 85] steps",
                                         100 * e4, n4, 100 * e3, coarse.step_count())};
    });

    criterion(2, [&] {
        bool pass = true;
        std::string detail;
        for (double rate : {1e-3, 1e-5, 1e-8}) {
            const TensionCurve overkill = tension_test(in100, rate, 0.01, with_dp(1e-5));
            const double e3 = std::abs(final_stress_error(tension_test(in100, rate, 0.01, with_dp(1e-3)), overkill));
            const double e4 = std::abs(final_stress_error(tension_test(in100, rate, 0.01, with_dp(1e-4)), overkill));
            pass = pass && e4 < e3;
            detail += fmt::format("rate {:g}: {:.3f}% -> {:.3f}%; ", rate, 100 * e3, 100 * e4);
        }
        return Outcome{pass, detail};
    });

    criterion(3, [&] {
        MaterialParams slow = in100;
        slow.R = 1e4;
        const Vec4 e_el = from_components(1e-4, -2e-5, 0.0, 3e-5);
        const Vec4 e_fast = from_components(0.003, -0.001, 0.0, 0.0015);
        const Vec4 e_slow = from_components(0.004, -0.0014, 0.0, 0.0);
        const double el = tangent_error({}, Vec4::Zero(), e_el, 1.0, in100);
        const double fast = tangent_error({}, Vec4::Zero(), e_fast, 2.0, in100);
        const double sl = tangent_error({}, Vec4::Zero(), e_slow, 1e4, slow);
        const bool pass = el < 1e-5 && fast < 1e-5 && sl < 1e-5;
        return Outcome{pass, fmt::format("relative error elastic {:.2e}, fast {:.2e}, slow-only {:.2e}", el, fast, sl)};
    });

    criterion(4, [&] {
        const Scenario s = scenario("elastic");
        const TimeGrid grid = TimeGrid::from_cycle(s.cycle);
        const RunReport mono = run_monolithic(reference_model(s), s.cycle, grid, s.policy);
        const RunReport weak = run_weak(build_problem(s), s.cycle, grid, s.policy, s.coupling);
        const double gap = displacement_gap(mono.end_field, weak.end_field);
        return Outcome{gap < 1e-9, fmt::format("relative displacement difference to the monolithic solve {:.2e}", gap)};
    });

    fmt::print("running desk-scale scenarios (matched local mesh)...\n");
    std::optional<DeskRuns> desk;
    try {
        desk = desk_runs(scenario("desk"));
    } catch (const std::exception& e) {
        fmt::print("  desk runs failed: {}\n", e.what());
    }
    auto need_desk = [&]() -> const DeskRuns& {
        if (!desk) throw std::runtime_error("desk runs unavailable");
        return *desk;
    };

    criterion(5, [&] {
        const DeskRuns& d = need_desk();
        const double sub = compare_runs(d.mono, d.sub).p_f_error();
        const double weak = compare_runs(d.mono, d.weak).p_f_error();
        const double full = compare_runs(d.mono, d.full).p_f_error();
        const bool pass = sub < -0.10 && std::abs(weak) < 0.02 && std::abs(full) <= std::abs(weak);
        return Outcome{pass, fmt::format("end p_f error vs dp_max 1e-5 monolithic: submodeling {:+.2f}%, weak {:+.3f}%, "
                                         "full {:+.3f}%",
                                         100 * sub, 100 * weak, 100 * full)};
    });

    criterion(6, [&] {
        const DeskRuns& d = need_desk();
        const double t_peak = d.weak.cycle.stations[1].first;
        const auto aitken = relative(station_ending_at(d.weak, t_peak).residuals);
        const auto fixed = relative(station_ending_at(d.fixed, t_peak).residuals);
        std::size_t reach = 0;
        while (reach < aitken.size() && aitken[reach] >= 1e-3) ++reach;
        bool below = true;
        for (std::size_t k = 1; k < std::min(aitken.size(), fixed.size()); ++k) below = below && aitken[k] <= fixed[k];
        std::string hist;
        for (std::size_t k = 0; k < std::max(aitken.size(), fixed.size()); ++k) {
            hist += fmt::format(" {}:{}/{}", k + 1, k < aitken.size() ? fmt::format("{:.1e}", aitken[k]) : "-",
                                k < fixed.size() ? fmt::format("{:.1e}", fixed[k]) : "-");
            if (k >= 7) break;
        }
        const bool pass = reach < aitken.size() && reach + 1 <= 6 && below;
        return Outcome{pass, fmt::format("t = {}: Aitken reaches 1e-3 at iteration {}; relative residual "
                                         "Aitken/fixed{}",
                                         t_peak, reach + 1, hist)};
    });

    criterion(7, [&] {
        const DeskRuns& d = need_desk();
        const int gw = d.weak.gl_iterations_total(), gf = d.full.gl_iterations_total();
        const int local_in_global = d.weak.models.front().grid.count(Provenance::local_ats);
        const bool same = d.full.models[0].grid.times() == d.full.models[1].grid.times();
        const bool pass = gf >= gw && local_in_global == 0 && same;
        return Outcome{pass, fmt::format("gl iterations full {} >= weak {}; local-ATS stations in weak global grid {}; "
                                         "full grids identical: {}",
                                         gf, gw, local_in_global, same ? "yes" : "no")};
    });

    criterion(8, [&] {
        const DeskRuns& d = need_desk();
        const double t_unload = d.weak.cycle.stations[2].first;
        bool pass = true;
        int checked = 0;
        std::string counts;
        for (const auto& s : d.weak.stations) {
            if (s.t_start < t_unload) continue;
            const auto rel = relative(s.residuals);
            std::size_t k = 0;
            while (k < rel.size() && rel[k] >= 1e-2) ++k;
            counts += fmt::format(" [{}-{}]", s.t_start, s.t_end);
            for (std::size_t i = 0; i < s.local_ats.size(); ++i) counts += fmt::format(" {}", s.local_ats[i]);
            for (std::size_t i = k + 1; i < s.local_ats.size(); ++i) {
                pass = pass && s.local_ats[i] <= s.local_ats[i - 1];
                ++checked;
            }
        }
        return Outcome{pass && checked > 0, fmt::format("local ATS per iteration during unloading:{}", counts)};
    });

    criterion(9, [&] {
        const auto t0 = std::chrono::steady_clock::now();
        std::string detail;
        bool pass = true;
        for (const char* t : {"test_material", "test_fem", "test_coupling"}) {
            const fs::path exe = fs::path(GLC_TEST_DIR) / t;
            const int status = std::system(fmt::format("\"{}\" > /dev/null 2>&1", exe.string()).c_str());
            const bool ok = WIFEXITED(status) && WEXITSTATUS(status) == 0;
            pass = pass && ok;
            detail += fmt::format("{} {}; ", t, ok ? "green" : "RED");
        }
        const double s = elapsed_since(t0);
        return Outcome{pass && s < 120.0, detail + fmt::format("total {:.1f} s (limit 120 s)", s)};
    });

    // Not a criterion: the same comparison with the non-matching local mesh.
    // The only conforming reference mesh carries the matched local mesh, so
    // the difference mixes coupling error with hole-edge mesh refinement.
    try {
        const Scenario s = scenario("desk_nonmatched");
        const auto t0 = std::chrono::steady_clock::now();
        const RunReport weak = run_weak(build_problem(s), s.cycle, prediscretize(global_model(s), s.cycle, s.policy),
                                        s.policy, s.coupling);
        const SteppingPolicy overkill = with_dp(1e-5);
        const RunReport mono =
            run_monolithic(reference_model(s), s.cycle, prediscretize(global_model(s), s.cycle, overkill), overkill);
        fmt::print("info: non-matching local mesh, weak coupling end p_f vs the matched-mesh reference {:+.3f}% "
                   "({} gl iterations; includes local mesh refinement) [{:.1f} s]\n",
                   100 * compare_runs(mono, weak).p_f_error(), weak.gl_iterations_total(), elapsed_since(t0));
    } catch (const std::exception& e) {
        fmt::print("info: non-matching run failed: {}\n", e.what());
    }

    fmt::print("{} of 9 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
