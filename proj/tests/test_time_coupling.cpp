#include "glc/report.hpp"
#include "glc/time_coupling.hpp"

#include "doctest.h"
#include "fixtures.hpp"

#include <cmath>
#include <set>

using namespace glc;

namespace {

SteppingPolicy policy_with(double dp_max)
{
    SteppingPolicy p;
    p.dp_max = dp_max;
    return p;
}

std::string without_wall_time(const RunReport& r)
{
    nlohmann::json j = report_to_json(r);
    j.erase("wall_time");
    return j.dump();
}

std::set<double> as_set(const TimeGrid& g) { return {g.times().begin(), g.times().end()}; }

// Relative difference of two end fields over nearest matching nodes.
double displacement_gap(const FieldCloud& a, const FieldCloud& b)
{
    double diff = 0.0, norm = 0.0;
    for (std::size_t i = 0; i < a.node_xy.size(); ++i) {
        const int j = b.nearest_node(a.node_xy[i]);
        diff += std::pow(a.ux[i] - b.ux[j], 2) + std::pow(a.uy[i] - b.uy[j], 2);
        norm += a.ux[i] * a.ux[i] + a.uy[i] * a.uy[i];
    }
    return std::sqrt(diff / norm);
}

}  // namespace

TEST_CASE("load cycle")
{
    const LoadCycle c = LoadCycle::desk();
    CHECK(c.start() == 0.0);
    CHECK(c.end() == 600.0);
    CHECK(c.amplitude(30.0) == doctest::Approx(0.5));
    CHECK(c.amplitude(300.0) == 1.0);
    CHECK(c.amplitude(570.0) == doctest::Approx(0.5));
    const LoadCycle bad{{{0, 0}, {10, 1}, {10, 0}}};
    CHECK_THROWS(bad.validate());
}

TEST_CASE("time grid")
{
    const LoadCycle c = LoadCycle::desk();
    TimeGrid g = TimeGrid::from_cycle(c);
    CHECK(g.size() == 4);
    CHECK(g.count(Provenance::cycle) == 4);
    g.insert(30.0, Provenance::prediscretization);
    g.insert(60.0, Provenance::global_ats);  // existing station keeps its tag
    g.insert(45.0, Provenance::cutback);
    CHECK(g.size() == 6);
    CHECK(g.count(Provenance::cycle) == 4);
    CHECK(g.next_after(30.0) == 45.0);
    CHECK(g.next_after(31.0) == 45.0);
    CHECK(g.at_or_before(44.0) == 30.0);
    CHECK(g.contains(45.0));
    CHECK_THROWS_AS(g.next_after(600.0), std::out_of_range);
    g.validate(c);

    TimeGrid partial;
    partial.insert(0.0, Provenance::cycle);
    partial.insert(600.0, Provenance::cycle);
    CHECK_THROWS(partial.validate(c));

    for (Provenance p : {Provenance::cycle, Provenance::prediscretization, Provenance::global_ats, Provenance::local_ats,
                         Provenance::cutback}) {
        CHECK(provenance_from_string(to_string(p)) == p);
    }
    CHECK(to_string(Provenance::local_ats) == "local_ATS");
    CHECK(run_mode_from_string("submodel") == RunMode::submodeling);
    CHECK(run_mode_from_string(to_string(RunMode::full)) == RunMode::full);
}

TEST_CASE("warm start")
{
    const Vector P = Vector::LinSpaced(4, 1.0, 4.0);
    CHECK(warm_start_load(P, 0.5, 1.0) == 2.0 * P);
    CHECK(warm_start_load(P, 0.0, 1.0) == P);
}

TEST_CASE("elastic runs")
{
    const MaterialParams mat = fixtures::elastic_material();
    const LoadCase load = fixtures::plate_load(-50, 0.02);
    const CoupledProblem p = fixtures::small_problem(mat, load);
    const LoadCycle cycle{{{0, 0}, {10, 1}, {90, 1}, {100, 0.5}}};
    const SteppingPolicy policy = policy_with(SteppingPolicy::unlimited());
    CouplingOptions o;
    o.tol = 1e-11;
    o.absolute_floor = 1e-14;

    const TimeGrid grid = prediscretize(p.global, cycle, policy_with(1e-4));
    CHECK(grid == TimeGrid::from_cycle(cycle));

    const RunReport weak = run_weak(p, cycle, grid, policy, o);
    const RunReport full = run_full(p, cycle, grid, policy, o);
    const fixtures::SmallPlate meshes = fixtures::small_plate();
    const Model ref{"reference", meshes.reference, mat, load, {}, Model::Interface::none};
    const RunReport mono = run_monolithic(ref, cycle, grid, policy);

    // Warm start carries only the converged residual of the previous station.
    CHECK(weak.stations.size() == 3);
    const double r0 = weak.stations[0].residuals.front();
    for (std::size_t i = 1; i < weak.stations.size(); ++i) {
        CHECK(weak.stations[i].residuals.front() <= 10 * o.tol * r0);
        CHECK(weak.stations[i].gl_iterations < weak.stations[0].gl_iterations);
    }
    for (Provenance pv : {Provenance::global_ats, Provenance::local_ats, Provenance::cutback}) {
        CHECK(weak.ats_count(pv) == 0);
        CHECK(full.ats_count(pv) == 0);
    }
    CHECK(weak.stations == full.stations);
    CHECK(displacement_gap(mono.end_field, weak.end_field) < 1e-9);
    CHECK(displacement_gap(mono.end_field, full.end_field) < 1e-9);
}

TEST_CASE("viscoplastic runs on the small plate")
{
    const LoadCase load = fixtures::plate_load(-400, 0.08);
    const CoupledProblem p = fixtures::small_problem(MaterialParams{}, load);
    const LoadCycle cycle = fixtures::short_cycle();
    const SteppingPolicy policy = policy_with(1e-4);
    const CouplingOptions o;

    // The unperforated global plate stays elastic; the holed reference does not.
    const TimeGrid grid = prediscretize(p.global, cycle, policy);
    CHECK(grid == TimeGrid::from_cycle(cycle));
    const Model ref{"reference", fixtures::small_plate().reference, MaterialParams{}, load, {}, Model::Interface::none};
    std::vector<StepRecord> ref_steps;
    const TimeGrid ref_grid = prediscretize(ref, cycle, policy, &ref_steps);
    ref_grid.validate(cycle);
    CHECK(ref_grid.count(Provenance::prediscretization) > 0);
    CHECK(ref_grid.size() == ref_steps.size() + 1);

    std::vector<CoupledRunState> checkpoints;
    const RunReport weak = run_coupled(p, cycle, grid, policy, o, RunMode::weak, nullptr,
                                       [&](const CoupledRunState& s) { checkpoints.push_back(s); });
    const RunReport full = run_full(p, cycle, grid, policy, o);

    // the local zone is plastic
    {
        CHECK(weak.end.max_p_f > 0.0);
        CHECK(weak.ats_count(Provenance::local_ats) > 0);
    }
    // grid invariants
    {
        const TimeGrid& wg = weak.model("global").grid;
        CHECK(wg.count(Provenance::local_ats) == 0);
        for (const auto& m : weak.models) m.grid.validate(cycle);
        for (const auto& m : full.models) m.grid.validate(cycle);
        CHECK(as_set(full.model("global").grid) == as_set(full.model("local:foot").grid));
        CHECK(full.gl_iterations_total() >= weak.gl_iterations_total());
        for (const auto& s : weak.stations) {
            CHECK(s.converged);
            CHECK(s.t_end > s.t_start);
        }
    }
    // checkpoint resume is bit-identical
    {
        REQUIRE(checkpoints.size() == weak.stations.size());
        for (std::size_t k : {std::size_t{0}, checkpoints.size() / 2, checkpoints.size() - 2}) {
            CAPTURE(k);
            const RunReport resumed = run_coupled(p, cycle, grid, policy, o, RunMode::weak, &checkpoints[k]);
            CHECK(without_wall_time(resumed) == without_wall_time(weak));
        }
    }
    // runs are deterministic
    {
        CHECK(without_wall_time(run_full(p, cycle, grid, policy, o)) == without_wall_time(full));
    }
    // submodeling on the prediscretized grid adds no global steps
    {
        const RunReport sub = run_submodeling(p, cycle, grid, policy);
        CHECK(sub.ats_count(Provenance::global_ats) == 0);
        CHECK(sub.model("global").grid == grid);
    }
}

TEST_CASE("submodeling equals coupling when the local model is the auxiliary model")
{
    const fixtures::SmallPlate meshes = fixtures::small_plate();
    const std::array<double, 4> box{0, 0, 4, 4};
    Mesh aux = submesh(meshes.global, elements_in_box(meshes.global, box));
    label_plate_boundary(aux, 12, 4);
    const CoupledProblem p = CoupledProblem::build(make_partition(meshes.global, {{"foot", box, aux}}), MaterialParams{},
                                                   fixtures::plate_load(-400, 0.08));
    const LoadCycle cycle = fixtures::short_cycle();
    const SteppingPolicy policy = policy_with(1e-4);
    const TimeGrid grid = prediscretize(p.global, cycle, policy);
    const RunReport sub = run_submodeling(p, cycle, grid, policy);
    const RunReport full = run_full(p, cycle, grid, policy, CouplingOptions{});
    CHECK(displacement_gap(full.end_field, sub.end_field) < 1e-6);
    CHECK(sub.end.max_p_f == doctest::Approx(full.end.max_p_f).epsilon(1e-4));
}
