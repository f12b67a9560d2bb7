#include "glc/meshgen.hpp"
#include "glc/solver.hpp"

#include "doctest.h"

#include <cmath>

using namespace glc;

namespace {

SteppingPolicy with_dp(double dp_max)
{
    SteppingPolicy p;
    p.dp_max = dp_max;
    return p;
}

bool same_steps(const std::vector<StepRecord>& a, const std::vector<StepRecord>& b)
{
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].t_start != b[i].t_start || a[i].t_end != b[i].t_end || a[i].newton_iters != b[i].newton_iters ||
            a[i].cutbacks() != b[i].cutbacks() || a[i].dp_observed != b[i].dp_observed) {
            return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("step controller")
{
    const SteppingPolicy policy = with_dp(1e-4);

    SUBCASE("dp violation scales the step by dp_max / dp")
    {
        StepController c(policy, 0.0, 10.0, 1.0);
        c.reject(CutbackCause::dp_exceeded, 1.0, 2.5e-4);
        CHECK(c.next_dt() == doctest::Approx(0.4));
        CHECK(c.last_reduction() == CutbackCause::dp_exceeded);
    }
    SUBCASE("a violation by round-off still shrinks the step")
    {
        StepController c(policy, 0.0, 10.0, 1.0);
        c.reject(CutbackCause::dp_exceeded, 1.0, std::nextafter(1e-4, 1.0));
        CHECK(c.next_dt() == doctest::Approx(0.999));
    }
    SUBCASE("divergence divides by 4, slow convergence by 2")
    {
        StepController c(policy, 0.0, 10.0, 1.0);
        c.reject(CutbackCause::divergence, 1.0);
        CHECK(c.next_dt() == doctest::Approx(0.25));
        c.reject(CutbackCause::slow_convergence, 0.25);
        CHECK(c.next_dt() == doctest::Approx(0.125));
    }
    SUBCASE("growth after two fast steps, clamped to the target")
    {
        StepController c(policy, 0.0, 4.0, 1.0);
        c.accept(c.next_dt(), 3);
        CHECK(c.next_dt() == doctest::Approx(1.0));
        c.accept(c.next_dt(), 5);
        CHECK(c.next_dt() == doctest::Approx(1.5));
        c.accept(c.next_dt(), 9);  // slow step resets the count
        CHECK(c.time() == doctest::Approx(3.5));
        CHECK(c.next_dt() == doctest::Approx(0.5));
        c.accept(c.next_dt(), 2);
        CHECK(c.done());
        CHECK(c.time() == 4.0);
    }
    SUBCASE("floor")
    {
        StepController c(policy, 0.0, 1.0);
        CHECK(c.dt_min() == doctest::Approx(1e-6));
        double dt = c.next_dt();
        CHECK_THROWS_AS(
            [&] {
                for (int i = 0; i < 20; ++i) {
                    c.reject(CutbackCause::divergence, dt);
                    dt = c.next_dt();
                }
            }(),
            StepFailure);
    }
}

TEST_CASE("elastic tension test: one step, linear curve")
{
    MaterialParams p;
    p.R = 1e9;
    p.K_s = 1e12;
    const TensionCurve c = tension_test(p, 1e-3, 0.01, with_dp(SteppingPolicy::unlimited()));
    CHECK(c.step_count() == 1);
    CHECK(c.steps[0].cutbacks() == 0);
    // Plane strain with free lateral contraction: sigma = E / (1 - nu^2) eps.
    CHECK(c.stress.back() == doctest::Approx(p.E / (1 - p.nu * p.nu) * 0.01).epsilon(1e-10));
}

TEST_CASE("viscoplastic tension test")
{
    const MaterialParams p;
    const TensionCurve coarse = tension_test(p, 1e-3, 0.01, with_dp(1e-3));
    const TensionCurve fine = tension_test(p, 1e-3, 0.01, with_dp(1e-4));
    const TensionCurve overkill = tension_test(p, 1e-3, 0.01, with_dp(1e-5));

    for (const auto* c : {&coarse, &fine, &overkill}) {
        for (const auto& s : c->steps) CHECK(s.t_end > s.t_start);
    }
    for (const auto& s : fine.steps) CHECK(s.dp_observed <= 1e-4);
    CHECK(fine.step_count() >= coarse.step_count());
    CHECK(overkill.step_count() >= fine.step_count());
    CHECK(std::abs(final_stress_error(fine, overkill)) < std::abs(final_stress_error(coarse, overkill)));
    CHECK(std::abs(final_stress_error(fine, overkill)) < 6e-3);
    CHECK(final_stress_error(overkill, overkill) == 0.0);

    SUBCASE("deterministic")
    {
        const TensionCurve again = tension_test(p, 1e-3, 0.01, with_dp(1e-4));
        CHECK(same_steps(again.steps, fine.steps));
        CHECK(again.stress == fine.stress);
    }
}

TEST_CASE("solve_increment on a plate")
{
    const DeskMeshes dm = desk_meshes(DeskSpec{}, 2);
    Model m;
    m.name = "plate";
    m.mesh = dm.global;
    m.load.pressures = {{"tip", -320.0}};
    m.load.body = {0.08, Point::Zero(), Point(1, 0)};
    m.load.dirichlet = {{"foot", true, false, 0.0}, {"pin", false, true, 0.0}};
    IncrementData ramp;
    ramp.amplitude = [](double t) { return t / 60.0; };

    SUBCASE("purely elastic load step")
    {
        m.material.R = 1e9;
        m.material.K_s = 1e12;
        const IncrementResult r = solve_increment(m, FieldState::zero(m.mesh), 0.0, 60.0, with_dp(1e-4), ramp);
        CHECK(r.steps.size() == 1);
        CHECK(r.steps[0].cutbacks() == 0);
        CHECK(r.dp_max == 0.0);
    }
    SUBCASE("viscoplastic ramp: dp control and equilibrium")
    {
        const SteppingPolicy policy = with_dp(1e-4);
        const IncrementResult r = solve_increment(m, FieldState::zero(m.mesh), 0.0, 60.0, policy, ramp);
        CHECK(r.steps.size() > 1);
        CHECK(r.steps.back().t_end == 60.0);
        for (const auto& s : r.steps) CHECK(s.dp_observed <= policy.dp_max);
        for (std::size_t i = 1; i < r.steps.size(); ++i) CHECK(r.steps[i].t_start == r.steps[i - 1].t_end);

        const auto cons = dirichlet_dofs(m.mesh, m.load);
        Vector free = r.residual;
        for (int d : cons.dofs) free[d] = 0.0;
        CHECK(free.norm() < policy.newton_tol * assemble_external(m.mesh, m.load, 1.0).norm());
    }
}
