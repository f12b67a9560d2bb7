#include "glc/scenario.hpp"

#include "doctest.h"
#include "fixtures.hpp"

using namespace glc;

// Weak coupling with Aitken on the shipped desk scenarios. Slow (about a
// minute in total).
TEST_CASE("aitken residuals do not grow after the second iteration")
{
    for (const char* name : {"desk", "desk_nonmatched"}) {
        CAPTURE(name);
        const Scenario s = fixtures::scenario(name);
        REQUIRE(s.coupling.acceleration == Acceleration::aitken);
        const TimeGrid grid = prediscretize(global_model(s), s.cycle, s.policy);
        const RunReport r = run_weak(build_problem(s), s.cycle, grid, s.policy, s.coupling);

        for (const auto& st : r.stations) {
            CAPTURE(st.t_end);
            CHECK(st.converged);
            for (std::size_t k = 2; k < st.residuals.size(); ++k) CHECK(st.residuals[k] <= st.residuals[k - 1]);
        }
        for (const auto& m : r.models) m.grid.validate(s.cycle);
        CHECK(r.end.max_p_f > 0.0);
    }
}
