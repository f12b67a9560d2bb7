#pragma once

#include "glc/meshgen.hpp"
#include "glc/scenario.hpp"

#include <filesystem>

namespace fixtures {

inline std::filesystem::path source_dir() { return GLC_SOURCE_DIR; }
inline std::filesystem::path scenario_path(const std::string& name) { return source_dir() / "scenarios" / (name + ".json"); }
inline glc::Scenario scenario(const std::string& name) { return glc::Scenario::read(scenario_path(name)); }

inline glc::MaterialParams elastic_material()
{
    glc::MaterialParams p;
    p.R = 1e9;
    p.K_s = 1e12;
    return p;
}

inline glc::LoadCase plate_load(double pressure, double body)
{
    glc::LoadCase load;
    load.pressures = {{"tip", pressure}};
    load.body = {body, glc::Point::Zero(), glc::Point(1, 0)};
    load.dirichlet = {{"foot", true, false, 0.0}, {"pin", false, true, 0.0}};
    return load;
}

/// Small viscoplastic plate: 12 x 4 global, one holed 4 x 4 zone at the foot.
struct SmallPlate {
    glc::Mesh global;
    glc::Mesh local;
    glc::Mesh reference;
};

inline SmallPlate small_plate()
{
    SmallPlate s;
    s.global = glc::structured_rectangle(0, 0, 12, 4, 6, 2);
    glc::label_plate_boundary(s.global, 12, 4);
    glc::PatchSpec spec;
    spec.cell = 4.0;
    spec.cells_x = 1;
    spec.cells_y = 1;
    spec.per_side = 2;
    spec.hole_cells = {{0, 0}};
    spec.radius = 1.0;
    s.local = glc::perforated_patch(spec);
    glc::label_plate_boundary(s.local, 12, 4);
    const auto complement = glc::submesh(
        s.global, [&] {
            std::vector<int> c;
            for (int e = 0; e < s.global.num_elements(); ++e) {
                if (glc::element_centroid(s.global, e).x() > 4.0) c.push_back(e);
            }
            return c;
        }());
    s.reference = glc::merge_meshes(complement, s.local, 1e-9);
    glc::label_plate_boundary(s.reference, 12, 4);
    return s;
}

inline glc::CoupledProblem small_problem(const glc::MaterialParams& material, const glc::LoadCase& load)
{
    const SmallPlate s = small_plate();
    return glc::CoupledProblem::build(glc::make_partition(s.global, {{"foot", {0, 0, 4, 4}, s.local}}), material, load);
}

inline glc::LoadCycle short_cycle() { return {{{0, 0}, {10, 1}, {90, 1}, {100, 0}}}; }

}  // namespace fixtures
