// glc-mesh: writes the plate meshes used by the shipped scenarios.
//
//   glc-mesh desk --per-side 2 --out scenarios/meshes
//       global.json, local_k2.json, reference.json
//   glc-mesh rect --x1 4 --y1 2 --nx 4 --ny 2 --out mesh.json
//       boundary sets of the plate [0, x1] x [0, y1] unless --plate-length/--plate-height

#include "glc/meshgen.hpp"

#include "CLI11.hpp"
#include <fmt/format.h>

#include <filesystem>

namespace fs = std::filesystem;
using namespace glc;

int main(int argc, char** argv)
{
    CLI::App app{"Mesh generator for the plate scenarios"};
    app.require_subcommand(1);

    DeskSpec spec;
    int per_side = 2;
    std::string out = ".";
    auto* desk = app.add_subcommand("desk", "plate with a perforated zone at the clamped end");
    desk->add_option("--per-side", per_side, "local element edges per cell side")->check(CLI::PositiveNumber);
    desk->add_option("--length", spec.length);
    desk->add_option("--height", spec.height);
    desk->add_option("--element", spec.element, "global element size");
    desk->add_option("--zone-length", spec.zone_length);
    desk->add_option("--radius", spec.radius, "hole radius");
    desk->add_option("--out", out, "output directory");

    double x0 = 0, y0 = 0, x1 = 1, y1 = 1;
    double plate_length = 0, plate_height = 0;
    int nx = 1, ny = 1;
    std::string rect_out = "mesh.json";
    auto* rect = app.add_subcommand("rect", "structured rectangle with plate boundary sets");
    rect->add_option("--x0", x0);
    rect->add_option("--y0", y0);
    rect->add_option("--x1", x1);
    rect->add_option("--y1", y1);
    rect->add_option("--nx", nx)->check(CLI::PositiveNumber);
    rect->add_option("--ny", ny)->check(CLI::PositiveNumber);
    rect->add_option("--plate-length", plate_length, "plate extent used for the boundary sets (default x1)");
    rect->add_option("--plate-height", plate_height, "plate extent used for the boundary sets (default y1)");
    rect->add_option("--out", rect_out, "output file");

    CLI11_PARSE(app, argc, argv);

    try {
        if (desk->parsed()) {
            const DeskMeshes m = desk_meshes(spec, per_side);
            fs::create_directories(out);
            write_mesh(m.global, fs::path(out) / "global.json");
            write_mesh(m.local, fs::path(out) / fmt::format("local_k{}.json", per_side));
            write_mesh(m.reference, fs::path(out) / "reference.json");
            fmt::print("global {} elements, local {} elements, reference {} elements\n", m.global.num_elements(),
                       m.local.num_elements(), m.reference.num_elements());
        } else {
            Mesh m = structured_rectangle(x0, y0, x1, y1, nx, ny);
            label_plate_boundary(m, plate_length > 0 ? plate_length : x1, plate_height > 0 ? plate_height : y1);
            write_mesh(m, rect_out);
            fmt::print("{} elements\n", m.num_elements());
        }
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
    return 0;
}
