#pragma once

// Mesh generators for the plate scenarios: structured rectangles, perforated
// patches built from square cells (O-grid around each hole), conformal
// merging and seeded perturbation.

#include "glc/mesh.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace glc {

/// nx x ny structured quadrilaterals on [x0,x1]x[y0,y1].
Mesh structured_rectangle(double x0, double y0, double x1, double y1, int nx, int ny);

struct PatchSpec {
    Point origin = Point::Zero();
    double cell = 5.0;         // cell side [mm]
    int cells_x = 4;
    int cells_y = 4;
    int per_side = 2;          // element edges per cell side
    std::vector<std::pair<int, int>> hole_cells;  // (i, j) cell indices
    double radius = 1.2;       // hole radius [mm]
    int radial_layers = 2;
};

/// Square cells, structured where intact and O-grid around a centred hole
/// elsewhere. Nodes on shared cell edges are merged.
Mesh perforated_patch(const PatchSpec& spec);

/// Conformal union; nodes closer than `tol` are merged. Sets are united by
/// name.
Mesh merge_meshes(const Mesh& a, const Mesh& b, double tol);

/// Plate boundary sets: node sets "foot" (x = 0) and "pin" (the node at the
/// origin), side sets "tip" (x = length), "top" and "bottom".
void label_plate_boundary(Mesh& mesh, double length, double height);

/// Random interior jitter (fraction of the smallest edge) plus sliding of the
/// given interface nodes along the straight interface polyline, endpoints of
/// the polyline fixed. Deterministic for a given seed.
Mesh perturb_local(const Mesh& local, const std::vector<int>& interface_nodes, std::uint64_t seed,
                   double fraction = 0.2);

/// Plate with a perforated zone of interest at the foot end (x = 0).
struct DeskSpec {
    double length = 60.0;
    double height = 20.0;
    double element = 2.5;       // global element size
    double zone_length = 20.0;  // zone of interest [0, zone_length] x [0, height]
    double cell = 5.0;
    std::vector<std::pair<int, int>> hole_cells{{1, 1}, {1, 2}, {1, 3}};
    double radius = 1.2;
    int radial_layers = 2;
};

struct DeskMeshes {
    Mesh global;     // hole-free
    Mesh local;      // perforated zone with `per_side` element edges per cell side
    Mesh reference;  // complement merged with the matched local mesh
};

/// The reference mesh always uses the local discretization that matches the
/// global element size on the interface.
DeskMeshes desk_meshes(const DeskSpec& spec, int per_side);

}  // namespace glc
