#pragma once

// Plane-strain Q4 assembly: internal forces and consistent tangent, external
// loads on the undeformed geometry, reaction extraction. Units MPa-mm-N-s,
// unit thickness.

#include "glc/material.hpp"
#include "glc/mesh.hpp"

#include <Eigen/Sparse>

#include <string>
#include <vector>

namespace glc {

using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

/// Normal pressure on a side set; positive values push against the outward
/// normal.
struct Pressure {
    std::string side_set;
    double value = 0.0;
};

/// Centrifugal-type body force f(X) = coefficient * ((X - origin).dir) dir,
/// with coefficient = rho*omega^2 [N/mm^4].
struct BodyForce {
    double coefficient = 0.0;
    Point origin = Point::Zero();
    Point direction = Point(1.0, 0.0);
};

struct DirichletBC {
    std::string node_set;
    bool x = false;
    bool y = false;
    double value = 0.0;  // scaled by the load amplitude
};

struct LoadCase {
    std::vector<Pressure> pressures;
    BodyForce body;
    std::vector<DirichletBC> dirichlet;
};

/// Converged (or trial) field of one model.
struct FieldState {
    Vector u;
    std::vector<MaterialState> gp_states;
    std::vector<StressPoint> gp_stresses;

    static FieldState zero(const Mesh& mesh);
};

struct InternalAssembly {
    Vector f_int;
    SparseMatrix stiffness;  // empty when the tangent was not requested
    std::vector<MaterialState> states;
    std::vector<StressPoint> stresses;
    double dp_max = 0.0;
    int dp_max_element = -1;
};

struct AssemblyOptions {
    bool tangent = true;
    IntegrationOptions integration;
};

/// Galerkin assembly over all elements, integrating every Gauss point from
/// `prev` over `dt`. Elements are processed in parallel; the scatter is
/// ordered so the result does not depend on the thread schedule.
/// Throws ElementFailure carrying the lowest failing element id.
InternalAssembly assemble_internal(const Mesh& mesh, const MaterialParams& params, const Vector& u,
                                   const FieldState& prev, double dt, const AssemblyOptions& options = {});

/// Single-threaded reference of assemble_internal.
InternalAssembly assemble_internal_serial(const Mesh& mesh, const MaterialParams& params, const Vector& u,
                                          const FieldState& prev, double dt,
                                          const AssemblyOptions& options = {});

/// Consistent nodal loads from pressures and body force, scaled by
/// `amplitude`. Throws UnknownSet.
Vector assemble_external(const Mesh& mesh, const LoadCase& load, double amplitude);

/// Same body-force load evaluated with an n x n Gauss rule (used to check
/// the default 2 x 2 integration).
Vector assemble_body_force(const Mesh& mesh, const BodyForce& body, double amplitude, int order);

/// Nodal reactions lambda_n = f_int,n - f_ext,n at the requested nodes,
/// returned interleaved (x, y) per node.
Vector extract_reactions(const Mesh& mesh, const MaterialParams& params, const FieldState& field,
                         const LoadCase& load, double amplitude, double dt, const FieldState& prev,
                         const std::vector<int>& nodes);

/// Gathers the (x, y) entries of `full` at `nodes`.
Vector gather_nodes(const Vector& full, const std::vector<int>& nodes);
void scatter_add_nodes(Vector& full, const std::vector<int>& nodes, const Vector& values);

/// Constrained degrees of freedom and their values at amplitude 1.
struct DirichletDofs {
    std::vector<int> dofs;
    std::vector<double> values;
};
DirichletDofs dirichlet_dofs(const Mesh& mesh, const LoadCase& load);

}  // namespace glc
