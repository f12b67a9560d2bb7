#include "glc/fem.hpp"

#include "glc/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <optional>

namespace glc {

FieldState FieldState::zero(const Mesh& mesh)
{
    FieldState f;
    f.u = Vector::Zero(mesh.num_dofs());
    f.gp_states.assign(mesh.num_gauss_points(), MaterialState{});
    f.gp_stresses.assign(mesh.num_gauss_points(), StressPoint{});
    return f;
}

namespace {

using Mat48 = Eigen::Matrix<double, 4, 8>;
using Vec8 = Eigen::Matrix<double, 8, 1>;
using Mat8 = Eigen::Matrix<double, 8, 8>;

struct ElementResult {
    Vec8 f = Vec8::Zero();
    Mat8 k = Mat8::Zero();
    std::array<MaterialState, 4> states;
    std::array<StressPoint, 4> stresses;
    double dp_max = 0.0;
};

struct GaussGeometry {
    Mat48 b;
    double weight;  // det J times quadrature weight (1 for the 2x2 rule)
};

GaussGeometry gauss_geometry(const Mesh& mesh, int e, int gp)
{
    const auto& el = mesh.elements[e];
    Eigen::Matrix<double, 4, 2> xe;
    for (int a = 0; a < 4; ++a) {
        xe.row(a) = mesh.nodes[el[a]].transpose();
    }
    const auto& q = quad4::kGaussPoints[gp];
    const Eigen::Matrix<double, 2, 4> dn_ref = quad4::shape_derivatives(q[0], q[1]);
    const Eigen::Matrix2d jac = dn_ref * xe;
    const Eigen::Matrix<double, 2, 4> dn = jac.inverse() * dn_ref;
    GaussGeometry g;
    g.b.setZero();
    for (int a = 0; a < 4; ++a) {
        g.b(0, 2 * a) = dn(0, a);
        g.b(1, 2 * a + 1) = dn(1, a);
        g.b(3, 2 * a) = dn(1, a) / kSqrt2;
        g.b(3, 2 * a + 1) = dn(0, a) / kSqrt2;
    }
    g.weight = jac.determinant();
    return g;
}

Vec8 element_dofs(const Mesh& mesh, int e, const Vector& u)
{
    Vec8 ue;
    const auto& el = mesh.elements[e];
    for (int a = 0; a < 4; ++a) {
        ue[2 * a] = u[2 * el[a]];
        ue[2 * a + 1] = u[2 * el[a] + 1];
    }
    return ue;
}

ElementResult element_kernel(const Mesh& mesh, const MaterialParams& params, const Vector& u,
                             const FieldState& prev, double dt, const AssemblyOptions& options, int e)
{
    ElementResult r;
    const Vec8 ue = element_dofs(mesh, e, u);
    const Vec8 ue_old = element_dofs(mesh, e, prev.u);
    for (int gp = 0; gp < 4; ++gp) {
        const GaussGeometry g = gauss_geometry(mesh, e, gp);
        const int id = 4 * e + gp;
        const Vec4 strain_new = g.b * ue;
        const Vec4 strain_old = g.b * ue_old;
        const PointUpdate upd =
            integrate_point(prev.gp_states[id], strain_old, strain_new, dt, params, options.integration);
        r.f += g.weight * g.b.transpose() * upd.stress.sigma;
        if (options.tangent) {
            r.k += g.weight * g.b.transpose() * upd.tangent * g.b;
        }
        r.states[gp] = upd.state;
        r.stresses[gp] = upd.stress;
        r.dp_max = std::max(r.dp_max, upd.dp_f);
    }
    return r;
}

InternalAssembly gather(const Mesh& mesh, const std::vector<ElementResult>& results, bool tangent)
{
    InternalAssembly out;
    out.f_int = Vector::Zero(mesh.num_dofs());
    out.states.resize(mesh.num_gauss_points());
    out.stresses.resize(mesh.num_gauss_points());
    std::vector<Eigen::Triplet<double>> triplets;
    if (tangent) {
        triplets.reserve(64 * results.size());
    }
    for (int e = 0; e < mesh.num_elements(); ++e) {
        const auto& el = mesh.elements[e];
        const ElementResult& r = results[e];
        std::array<int, 8> dofs{};
        for (int a = 0; a < 4; ++a) {
            dofs[2 * a] = 2 * el[a];
            dofs[2 * a + 1] = 2 * el[a] + 1;
        }
        for (int i = 0; i < 8; ++i) {
            out.f_int[dofs[i]] += r.f[i];
        }
        if (tangent) {
            for (int j = 0; j < 8; ++j) {
                for (int i = 0; i < 8; ++i) {
                    triplets.emplace_back(dofs[i], dofs[j], r.k(i, j));
                }
            }
        }
        for (int gp = 0; gp < 4; ++gp) {
            out.states[4 * e + gp] = r.states[gp];
            out.stresses[4 * e + gp] = r.stresses[gp];
        }
        if (r.dp_max > out.dp_max) {
            out.dp_max = r.dp_max;
            out.dp_max_element = e;
        }
    }
    if (tangent) {
        out.stiffness.resize(mesh.num_dofs(), mesh.num_dofs());
        out.stiffness.setFromTriplets(triplets.begin(), triplets.end());
    }
    return out;
}

[[noreturn]] void rethrow_element(int e, const std::exception_ptr& error)
{
    try {
        std::rethrow_exception(error);
    } catch (const OverflowGuard& ex) {
        throw ElementFailure(ElementFailure::Kind::overflow, e, fmt::format("element {}: {}", e, ex.what()));
    } catch (const NoConvergence& ex) {
        throw ElementFailure(ElementFailure::Kind::no_convergence, e,
                             fmt::format("element {}: {}", e, ex.what()));
    }
}

}  // namespace

InternalAssembly assemble_internal(const Mesh& mesh, const MaterialParams& params, const Vector& u,
                                   const FieldState& prev, double dt, const AssemblyOptions& options)
{
    const int ne = mesh.num_elements();
    std::vector<ElementResult> results(ne);
    std::vector<std::exception_ptr> errors(ne);
#pragma omp parallel for schedule(static)
    for (int e = 0; e < ne; ++e) {
        try {
            results[e] = element_kernel(mesh, params, u, prev, dt, options, e);
        } catch (...) {
            errors[e] = std::current_exception();
        }
    }
    for (int e = 0; e < ne; ++e) {
        if (errors[e]) {
            rethrow_element(e, errors[e]);
        }
    }
    return gather(mesh, results, options.tangent);
}

InternalAssembly assemble_internal_serial(const Mesh& mesh, const MaterialParams& params, const Vector& u,
                                          const FieldState& prev, double dt, const AssemblyOptions& options)
{
    std::vector<ElementResult> results(mesh.num_elements());
    for (int e = 0; e < mesh.num_elements(); ++e) {
        try {
            results[e] = element_kernel(mesh, params, u, prev, dt, options, e);
        } catch (...) {
            rethrow_element(e, std::current_exception());
        }
    }
    return gather(mesh, results, options.tangent);
}

Vector assemble_body_force(const Mesh& mesh, const BodyForce& body, double amplitude, int order)
{
    Vector f = Vector::Zero(mesh.num_dofs());
    if (body.coefficient == 0.0 || amplitude == 0.0) {
        return f;
    }
    // Gauss-Legendre abscissae/weights for orders 1..4.
    static const std::map<int, std::vector<std::pair<double, double>>> rules{
        {1, {{0.0, 2.0}}},
        {2, {{-0.57735026918962576451, 1.0}, {0.57735026918962576451, 1.0}}},
        {3, {{-0.77459666924148337704, 5.0 / 9.0}, {0.0, 8.0 / 9.0}, {0.77459666924148337704, 5.0 / 9.0}}},
        {4,
         {{-0.86113631159405257522, 0.34785484513745385737},
          {-0.33998104358485626480, 0.65214515486254614263},
          {0.33998104358485626480, 0.65214515486254614263},
          {0.86113631159405257522, 0.34785484513745385737}}},
    };
    const auto& rule = rules.at(order);
    const Point dir = body.direction.normalized();
    for (int e = 0; e < mesh.num_elements(); ++e) {
        const auto& el = mesh.elements[e];
        Eigen::Matrix<double, 4, 2> xe;
        for (int a = 0; a < 4; ++a) {
            xe.row(a) = mesh.nodes[el[a]].transpose();
        }
        for (const auto& [xi, wx] : rule) {
            for (const auto& [eta, wy] : rule) {
                const auto n = quad4::shape(xi, eta);
                const double det = (quad4::shape_derivatives(xi, eta) * xe).determinant();
                Point x = Point::Zero();
                for (int a = 0; a < 4; ++a) {
                    x += n[a] * mesh.nodes[el[a]];
                }
                const Point force = amplitude * body.coefficient * (x - body.origin).dot(dir) * dir;
                for (int a = 0; a < 4; ++a) {
                    f[2 * el[a]] += wx * wy * det * n[a] * force.x();
                    f[2 * el[a] + 1] += wx * wy * det * n[a] * force.y();
                }
            }
        }
    }
    return f;
}

Vector assemble_external(const Mesh& mesh, const LoadCase& load, double amplitude)
{
    Vector f = Vector::Zero(mesh.num_dofs());
    for (const auto& p : load.pressures) {
        const auto& edges = mesh.side_set(p.side_set);
        for (const auto& edge : edges) {
            const Point t = mesh.nodes[edge.b] - mesh.nodes[edge.a];
            // Outward normal times length for an edge with the domain on its left.
            const Point n_len(t.y(), -t.x());
            const Point nodal = -0.5 * amplitude * p.value * n_len;
            for (int id : {edge.a, edge.b}) {
                f[2 * id] += nodal.x();
                f[2 * id + 1] += nodal.y();
            }
        }
    }
    f += assemble_body_force(mesh, load.body, amplitude, 2);
    return f;
}

Vector extract_reactions(const Mesh& mesh, const MaterialParams& params, const FieldState& field,
                         const LoadCase& load, double amplitude, double dt, const FieldState& prev,
                         const std::vector<int>& nodes)
{
    AssemblyOptions options;
    options.tangent = false;
    const InternalAssembly a = assemble_internal(mesh, params, field.u, prev, dt, options);
    const Vector residual = a.f_int - assemble_external(mesh, load, amplitude);
    return gather_nodes(residual, nodes);
}

Vector gather_nodes(const Vector& full, const std::vector<int>& nodes)
{
    Vector out(2 * nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        out[2 * i] = full[2 * nodes[i]];
        out[2 * i + 1] = full[2 * nodes[i] + 1];
    }
    return out;
}

void scatter_add_nodes(Vector& full, const std::vector<int>& nodes, const Vector& values)
{
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        full[2 * nodes[i]] += values[2 * i];
        full[2 * nodes[i] + 1] += values[2 * i + 1];
    }
}

DirichletDofs dirichlet_dofs(const Mesh& mesh, const LoadCase& load)
{
    std::map<int, double> constrained;
    auto add = [&](int dof, double value, const std::string& set) {
        auto [it, inserted] = constrained.emplace(dof, value);
        if (!inserted && it->second != value) {
            throw std::invalid_argument(
                fmt::format("conflicting Dirichlet values on dof {} (set '{}')", dof, set));
        }
    };
    for (const auto& bc : load.dirichlet) {
        for (int id : mesh.node_set(bc.node_set)) {
            if (bc.x) add(2 * id, bc.value, bc.node_set);
            if (bc.y) add(2 * id + 1, bc.value, bc.node_set);
        }
    }
    DirichletDofs out;
    for (const auto& [dof, value] : constrained) {
        out.dofs.push_back(dof);
        out.values.push_back(value);
    }
    return out;
}

}  // namespace glc
