#include "glc/fem.hpp"
#include "glc/meshgen.hpp"
#include "glc/solver.hpp"

#include "doctest.h"

#include <cmath>

using namespace glc;

namespace {

MaterialParams elastic_material()
{
    MaterialParams p;
    p.R = 1e9;
    p.K_s = 1e12;
    return p;
}

SteppingPolicy unlimited()
{
    SteppingPolicy p;
    p.dp_max = SteppingPolicy::unlimited();
    return p;
}

IncrementData ramp()
{
    IncrementData d;
    d.amplitude = [](double t) { return t; };
    return d;
}

// Independent plane-strain Q4 stiffness: B matrices built from explicit
// shape-function derivatives, 2x2 Gauss, engineering shear.
Eigen::Matrix<double, 8, 8> oracle_stiffness(const std::array<Point, 4>& x, const MaterialParams& p)
{
    const double lam = p.E * p.nu / ((1 + p.nu) * (1 - 2 * p.nu));
    const double mu = p.E / (2 * (1 + p.nu));
    Eigen::Matrix3d D;
    D << lam + 2 * mu, lam, 0, lam, lam + 2 * mu, 0, 0, 0, mu;
    Eigen::Matrix<double, 8, 8> K = Eigen::Matrix<double, 8, 8>::Zero();
    const double g = 1.0 / std::sqrt(3.0);
    const double xi_n[4] = {-1, 1, 1, -1};
    const double eta_n[4] = {-1, -1, 1, 1};
    for (double xi : {-g, g}) {
        for (double eta : {-g, g}) {
            Eigen::Matrix<double, 2, 4> dN;
            for (int a = 0; a < 4; ++a) {
                dN(0, a) = 0.25 * xi_n[a] * (1 + eta * eta_n[a]);
                dN(1, a) = 0.25 * eta_n[a] * (1 + xi * xi_n[a]);
            }
            Eigen::Matrix2d J = Eigen::Matrix2d::Zero();
            for (int a = 0; a < 4; ++a) {
                J(0, 0) += dN(0, a) * x[a].x();
                J(0, 1) += dN(0, a) * x[a].y();
                J(1, 0) += dN(1, a) * x[a].x();
                J(1, 1) += dN(1, a) * x[a].y();
            }
            const Eigen::Matrix<double, 2, 4> dX = J.inverse() * dN;
            Eigen::Matrix<double, 3, 8> B = Eigen::Matrix<double, 3, 8>::Zero();
            for (int a = 0; a < 4; ++a) {
                B(0, 2 * a) = dX(0, a);
                B(1, 2 * a + 1) = dX(1, a);
                B(2, 2 * a) = dX(1, a);
                B(2, 2 * a + 1) = dX(0, a);
            }
            K += B.transpose() * D * B * J.determinant();
        }
    }
    return K;
}

Mesh distorted_patch()
{
    Mesh m = structured_rectangle(0, 0, 3, 3, 3, 3);
    // Interior nodes (4x4 lattice, row-major) moved off the lattice.
    const std::array<std::pair<int, Point>, 4> moves{
        {{5, {1.2, 0.85}}, {6, {2.1, 1.25}}, {9, {0.8, 2.2}}, {10, {1.9, 1.8}}}};
    for (const auto& [n, p] : moves) {
        REQUIRE((m.nodes[n] - Point(n % 4, n / 4)).norm() < 1e-12);
        m.nodes[n] = p;
    }
    m.validate();
    return m;
}

bool on_boundary(const Point& p, double size)
{
    const double tol = 1e-12;
    return p.x() < tol || p.y() < tol || p.x() > size - tol || p.y() > size - tol;
}

}  // namespace

TEST_CASE("undeformed body: zero internal force, elastic stiffness")
{
    const MaterialParams p;
    Mesh m;
    m.nodes = {{0, 0}, {2, 0.2}, {2.3, 1.7}, {-0.1, 1.2}};
    m.elements = {{0, 1, 2, 3}};
    const InternalAssembly a = assemble_internal(m, p, Vector::Zero(8), FieldState::zero(m), 1.0);
    CHECK(a.f_int.norm() == 0.0);
    const Eigen::MatrixXd K(a.stiffness);
    const auto oracle = oracle_stiffness({m.nodes[0], m.nodes[1], m.nodes[2], m.nodes[3]}, p);
    CHECK((K - oracle).norm() <= 1e-12 * oracle.norm());
    CHECK((K - K.transpose()).norm() <= 1e-12 * oracle.norm());
}

TEST_CASE("affine displacement gives constant stress on one element")
{
    const MaterialParams p = elastic_material();
    Mesh m;
    m.nodes = {{0, 0}, {1.5, 0.1}, {1.3, 1.4}, {0.2, 0.9}};
    m.elements = {{0, 1, 2, 3}};
    Vector u(8);
    for (int n = 0; n < 4; ++n) {
        u[2 * n] = 1e-4 * m.nodes[n].x() + 2e-4 * m.nodes[n].y();
        u[2 * n + 1] = -3e-4 * m.nodes[n].x() + 5e-5 * m.nodes[n].y();
    }
    const InternalAssembly a = assemble_internal(m, p, u, FieldState::zero(m), 1.0);
    const Vec4 exact = elastic_tangent(p) * strain_from_engineering(1e-4, 5e-5, 2e-4 - 3e-4);
    for (const auto& s : a.stresses) CHECK((s.sigma - exact).norm() <= 1e-10 * exact.norm());
}

TEST_CASE("elastic patch test on a distorted mesh")
{
    const MaterialParams p = elastic_material();
    Model model;
    model.name = "patch";
    model.mesh = distorted_patch();
    model.material = p;
    auto ux = [](const Point& x) { return 1e-3 * x.x() - 4e-4 * x.y() + 1e-3; };
    auto uy = [](const Point& x) { return 2e-4 * x.x() + 6e-4 * x.y() - 2e-3; };
    for (int n = 0; n < model.mesh.num_nodes(); ++n) {
        const Point& x = model.mesh.nodes[n];
        if (!on_boundary(x, 3.0)) continue;
        const std::string set = "n" + std::to_string(n);
        model.mesh.node_sets[set] = {n};
        model.load.dirichlet.push_back({set, true, false, ux(x)});
        model.load.dirichlet.push_back({set, false, true, uy(x)});
    }
    const IncrementResult r = solve_increment(model, FieldState::zero(model.mesh), 0.0, 1.0, unlimited(), ramp());
    for (int n = 0; n < model.mesh.num_nodes(); ++n) {
        CHECK(r.state.u[2 * n] == doctest::Approx(ux(model.mesh.nodes[n])).epsilon(1e-10));
        CHECK(r.state.u[2 * n + 1] == doctest::Approx(uy(model.mesh.nodes[n])).epsilon(1e-10));
    }
    const Vec4 exact = elastic_tangent(p) * strain_from_engineering(1e-3, 6e-4, -4e-4 + 2e-4);
    for (const auto& s : r.state.gp_stresses) CHECK((s.sigma - exact).norm() <= 1e-10 * exact.norm());
}

TEST_CASE("external loads")
{
    Mesh m = structured_rectangle(0, 0, 4, 2, 2, 1);
    label_plate_boundary(m, 4, 2);
    LoadCase load;
    load.pressures = {{"tip", 1.0}};
    load.body = {0.3, Point(-1, 0), Point(1, 0)};

    CHECK(assemble_external(m, load, 0.0).norm() == 0.0);

    SUBCASE("unit pressure resultant")
    {
        LoadCase only_pressure;
        only_pressure.pressures = {{"tip", 1.0}};
        const Vector f = assemble_external(m, only_pressure, 1.0);
        double fx = 0, fy = 0;
        for (int n = 0; n < m.num_nodes(); ++n) {
            fx += f[2 * n];
            fy += f[2 * n + 1];
        }
        // Edge x = 4 of length 2, outward normal +x: the pressure pushes inward.
        CHECK(fx == doctest::Approx(-2.0));
        CHECK(std::abs(fy) < 1e-14);
    }
    SUBCASE("body force against a refined rule")
    {
        const Vector f2 = assemble_body_force(m, load.body, 1.0, 2);
        const Vector f4 = assemble_body_force(m, load.body, 1.0, 4);
        CHECK((f2 - f4).norm() <= 1e-6 * f4.norm());
        // Total: integral of 0.3 (x + 1) over [0,4]x[0,2] = 0.3 * 2 * (8 + 4).
        CHECK(f2.sum() == doctest::Approx(7.2));
    }
    SUBCASE("unknown set")
    {
        LoadCase bad;
        bad.pressures = {{"nowhere", 1.0}};
        CHECK_THROWS_AS(assemble_external(m, bad, 1.0), UnknownSet);
    }
}

TEST_CASE("reactions")
{
    const MaterialParams p = elastic_material();

    SUBCASE("strip cut at mid-span")
    {
        // Two unit elements in a row, pulled by a traction F at x = 2.
        const double F = 7.0;
        Model whole;
        whole.name = "strip";
        whole.mesh = structured_rectangle(0, 0, 2, 1, 2, 1);
        label_plate_boundary(whole.mesh, 2, 1);
        whole.material = p;
        whole.load.pressures = {{"tip", -F}};
        whole.load.dirichlet = {{"foot", true, false, 0.0}, {"pin", false, true, 0.0}};
        const IncrementResult r = solve_increment(whole, FieldState::zero(whole.mesh), 0.0, 1.0, unlimited(), ramp());

        std::vector<int> left_map, right_map;
        const Mesh left = submesh(whole.mesh, {0}, &left_map);
        const Mesh right = submesh(whole.mesh, {1}, &right_map);
        auto restrict_to = [&](const Mesh& sub, const std::vector<int>& map, int element) {
            FieldState f = FieldState::zero(sub);
            for (std::size_t i = 0; i < map.size(); ++i) {
                f.u[2 * i] = r.state.u[2 * map[i]];
                f.u[2 * i + 1] = r.state.u[2 * map[i] + 1];
            }
            for (int g = 0; g < 4; ++g) f.gp_states[g] = r.state.gp_states[4 * element + g];
            return f;
        };
        auto gamma = [&](const std::vector<int>& map) {
            std::vector<int> out;
            for (std::size_t i = 0; i < map.size(); ++i) {
                if (std::abs(whole.mesh.nodes[map[i]].x() - 1.0) < 1e-12) out.push_back(static_cast<int>(i));
            }
            return out;
        };
        const auto gl = gamma(left_map);
        const auto gr = gamma(right_map);
        const Vector lam_left = extract_reactions(left, p, restrict_to(left, left_map, 0), LoadCase{}, 1.0, 1.0,
                                                  FieldState::zero(left), gl);
        LoadCase right_load;
        right_load.pressures = {{"tip", -F}};
        const Vector lam_right = extract_reactions(right, p, restrict_to(right, right_map, 1), right_load, 1.0, 1.0,
                                                   FieldState::zero(right), gr);
        double left_x = 0, right_x = 0;
        for (int i = 0; i < 2; ++i) {
            left_x += lam_left[2 * i];
            right_x += lam_right[2 * i];
        }
        // The left part is pulled by the right part with +F, and conversely.
        CHECK(left_x == doctest::Approx(F).epsilon(1e-10));
        CHECK(right_x == doctest::Approx(-F).epsilon(1e-10));
    }

    SUBCASE("force balance on the desk plate")
    {
        const DeskMeshes dm = desk_meshes(DeskSpec{}, 2);
        Model m;
        m.name = "plate";
        m.mesh = dm.reference;
        m.material = p;
        m.load.pressures = {{"tip", -50.0}};
        m.load.body = {0.02, Point::Zero(), Point(1, 0)};
        m.load.dirichlet = {{"foot", true, false, 0.0}, {"pin", false, true, 0.0}};
        const IncrementResult r = solve_increment(m, FieldState::zero(m.mesh), 0.0, 1.0, unlimited(), ramp());
        std::vector<int> all(m.mesh.num_nodes());
        for (int n = 0; n < m.mesh.num_nodes(); ++n) all[n] = n;
        const Vector lam = extract_reactions(m.mesh, p, r.state, m.load, 1.0, 1.0, FieldState::zero(m.mesh), all);
        const Vector f_ext = assemble_external(m.mesh, m.load, 1.0);
        const auto cons = dirichlet_dofs(m.mesh, m.load);
        std::vector<bool> constrained(m.mesh.num_dofs(), false);
        for (int d : cons.dofs) constrained[d] = true;
        double free_residual = 0, fx = 0, fy = 0, ext_x = 0, ext_y = 0;
        for (int d = 0; d < m.mesh.num_dofs(); ++d) {
            if (!constrained[d]) {
                free_residual = std::max(free_residual, std::abs(lam[d]));
                continue;
            }
            (d % 2 == 0 ? fx : fy) += lam[d];
        }
        for (int d = 0; d < m.mesh.num_dofs(); ++d) (d % 2 == 0 ? ext_x : ext_y) += f_ext[d];
        const double scale = f_ext.norm();
        CHECK(free_residual <= 1e-8 * scale);
        CHECK(std::abs(fx + ext_x) <= 1e-8 * std::abs(ext_x));
        CHECK(std::abs(fy + ext_y) <= 1e-8 * scale);
    }
}

TEST_CASE("parallel and serial assembly agree bitwise")
{
    const MaterialParams p;
    const DeskMeshes dm = desk_meshes(DeskSpec{}, 2);
    const Mesh& m = dm.reference;
    Vector u(m.num_dofs());
    for (int n = 0; n < m.num_nodes(); ++n) {
        u[2 * n] = 1e-3 * m.nodes[n].x() * (1.0 + 0.01 * std::sin(m.nodes[n].y()));
        u[2 * n + 1] = -2e-4 * m.nodes[n].y() + 1e-4 * std::cos(m.nodes[n].x());
    }
    const InternalAssembly a = assemble_internal(m, p, u, FieldState::zero(m), 5.0);
    const InternalAssembly b = assemble_internal_serial(m, p, u, FieldState::zero(m), 5.0);
    CHECK(a.dp_max > 0.0);
    CHECK(a.dp_max == b.dp_max);
    CHECK(a.dp_max_element == b.dp_max_element);
    CHECK((a.f_int - b.f_int).norm() == 0.0);
    CHECK((Eigen::MatrixXd(a.stiffness) - Eigen::MatrixXd(b.stiffness)).norm() == 0.0);
}

TEST_CASE("element failures report the lowest element")
{
    const MaterialParams p;
    // Six disconnected unit squares; elements 3 and 5 are overstretched over
    // a step too short for viscous relaxation.
    Mesh m;
    for (int e = 0; e < 6; ++e) {
        const int b = m.num_nodes();
        const double x = 2.0 * e;
        m.nodes.insert(m.nodes.end(), {{x, 0}, {x + 1, 0}, {x + 1, 1}, {x, 1}});
        m.elements.push_back({b, b + 1, b + 2, b + 3});
    }
    Vector u = Vector::Zero(m.num_dofs());
    for (int e : {3, 5}) {
        u[2 * (4 * e + 1)] = 0.2;
        u[2 * (4 * e + 2)] = 0.2;
    }
    try {
        assemble_internal(m, p, u, FieldState::zero(m), 1e-20);
        FAIL("expected an element failure");
    } catch (const ElementFailure& f) {
        CHECK(f.element() == 3);
    }
}
