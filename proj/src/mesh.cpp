#include "glc/mesh.hpp"

#include "glc/errors.hpp"

#include <fmt/format.h>
#include "json.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <set>
#include <stdexcept>

namespace glc {

const std::vector<int>& Mesh::node_set(const std::string& name) const
{
    auto it = node_sets.find(name);
    if (it == node_sets.end()) {
        throw UnknownSet(fmt::format("unknown node set '{}'", name));
    }
    return it->second;
}

const std::vector<Edge>& Mesh::side_set(const std::string& name) const
{
    auto it = side_sets.find(name);
    if (it == side_sets.end()) {
        throw UnknownSet(fmt::format("unknown side set '{}'", name));
    }
    return it->second;
}

void Mesh::validate() const
{
    const int n = num_nodes();
    auto check_node = [n](int id, const std::string& where) {
        if (id < 0 || id >= n) {
            throw std::invalid_argument(fmt::format("node index {} out of range in {}", id, where));
        }
    };
    for (int e = 0; e < num_elements(); ++e) {
        for (int id : elements[e]) {
            check_node(id, fmt::format("element {}", e));
        }
        Eigen::Matrix<double, 4, 2> xe;
        for (int a = 0; a < 4; ++a) {
            xe.row(a) = nodes[elements[e][a]].transpose();
        }
        for (const auto& gp : quad4::kGaussPoints) {
            const Eigen::Matrix2d jac = quad4::shape_derivatives(gp[0], gp[1]) * xe;
            if (jac.determinant() <= 0.0) {
                throw std::invalid_argument(fmt::format("element {} has non-positive Jacobian", e));
            }
        }
    }
    for (const auto& [name, ids] : node_sets) {
        for (int id : ids) {
            check_node(id, "node set " + name);
        }
    }
    for (const auto& [name, edges] : side_sets) {
        for (const auto& edge : edges) {
            check_node(edge.a, "side set " + name);
            check_node(edge.b, "side set " + name);
        }
    }
}

double Mesh::min_edge_length() const
{
    double h = std::numeric_limits<double>::infinity();
    for (const auto& el : elements) {
        for (int a = 0; a < 4; ++a) {
            h = std::min(h, (nodes[el[a]] - nodes[el[(a + 1) % 4]]).norm());
        }
    }
    return h;
}

namespace quad4 {

std::array<double, 4> shape(double xi, double eta)
{
    return {0.25 * (1 - xi) * (1 - eta), 0.25 * (1 + xi) * (1 - eta), 0.25 * (1 + xi) * (1 + eta),
            0.25 * (1 - xi) * (1 + eta)};
}

Eigen::Matrix<double, 2, 4> shape_derivatives(double xi, double eta)
{
    Eigen::Matrix<double, 2, 4> d;
    d << -0.25 * (1 - eta), 0.25 * (1 - eta), 0.25 * (1 + eta), -0.25 * (1 + eta),
        -0.25 * (1 - xi), -0.25 * (1 + xi), 0.25 * (1 + xi), 0.25 * (1 - xi);
    return d;
}

}  // namespace quad4

Point element_centroid(const Mesh& mesh, int element)
{
    Point c = Point::Zero();
    for (int id : mesh.elements[element]) {
        c += mesh.nodes[id];
    }
    return 0.25 * c;
}

std::vector<Point> gauss_point_coordinates(const Mesh& mesh)
{
    std::vector<Point> out;
    out.reserve(mesh.num_gauss_points());
    for (const auto& el : mesh.elements) {
        for (const auto& gp : quad4::kGaussPoints) {
            const auto n = quad4::shape(gp[0], gp[1]);
            Point x = Point::Zero();
            for (int a = 0; a < 4; ++a) {
                x += n[a] * mesh.nodes[el[a]];
            }
            out.push_back(x);
        }
    }
    return out;
}

Mesh submesh(const Mesh& mesh, const std::vector<int>& elements, std::vector<int>* node_map)
{
    std::vector<int> new_id(mesh.num_nodes(), -1);
    std::vector<int> old_id;
    Mesh out;
    for (int e : elements) {
        std::array<int, 4> conn{};
        for (int a = 0; a < 4; ++a) {
            const int id = mesh.elements.at(e)[a];
            if (new_id[id] < 0) {
                new_id[id] = static_cast<int>(old_id.size());
                old_id.push_back(id);
                out.nodes.push_back(mesh.nodes[id]);
            }
            conn[a] = new_id[id];
        }
        out.elements.push_back(conn);
    }
    for (const auto& [name, ids] : mesh.node_sets) {
        auto& dst = out.node_sets[name];
        for (int id : ids) {
            if (new_id[id] >= 0) {
                dst.push_back(new_id[id]);
            }
        }
    }
    // An edge survives only if it bounds a retained element.
    std::set<std::pair<int, int>> retained_edges;
    for (int e : elements) {
        const auto& el = mesh.elements[e];
        for (int a = 0; a < 4; ++a) {
            retained_edges.insert({el[a], el[(a + 1) % 4]});
        }
    }
    for (const auto& [name, edges] : mesh.side_sets) {
        auto& dst = out.side_sets[name];
        for (const auto& edge : edges) {
            if (retained_edges.count({edge.a, edge.b}) > 0) {
                dst.push_back({new_id[edge.a], new_id[edge.b]});
            }
        }
    }
    if (node_map != nullptr) {
        *node_map = std::move(old_id);
    }
    return out;
}

std::vector<Edge> shared_edges(const Mesh& mesh, const std::vector<int>& a, const std::vector<int>& b)
{
    std::set<std::pair<int, int>> b_edges;
    for (int e : b) {
        const auto& el = mesh.elements.at(e);
        for (int k = 0; k < 4; ++k) {
            b_edges.insert({el[k], el[(k + 1) % 4]});
        }
    }
    std::vector<Edge> out;
    for (int e : a) {
        const auto& el = mesh.elements.at(e);
        for (int k = 0; k < 4; ++k) {
            const int n0 = el[k];
            const int n1 = el[(k + 1) % 4];
            if (b_edges.count({n1, n0}) > 0) {
                out.push_back({n0, n1});
            }
        }
    }
    return out;
}

std::vector<int> elements_in_box(const Mesh& mesh, const std::array<double, 4>& box)
{
    std::vector<int> out;
    for (int e = 0; e < mesh.num_elements(); ++e) {
        const Point c = element_centroid(mesh, e);
        if (c.x() >= box[0] && c.y() >= box[1] && c.x() <= box[2] && c.y() <= box[3]) {
            out.push_back(e);
        }
    }
    return out;
}

nlohmann::json mesh_to_json(const Mesh& mesh)
{
    nlohmann::json j;
    j["nodes"] = nlohmann::json::array();
    for (const auto& p : mesh.nodes) {
        j["nodes"].push_back({p.x(), p.y()});
    }
    j["elements"] = mesh.elements;
    j["node_sets"] = nlohmann::json::array();
    for (const auto& [name, ids] : mesh.node_sets) {
        j["node_sets"].push_back({{"name", name}, {"nodes", ids}});
    }
    j["side_sets"] = nlohmann::json::array();
    for (const auto& [name, edges] : mesh.side_sets) {
        nlohmann::json list = nlohmann::json::array();
        for (const auto& e : edges) {
            list.push_back({e.a, e.b});
        }
        j["side_sets"].push_back({{"name", name}, {"edges", list}});
    }
    return j;
}

Mesh mesh_from_json(const nlohmann::json& j)
{
    Mesh mesh;
    for (const auto& p : j.at("nodes")) {
        mesh.nodes.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
    }
    for (const auto& el : j.at("elements")) {
        mesh.elements.push_back(el.get<std::array<int, 4>>());
    }
    for (const auto& s : j.at("node_sets")) {
        const auto name = s.at("name").get<std::string>();
        if (!mesh.node_sets.emplace(name, s.at("nodes").get<std::vector<int>>()).second) {
            throw std::invalid_argument(fmt::format("duplicate node set '{}'", name));
        }
    }
    for (const auto& s : j.at("side_sets")) {
        const auto name = s.at("name").get<std::string>();
        std::vector<Edge> edges;
        for (const auto& e : s.at("edges")) {
            edges.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
        }
        if (!mesh.side_sets.emplace(name, std::move(edges)).second) {
            throw std::invalid_argument(fmt::format("duplicate side set '{}'", name));
        }
    }
    mesh.validate();
    return mesh;
}

Mesh read_mesh(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error(fmt::format("cannot open mesh file '{}'", path.string()));
    }
    return mesh_from_json(nlohmann::json::parse(in));
}

void write_mesh(const Mesh& mesh, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error(fmt::format("cannot write mesh file '{}'", path.string()));
    }
    out << mesh_to_json(mesh).dump() << '\n';
}

}  // namespace glc
