#pragma once

#include <Eigen/Core>
#include <Eigen/LU>
#include "json.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace glc {

using Point = Eigen::Vector2d;

/// Boundary edge oriented with the domain on its left.
struct Edge {
    int a = 0;
    int b = 0;
    friend bool operator==(const Edge&, const Edge&) = default;
};

/// 2D mesh of 4-node quadrilaterals (counter-clockwise connectivity).
struct Mesh {
    std::vector<Point> nodes;
    std::vector<std::array<int, 4>> elements;
    std::map<std::string, std::vector<int>> node_sets;
    std::map<std::string, std::vector<Edge>> side_sets;

    int num_nodes() const { return static_cast<int>(nodes.size()); }
    int num_elements() const { return static_cast<int>(elements.size()); }
    int num_dofs() const { return 2 * num_nodes(); }
    int num_gauss_points() const { return 4 * num_elements(); }

    /// Throws UnknownSet.
    const std::vector<int>& node_set(const std::string& name) const;
    const std::vector<Edge>& side_set(const std::string& name) const;
    bool has_node_set(const std::string& name) const { return node_sets.count(name) > 0; }
    bool has_side_set(const std::string& name) const { return side_sets.count(name) > 0; }

    /// Checks index ranges and a positive Jacobian at every Gauss point.
    /// Throws std::invalid_argument.
    void validate() const;

    /// Smallest element edge length.
    double min_edge_length() const;
};

// Bilinear reference element on [-1,1]^2.
namespace quad4 {
inline constexpr double kGauss = 0.57735026918962576451;
inline constexpr std::array<std::array<double, 2>, 4> kGaussPoints{
    {{-kGauss, -kGauss}, {kGauss, -kGauss}, {kGauss, kGauss}, {-kGauss, kGauss}}};

std::array<double, 4> shape(double xi, double eta);
/// dN/dxi (row 0) and dN/deta (row 1).
Eigen::Matrix<double, 2, 4> shape_derivatives(double xi, double eta);
}  // namespace quad4

Point element_centroid(const Mesh& mesh, int element);

/// Physical coordinates of every Gauss point, indexed element*4 + gp.
std::vector<Point> gauss_point_coordinates(const Mesh& mesh);

/// Restriction to a subset of elements. Node and side sets are restricted to
/// the retained nodes/edges; empty sets are kept so lookups stay valid.
/// `node_map` receives, for each new node, its index in `mesh`.
Mesh submesh(const Mesh& mesh, const std::vector<int>& elements, std::vector<int>* node_map = nullptr);

/// Element edges shared between an element of `a` and an element of `b`,
/// oriented with `a` on the left.
std::vector<Edge> shared_edges(const Mesh& mesh, const std::vector<int>& a, const std::vector<int>& b);

/// Elements whose centroid lies in the closed box [xmin,xmax]x[ymin,ymax].
std::vector<int> elements_in_box(const Mesh& mesh, const std::array<double, 4>& box);

nlohmann::json mesh_to_json(const Mesh& mesh);
Mesh mesh_from_json(const nlohmann::json& j);
Mesh read_mesh(const std::filesystem::path& path);
void write_mesh(const Mesh& mesh, const std::filesystem::path& path);

}  // namespace glc
