#include "glc/meshgen.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <stdexcept>

namespace glc {

namespace {

// Node pool deduplicating coordinates on a fine lattice.
class NodePool {
public:
    explicit NodePool(double tol) : tol_(tol) {}

    int add(const Point& p)
    {
        const auto key = std::make_pair(std::llround(p.x() / tol_), std::llround(p.y() / tol_));
        for (long long dx = -1; dx <= 1; ++dx) {
            for (long long dy = -1; dy <= 1; ++dy) {
                auto it = index_.find({key.first + dx, key.second + dy});
                if (it != index_.end() && (nodes_[it->second] - p).norm() <= tol_) {
                    return it->second;
                }
            }
        }
        const int id = static_cast<int>(nodes_.size());
        nodes_.push_back(p);
        index_[key] = id;
        return id;
    }

    std::vector<Point> take() { return std::move(nodes_); }

private:
    double tol_;
    std::vector<Point> nodes_;
    std::map<std::pair<long long, long long>, int> index_;
};

}  // namespace

Mesh structured_rectangle(double x0, double y0, double x1, double y1, int nx, int ny)
{
    if (nx < 1 || ny < 1 || !(x1 > x0) || !(y1 > y0)) {
        throw std::invalid_argument("structured_rectangle: empty domain");
    }
    Mesh m;
    for (int j = 0; j <= ny; ++j) {
        for (int i = 0; i <= nx; ++i) {
            m.nodes.emplace_back(x0 + (x1 - x0) * i / nx, y0 + (y1 - y0) * j / ny);
        }
    }
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const int n0 = j * (nx + 1) + i;
            m.elements.push_back({n0, n0 + 1, n0 + nx + 2, n0 + nx + 1});
        }
    }
    return m;
}

Mesh perforated_patch(const PatchSpec& spec)
{
    if (spec.per_side < 1 || spec.cells_x < 1 || spec.cells_y < 1 || spec.radial_layers < 1) {
        throw std::invalid_argument("perforated_patch: counts must be positive");
    }
    if (!(spec.radius > 0.0 && spec.radius < 0.45 * spec.cell)) {
        throw std::invalid_argument("perforated_patch: hole radius must be below 0.45 cell");
    }
    const std::set<std::pair<int, int>> holes(spec.hole_cells.begin(), spec.hole_cells.end());
    NodePool pool(1e-9 * spec.cell);
    Mesh m;
    const int k = spec.per_side;
    for (int cj = 0; cj < spec.cells_y; ++cj) {
        for (int ci = 0; ci < spec.cells_x; ++ci) {
            const double x0 = spec.origin.x() + spec.cell * ci;
            const double y0 = spec.origin.y() + spec.cell * cj;
            auto grid = [&](int i, int j) {
                return Point(x0 + spec.cell * i / k, y0 + spec.cell * j / k);
            };
            if (holes.count({ci, cj}) == 0) {
                for (int j = 0; j < k; ++j) {
                    for (int i = 0; i < k; ++i) {
                        m.elements.push_back({pool.add(grid(i, j)), pool.add(grid(i + 1, j)),
                                              pool.add(grid(i + 1, j + 1)), pool.add(grid(i, j + 1))});
                    }
                }
                continue;
            }
            // Cell boundary counter-clockwise from the lower-left corner.
            std::vector<Point> outer;
            for (int i = 0; i < k; ++i) outer.push_back(grid(i, 0));
            for (int j = 0; j < k; ++j) outer.push_back(grid(k, j));
            for (int i = k; i > 0; --i) outer.push_back(grid(i, k));
            for (int j = k; j > 0; --j) outer.push_back(grid(0, j));
            const Point c(x0 + 0.5 * spec.cell, y0 + 0.5 * spec.cell);
            const int nb = static_cast<int>(outer.size());
            const int nl = spec.radial_layers;
            std::vector<std::vector<int>> ids(nl + 1, std::vector<int>(nb));
            for (int q = 0; q < nb; ++q) {
                const Point d = outer[q] - c;
                const Point inner = c + spec.radius * d.normalized();
                for (int l = 0; l <= nl; ++l) {
                    const double s = static_cast<double>(l) / nl;
                    ids[l][q] = pool.add(l == nl ? outer[q] : Point((1.0 - s) * inner + s * outer[q]));
                }
            }
            for (int l = 0; l < nl; ++l) {
                for (int q = 0; q < nb; ++q) {
                    const int q1 = (q + 1) % nb;
                    m.elements.push_back({ids[l][q], ids[l + 1][q], ids[l + 1][q1], ids[l][q1]});
                }
            }
        }
    }
    m.nodes = pool.take();
    return m;
}

Mesh merge_meshes(const Mesh& a, const Mesh& b, double tol)
{
    NodePool pool(tol);
    Mesh m;
    auto append = [&](const Mesh& src) {
        std::vector<int> map(src.nodes.size());
        for (std::size_t i = 0; i < src.nodes.size(); ++i) map[i] = pool.add(src.nodes[i]);
        for (const auto& el : src.elements) {
            m.elements.push_back({map[el[0]], map[el[1]], map[el[2]], map[el[3]]});
        }
        for (const auto& [name, nodes] : src.node_sets) {
            auto& dst = m.node_sets[name];
            for (int n : nodes) dst.push_back(map[n]);
        }
        for (const auto& [name, edges] : src.side_sets) {
            auto& dst = m.side_sets[name];
            for (const auto& e : edges) dst.push_back({map[e.a], map[e.b]});
        }
    };
    append(a);
    append(b);
    m.nodes = pool.take();
    for (auto& [name, nodes] : m.node_sets) {
        std::sort(nodes.begin(), nodes.end());
        nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    }
    return m;
}

void label_plate_boundary(Mesh& mesh, double length, double height)
{
    const double tol = 1e-9 * std::max(length, height);
    auto& foot = mesh.node_sets["foot"];
    auto& pin = mesh.node_sets["pin"];
    foot.clear();
    pin.clear();
    for (int n = 0; n < mesh.num_nodes(); ++n) {
        const Point& p = mesh.nodes[n];
        if (std::abs(p.x()) <= tol) foot.push_back(n);
        if (p.norm() <= tol) pin.push_back(n);
    }
    auto& tip = mesh.side_sets["tip"];
    auto& top = mesh.side_sets["top"];
    auto& bottom = mesh.side_sets["bottom"];
    tip.clear();
    top.clear();
    bottom.clear();
    std::map<std::pair<int, int>, int> count;
    for (const auto& el : mesh.elements) {
        for (int k = 0; k < 4; ++k) ++count[{std::min(el[k], el[(k + 1) % 4]), std::max(el[k], el[(k + 1) % 4])}];
    }
    for (const auto& el : mesh.elements) {
        for (int k = 0; k < 4; ++k) {
            const int a = el[k];
            const int b = el[(k + 1) % 4];
            if (count[{std::min(a, b), std::max(a, b)}] != 1) continue;
            const Point& pa = mesh.nodes[a];
            const Point& pb = mesh.nodes[b];
            if (std::abs(pa.x() - length) <= tol && std::abs(pb.x() - length) <= tol) tip.push_back({a, b});
            if (std::abs(pa.y() - height) <= tol && std::abs(pb.y() - height) <= tol) top.push_back({a, b});
            if (std::abs(pa.y()) <= tol && std::abs(pb.y()) <= tol) bottom.push_back({a, b});
        }
    }
}

Mesh perturb_local(const Mesh& local, const std::vector<int>& interface_nodes, std::uint64_t seed, double fraction)
{
    Mesh m = local;
    const double h = local.min_edge_length();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);

    std::map<std::pair<int, int>, int> count;
    for (const auto& el : m.elements) {
        for (int k = 0; k < 4; ++k) ++count[{std::min(el[k], el[(k + 1) % 4]), std::max(el[k], el[(k + 1) % 4])}];
    }
    std::set<int> boundary;
    for (const auto& [edge, n] : count) {
        if (n == 1) {
            boundary.insert(edge.first);
            boundary.insert(edge.second);
        }
    }
    for (int n = 0; n < m.num_nodes(); ++n) {
        if (boundary.count(n) == 0) {
            m.nodes[n] += fraction * h * Point(unit(rng), unit(rng)) / std::sqrt(2.0);
        }
    }
    // Interface nodes slide between their neighbours along the interface.
    if (interface_nodes.size() >= 3) {
        for (std::size_t i = 1; i + 1 < interface_nodes.size(); ++i) {
            const Point prev = local.nodes[interface_nodes[i - 1]];
            const Point next = local.nodes[interface_nodes[i + 1]];
            const Point here = local.nodes[interface_nodes[i]];
            const Point t = (next - prev).normalized();
            const double room = std::min((here - prev).norm(), (next - here).norm());
            m.nodes[interface_nodes[i]] = here + fraction * room * unit(rng) * t;
        }
    }
    m.validate();
    return m;
}

DeskMeshes desk_meshes(const DeskSpec& spec, int per_side)
{
    const int nx = static_cast<int>(std::lround(spec.length / spec.element));
    const int ny = static_cast<int>(std::lround(spec.height / spec.element));
    const int cx = static_cast<int>(std::lround(spec.zone_length / spec.cell));
    const int cy = static_cast<int>(std::lround(spec.height / spec.cell));
    const int matched = static_cast<int>(std::lround(spec.cell / spec.element));
    if (std::abs(nx * spec.element - spec.length) > 1e-9 || std::abs(cx * spec.cell - spec.zone_length) > 1e-9 ||
        std::abs(cy * spec.cell - spec.height) > 1e-9 || std::abs(matched * spec.element - spec.cell) > 1e-9) {
        throw std::invalid_argument("desk_meshes: sizes must divide the plate evenly");
    }
    DeskMeshes out;
    out.global = structured_rectangle(0.0, 0.0, spec.length, spec.height, nx, ny);
    label_plate_boundary(out.global, spec.length, spec.height);

    PatchSpec patch;
    patch.cell = spec.cell;
    patch.cells_x = cx;
    patch.cells_y = cy;
    patch.hole_cells = spec.hole_cells;
    patch.radius = spec.radius;
    patch.radial_layers = spec.radial_layers;
    patch.per_side = per_side;
    out.local = perforated_patch(patch);
    label_plate_boundary(out.local, spec.length, spec.height);

    patch.per_side = matched;
    Mesh matched_local = perforated_patch(patch);
    std::vector<int> complement;
    for (int e = 0; e < out.global.num_elements(); ++e) {
        if (element_centroid(out.global, e).x() > spec.zone_length) complement.push_back(e);
    }
    out.reference = merge_meshes(submesh(out.global, complement), matched_local, 1e-9 * spec.element);
    label_plate_boundary(out.reference, spec.length, spec.height);
    out.global.validate();
    out.local.validate();
    out.reference.validate();
    return out;
}

}  // namespace glc
