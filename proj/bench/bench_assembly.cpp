// Serial vs OpenMP element assembly on structured meshes with a viscoplastic
// displacement field (every Gauss point runs the local Newton).

#include "glc/fem.hpp"
#include "glc/meshgen.hpp"

#include <benchmark/benchmark.h>

using namespace glc;

namespace {

struct Case {
    Mesh mesh;
    Vector u;
    FieldState prev;

    explicit Case(int n)
    {
        mesh = structured_rectangle(0, 0, 2.0 * n, n, 2 * n, n);
        u.resize(mesh.num_dofs());
        for (int i = 0; i < mesh.num_nodes(); ++i) {
            const Point& x = mesh.nodes[i];
            u[2 * i] = 3e-3 * x.x() + 1e-4 * x.y() * x.y() / n;
            u[2 * i + 1] = -1e-3 * x.y();
        }
        prev = FieldState::zero(mesh);
    }
};

template <bool Parallel>
void assembly(benchmark::State& state)
{
    const Case c(static_cast<int>(state.range(0)));
    const MaterialParams params;
    for (auto _ : state) {
        InternalAssembly a = Parallel ? assemble_internal(c.mesh, params, c.u, c.prev, 1.0)
                                      : assemble_internal_serial(c.mesh, params, c.u, c.prev, 1.0);
        benchmark::DoNotOptimize(a.f_int.data());
    }
    state.counters["elements"] = c.mesh.num_elements();
    state.SetItemsProcessed(state.iterations() * c.mesh.num_elements());
}

}  // namespace

BENCHMARK(assembly<false>)->Name("assembly_serial")->Arg(20)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK(assembly<true>)->Name("assembly_openmp")->Arg(20)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
