#include <benchmark/benchmark.h>

#include "pitchfork/flow.hpp"
#include "pitchfork/graph_transform.hpp"
#include "pitchfork/gronwall.hpp"
#include "pitchfork/hypotheses.hpp"

using namespace pitchfork;
using graphtransform::GraphFunction;

namespace {

dynsys::MapFamily canonical(int dim) {
  if (dim == 2) return dynsys::canonical_family(2, dynsys::rotation2d(0.5));
  Vec axis(3);
  axis << 0.0, 0.0, 1.0;
  return dynsys::canonical_family(3, dynsys::rotation3d(axis, 1.0));
}

void ProjectEmbedRoundTrip(benchmark::State& state) {
  auto manifold = state.range(0) == 2 ? geometry::make_unit_circle()
                                      : geometry::make_unit_sphere();
  Vec y(state.range(0));
  y.setZero();
  y(0) = 1.0;
  for (auto _ : state) {
    const auto p = manifold->project(manifold->embed({0.1, y}));
    benchmark::DoNotOptimize(p.r);
  }
}
BENCHMARK(ProjectEmbedRoundTrip)->Arg(2)->Arg(3);

void GraphTransformApply(benchmark::State& state) {
  const int dim = static_cast<int>(state.range(0));
  auto fam = canonical(dim);
  auto mesh = geometry::build_mesh(fam.manifold, dim == 2 ? 256 : 162);
  const GraphFunction psi = GraphFunction::constant(mesh, 0.175);
  for (auto _ : state) {
    auto image = graphtransform::apply_graph_transform(psi, fam, 0.02, 0.2);
    benchmark::DoNotOptimize(image.values().data());
  }
  state.SetItemsProcessed(state.iterations() * mesh->node_count());
}
BENCHMARK(GraphTransformApply)->Arg(2)->Arg(3);

void SolveBranch(benchmark::State& state) {
  auto fam = canonical(2);
  auto mesh = geometry::build_mesh(fam.manifold, state.range(0));
  for (auto _ : state) {
    auto [phi, run] = graphtransform::solve_fixed_point(
        GraphFunction::constant(mesh, 0.175), fam, 0.02, {});
    benchmark::DoNotOptimize(run.iterates);
  }
}
BENCHMARK(SolveBranch)->Arg(64)->Arg(256);

void EstimateNorms(benchmark::State& state) {
  auto fam = canonical(2);
  auto mesh = geometry::build_mesh(fam.manifold, 64);
  const geometry::TubularRegion shell{0.2, 0.15,
                                      geometry::TubularRegion::Side::Both};
  for (auto _ : state) {
    auto report = hypotheses::estimate_norms(fam, 0.02, shell, *mesh,
                                             static_cast<int>(state.range(0)));
    benchmark::DoNotOptimize(report.c_star);
  }
}
BENCHMARK(EstimateNorms)->Arg(16)->Arg(64);

void FlowTimeOneMap(benchmark::State& state) {
  auto field = flow::model_field(2);
  Vec x0(2);
  x0 << 1.1, 0.0;
  for (auto _ : state) {
    const Vec xt = flow::integrate_flow(field, x0, 0.02, 1.0);
    benchmark::DoNotOptimize(xt.data());
  }
}
BENCHMARK(FlowTimeOneMap);

void GronwallReference(benchmark::State& state) {
  const flow::GronwallBounds bounds =
      flow::gronwall_bounds({1.0, 0.1, 0.1, 2.0});
  for (auto _ : state) {
    benchmark::DoNotOptimize(bounds.E(0, 1.7));
    benchmark::DoNotOptimize(bounds.E(3, -1.3));
  }
}
BENCHMARK(GronwallReference);

}  // namespace

BENCHMARK_MAIN();
