// Serial reference vs OpenMP kernel, same inputs. Run with --benchmark_filter=... as usual.
#include <benchmark/benchmark.h>

#include <cmath>
#include <map>
#include <vector>

#include "fracsus/correlations.hpp"
#include "fracsus/density.hpp"
#include "fracsus/kernels.hpp"

using namespace fracsus;

namespace {

const UnimodalFamily& family() {
  static const UnimodalFamily fam = UnimodalFamily::quadratic(Real50(2));
  return fam;
}

const UlamOperator& op(std::size_t n) {
  static std::map<std::size_t, UlamOperator> cache;
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, build_ulam(family(), 0.0, n, Exec::Serial)).first;
  return it->second;
}

Exec exec_of(const benchmark::State& s) { return s.range(1) ? Exec::Parallel : Exec::Serial; }

void BM_BuildUlam(benchmark::State& s) {
  for (auto _ : s) benchmark::DoNotOptimize(build_ulam(family(), 0.0, s.range(0), exec_of(s)));
}

void BM_DensityAction(benchmark::State& s) {
  const auto& u = op(s.range(0));
  std::vector<double> in(u.grid.n, 1.0 / u.grid.n), out(u.grid.n);
  for (auto _ : s) {
    u.density_action(in, out, exec_of(s));
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_KoopmanAction(benchmark::State& s) {
  const auto& u = op(s.range(0));
  std::vector<double> in(u.grid.n), out(u.grid.n);
  for (std::size_t i = 0; i < in.size(); ++i) in[i] = std::cos(3.0 * u.grid.center(i));
  for (auto _ : s) {
    u.koopman_action(in, out, exec_of(s));
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_Tabulate(benchmark::State& s) {
  const BinGrid g{-2.0, 2.0, static_cast<std::size_t>(s.range(0))};
  for (auto _ : s) {
    benchmark::DoNotOptimize(tabulate(g.n, [&](std::size_t i) { return chebyshev_density(g.center(i)); }, exec_of(s)));
  }
}

void BM_KoopmanTable(benchmark::State& s) {
  const auto& u = op(s.range(0));
  const auto phi = Observable::cosine(3.0);
  for (auto _ : s) benchmark::DoNotOptimize(koopman_table(family(), 0.0, u, phi, 12, 6, exec_of(s)));
}

void BM_Dot(benchmark::State& s) {
  std::vector<double> a(s.range(0)), b(s.range(0));
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = std::sin(0.001 * i);
    b[i] = std::cos(0.002 * i);
  }
  for (auto _ : s) benchmark::DoNotOptimize(dot(a, b, exec_of(s)));
}

}  // namespace

// Second argument: 0 serial reference, 1 parallel.
BENCHMARK(BM_BuildUlam)->ArgsProduct({{4096, 65536}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DensityAction)->ArgsProduct({{4096, 65536}, {0, 1}})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_KoopmanAction)->ArgsProduct({{4096, 65536}, {0, 1}})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Tabulate)->ArgsProduct({{65536}, {0, 1}})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_KoopmanTable)->ArgsProduct({{1024}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Dot)->ArgsProduct({{1 << 20}, {0, 1}})->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
