// OpenMP kernels against the serial reference.

#include "agt/kernels.hpp"

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

namespace {

struct MatPair {
  Eigen::MatrixXd a_lo, a_hi, b_lo, b_hi;
};

MatPair random_pair(Eigen::Index n) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-1.0, 1.0), w(0.0, 0.05);
  MatPair p;
  auto fill = [&](Eigen::MatrixXd& lo, Eigen::MatrixXd& hi) {
    lo = Eigen::MatrixXd::NullaryExpr(n, n, [&]() { return u(rng); });
    hi = lo + Eigen::MatrixXd::NullaryExpr(n, n, [&]() { return w(rng); });
  };
  fill(p.a_lo, p.a_hi);
  fill(p.b_lo, p.b_hi);
  return p;
}

template <bool Parallel>
void BM_RumpMatmul(benchmark::State& state) {
  const auto p = random_pair(state.range(0));
  Eigen::MatrixXd lo, hi;
  for (auto _ : state) {
    if constexpr (Parallel) {
      agt::kernels::rump_matmul(p.a_lo, p.a_hi, p.b_lo, p.b_hi, lo, hi);
    } else {
      agt::reference::rump_matmul(p.a_lo, p.a_hi, p.b_lo, p.b_hi, lo, hi);
    }
    benchmark::DoNotOptimize(lo.data());
  }
}

template <bool Parallel>
void BM_IntervalMatvec(benchmark::State& state) {
  const auto p = random_pair(state.range(0));
  const Eigen::VectorXd x_lo = p.b_lo.col(0), x_hi = p.b_hi.col(0);
  Eigen::VectorXd lo, hi;
  for (auto _ : state) {
    if constexpr (Parallel) {
      agt::kernels::interval_matvec(p.a_lo, p.a_hi, x_lo, x_hi, lo, hi);
    } else {
      agt::reference::interval_matvec(p.a_lo, p.a_hi, x_lo, x_hi, lo, hi);
    }
    benchmark::DoNotOptimize(lo.data());
  }
}

template <bool Parallel>
void BM_Semax(benchmark::State& state) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  std::vector<Eigen::VectorXd> vs(256);
  for (auto& v : vs) v = Eigen::VectorXd::NullaryExpr(state.range(0), [&]() { return g(rng); });
  for (auto _ : state) {
    Eigen::VectorXd out = Parallel ? agt::kernels::semax(vs, 10) : agt::reference::semax(vs, 10);
    benchmark::DoNotOptimize(out.data());
  }
}

}  // namespace

BENCHMARK(BM_RumpMatmul<false>)->Name("rump_matmul/reference")->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(BM_RumpMatmul<true>)->Name("rump_matmul/openmp")->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(BM_IntervalMatvec<false>)->Name("interval_matvec/reference")->Arg(128)->Arg(1024);
BENCHMARK(BM_IntervalMatvec<true>)->Name("interval_matvec/openmp")->Arg(128)->Arg(1024);
BENCHMARK(BM_Semax<false>)->Name("semax/reference")->Arg(1000)->Arg(10000);
BENCHMARK(BM_Semax<true>)->Name("semax/openmp")->Arg(1000)->Arg(10000);

BENCHMARK_MAIN();
