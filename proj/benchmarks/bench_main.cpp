#include <benchmark/benchmark.h>

#include <szl/asymptotics.hpp>

using namespace szl;

namespace {

BundlePoint pt(cplx a, cplx b) {
  CVec v(2);
  v << a, b;
  return BundlePoint::normalized(v);
}

TorusAction weight_one_minus_one() {
  Eigen::MatrixXi W(1, 2);
  W << 1, -1;
  return TorusAction(W, Vec::Zero(1));
}

void BM_KernelEval(benchmark::State& st) {
  SzegoKernel K(1);
  const CVec x = pt(cplx(0.6, 0.1), cplx(0.3, 0.7)).coords();
  const CVec y = pt(cplx(0.2, -0.5), cplx(0.8, 0.1)).coords();
  for (auto _ : st) benchmark::DoNotOptimize(K.eval(st.range(0), x, y));
}
BENCHMARK(BM_KernelEval)->Arg(10)->Arg(400)->Arg(10000);

void BM_ComputeUk(benchmark::State& st) {
  LegendrianImmersion L = builtin_knot(0.0);
  const BundlePoint x = pt(1, 0.3);
  for (auto _ : st) benchmark::DoNotOptimize(compute_u_k(L, st.range(0), x));
}
BENCHMARK(BM_ComputeUk)->Arg(50)->Arg(400)->Arg(1600)->Unit(benchmark::kMicrosecond);

void BM_ComputeUkTorus(benchmark::State& st) {
  Vec a(2);
  a << 0.3, -0.5;
  LegendrianImmersion L = builtin_torus_product(2, a);
  CVec v(3);
  v << 0.6, cplx(0, 0.5), 0.4;
  const BundlePoint x = BundlePoint::normalized(v);
  for (auto _ : st) benchmark::DoNotOptimize(compute_u_k(L, st.range(0), x));
}
BENCHMARK(BM_ComputeUkTorus)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_ComputeUkVarpi(benchmark::State& st) {
  LegendrianImmersion L = builtin_knot(0.0);
  TorusAction act = weight_one_minus_one();
  const BundlePoint x = pt(1, 1);
  for (auto _ : st)
    benchmark::DoNotOptimize(compute_u_k_varpi(L, act, Eigen::VectorXi::Constant(1, 1), st.range(0), x));
}
BENCHMARK(BM_ComputeUkVarpi)->Arg(100)->Arg(300)->Unit(benchmark::kMillisecond);

void BM_HermitianProduct(benchmark::State& st) {
  LegendrianImmersion L = builtin_knot(0.0), S = builtin_knot(1.0);
  for (auto _ : st) benchmark::DoNotOptimize(hermitian_product(L, S, st.range(0)));
}
BENCHMARK(BM_HermitianProduct)->Arg(100)->Arg(300)->Unit(benchmark::kMillisecond);

void BM_ReturnElements(benchmark::State& st) {
  LegendrianImmersion L = builtin_knot(0.0);
  const BundlePoint x = pt(1, 1);
  std::optional<TorusAction> act;
  if (st.range(0)) act = weight_one_minus_one();
  for (auto _ : st) benchmark::DoNotOptimize(find_return_elements(x, L, act));
}
BENCHMARK(BM_ReturnElements)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_PredictTheorem(benchmark::State& st) {
  LegendrianImmersion L = builtin_knot(0.0);
  TorusAction act = weight_one_minus_one();
  const BundlePoint x = pt(1, 1);
  for (auto _ : st)
    benchmark::DoNotOptimize(predict_theorem_main(x, L, act, Eigen::VectorXi::Zero(1), CVec::Zero(1)));
}
BENCHMARK(BM_PredictTheorem)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
