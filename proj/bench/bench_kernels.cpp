// Serial reference vs OpenMP affine kernels at policy-sized shapes.
#include <benchmark/benchmark.h>

#include <vector>

#include "srpl/kernels.hpp"
#include "srpl/rng.hpp"

namespace {

struct Shapes {
    std::size_t batch, in, out;
    std::vector<float> x, w, b, y, dy, dw, db, dx;

    Shapes(std::size_t batch_, std::size_t in_, std::size_t out_)
        : batch(batch_), in(in_), out(out_), x(batch * in), w(in * out), b(out), y(batch * out), dy(batch * out),
          dw(in * out), db(out), dx(batch * in) {
        auto rng = srpl::make_stream(7, 0);
        for (auto* v : {&x, &w, &b, &dy})
            for (auto& e : *v) e = static_cast<float>(srpl::standard_normal(rng));
    }
};

void args(benchmark::internal::Benchmark* b) {
    b->Args({512, 70, 64})->Args({2048, 64, 64})->Args({8192, 64, 32});
}

void BM_ForwardSerial(benchmark::State& st) {
    Shapes s(st.range(0), st.range(1), st.range(2));
    for (auto _ : st) {
        srpl::kernels::affine_forward_serial<float>(s.x, s.w, s.b, s.y, s.batch, s.in, s.out);
        benchmark::DoNotOptimize(s.y.data());
    }
    st.SetItemsProcessed(st.iterations() * static_cast<long>(s.batch * s.in * s.out));
}

void BM_ForwardParallel(benchmark::State& st) {
    Shapes s(st.range(0), st.range(1), st.range(2));
    for (auto _ : st) {
        srpl::kernels::affine_forward<float>(s.x, s.w, s.b, s.y, s.batch, s.in, s.out);
        benchmark::DoNotOptimize(s.y.data());
    }
    st.SetItemsProcessed(st.iterations() * static_cast<long>(s.batch * s.in * s.out));
}

void BM_BackwardSerial(benchmark::State& st) {
    Shapes s(st.range(0), st.range(1), st.range(2));
    for (auto _ : st) {
        srpl::kernels::affine_backward_input_serial<float>(s.dy, s.w, s.dx, s.batch, s.in, s.out);
        srpl::kernels::affine_backward_params_serial<float>(s.dy, s.x, s.dw, s.db, s.batch, s.in, s.out);
        benchmark::DoNotOptimize(s.dw.data());
    }
}

void BM_BackwardParallel(benchmark::State& st) {
    Shapes s(st.range(0), st.range(1), st.range(2));
    for (auto _ : st) {
        srpl::kernels::affine_backward_input<float>(s.dy, s.w, s.dx, s.batch, s.in, s.out);
        srpl::kernels::affine_backward_params<float>(s.dy, s.x, s.dw, s.db, s.batch, s.in, s.out);
        benchmark::DoNotOptimize(s.dw.data());
    }
}

}  // namespace

BENCHMARK(BM_ForwardSerial)->Apply(args);
BENCHMARK(BM_ForwardParallel)->Apply(args);
BENCHMARK(BM_BackwardSerial)->Apply(args);
BENCHMARK(BM_BackwardParallel)->Apply(args);

BENCHMARK_MAIN();
