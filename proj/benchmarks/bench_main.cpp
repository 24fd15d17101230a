#include <benchmark/benchmark.h>

#include "mobgen/parallel.hpp"

int main(int argc, char** argv) {
    mobgen::configure_allocator();
    benchmark::Initialize(&argc, argv);
    if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
    benchmark::RunSpecifiedBenchmarks();
    benchmark::Shutdown();
    return 0;
}
