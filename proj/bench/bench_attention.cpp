// Times the OpenMP attention kernels against the serial reference on the
// same workloads and reports the speedup.

#include <chrono>
#include <cstdio>
#include <cstdlib>

#include "headbal/attention.hpp"
#include "headbal/profiler.hpp"
#include "headbal/reference.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Case {
    long heads;
    long queries;
    long context;
    long dim;
};

double checksum(const headbal::Matrix& m) {
    double s = 0.0;
    for (double v : m.data) s += v;
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    const int repeats = argc > 1 ? std::atoi(argv[1]) : 3;

#ifdef _OPENMP
    std::printf("threads: %d\n", omp_get_max_threads());
#else
    std::printf("threads: 1 (built without OpenMP)\n");
#endif
    std::printf("%-28s %12s %12s %9s\n", "case", "serial (ms)", "parallel(ms)", "speedup");

    const Case cases[] = {
        {8, 32, 1024, 64},
        {16, 32, 2048, 64},
        {32, 16, 4096, 64},
    };

    for (const Case& c : cases) {
        headbal::SyntheticWorkloadSpec spec;
        spec.num_heads = c.heads;
        spec.num_queries = c.queries;
        spec.context_length = c.context;
        spec.head_dim = c.dim;
        spec.exponent_min = 0.3;
        spec.exponent_max = 2.5;
        spec.noise_sigma = 0.1;
        spec.seed = 7;
        const headbal::AttentionWorkload workload = headbal::generate_workload(spec);
        const headbal::SelectionPolicy policy{headbal::SelectionKind::PerQueryTopK,
                                              c.context / 8};

        double sink = 0.0;

        double serial_best = 1e300;
        for (int r = 0; r < repeats; ++r) {
            const auto start = Clock::now();
            for (const auto& head : workload.heads) {
                const auto dense = headbal::reference::dense_attention(head);
                const auto sparse = headbal::reference::sparse_attention(head, policy);
                sink += checksum(dense.output) + checksum(sparse);
            }
            serial_best = std::min(serial_best, seconds_since(start));
        }

        double parallel_best = 1e300;
        for (int r = 0; r < repeats; ++r) {
            const auto start = Clock::now();
            const auto dense = headbal::dense_attention_all(workload);
            const auto sparse = headbal::sparse_attention_all(workload, policy);
            for (const auto& d : dense) sink += checksum(d.output);
            for (const auto& s : sparse) sink += checksum(s);
            parallel_best = std::min(parallel_best, seconds_since(start));
        }

        std::printf("H=%-3ld nq=%-3ld nk=%-5ld d=%-3ld  %12.2f %12.2f %8.2fx\n", c.heads,
                    c.queries, c.context, c.dim, serial_best * 1e3, parallel_best * 1e3,
                    serial_best / parallel_best);
        if (sink == 42.0) std::printf("%f\n", sink);  // keep the work observable
    }
    return 0;
}
