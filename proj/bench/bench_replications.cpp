// Wall-clock comparison of serial and OpenMP replications of the planar demo.
//
//   bench_replications [replications] [horizon]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include <omp.h>

#include "gmsmooth/demo.hpp"

using namespace gmsmooth;

namespace {

template <class F>
double time_it(F&& f) {
    const auto start = std::chrono::steady_clock::now();
    f();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string csv(const ReplicationResult& r) {
    std::ostringstream out;
    write_demo_csv(out, r);
    return out.str();
}

}  // namespace

int main(int argc, char** argv) {
    DemoConfig config;
    config.replications = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 64;
    if (argc > 2) {
        config.horizon = std::strtoul(argv[2], nullptr, 10);
        config.first_obs_index = config.horizon / 2;
    }
    validate_config(config);

    std::vector<ReplicationResult> serial, parallel;
    const double t_serial = time_it([&] { serial = run_replications_serial(config); });
    const double t_parallel = time_it([&] { parallel = run_replications_parallel(config); });

    bool identical = serial.size() == parallel.size();
    for (std::size_t i = 0; identical && i < serial.size(); ++i) {
        identical = csv(serial[i]) == csv(parallel[i]);
    }
    std::printf("replications %zu, horizon %zu, threads %d\n", config.replications, config.horizon,
                omp_get_max_threads());
    std::printf("serial   %.3f s (%.2f ms / replication)\n", t_serial, 1e3 * t_serial / config.replications);
    std::printf("parallel %.3f s (speedup %.2fx)\n", t_parallel, t_serial / t_parallel);
    std::printf("results %s\n", identical ? "identical" : "DIFFER");
    return identical ? 0 : 1;
}
