// Minimal library walkthrough: estimate the top growth rate of the delayed
// multiplicative equation dX(t) = X(t-1) dW(t) from a handful of initial
// histories, and show that the answer does not depend on where you start.
//
//   g++ -std=c++20 -O2 -I include demos/growth_rate_demo.cpp -o growth_rate_demo

#include <sdde/eta.hpp>
#include <sdde/lyapunov.hpp>

#include <cstdio>
#include <string>
#include <vector>

int main() {
    using namespace sdde;

    RunParams params;  // horizon 2000, resolution 64, burn-in 50, 20 batches
    const std::vector<std::string> specs = {"const:1", "linear", "cos:2"};

    std::printf("%-10s %12s %12s %12s\n", "history", "norm-growth", "std.err",
                "occupation");
    for (const std::string& spec : specs) {
        const Segment eta = make_eta(spec, params.N);
        const RateEstimates est =
            estimate_rates(eta, params, /*master_seed=*/42, /*stream_id=*/0, spec);
        std::printf("%-10s %12.5f %12.5f %12.5f\n", spec.c_str(),
                    est.direct_m2.estimate, est.direct_m2.standard_error,
                    est.furstenberg.estimate);
    }
    std::printf("\nAll rows share one noise stream, so the spread between them\n"
                "is the initial-condition effect alone; it dies out with the\n"
                "burn-in and the estimates agree within statistical error.\n");
    return 0;
}
