// Draws one four-cell instance, runs the joint allocator and the
// max-mean-SINR baseline on it, and prints who serves whom.

#include "vwn/vwn.hpp"

#include <cstdio>

int main() {
    vwn::ScenarioConfig sc;
    sc.seed = 7;
    const vwn::NetworkInstance inst = vwn::generate_scenario(sc, 0);

    const vwn::AllocationResult joint = vwn::solve_joint(inst);
    const vwn::AllocationResult base = vwn::solve_baseline(inst);

    std::printf("joint:    %s, %.3f bps/Hz after %zu outer iterations\n", vwn::to_string(joint.status), joint.total_rate,
                joint.outer_iters);
    std::printf("baseline: %s, %.3f bps/Hz after %zu outer iterations\n", vwn::to_string(base.status), base.total_rate,
                base.outer_iters);
    for (std::size_t n = 0; n < inst.num_users(); ++n) {
        std::printf("user %zu (slice %zu): BS %ld, carriers", n, inst.slice_of(n), joint.beta.serving_bs(n));
        for (std::size_t m = 0; m < inst.num_bs; ++m) {
            for (std::size_t k = 0; k < inst.num_carriers; ++k) {
                if (joint.beta.beta(m, k, n) > 0.5) std::printf(" %zu@%.3gW", k, joint.power.p(m, k, n));
            }
        }
        std::printf("\n");
    }
    return joint.status == vwn::AllocationStatus::feasible ? 0 : 1;
}
