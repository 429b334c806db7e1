// Plans a 6-site dense-urban patch at two TPR values and compares against
// the exhaustive optimum.
#include <cstdio>

#include "loko/loko.hpp"

int main() {
    const auto topo = loko::generate(loko::oracle_scale_spec(7));
    const auto geom = loko::precompute_geometry(topo);
    for (double mu : {0.0, 10.0}) {
        loko::PlanConfig cfg;
        cfg.mu = mu;
        const auto p = loko::plan(topo, geom, cfg);
        const auto best = loko::exhaustive_oracle(geom, topo.budget, mu);
        std::printf("mu=%5.1f  min rate %8.3f Mbit/s  avg PEB %7.3f m  joint %10.3f  (optimum %10.3f)\n", mu,
                    p.eval.min_rate * 1e-6, p.eval.avg_peb, p.joint, best.joint);
    }
}
