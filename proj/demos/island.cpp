// Rotation-number profile across the short-period island at one (mu, E),
// next to the normal-form prediction and the twistless torus.
//
//   demo_island [mu] [E]

#include <cstdio>
#include <cstdlib>

#include "l4twist/l4twist.hpp"

using namespace l4twist;

int main(int argc, char** argv)
{
    const double mu_v = argc > 1 ? std::atof(argv[1]) : 0.00914;
    const double E = argc > 2 ? std::atof(argv[2]) : 0.02;
    try {
        const MassRatio mu(mu_v);
        const NormalForm nf = normal_form(mu);
        const auto f = frequencies(mu);
        std::printf("mu = %.6f  E = %.4f  omega_s/omega_l = %.6f\n", mu_v, E, f.ratio());

        NumericSearchOptions opts;
        opts.seeds = 16;
        opts.workers = 4;
        FixedPoint fp;
        const auto profile = island_profile(mu, E, opts, &fp);
        std::printf("fixed point a = %.8f pa = %.8f  W0 = %.7f\n", fp.point.a, fp.point.pa,
                    fixed_point_rotation_number(fp));
        std::printf("%12s %12s %12s\n", "I", "W", "W_nf");
        for (const auto& e : profile) {
            if (e.flag != ProfileFlag::Ok) {
                std::printf("%12.4e %12s %12s  (%s)\n", e.I, "-", "-", e.reason.c_str());
                continue;
            }
            std::printf("%12.4e %12.7f %12.7f\n", e.I, e.W, nf_W_on_energy(nf, E, e.I));
        }
        const ProfileMaximum m = profile_maximum(profile);
        std::printf("max W = %.7f at I = %.4e\n", m.W, m.I);

        const TwistCurve curve = twistless_curve(nf);
        for (const auto& x : twistless_energy_crossings(nf, curve, E, {1, 4}, {1, 3}))
            std::printf("twistless torus on H = E: Is = %.4e Il = %.4e W = %.7f\n", x.Is, x.Il,
                        nf_rotation_number(nf, x.Is, x.Il));
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
