#include <catch2/catch_amalgamated.hpp>

#include "test_util.hpp"

using namespace mfglq;

TEST_CASE("counter-based normals: purity, moments, decorrelation", "[rng]") {
    REQUIRE(crng::normal(1, 2, 3) == crng::normal(1, 2, 3));
    REQUIRE(crng::normal(1, 2, 3) != crng::normal(1, 2, 4));
    REQUIRE(crng::subseed(9, 0) != crng::subseed(9, 1));

    const int N = 200000;
    KahanSum s, s2, cross;
    double umin = 1.0, umax = 0.0;
    for (int i = 0; i < N; ++i) {
        const double a = crng::normal(42, crng::stream_id(1, 0),
                                      static_cast<uint64_t>(i));
        const double b = crng::normal(42, crng::stream_id(1, 1),
                                      static_cast<uint64_t>(i));
        s.add(a);
        s2.add(a * a);
        cross.add(a * b);
        const double u = crng::uniform_oc(42, 7, static_cast<uint64_t>(i));
        umin = std::min(umin, u);
        umax = std::max(umax, u);
    }
    REQUIRE(std::abs(s.value() / N) < 0.01);
    REQUIRE(std::abs(s2.value() / N - 1.0) < 0.02);
    REQUIRE(std::abs(cross.value() / N) < 0.01);
    REQUIRE(umin > 0.0);
    REQUIRE(umax <= 1.0);
}

TEST_CASE("Brownian increments have variance dt", "[rng]") {
    TimeGrid grid(1.0, 64);
    BrownianBundle bundle(grid, 11);
    KahanSum s2;
    const int reps = 4000;
    for (int r = 0; r < reps; ++r) {
        const double dw = bundle.increment(crng::stream_id(3, static_cast<uint64_t>(r)), 5);
        s2.add(dw * dw);
    }
    REQUIRE(std::abs(s2.value() / reps - grid.dt) < 0.1 * grid.dt);
}

TEST_CASE("closed-form scenario: zero controls, exact limiting costs",
          "[simulate]") {
    auto cfg = make_example51_scenario();
    cfg.grid_steps = 200;
    const CCSystem sys = build_cc_system(cfg);
    BrownianBundle bundle(sys.grid, cfg.seed);
    for (int pth = 0; pth < 20; ++pth) {
        const CCPathResult r = simulate_stacked_cc(sys, bundle, pth);
        double usup = 0.0;
        for (int k = 0; k <= sys.grid.K; ++k) {
            usup = std::max(usup, r.u_major[k].cwiseAbs().maxCoeff());
            usup = std::max(usup, r.u_minor[k].cwiseAbs().maxCoeff());
            usup = std::max(usup, r.u_follower[k].cwiseAbs().maxCoeff());
        }
        REQUIRE(usup < 1e-12);
        REQUIRE(r.terminal_gap < 1e-12);
        REQUIRE(r.bsde_residual < 1e-10);
        const auto st = stationarity_residuals(sys, r);
        REQUIRE(st.major < 1e-12);
        REQUIRE(st.minor < 1e-12);
        REQUIRE(st.follower < 1e-12);
    }
    // limiting costs are half the initial second moments (= 1/2 each here)
    const LimitingCosts lc = limiting_costs(sys, 4000, cfg.seed);
    REQUIRE(std::abs(lc.Jl - 0.5) < 4.0 * lc.sel);
    REQUIRE(std::abs(lc.Jf - 0.5) < 4.0 * lc.sef);
    REQUIRE(std::abs(lc.J0) < 1e-12);
}

TEST_CASE("pathwise ansatz identities on a coupled scenario", "[simulate]") {
    auto cfg = make_coupled_scenario();
    cfg.grid_steps = 100;
    const CCSystem sys = build_cc_system(cfg);
    BrownianBundle bundle(sys.grid, 3);
    for (int pth = 0; pth < 10; ++pth) {
        const CCPathResult r = simulate_stacked_cc(sys, bundle, pth);
        REQUIRE(r.terminal_gap < 1e-12);
        const auto st = stationarity_residuals(sys, r);
        REQUIRE(st.major < 1e-12);
        REQUIRE(st.minor < 1e-12);
        REQUIRE(st.follower < 1e-12);
    }
}

TEST_CASE("backward residual refines at first order when the decoupling "
          "matrix respects the noise sources",
          "[simulate]") {
    auto cfg = make_source_compatible_scenario();
    auto mean_residual = [&](int K) {
        cfg.grid_steps = K;
        const CCSystem sys = build_cc_system(cfg);
        BrownianBundle bundle(sys.grid, 5);
        RunningStat rs;
        for (int pth = 0; pth < 20; ++pth)
            rs.add(simulate_stacked_cc(sys, bundle, pth).bsde_residual);
        return rs.mean();
    };
    const double r100 = mean_residual(100);
    const double r200 = mean_residual(200);
    REQUIRE(r100 / r200 >= 1.8);
}

TEST_CASE("limiting follower cost matches the scalar LQ value", "[simulate]") {
    // dx = u dt, cost 1/2 E int (x^2 + u^2); value = tanh(T)/2 * E[x0^2]
    Dimensions d{1, 1, 1, 1};
    ModelParams p = detail::zero_params(d);
    p.Btil(0, 0) = 1.0;
    p.Qtil(0, 0) = 1.0;
    p.T = 1.0;
    InitialLaw law;
    law.mean_xi0 = Vec::Zero(1);
    law.cov_xi0 = law.cov_xi = Mat::Identity(1, 1);
    law.cov_zeta = 0.7 * Mat::Identity(1, 1);
    ScenarioConfig cfg{d, p, law, 200, 4000, {{10, 10}}, 5};
    const CCSystem sys = build_cc_system(cfg);
    const LimitingCosts lc = limiting_costs(sys, cfg.mc_paths, cfg.seed);
    const double exact = 0.5 * std::tanh(1.0) * 0.7;
    REQUIRE(std::abs(lc.Jf - exact) < 4.0 * lc.sef + 1e-6);
}

TEST_CASE("population simulation matches an independent single-agent "
          "re-implementation",
          "[simulate]") {
    auto cfg = make_scaling_scenario();
    cfg.grid_steps = 50;
    const CCSystem sys = build_cc_system(cfg);
    const ModelParams& p = cfg.params;
    const TimeGrid& g = sys.grid;
    const int n = cfg.dims.n;
    const uint64_t seed = 991;

    const PopulationResult pr = simulate_population(sys, 1, 1, seed);

    // longhand N_l = N_f = 1 rebuild (same noise, same strategy)
    BrownianBundle bundle(g, seed);
    const double sx0 = std::sqrt(sys.initial.cov_xi0(0, 0));
    const double sxi = std::sqrt(sys.initial.cov_xi(0, 0));
    const double sze = std::sqrt(sys.initial.cov_zeta(0, 0));
    double X0 = sys.initial.mean_xi0(0) + sx0 * bundle.normal_draw(crng::stream_id(0, 0), 0);
    double Xl = sxi * bundle.normal_draw(crng::stream_id(1, 0), 0);
    double Xf = sze * bundle.normal_draw(crng::stream_id(2, 0), 0);
    // Euler mean recursion of the deployed system
    std::vector<double> m0(g.K + 1), ml(g.K + 1), mfp(g.K + 1);
    {
        double a = sys.initial.mean_xi0(0), bm = 0.0, c = 0.0;
        for (int k = 0; k <= g.K; ++k) {
            m0[k] = a;
            ml[k] = bm;
            mfp[k] = c;
            if (k == g.K) break;
            const double mX = sys.mf.EX[k](1), mx = sys.mf.EX[k](2),
                         mK = sys.mf.EX[k](3);
            Vec S(4);
            S << a, mX, mx, mK;
            const double u0 = (sys.gains.G_major[k] * S + sys.gains.c_major[k])(0);
            S << a, bm, mx, mK;
            const double ul = (sys.gains.G_minor[k] * S + sys.gains.c_minor[k])(0);
            S << a, mX, c, mK;
            const double uf =
                (sys.gains.G_follower[k] * S + sys.gains.c_follower[k])(0);
            const double an = a + g.dt * (p.A0(0, 0) * a + p.B0(0, 0) * u0 +
                                          p.E01(0, 0) * bm + p.F01(0, 0) * c);
            const double bn = bm + g.dt * (p.A(0, 0) * bm + p.B(0, 0) * ul +
                                           p.E1(0, 0) * bm);
            const double cn = c + g.dt * (p.Atil(0, 0) * c + p.Btil(0, 0) * uf +
                                          p.F1(0, 0) * c);
            a = an;
            bm = bn;
            c = cn;
        }
    }
    double J0 = 0, Jl = 0, Jf = 0, sdl = 0, sdf = 0;
    for (int k = 0; k <= g.K; ++k) {
        const double mX = sys.mf.EX[k](1), mx = sys.mf.EX[k](2), mK = sys.mf.EX[k](3);
        const double w = (k == 0 || k == g.K) ? 0.5 * g.dt : g.dt;
        Vec S(4);
        S << X0, mX, mx, mK;
        const double u0 = (sys.gains.G_major[k] * S + sys.gains.c_major[k])(0);
        S << X0, Xl, mx, mK;
        const double ul = (sys.gains.G_minor[k] * S + sys.gains.c_minor[k])(0);
        S << X0, mX, Xf, mK;
        const double uf = (sys.gains.G_follower[k] * S + sys.gains.c_follower[k])(0);
        sdl = std::max(sdl, (Xl - ml[k]) * (Xl - ml[k]));
        sdf = std::max(sdf, (Xf - mfp[k]) * (Xf - mfp[k]));
        const double r0 = X0 - (p.lambda0 * Xl + (1.0 - p.lambda0) * Xf);
        const double rl = Xl - (p.lambda * Xl + (1.0 - p.lambda) * X0);
        const double rf = Xf - (p.ltil1 * X0 + p.ltil2 * Xl + p.ltil3 * Xf);
        J0 += w * (p.Q0(0, 0) * r0 * r0 + p.R0(0, 0) * u0 * u0);
        Jl += w * (p.Q(0, 0) * rl * rl + p.R(0, 0) * ul * ul);
        Jf += w * (p.Qtil(0, 0) * rf * rf + p.Rtil(0, 0) * uf * uf);
        if (k == g.K) break;
        const double dW0 = bundle.increment(crng::stream_id(0, 0), k);
        const double dWl = bundle.increment(crng::stream_id(1, 0), k);
        const double dWf = bundle.increment(crng::stream_id(2, 0), k);
        const double X0n =
            X0 + g.dt * (p.A0(0, 0) * X0 + p.B0(0, 0) * u0 + p.E01(0, 0) * Xl +
                         p.F01(0, 0) * Xf) +
            dW0 * (p.C0(0, 0) * X0 + p.D0(0, 0) * u0 + p.E02(0, 0) * Xl +
                   p.F02(0, 0) * Xf);
        const double Xln =
            Xl + g.dt * (p.A(0, 0) * Xl + p.B(0, 0) * ul + p.E1(0, 0) * Xl) +
            dWl * (p.C(0, 0) * Xl + p.D(0, 0) * ul + p.E2(0, 0) * Xl);
        const double Xfn =
            Xf + g.dt * (p.Atil(0, 0) * Xf + p.Btil(0, 0) * uf + p.F1(0, 0) * Xf) +
            dWf * (p.Ctil(0, 0) * Xf + p.Dtil(0, 0) * uf + p.F2(0, 0) * Xf);
        X0 = X0n;
        Xl = Xln;
        Xf = Xfn;
    }
    J0 = 0.5 * (J0 + p.H0w(0, 0) * X0 * X0);
    Jl = 0.5 * (Jl + p.Hw(0, 0) * Xl * Xl);
    Jf = 0.5 * (Jf + p.Htilw(0, 0) * Xf * Xf);

    REQUIRE(std::abs(pr.J0 - J0) < 1e-12);
    REQUIRE(std::abs(pr.Jl_mean - Jl) < 1e-12);
    REQUIRE(std::abs(pr.Jf_mean - Jf) < 1e-12);
    REQUIRE(std::abs(pr.sup_dev_minor - sdl) < 1e-12);
    REQUIRE(std::abs(pr.sup_dev_follower - sdf) < 1e-12);
}

TEST_CASE("empirical-average deviation scales like 1/N", "[simulate]") {
    auto cfg = make_scaling_scenario();
    cfg.grid_steps = 50;
    const CCSystem sys = build_cc_system(cfg);
    auto mean_dev = [&](int N) {
        RunningStat rs;
        for (int r = 0; r < 60; ++r)
            rs.add(simulate_population(sys, N, N, crng::subseed(77, static_cast<uint64_t>(r)))
                       .sup_dev_minor);
        return rs.mean();
    };
    const double d25 = mean_dev(25);
    const double d100 = mean_dev(100);
    REQUIRE(d25 / d100 > 2.5);
    REQUIRE(d25 / d100 < 6.0);
}

TEST_CASE("unilateral deviations: exact zero at scale zero, costly otherwise",
          "[simulate]") {
    auto cfg = make_coupled_scenario();
    cfg.grid_steps = 50;
    const CCSystem sys = build_cc_system(cfg);
    for (int cls = 0; cls < 3; ++cls) {
        REQUIRE(perturbation_gap(sys, 8, 8, 123, cls, cls == 0 ? 0 : 3, 0.0, 9) ==
                0.0);
        REQUIRE(perturbation_gap(sys, 8, 8, 123, cls, cls == 0 ? 0 : 3, 0.5, 9) >
                0.0);
    }
}

TEST_CASE("convexity probes: nonnegative under PSD weights, negative for the "
          "indefinite counterexample",
          "[simulate]") {
    auto cfg = make_coupled_scenario();
    TimeGrid grid(cfg.params.T, 50);
    for (auto cls :
         {AgentClass::Major, AgentClass::MinorLeader, AgentClass::Follower}) {
        const auto vals =
            convexity_probe(cfg.params, cfg.dims, grid, cls, 15, 2024);
        for (double v : vals) REQUIRE(v >= -1e-10);
    }
    auto bad = cfg.params;
    bad.Qtil = -Mat::Identity(1, 1);
    bad.Rtil = 1e-4 * Mat::Identity(1, 1);
    bad.Htilw = Mat::Zero(1, 1);
    const auto vals =
        convexity_probe(bad, cfg.dims, grid, AgentClass::Follower, 30, 2024);
    double vmin = 1e300;
    for (double v : vals) vmin = std::min(vmin, v);
    REQUIRE(vmin < 0.0);
}
