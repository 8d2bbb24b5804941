#include <catch2/catch_amalgamated.hpp>

#include "test_util.hpp"

using namespace mfglq;

TEST_CASE("mean field of the closed-form scenario", "[meanfield]") {
    auto cfg = make_example51_scenario();
    cfg.initial.mean_xi0 = Vec::Constant(1, 1.5);
    cfg.grid_steps = 200;
    const CCSystem sys = build_cc_system(cfg);
    for (int k = 0; k <= sys.grid.K; ++k) {
        // the major mean is frozen (no dynamics, zero controls); all other
        // blocks start at zero mean and stay there
        REQUIRE(std::abs(sys.mf.EX[k](0) - 1.5) < 1e-13);
        REQUIRE(sys.mf.EX[k].tail(3).cwiseAbs().maxCoeff() < 1e-13);
        REQUIRE(sys.mf.EY[k].cwiseAbs().maxCoeff() < 1e-13);
        REQUIRE(sys.mf.EZ[k].cwiseAbs().maxCoeff() < 1e-13);
        REQUIRE(sys.gains.G_major[k].cwiseAbs().maxCoeff() < 1e-13);
        REQUIRE(sys.gains.G_minor[k].cwiseAbs().maxCoeff() < 1e-13);
        REQUIRE(sys.gains.G_follower[k].cwiseAbs().maxCoeff() < 1e-13);
        REQUIRE(sys.gains.c_major[k].cwiseAbs().maxCoeff() < 1e-13);
        REQUIRE(sys.gains.c_minor[k].cwiseAbs().maxCoeff() < 1e-13);
        REQUIRE(sys.gains.c_follower[k].cwiseAbs().maxCoeff() < 1e-13);
    }
}

TEST_CASE("feedback gains match the direct stationarity formula",
          "[meanfield]") {
    auto cfg = make_coupled_scenario();
    cfg.grid_steps = 100;
    const CCSystem sys = build_cc_system(cfg);
    const ModelParams& p = cfg.params;
    const int n = cfg.dims.n;
    for (int k = 0; k <= sys.grid.K; k += 7) {
        const Mat& P = sys.riccati.P[k];
        const Mat& Pi = sys.riccati.Pi[k];
        const Vec& EX = sys.mf.EX[k];
        const Mat Minv = sys.resolvent[k];
        // independent longhand: Y(X) and Z(X) as affine maps of the stacked
        // state, then the first-order condition per class
        const Mat Ymat = P;
        const Vec Yoff = Pi * EX - P * EX;
        const Mat Zmat = Minv * P * (sys.blocks.C_blk + sys.blocks.D_blk * P);
        const Vec Zoff = Minv * P *
                         (sys.blocks.Cbar_blk * EX + sys.blocks.D_blk * Yoff);
        const Mat Gm = -p.R0.inverse() *
                       (p.B0.transpose() * Ymat.middleRows(0, n) +
                        p.D0.transpose() * Zmat.middleRows(0, n));
        const Vec cm = -p.R0.inverse() *
                       (p.B0.transpose() * Yoff.segment(0, n) +
                        p.D0.transpose() * Zoff.segment(0, n));
        const Mat Gl = -p.R.inverse() *
                       (p.B.transpose() * Ymat.middleRows(n, n) +
                        p.D.transpose() * Zmat.middleRows(n, n));
        const Mat Gf = -p.Rtil.inverse() *
                       (p.Btil.transpose() * Ymat.middleRows(2 * n, n) +
                        p.Dtil.transpose() * Zmat.middleRows(2 * n, n));
        REQUIRE((sys.gains.G_major[k] - Gm).cwiseAbs().maxCoeff() < 1e-12);
        REQUIRE((sys.gains.c_major[k] - cm).cwiseAbs().maxCoeff() < 1e-12);
        REQUIRE((sys.gains.G_minor[k] - Gl).cwiseAbs().maxCoeff() < 1e-12);
        REQUIRE((sys.gains.G_follower[k] - Gf).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("adjoint-mean identities hold on the grid", "[meanfield]") {
    auto cfg = make_coupled_scenario_n2();
    cfg.grid_steps = 100;
    const CCSystem sys = build_cc_system(cfg);
    for (int k = 0; k <= sys.grid.K; ++k) {
        const Mat& P = sys.riccati.P[k];
        const Mat& Pi = sys.riccati.Pi[k];
        const Vec ey = Pi * sys.mf.EX[k];
        const Vec ez = sys.resolvent[k] *
                       (P * ((sys.blocks.C_blk + sys.blocks.Cbar_blk) *
                                 sys.mf.EX[k] +
                             sys.blocks.D_blk * ey));
        REQUIRE((sys.mf.EY[k] - ey).cwiseAbs().maxCoeff() < 1e-12);
        REQUIRE((sys.mf.EZ[k] - ez).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("decentralized information slots have zero gain when unobserved "
          "coupling vanishes",
          "[meanfield]") {
    auto cfg = make_scaling_scenario(); // ltil1 = 0
    cfg.grid_steps = 100;
    const CCSystem sys = build_cc_system(cfg);
    const int n = cfg.dims.n;
    for (int k = 0; k <= sys.grid.K; ++k) {
        // major: only its own state enters
        REQUIRE(sys.gains.G_major[k].rightCols(3 * n).cwiseAbs().maxCoeff() == 0.0);
        // minor leader: major state and own state only
        REQUIRE(sys.gains.G_minor[k].rightCols(2 * n).cwiseAbs().maxCoeff() == 0.0);
        // follower: own state only
        REQUIRE(sys.gains.G_follower[k].leftCols(2 * n).cwiseAbs().maxCoeff() == 0.0);
        REQUIRE(sys.gains.G_follower[k].rightCols(n).cwiseAbs().maxCoeff() == 0.0);
    }
    // and with direct major tracking (ltil1 != 0) the slots are genuinely used
    auto cfg2 = make_coupled_scenario();
    cfg2.grid_steps = 100;
    const CCSystem sys2 = build_cc_system(cfg2);
    REQUIRE(sys2.gains.G_minor[0].rightCols(n).cwiseAbs().maxCoeff() > 1e-5);
}

TEST_CASE("follower Riccati block reduces to the scalar tanh solution",
          "[meanfield]") {
    // decoupled follower-only model: dx = u dt, running cost x^2 + u^2
    Dimensions d{1, 1, 1, 1};
    ModelParams p = detail::zero_params(d);
    p.Btil(0, 0) = 1.0;
    p.Qtil(0, 0) = 1.0;
    p.T = 1.0;
    InitialLaw law;
    law.mean_xi0 = Vec::Zero(1);
    law.cov_xi0 = law.cov_xi = law.cov_zeta = Mat::Identity(1, 1);
    ScenarioConfig cfg{d, p, law, 200, 100, {{10, 10}}, 5};
    const CCSystem sys = build_cc_system(cfg);
    for (int k = 0; k <= sys.grid.K; ++k) {
        const double t = sys.grid.points[static_cast<size_t>(k)];
        REQUIRE(std::abs(sys.riccati.P[k](2, 2) - std::tanh(p.T - t)) < 1e-8);
        // optimal follower feedback is -tanh(T - t) x
        REQUIRE(std::abs(sys.gains.G_follower[k](0, 2) + std::tanh(p.T - t)) <
                1e-8);
    }
}
