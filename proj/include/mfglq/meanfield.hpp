#pragma once

#include "riccati.hpp"

namespace mfglq {

/// Deterministic mean trajectories of the stacked system: E[X], and the
/// consistent E[Y] = Pi E[X], E[Z] = (I-PF)^{-1} P ((C+Cbar) + D Pi) E[X].
struct MeanFieldTrajectory {
    TimeGrid grid;
    VectorPath EX, EY, EZ; // 4n each
};

/// Integrate the closed mean ODE forward with RK4 (P, Pi sampled by linear
/// interpolation at stage times) and reconstruct EY, EZ on the grid.
inline MeanFieldTrajectory solve_mean_field(const CCBlocks& b,
                                            const RiccatiPair& pair,
                                            const TimeGrid& grid) {
    MeanFieldTrajectory mf;
    mf.grid = grid;
    mf.EX = VectorPath(grid);
    mf.EY = VectorPath(grid);
    mf.EZ = VectorPath(grid);

    auto rhs = [&](double t, const Mat& ex_col) {
        const Vec ex = ex_col.col(0);
        const Mat P = pair.P.at(t);
        const Mat Pi = pair.Pi.at(t);
        const Vec ey = Pi * ex;
        const Mat Minv = detail::cc_resolvent(P, b.F_blk, t);
        const Vec ez = Minv * (P * ((b.C_blk + b.Cbar_blk) * ex + b.D_blk * ey));
        Mat out = (b.A_blk + b.Abar_blk) * ex + b.B_blk * ey + b.E_blk * ez;
        return out;
    };
    const MatrixPath exp_path =
        integrate_matrix_ode_forward(grid, b.X0_mean, rhs);
    for (int k = 0; k <= grid.K; ++k) {
        const double t = grid.points[static_cast<size_t>(k)];
        const Vec ex = exp_path[k].col(0);
        const Mat& P = pair.P[k];
        const Mat& Pi = pair.Pi[k];
        const Vec ey = Pi * ex;
        const Mat Minv = detail::cc_resolvent(P, b.F_blk, t);
        mf.EX[k] = ex;
        mf.EY[k] = ey;
        mf.EZ[k] = Minv * (P * ((b.C_blk + b.Cbar_blk) * ex + b.D_blk * ey));
    }
    return mf;
}

/// Affine decentralized feedback per class: u_class(t) = G(t) * Xstack + c(t),
/// where Xstack is the 4n stacked state (with mean-field values substituted
/// into the slots an agent cannot observe).
struct FeedbackGains {
    TimeGrid grid;
    MatrixPath G_major, G_minor, G_follower; // m x 4n
    VectorPath c_major, c_minor, c_follower; // m
};

/// Build the gains from the Riccati pair and the mean field:
/// Y(X) = P X + (Pi - P) EX,  Z(X) = (MC + MDP) X + M(Cbar + D(Pi-P)) EX,
/// u_c = -R_c^{-1} (B_cᵀ Y_block(c) + D_cᵀ Z_block(c)).
inline FeedbackGains build_feedback_gains(const CCBlocks& b, const ModelParams& p,
                                          const Dimensions& d,
                                          const RiccatiPair& pair,
                                          const MeanFieldTrajectory& mf) {
    const int n = d.n;
    FeedbackGains g;
    g.grid = mf.grid;
    g.G_major = MatrixPath(g.grid);
    g.G_minor = MatrixPath(g.grid);
    g.G_follower = MatrixPath(g.grid);
    g.c_major = VectorPath(g.grid);
    g.c_minor = VectorPath(g.grid);
    g.c_follower = VectorPath(g.grid);

    const Mat R0i = p.R0.inverse();
    const Mat Ri = p.R.inverse();
    const Mat Rti = p.Rtil.inverse();

    for (int k = 0; k <= g.grid.K; ++k) {
        const double t = g.grid.points[static_cast<size_t>(k)];
        const Mat& P = pair.P[k];
        const Mat& Pi = pair.Pi[k];
        const Vec& EX = mf.EX[k];
        const Mat M = detail::cc_resolvent(P, b.F_blk, t) * P;
        const Mat Ymat = P;                       // 4n x 4n
        const Vec Yoff = (Pi - P) * EX;           // 4n
        const Mat Zmat = M * (b.C_blk + b.D_blk * P);
        const Vec Zoff = M * (b.Cbar_blk * EX + b.D_blk * Yoff);

        auto block_rows = [&](const Mat& W, int blk) {
            return W.middleRows(blk * n, n);
        };
        auto block_seg = [&](const Vec& w, int blk) { return w.segment(blk * n, n); };

        g.G_major[k] = -R0i * (p.B0.transpose() * block_rows(Ymat, 0) +
                               p.D0.transpose() * block_rows(Zmat, 0));
        g.c_major[k] = -R0i * (p.B0.transpose() * block_seg(Yoff, 0) +
                               p.D0.transpose() * block_seg(Zoff, 0));
        g.G_minor[k] = -Ri * (p.B.transpose() * block_rows(Ymat, 1) +
                              p.D.transpose() * block_rows(Zmat, 1));
        g.c_minor[k] = -Ri * (p.B.transpose() * block_seg(Yoff, 1) +
                              p.D.transpose() * block_seg(Zoff, 1));
        g.G_follower[k] = -Rti * (p.Btil.transpose() * block_rows(Ymat, 2) +
                                  p.Dtil.transpose() * block_rows(Zmat, 2));
        g.c_follower[k] = -Rti * (p.Btil.transpose() * block_seg(Yoff, 2) +
                                  p.Dtil.transpose() * block_seg(Zoff, 2));
    }
    return g;
}

} // namespace mfglq
