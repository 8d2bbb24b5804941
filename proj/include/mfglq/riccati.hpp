#pragma once

#include <functional>

#include "model.hpp"

namespace mfglq {

/// Paired solution of the stacked Riccati equations: P decouples the
/// fluctuation part of the adjoint, Pi the mean part (Y = P(X-EX) + Pi EX).
struct RiccatiPair {
    MatrixPath P;
    MatrixPath Pi;
};

/// Riccati data of the sequential feedback route.
struct FeedbackRiccatis {
    MatrixPath P1;   // follower, n x n
    MatrixPath P3;   // minor leader, n x n
    VectorPath Phi3; // minor-leader offset, n
    MatrixPath P2;   // leader augmented, 3n x 3n (non-symmetric)
    VectorPath Phi2; // leader offset, 3n
};

constexpr double kBlowupCap = 1e12;

/// Classical fixed-step RK4 for a matrix ODE dM/dt = rhs(t, M) integrated
/// BACKWARD from M(T) = terminal to t = 0 on the given grid.  Throws
/// breakdown_error if any entry exceeds the blow-up cap, numerical_error on
/// non-finite values.  The terminal value is stored exactly as given.
inline MatrixPath integrate_matrix_ode_backward(
    const TimeGrid& grid, const Mat& terminal,
    const std::function<Mat(double, const Mat&)>& rhs) {
    MatrixPath path(grid);
    const int K = grid.K;
    const double h = -grid.dt; // backward step
    path[K] = terminal;
    for (int k = K; k >= 1; --k) {
        const double t = grid.points[static_cast<size_t>(k)];
        const Mat& M = path[k];
        const Mat k1 = rhs(t, M);
        const Mat k2 = rhs(t + 0.5 * h, M + (0.5 * h) * k1);
        const Mat k3 = rhs(t + 0.5 * h, M + (0.5 * h) * k2);
        const Mat k4 = rhs(t + h, M + h * k3);
        path[k - 1] = M + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        const Mat& next = path[k - 1];
        if (!next.allFinite())
            throw numerical_error("backward integration produced non-finite values near t=" +
                                  std::to_string(t));
        if (next.cwiseAbs().maxCoeff() > kBlowupCap)
            throw breakdown_error("Riccati solution exceeded blow-up cap", t + h);
    }
    return path;
}

/// Forward counterpart (used for the mean-field ODE).
inline MatrixPath integrate_matrix_ode_forward(
    const TimeGrid& grid, const Mat& initial,
    const std::function<Mat(double, const Mat&)>& rhs) {
    MatrixPath path(grid);
    const int K = grid.K;
    const double h = grid.dt;
    path[0] = initial;
    for (int k = 0; k < K; ++k) {
        const double t = grid.points[static_cast<size_t>(k)];
        const Mat& M = path[k];
        const Mat k1 = rhs(t, M);
        const Mat k2 = rhs(t + 0.5 * h, M + (0.5 * h) * k1);
        const Mat k3 = rhs(t + 0.5 * h, M + (0.5 * h) * k2);
        const Mat k4 = rhs(t + h, M + h * k3);
        path[k + 1] = M + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!path[k + 1].allFinite())
            throw numerical_error("forward integration produced non-finite values near t=" +
                                  std::to_string(t));
        if (path[k + 1].cwiseAbs().maxCoeff() > kBlowupCap)
            throw breakdown_error("forward solution exceeded blow-up cap", t + h);
    }
    return path;
}

namespace detail {

/// (I - P F_blk)^{-1} with breakdown detection (rcond threshold 1e-10).
inline Mat cc_resolvent(const Mat& P, const Mat& F_blk, double t) {
    const Mat M = Mat::Identity(P.rows(), P.cols()) - P * F_blk;
    if (rcond(M) < 1e-10)
        throw breakdown_error("(I - P*F_blk) lost invertibility", t);
    return M.inverse();
}

} // namespace detail

/// Right-hand side of the P equation (fluctuation Riccati):
/// dP/dt = -( P A + Aᵀ P + Cᵀ (I-PF)⁻¹ P C + Q + P B P + P E (I-PF)⁻¹ P (C + D P) ).
inline Mat cc_riccati_P_rhs(const CCBlocks& b, double t, const Mat& P) {
    const Mat Minv = detail::cc_resolvent(P, b.F_blk, t);
    const Mat MP = Minv * P;
    return -(P * b.A_blk + b.A_blk.transpose() * P +
             b.C_blk.transpose() * MP * b.C_blk + b.Q_blk + P * b.B_blk * P +
             P * b.E_blk * MP * (b.C_blk + b.D_blk * P));
}

/// Right-hand side of the Pi equation (mean Riccati), given P(t):
/// dPi/dt = -( Pi(A+Abar) + (Aᵀ+A0ᵀ)Pi + Pi B Pi + Q + Qbar
///             + (Pi E + Cᵀ + C0ᵀ)(I-PF)⁻¹ P (C + Cbar + D Pi) ).
inline Mat cc_riccati_Pi_rhs(const CCBlocks& b, double t, const Mat& P, const Mat& Pi) {
    const Mat Minv = detail::cc_resolvent(P, b.F_blk, t);
    const Mat MP = Minv * P;
    return -(Pi * (b.A_blk + b.Abar_blk) +
             (b.A_blk.transpose() + b.A0_blk.transpose()) * Pi + Pi * b.B_blk * Pi +
             b.Q_blk + b.Qbar_blk +
             (Pi * b.E_blk + b.C_blk.transpose() + b.C0_blk.transpose()) * MP *
                 (b.C_blk + b.Cbar_blk + b.D_blk * Pi));
}

/// Solve the coupled (P, Pi) pair jointly in one backward RK4 sweep so the Pi
/// stages see exact P stage values (full fourth order for both).
inline RiccatiPair solve_cc_riccati(const CCBlocks& b, const TimeGrid& grid) {
    const int N = static_cast<int>(b.A_blk.rows());
    Mat terminal(N, 2 * N);
    terminal << b.H0_blk, b.H0_blk;
    auto rhs = [&b, N](double t, const Mat& S) {
        const Mat P = S.leftCols(N);
        const Mat Pi = S.rightCols(N);
        Mat out(N, 2 * N);
        out.leftCols(N) = cc_riccati_P_rhs(b, t, P);
        out.rightCols(N) = cc_riccati_Pi_rhs(b, t, P, Pi);
        return out;
    };
    const MatrixPath joint = integrate_matrix_ode_backward(grid, terminal, rhs);
    RiccatiPair pair;
    pair.P = MatrixPath(grid);
    pair.Pi = MatrixPath(grid);
    for (int k = 0; k <= grid.K; ++k) {
        pair.P[k] = joint[k].leftCols(N);
        pair.Pi[k] = joint[k].rightCols(N);
    }
    return pair;
}

/// Follower Riccati P1:
/// dP1/dt = -( Atilᵀ P1 + P1 Atil + Qtil - P1 Btil Rtil⁻¹ Btilᵀ P1
///             + Stilᵀ Rtil_op⁻¹ P1 Stil ),  P1(T) = Htil,
/// with Rtil_op = I + P1 Dtil Rtil⁻¹ Dtilᵀ and Stil = Ctil - Dtil Rtil⁻¹ Btilᵀ P1.
inline MatrixPath solve_follower_P1(const ModelParams& p, const Dimensions& d,
                                    const TimeGrid& grid) {
    const int n = d.n;
    const Mat Rti = p.Rtil.inverse();
    auto rhs = [&, n](double t, const Mat& P1) {
        const Mat Rt = Mat::Identity(n, n) + P1 * p.Dtil * Rti * p.Dtil.transpose();
        if (rcond(Rt) < 1e-10)
            throw breakdown_error("follower operator I + P1*Dtil*Rtil^-1*Dtil' singular", t);
        const Mat St = p.Ctil - p.Dtil * Rti * p.Btil.transpose() * P1;
        return Mat(-(p.Atil.transpose() * P1 + P1 * p.Atil + p.Qtil -
                     P1 * p.Btil * Rti * p.Btil.transpose() * P1 +
                     St.transpose() * Rt.inverse() * P1 * St));
    };
    return integrate_matrix_ode_backward(grid, p.Htilw, rhs);
}

/// Minor-leader Riccati P3 and affine offset Phi3, integrated jointly.
/// P3 uses S = C - D R⁻¹ Bᵀ P3 and R_op = I + P3 D R⁻¹ Dᵀ; Phi3 is driven by
/// the deterministic minor-leader mean mX and the major-state mean X0bar.
inline void solve_minor_P3_Phi3(const ModelParams& p, const Dimensions& d,
                                const TimeGrid& grid, const VectorPath& mX,
                                const VectorPath& X0bar_mean, MatrixPath& P3_out,
                                VectorPath& Phi3_out) {
    const int n = d.n;
    const Mat Ri = p.R.inverse();
    auto rhs = [&, n](double t, const Mat& S) {
        const Mat P3 = S.leftCols(n);
        const Vec Phi3 = S.rightCols(1);
        const Mat Rop = Mat::Identity(n, n) + P3 * p.D * Ri * p.D.transpose();
        if (rcond(Rop) < 1e-10)
            throw breakdown_error("minor-leader operator I + P3*D*R^-1*D' singular", t);
        const Mat Ropi = Rop.inverse();
        const Mat Sop = p.C - p.D * Ri * p.B.transpose() * P3;
        Mat out(n, n + 1);
        out.leftCols(n) = -(p.A.transpose() * P3 + P3 * p.A + p.Q -
                            P3 * p.B * Ri * p.B.transpose() * P3 +
                            Sop.transpose() * Ropi * P3 * Sop);
        const Vec mXt = mX.at(t);
        const Vec X0t = X0bar_mean.at(t);
        const Vec f = P3 * p.E2 * mXt - P3 * p.D * Ri * p.B.transpose() * Phi3;
        out.rightCols(1) = -p.A.transpose() * Phi3 +
                           P3 * p.B * Ri * p.B.transpose() * Phi3 +
                           p.Q * (p.lambda * mXt + (1.0 - p.lambda) * X0t) -
                           P3 * p.E1 * mXt - Sop.transpose() * Ropi * f;
        return out;
    };
    Mat terminal(n, n + 1);
    terminal.leftCols(n) = p.Hw;
    terminal.rightCols(1) = Vec::Zero(n);
    const MatrixPath joint = integrate_matrix_ode_backward(grid, terminal, rhs);
    P3_out = MatrixPath(grid);
    Phi3_out = VectorPath(grid);
    for (int k = 0; k <= grid.K; ++k) {
        P3_out[k] = joint[k].leftCols(n);
        Phi3_out[k] = joint[k].rightCols(1);
    }
}

/// Leader augmented Riccati P2 (non-symmetric, 3n x 3n) and offset Phi2,
/// integrated jointly against the time-indexed leader blocks and the
/// minor-leader mean mX.  Terminal: P2(T) = blkdiag(H0w, 0, 0), Phi2(T) = 0.
inline void solve_leader_P2_Phi2(const LeaderBlocks& lb, const ModelParams& p,
                                 const TimeGrid& grid, const VectorPath& mX,
                                 MatrixPath& P2_out, VectorPath& Phi2_out) {
    const int n = lb.n;
    const int N = 3 * n;
    auto rhs = [&](double t, const Mat& S) {
        const Mat P2 = S.leftCols(N);
        const Vec Phi2 = S.rightCols(1);
        const Mat L11 = lb.L11.at(t), L12 = lb.L12.at(t), L13 = lb.L13.at(t);
        const Mat L21 = lb.L21.at(t), L22 = lb.L22.at(t), L23 = lb.L23.at(t);
        const Mat L31 = lb.L31.at(t), L32 = lb.L32.at(t), L33 = lb.L33.at(t);
        const Mat W = Mat::Identity(N, N) - P2 * L23;
        if (rcond(W) < 1e-10)
            throw breakdown_error("leader operator I - P2*L23 singular", t);
        const Mat Winv = W.inverse();
        const Mat G = (P2 * L13 - L33) * Winv;
        const Vec mXt = mX.at(t);
        const Vec f1 = lb.f1_mul.at(t) * mXt;
        const Vec f2 = lb.f2_mul.at(t) * mXt;
        const Vec f3 = lb.f3_mul.at(t) * mXt;
        Mat out(N, N + 1);
        out.leftCols(N) =
            -(P2 * L11 - L32 * P2 - L31 + P2 * L12 * P2 + G * P2 * (L21 + L22 * P2));
        out.rightCols(1) = -(((P2 * L12 - L32) + G * P2 * L22) * Phi2 + P2 * f1 +
                             G * P2 * f2 - f3);
        return out;
    };
    Mat terminal = Mat::Zero(N, N + 1);
    terminal.block(0, 0, n, n) = p.H0w;
    const MatrixPath joint = integrate_matrix_ode_backward(grid, terminal, rhs);
    P2_out = MatrixPath(grid);
    Phi2_out = VectorPath(grid);
    for (int k = 0; k <= grid.K; ++k) {
        P2_out[k] = joint[k].leftCols(N);
        Phi2_out[k] = joint[k].rightCols(1);
    }
}

} // namespace mfglq
