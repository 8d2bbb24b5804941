#pragma once

#include <string>
#include <vector>

#include "grid.hpp"

namespace mfglq {

/// State / control dimensions: n state, m1 major control, m2 minor-leader
/// control, m3 follower control.
struct Dimensions {
    int n = 1;
    int m1 = 1;
    int m2 = 1;
    int m3 = 1;
};

/// Coefficients of the linear-quadratic major/minor-leader/follower model.
/// Naming: plain letters = minor leaders, 0-suffix = major, "til" = followers.
struct ModelParams {
    // drift / diffusion, state-to-state
    Mat A0, A, Atil;
    Mat C0, C, Ctil;
    // mean-field couplings (E* to minor-leader average, F* to follower average)
    Mat E01, E02, E1, E2;
    Mat F01, F02, F1, F2;
    // control channels
    Mat B0, D0; // n x m1
    Mat B, D;   // n x m2
    Mat Btil, Dtil; // n x m3
    // cost weights (symmetric)
    Mat Q0, Q, Qtil;       // n x n, PSD expected
    Mat H0w, Hw, Htilw;    // terminal weights, n x n
    Mat R0, R, Rtil;       // control weights, invertible
    // convex-combination tracking weights
    double lambda0 = 0.0, lambda = 0.0;
    double ltil1 = 0.0, ltil2 = 0.0, ltil3 = 0.0;
    double T = 1.0;
};

/// Gaussian initial law.  Minor-leader and follower means are zero (H2);
/// only the major may have a nonzero mean.
struct InitialLaw {
    Vec mean_xi0;   // n
    Mat cov_xi0;    // n x n
    Mat cov_xi;     // n x n, minor leaders (mean zero)
    Mat cov_zeta;   // n x n, followers (mean zero)
};

/// A single scenario: parameters + initial law + run controls.
struct ScenarioConfig {
    Dimensions dims;
    ModelParams params;
    InitialLaw initial;
    int grid_steps = 200;
    int mc_paths = 1000;
    std::vector<std::pair<int, int>> populations; // (N_l, N_f)
    uint64_t seed = 1;
};

/// One violated invariant found by validate_params.
struct Violation {
    std::string field;
    std::string message;
};

namespace detail {

inline void check_shape(std::vector<Violation>& out, const std::string& name,
                        const Mat& M, int rows, int cols) {
    if (M.rows() != rows || M.cols() != cols)
        out.push_back({name, "expected " + std::to_string(rows) + "x" +
                                 std::to_string(cols) + ", got " +
                                 std::to_string(M.rows()) + "x" +
                                 std::to_string(M.cols())});
}

inline void check_symmetric(std::vector<Violation>& out, const std::string& name,
                            const Mat& M) {
    if (M.rows() != M.cols()) return; // shape already reported
    const double tol = 1e-12 * (1.0 + M.cwiseAbs().maxCoeff());
    if ((M - M.transpose()).cwiseAbs().maxCoeff() > tol)
        out.push_back({name, "not symmetric to machine tolerance"});
}

inline void check_lambda(std::vector<Violation>& out, const std::string& name,
                         double v) {
    if (!(v >= 0.0 && v <= 1.0))
        out.push_back({name, "must lie in [0, 1]"});
}

inline void check_invertible(std::vector<Violation>& out, const std::string& name,
                             const Mat& M) {
    if (M.rows() != M.cols() || M.rows() == 0) return;
    if (rcond(M) < 1e-12)
        out.push_back({name, "control weight numerically singular (rcond < 1e-12)"});
}

} // namespace detail

/// Checks shapes, symmetry of weight matrices, lambda ranges, horizon and
/// invertibility of the control weights.  Empty result means valid.
inline std::vector<Violation> validate_params(const ModelParams& p,
                                              const Dimensions& d) {
    std::vector<Violation> v;
    const int n = d.n;
    detail::check_shape(v, "A0", p.A0, n, n);
    detail::check_shape(v, "A", p.A, n, n);
    detail::check_shape(v, "Atilde", p.Atil, n, n);
    detail::check_shape(v, "C0", p.C0, n, n);
    detail::check_shape(v, "C", p.C, n, n);
    detail::check_shape(v, "Ctilde", p.Ctil, n, n);
    detail::check_shape(v, "E0_1", p.E01, n, n);
    detail::check_shape(v, "E0_2", p.E02, n, n);
    detail::check_shape(v, "E1", p.E1, n, n);
    detail::check_shape(v, "E2", p.E2, n, n);
    detail::check_shape(v, "F0_1", p.F01, n, n);
    detail::check_shape(v, "F0_2", p.F02, n, n);
    detail::check_shape(v, "F1", p.F1, n, n);
    detail::check_shape(v, "F2", p.F2, n, n);
    detail::check_shape(v, "B0", p.B0, n, d.m1);
    detail::check_shape(v, "D0", p.D0, n, d.m1);
    detail::check_shape(v, "B", p.B, n, d.m2);
    detail::check_shape(v, "D", p.D, n, d.m2);
    detail::check_shape(v, "Btilde", p.Btil, n, d.m3);
    detail::check_shape(v, "Dtilde", p.Dtil, n, d.m3);
    detail::check_shape(v, "Q0", p.Q0, n, n);
    detail::check_shape(v, "Q", p.Q, n, n);
    detail::check_shape(v, "Qtilde", p.Qtil, n, n);
    detail::check_shape(v, "H0w", p.H0w, n, n);
    detail::check_shape(v, "Hw", p.Hw, n, n);
    detail::check_shape(v, "Htildew", p.Htilw, n, n);
    detail::check_shape(v, "R0", p.R0, d.m1, d.m1);
    detail::check_shape(v, "R", p.R, d.m2, d.m2);
    detail::check_shape(v, "Rtilde", p.Rtil, d.m3, d.m3);

    detail::check_symmetric(v, "Q0", p.Q0);
    detail::check_symmetric(v, "Q", p.Q);
    detail::check_symmetric(v, "Qtilde", p.Qtil);
    detail::check_symmetric(v, "H0w", p.H0w);
    detail::check_symmetric(v, "Hw", p.Hw);
    detail::check_symmetric(v, "Htildew", p.Htilw);
    detail::check_symmetric(v, "R0", p.R0);
    detail::check_symmetric(v, "R", p.R);
    detail::check_symmetric(v, "Rtilde", p.Rtil);

    detail::check_lambda(v, "lambda0", p.lambda0);
    detail::check_lambda(v, "lambda", p.lambda);
    detail::check_lambda(v, "lambda_tilde1", p.ltil1);
    detail::check_lambda(v, "lambda_tilde2", p.ltil2);
    detail::check_lambda(v, "lambda_tilde3", p.ltil3);

    detail::check_invertible(v, "R0", p.R0);
    detail::check_invertible(v, "R", p.R);
    detail::check_invertible(v, "Rtilde", p.Rtil);

    if (!(p.T > 0.0)) v.push_back({"T", "horizon must be positive"});
    return v;
}

inline void check_initial_law(std::vector<Violation>& v, const InitialLaw& law,
                              int n) {
    detail::check_shape(v, "cov_xi0", law.cov_xi0, n, n);
    detail::check_shape(v, "cov_xi", law.cov_xi, n, n);
    detail::check_shape(v, "cov_zeta", law.cov_zeta, n, n);
    if (law.mean_xi0.size() != n)
        v.push_back({"mean_xi0", "expected length " + std::to_string(n)});
    detail::check_symmetric(v, "cov_xi0", law.cov_xi0);
    detail::check_symmetric(v, "cov_xi", law.cov_xi);
    detail::check_symmetric(v, "cov_zeta", law.cov_zeta);
}

/// Block matrices of the stacked 4n-dimensional consistency system.
/// Stacking order: (major state, minor-leader representative, follower
/// representative, auxiliary K); adjoints stacked the same way.
struct CCBlocks {
    int n = 0;
    Mat A_blk, Abar_blk;   // 4n x 4n drift blocks
    Mat C_blk, Cbar_blk;   // diffusion blocks
    Mat B_blk, D_blk, E_blk, F_blk; // adjoint couplings (control eliminations)
    Mat A0_blk, C0_blk;    // mean couplings of the backward equation
    Mat Q_blk, Qbar_blk;   // state weights of the backward equation
    Mat H0_blk;            // terminal weight of the backward equation
    Vec X0_mean;           // mean of the stacked initial state (4n)
};

namespace detail {

inline void place(Mat& M, int r, int c, int n, const Mat& blk) {
    M.block(r * n, c * n, n, n) = blk;
}

} // namespace detail

/// Assemble the stacked blocks from the componentwise consistency system.
/// The backward equation is written dY = -{A_blkᵀ Y + A0_blkᵀ E[Y] + C_blkᵀ Z
/// + C0_blkᵀ E[Z] + Q_blk X + Qbar_blk E[X]} dt + Z∘dW, and the weight blocks
/// are derived directly from the componentwise equations (see tests for the
/// equation-by-equation oracle).
inline CCBlocks assemble_cc_blocks(const ModelParams& p, const Dimensions& d,
                                   const InitialLaw& law) {
    const int n = d.n;
    {
        auto viols = validate_params(p, d);
        if (!viols.empty())
            throw config_error("assemble_cc_blocks: invalid parameters (" +
                               viols.front().field + ": " + viols.front().message + ")");
    }
    CCBlocks b;
    b.n = n;
    const Mat Z = Mat::Zero(n, n);
    auto zero4 = [&] { return Mat::Zero(4 * n, 4 * n); };

    const Mat R0i = p.R0.inverse();
    const Mat Ri = p.R.inverse();
    const Mat Rti = p.Rtil.inverse();

    b.A_blk = zero4();
    detail::place(b.A_blk, 0, 0, n, p.A0);
    detail::place(b.A_blk, 1, 1, n, p.A);
    detail::place(b.A_blk, 2, 2, n, p.Atil);
    detail::place(b.A_blk, 3, 3, n, p.Atil);

    b.Abar_blk = zero4();
    detail::place(b.Abar_blk, 0, 1, n, p.E01);
    detail::place(b.Abar_blk, 0, 2, n, p.F01);
    detail::place(b.Abar_blk, 1, 1, n, p.E1);
    detail::place(b.Abar_blk, 2, 2, n, p.F1);

    b.C_blk = zero4();
    detail::place(b.C_blk, 0, 0, n, p.C0);
    detail::place(b.C_blk, 1, 1, n, p.C);
    detail::place(b.C_blk, 2, 2, n, p.Ctil);
    detail::place(b.C_blk, 3, 3, n, p.Ctil);

    b.Cbar_blk = zero4();
    detail::place(b.Cbar_blk, 0, 1, n, p.E02);
    detail::place(b.Cbar_blk, 0, 2, n, p.F02);
    detail::place(b.Cbar_blk, 1, 1, n, p.E2);
    detail::place(b.Cbar_blk, 2, 2, n, p.F2);

    // Control eliminations: blocks 1-3 enter with minus (optimal feedback),
    // block 4 (the auxiliary K-equation) with plus.
    const Mat GB0 = p.B0 * R0i * p.B0.transpose();
    const Mat GB = p.B * Ri * p.B.transpose();
    const Mat GBt = p.Btil * Rti * p.Btil.transpose();
    const Mat GD0B0 = p.D0 * R0i * p.B0.transpose();
    const Mat GDB = p.D * Ri * p.B.transpose();
    const Mat GDBt = p.Dtil * Rti * p.Btil.transpose();
    const Mat GB0D0 = p.B0 * R0i * p.D0.transpose();
    const Mat GBD = p.B * Ri * p.D.transpose();
    const Mat GBDt = p.Btil * Rti * p.Dtil.transpose();
    const Mat GD0 = p.D0 * R0i * p.D0.transpose();
    const Mat GD = p.D * Ri * p.D.transpose();
    const Mat GDt = p.Dtil * Rti * p.Dtil.transpose();

    b.B_blk = zero4();
    detail::place(b.B_blk, 0, 0, n, -GB0);
    detail::place(b.B_blk, 1, 1, n, -GB);
    detail::place(b.B_blk, 2, 2, n, -GBt);
    detail::place(b.B_blk, 3, 3, n, GBt);

    b.D_blk = zero4();
    detail::place(b.D_blk, 0, 0, n, -GD0B0);
    detail::place(b.D_blk, 1, 1, n, -GDB);
    detail::place(b.D_blk, 2, 2, n, -GDBt);
    detail::place(b.D_blk, 3, 3, n, GDBt);

    b.E_blk = zero4();
    detail::place(b.E_blk, 0, 0, n, -GB0D0);
    detail::place(b.E_blk, 1, 1, n, -GBD);
    detail::place(b.E_blk, 2, 2, n, -GBDt);
    detail::place(b.E_blk, 3, 3, n, GBDt);

    b.F_blk = zero4();
    detail::place(b.F_blk, 0, 0, n, -GD0);
    detail::place(b.F_blk, 1, 1, n, -GD);
    detail::place(b.F_blk, 2, 2, n, -GDt);
    detail::place(b.F_blk, 3, 3, n, GDt);

    // Placed so that the transposes used in the backward equation deliver
    // F01ᵀ E[p] to the major row and F1ᵀ E[p] to the K row (p = 4th block).
    b.A0_blk = zero4();
    detail::place(b.A0_blk, 3, 0, n, p.F01);
    detail::place(b.A0_blk, 3, 3, n, p.F1);

    b.C0_blk = zero4();
    detail::place(b.C0_blk, 3, 0, n, p.F02);
    detail::place(b.C0_blk, 3, 3, n, p.F2);

    // Weight blocks, derived from the componentwise backward equations.
    const double l0 = p.lambda0, l = p.lambda;
    b.Q_blk = zero4();
    detail::place(b.Q_blk, 0, 0, n, p.Q0);
    detail::place(b.Q_blk, 0, 3, n, p.ltil1 * p.Qtil);
    detail::place(b.Q_blk, 1, 0, n, -(1.0 - l) * p.Q);
    detail::place(b.Q_blk, 1, 1, n, p.Q);
    detail::place(b.Q_blk, 2, 0, n, -p.ltil1 * p.Qtil);
    detail::place(b.Q_blk, 2, 2, n, p.Qtil);
    detail::place(b.Q_blk, 3, 0, n, -(1.0 - l0) * p.Q0);
    detail::place(b.Q_blk, 3, 3, n, -p.Qtil);

    b.Qbar_blk = zero4();
    detail::place(b.Qbar_blk, 0, 1, n, -l0 * p.Q0);
    detail::place(b.Qbar_blk, 0, 2, n, -(1.0 - l0) * p.Q0);
    detail::place(b.Qbar_blk, 1, 1, n, -l * p.Q);
    detail::place(b.Qbar_blk, 2, 1, n, -p.ltil2 * p.Qtil);
    detail::place(b.Qbar_blk, 2, 2, n, -p.ltil3 * p.Qtil);
    detail::place(b.Qbar_blk, 3, 1, n, (1.0 - l0) * l0 * p.Q0);
    detail::place(b.Qbar_blk, 3, 2, n, (1.0 - l0) * (1.0 - l0) * p.Q0);
    detail::place(b.Qbar_blk, 3, 3, n, p.ltil3 * p.Qtil);

    b.H0_blk = zero4();
    detail::place(b.H0_blk, 0, 0, n, p.H0w);
    detail::place(b.H0_blk, 1, 1, n, p.Hw);
    detail::place(b.H0_blk, 2, 2, n, p.Htilw);
    detail::place(b.H0_blk, 3, 3, n, -p.Htilw);

    b.X0_mean = Vec::Zero(4 * n);
    b.X0_mean.head(n) = law.mean_xi0;
    // minor / follower means are zero (H2); K starts at zero.
    (void)Z;
    return b;
}

/// Time-indexed blocks of the augmented leader system used by the sequential
/// (feedback) solution route.  Augmented state (major state, follower mean,
/// follower offset Phi1); everything indexed on the grid carried by P1.
struct LeaderBlocks {
    int n = 0;
    TimeGrid grid;
    MatrixPath L11, L12, L13, L21, L22, L23, L31, L32, L33; // 3n x 3n each
    // f1/f2/f3 are affine sources linear in the minor-leader mean; stored as
    // 3n x n multipliers so f_i(t) = Fi[k] * mX(t).
    MatrixPath f1_mul, f2_mul, f3_mul;
    // intermediates kept for inspection / tests
    MatrixPath Rtil_op; // I + P1 Dtil Rtil^-1 Dtilᵀ
    MatrixPath Stil_op; // Ctil - Dtil Rtil^-1 Btilᵀ P1
};

/// Assemble the leader blocks from the model and a solved follower Riccati
/// path P1.  Throws breakdown_error if the operator I + P1 Dtil Rtil^-1 Dtilᵀ
/// loses invertibility at some grid time.
inline LeaderBlocks assemble_leader_blocks(const ModelParams& p,
                                           const Dimensions& d,
                                           const MatrixPath& P1) {
    const int n = d.n;
    LeaderBlocks lb;
    lb.n = n;
    lb.grid = P1.grid;
    const int K = lb.grid.K;
    for (MatrixPath* mp : {&lb.L11, &lb.L12, &lb.L13, &lb.L21, &lb.L22, &lb.L23,
                           &lb.L31, &lb.L32, &lb.L33, &lb.f1_mul, &lb.f2_mul,
                           &lb.f3_mul, &lb.Rtil_op, &lb.Stil_op})
        *mp = MatrixPath(lb.grid);

    const Mat R0i = p.R0.inverse();
    const Mat Rti = p.Rtil.inverse();
    const Mat Z = Mat::Zero(n, n);
    const double l0 = p.lambda0;

    for (int k = 0; k <= K; ++k) {
        const double t = lb.grid.points[static_cast<size_t>(k)];
        const Mat& P1k = P1[k];
        const Mat Rt = Mat::Identity(n, n) + P1k * p.Dtil * Rti * p.Dtil.transpose();
        if (rcond(Rt) < 1e-10)
            throw breakdown_error("leader operator I + P1*Dtil*Rtil^-1*Dtil' singular", t);
        const Mat Rti_op = Rt.inverse();
        const Mat St = p.Ctil - p.Dtil * Rti * p.Btil.transpose() * P1k;
        lb.Rtil_op[k] = Rt;
        lb.Stil_op[k] = St;

        const Mat Acal = p.Atil + p.F1 -
                         p.Btil * Rti *
                             (p.Btil.transpose() * P1k +
                              p.Dtil.transpose() * Rti_op * (P1k * St + P1k * p.F2));
        const Mat Bcal = (p.Btil * Rti * p.Dtil.transpose() * Rti_op * P1k * p.Dtil -
                          p.Btil) *
                         Rti * p.Btil.transpose();
        const Mat Ccal = p.Ctil + p.F2 -
                         p.Dtil * Rti *
                             (p.Btil.transpose() * P1k +
                              p.Dtil.transpose() * Rti_op * (P1k * St + P1k * p.F2));
        const Mat Dcal = (p.Dtil * Rti * p.Dtil.transpose() * Rti_op * P1k * p.Dtil -
                          p.Dtil) *
                         Rti * p.Btil.transpose();
        const Mat Ahat = (St.transpose() * Rti_op * P1k * p.Dtil + P1k * p.Btil) * Rti *
                             p.Btil.transpose() -
                         p.Atil.transpose();
        const Mat Qhat = p.ltil3 * p.Qtil - P1k * p.F1 -
                         St.transpose() * Rti_op * P1k * p.F2;

        auto fill3 = [&](Mat& M, const Mat& b11, const Mat& b12, const Mat& b13,
                         const Mat& b21, const Mat& b22, const Mat& b23,
                         const Mat& b31, const Mat& b32, const Mat& b33) {
            M.resize(3 * n, 3 * n);
            M << b11, b12, b13, b21, b22, b23, b31, b32, b33;
        };

        Mat M;
        fill3(M, p.A0, p.F01, Z, Z, Acal, Bcal, p.ltil1 * p.Qtil, Qhat, Ahat);
        lb.L11[k] = M;
        fill3(M, -p.B0 * R0i * p.B0.transpose(), Z, Z, Z, Z, Z, Z, Z, Z);
        lb.L12[k] = M;
        fill3(M, -p.B0 * R0i * p.D0.transpose(), Z, Z, Z, Z, Z, Z, Z, Z);
        lb.L13[k] = M;
        fill3(M, p.C0, p.F02, Z, Z, Ccal, Dcal, Z, Z, Z);
        lb.L21[k] = M;
        fill3(M, -p.D0 * R0i * p.B0.transpose(), Z, Z, Z, Z, Z, Z, Z, Z);
        lb.L22[k] = M;
        fill3(M, -p.D0 * R0i * p.D0.transpose(), Z, Z, Z, Z, Z, Z, Z, Z);
        lb.L23[k] = M;
        fill3(M, -p.Q0, (1.0 - l0) * p.Q0, Z, (1.0 - l0) * p.Q0,
              -(1.0 - l0) * (1.0 - l0) * p.Q0, Z, Z, Z, Z);
        lb.L31[k] = M;
        fill3(M, -p.A0.transpose(), Z, -p.ltil1 * p.Qtil, -p.F01.transpose(),
              -Acal.transpose(), -Qhat.transpose(), Z, -Bcal.transpose(),
              -Ahat.transpose());
        lb.L32[k] = M;
        fill3(M, -p.C0.transpose(), Z, Z, -p.F02.transpose(), -Ccal.transpose(), Z, Z,
              -Dcal.transpose(), Z);
        lb.L33[k] = M;

        Mat F(3 * n, n);
        F << p.E01, Z, p.ltil2 * p.Qtil;
        lb.f1_mul[k] = F;
        F << p.E02, Z, Z;
        lb.f2_mul[k] = F;
        F << l0 * p.Q0, -l0 * (1.0 - l0) * p.Q0, Z;
        lb.f3_mul[k] = F;
    }
    return lb;
}

} // namespace mfglq
