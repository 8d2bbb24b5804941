#pragma once

#include <optional>

#include "meanfield.hpp"
#include "rng.hpp"

namespace mfglq {

/// Everything the simulation layer needs, produced by one solve of the
/// consistency-condition pipeline.
struct CCSystem {
    Dimensions dims;
    ModelParams params;
    InitialLaw initial;
    TimeGrid grid;
    CCBlocks blocks;
    RiccatiPair riccati;
    MeanFieldTrajectory mf;
    FeedbackGains gains;
    MatrixPath resolvent; // (I - P F)^-1 at every grid point
};

/// Solve the full limit-system pipeline for a scenario.
inline CCSystem build_cc_system(const ScenarioConfig& cfg) {
    CCSystem sys;
    sys.dims = cfg.dims;
    sys.params = cfg.params;
    sys.initial = cfg.initial;
    sys.grid = TimeGrid(cfg.params.T, cfg.grid_steps);
    sys.blocks = assemble_cc_blocks(cfg.params, cfg.dims, cfg.initial);
    sys.riccati = solve_cc_riccati(sys.blocks, sys.grid);
    sys.mf = solve_mean_field(sys.blocks, sys.riccati, sys.grid);
    sys.gains = build_feedback_gains(sys.blocks, cfg.params, cfg.dims, sys.riccati,
                                     sys.mf);
    sys.resolvent = MatrixPath(sys.grid);
    for (int k = 0; k <= sys.grid.K; ++k)
        sys.resolvent[k] = detail::cc_resolvent(
            sys.riccati.P[k], sys.blocks.F_blk,
            sys.grid.points[static_cast<size_t>(k)]);
    return sys;
}

namespace detail {

inline Mat chol_factor(const Mat& cov, const char* name) {
    Eigen::LLT<Mat> llt(cov);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    // allow PSD (singular) covariances via eigen-decomposition
    Eigen::SelfAdjointEigenSolver<Mat> es(cov);
    if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() < -1e-12)
        throw validation_error(std::string(name) + ": covariance not PSD");
    Vec ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal();
}

} // namespace detail

/// One simulated path of the decoupled stacked system (Euler-Maruyama for X,
/// adjoints reconstructed from the decoupling ansatz).
struct CCPathResult {
    VectorPath X;       // 4n
    VectorPath Y;       // 4n
    VectorPath Z;       // 4n
    VectorPath u_major; // m1
    VectorPath u_minor; // m2
    VectorPath u_follower; // m3
    double terminal_gap = 0.0;   // || Y_K - H0_blk X_K ||_inf
    double bsde_residual = 0.0;  // sup_k one-step backward-equation residual
};

/// Simulate one path with the bundle's sources (3 per path: major noise,
/// minor noise, follower noise; the third and fourth stacked blocks share the
/// follower source).  `initial_override`, if given, replaces the sampled
/// stacked initial state.
inline CCPathResult simulate_stacked_cc(const CCSystem& sys,
                                        const BrownianBundle& bundle,
                                        uint64_t path_index,
                                        const std::optional<Vec>& initial_override =
                                            std::nullopt) {
    const int n = sys.dims.n;
    const int N = 4 * n;
    const TimeGrid& grid = sys.grid;
    const CCBlocks& b = sys.blocks;

    CCPathResult r;
    r.X = VectorPath(grid);
    r.Y = VectorPath(grid);
    r.Z = VectorPath(grid);
    r.u_major = VectorPath(grid);
    r.u_minor = VectorPath(grid);
    r.u_follower = VectorPath(grid);

    // initial state
    Vec X = Vec::Zero(N);
    if (initial_override) {
        X = *initial_override;
    } else {
        const Mat L0 = detail::chol_factor(sys.initial.cov_xi0, "cov_xi0");
        const Mat Lxi = detail::chol_factor(sys.initial.cov_xi, "cov_xi");
        const Mat Lze = detail::chol_factor(sys.initial.cov_zeta, "cov_zeta");
        Vec z0(n), zx(n), zz(n);
        for (int i = 0; i < n; ++i) {
            z0(i) = bundle.normal_draw(crng::stream_id(3, path_index * 4 + 0),
                                       static_cast<uint64_t>(i));
            zx(i) = bundle.normal_draw(crng::stream_id(3, path_index * 4 + 1),
                                       static_cast<uint64_t>(i));
            zz(i) = bundle.normal_draw(crng::stream_id(3, path_index * 4 + 2),
                                       static_cast<uint64_t>(i));
        }
        X.head(n) = sys.initial.mean_xi0 + L0 * z0;
        X.segment(n, n) = Lxi * zx;
        X.segment(2 * n, n) = Lze * zz;
    }

    auto source = [&](int s) { return crng::stream_id(3, path_index * 4 + s); };
    const int src_of_block[4] = {0, 1, 2, 2}; // blocks 3,4 share the follower noise

    double bsde_sup = 0.0;
    Vec Yprev(N), Zprev(N), drift_prev(N);
    for (int k = 0; k <= grid.K; ++k) {
        const Vec& EX = sys.mf.EX[k];
        const Vec& EY = sys.mf.EY[k];
        const Vec& EZ = sys.mf.EZ[k];
        const Mat& P = sys.riccati.P[k];
        const Mat& Pi = sys.riccati.Pi[k];
        const Vec Y = P * (X - EX) + Pi * EX;
        const Mat& Minv = sys.resolvent[k];
        const Vec Z = Minv * (P * (b.C_blk * (X - EX) + (b.C_blk + b.Cbar_blk) * EX +
                                   b.D_blk * Y));
        r.X[k] = X;
        r.Y[k] = Y;
        r.Z[k] = Z;
        r.u_major[k] = sys.gains.G_major[k] * X + sys.gains.c_major[k];
        r.u_minor[k] = sys.gains.G_minor[k] * X + sys.gains.c_minor[k];
        r.u_follower[k] = sys.gains.G_follower[k] * X + sys.gains.c_follower[k];

        if (k == grid.K) {
            r.terminal_gap = (Y - b.H0_blk * X).cwiseAbs().maxCoeff();
            // close the last one-step BSDE residual
            if (grid.K > 0) {
                Vec res = Y - Yprev - drift_prev;
                bsde_sup = std::max(bsde_sup, res.cwiseAbs().maxCoeff());
            }
            break;
        }

        // backward-equation drift at (t_k): dY = -{...} dt + Z dW
        const Vec bdrift = -(b.A_blk.transpose() * Y + b.A0_blk.transpose() * EY +
                             b.C_blk.transpose() * Z + b.C0_blk.transpose() * EZ +
                             b.Q_blk * X + b.Qbar_blk * EX);

        // Euler-Maruyama step for X
        const Vec fdrift = b.A_blk * X + b.Abar_blk * EX + b.B_blk * Y + b.E_blk * Z;
        const Vec gvec =
            b.C_blk * X + b.Cbar_blk * EX + b.D_blk * Y + b.F_blk * Z;
        Vec dW(4);
        for (int blk = 0; blk < 4; ++blk)
            dW(blk) = bundle.increment(source(src_of_block[blk]), k);
        Vec Xn = X + fdrift * grid.dt;
        Vec zdw = Vec::Zero(N);
        for (int blk = 0; blk < 4; ++blk) {
            Xn.segment(blk * n, n) += gvec.segment(blk * n, n) * dW(blk);
            zdw.segment(blk * n, n) = Z.segment(blk * n, n) * dW(blk);
        }
        if (k > 0) {
            // residual of the previous step, now that Y_k is known
            Vec res = Y - Yprev - drift_prev;
            bsde_sup = std::max(bsde_sup, res.cwiseAbs().maxCoeff());
        }
        Yprev = Y;
        drift_prev = bdrift * grid.dt + zdw;
        X = Xn;
        if (!X.allFinite())
            throw numerical_error("stacked simulation produced non-finite state");
    }
    r.bsde_residual = bsde_sup;
    return r;
}

/// Monte-Carlo estimates of the limiting costs of the three classes, with
/// standard errors.  Costs use trapezoidal quadrature in time and compensated
/// summation across paths.
struct LimitingCosts {
    double J0 = 0.0, Jl = 0.0, Jf = 0.0;
    double se0 = 0.0, sel = 0.0, sef = 0.0;
    int paths = 0;
};

namespace detail {

inline double quad(const Mat& W, const Vec& v) { return v.dot(W * v); }

/// Per-path limiting costs (major, minor representative, follower
/// representative) from a stacked path.
inline void limiting_cost_path(const CCSystem& sys, const CCPathResult& path,
                               double& c0, double& cl, double& cf) {
    const int n = sys.dims.n;
    const ModelParams& p = sys.params;
    const TimeGrid& g = sys.grid;
    KahanSum s0, sl, sf;
    for (int k = 0; k <= g.K; ++k) {
        const Vec X0 = path.X[k].head(n);
        const Vec Xm = path.X[k].segment(n, n);
        const Vec xf = path.X[k].segment(2 * n, n);
        const Vec mX = sys.mf.EX[k].segment(n, n);
        const Vec mx = sys.mf.EX[k].segment(2 * n, n);
        const double w = (k == 0 || k == g.K) ? 0.5 * g.dt : g.dt;
        s0.add(w * (quad(p.Q0, X0 - (p.lambda0 * mX + (1.0 - p.lambda0) * mx)) +
                    quad(p.R0, path.u_major[k])));
        sl.add(w * (quad(p.Q, Xm - (p.lambda * mX + (1.0 - p.lambda) * X0)) +
                    quad(p.R, path.u_minor[k])));
        sf.add(w * (quad(p.Qtil, xf - (p.ltil1 * X0 + p.ltil2 * mX + p.ltil3 * mx)) +
                    quad(p.Rtil, path.u_follower[k])));
    }
    const Vec X0T = path.X[g.K].head(n);
    const Vec XmT = path.X[g.K].segment(n, n);
    const Vec xfT = path.X[g.K].segment(2 * n, n);
    c0 = 0.5 * (s0.value() + quad(p.H0w, X0T));
    cl = 0.5 * (sl.value() + quad(p.Hw, XmT));
    cf = 0.5 * (sf.value() + quad(p.Htilw, xfT));
}

} // namespace detail

inline LimitingCosts limiting_costs(const CCSystem& sys, int n_paths, uint64_t seed,
                                    const std::optional<Vec>& initial_override =
                                        std::nullopt) {
    BrownianBundle bundle(sys.grid, seed);
    RunningStat st0, stl, stf;
    for (int pth = 0; pth < n_paths; ++pth) {
        const CCPathResult path = simulate_stacked_cc(
            sys, bundle, static_cast<uint64_t>(pth), initial_override);
        double c0, cl, cf;
        detail::limiting_cost_path(sys, path, c0, cl, cf);
        st0.add(c0);
        stl.add(cl);
        stf.add(cf);
    }
    LimitingCosts out;
    out.J0 = st0.mean();
    out.Jl = stl.mean();
    out.Jf = stf.mean();
    out.se0 = st0.stderr_mean();
    out.sel = stl.stderr_mean();
    out.sef = stf.stderr_mean();
    out.paths = n_paths;
    return out;
}

/// Pointwise stationarity residuals of the three first-order conditions along
/// a simulated stacked path (sup over the grid):
///   major:   B0ᵀ Y0 + R0 u0 + D0ᵀ Z0
///   minor:   Bᵀ Ȳ + R u + Dᵀ Z̄
///   follower: Btilᵀ ȳ + Rtil v + Dtilᵀ z̄
struct StationarityResiduals {
    double major = 0.0, minor = 0.0, follower = 0.0;
};

inline StationarityResiduals stationarity_residuals(const CCSystem& sys,
                                                    const CCPathResult& path) {
    const int n = sys.dims.n;
    const ModelParams& p = sys.params;
    StationarityResiduals r;
    for (int k = 0; k <= sys.grid.K; ++k) {
        const Vec Y0 = path.Y[k].head(n), Z0 = path.Z[k].head(n);
        const Vec Ym = path.Y[k].segment(n, n), Zm = path.Z[k].segment(n, n);
        const Vec Yf = path.Y[k].segment(2 * n, n), Zf = path.Z[k].segment(2 * n, n);
        r.major = std::max(r.major,
                           (p.B0.transpose() * Y0 + p.R0 * path.u_major[k] +
                            p.D0.transpose() * Z0)
                               .cwiseAbs()
                               .maxCoeff());
        r.minor = std::max(r.minor,
                           (p.B.transpose() * Ym + p.R * path.u_minor[k] +
                            p.D.transpose() * Zm)
                               .cwiseAbs()
                               .maxCoeff());
        r.follower = std::max(r.follower,
                              (p.Btil.transpose() * Yf + p.Rtil * path.u_follower[k] +
                               p.Dtil.transpose() * Zf)
                                  .cwiseAbs()
                                  .maxCoeff());
    }
    return r;
}

/// Optional unilateral control deviation for a population simulation: the
/// designated agent's control is shifted by scale * delta(t), delta
/// piecewise-constant with standard-normal coefficients drawn from dev_seed.
struct Deviation {
    int agent_class = 1; // 0 major, 1 minor leader, 2 follower
    int index = 0;       // ignored for the major
    double scale = 0.0;
    uint64_t dev_seed = 0;
};

/// Result of a finite-population simulation (one replication).
struct PopulationResult {
    int N_l = 0, N_f = 0;
    uint64_t seed = 0;
    // realized (finite-N) costs
    double J0 = 0.0, Jl_mean = 0.0, Jf_mean = 0.0;
    // limit-twin costs (same noise, mean-field dynamics) for CRN gap estimates
    double J0_twin = 0.0, Jl_twin_mean = 0.0, Jf_twin_mean = 0.0;
    // per-class cost gaps (finite-N minus twin)
    double gap0 = 0.0, gapl = 0.0, gapf = 0.0;
    // sup_t squared deviation of empirical averages from the mean field
    double sup_dev_minor = 0.0, sup_dev_follower = 0.0;
    // cost of the deviating agent, if a Deviation was supplied
    double J_deviating = 0.0;
};

/// Simulate the N-agent population under the decentralized feedback strategies
/// (Euler-Maruyama, shared BrownianBundle).  Each agent also has a "limit
/// twin" driven by the same increments with empirical averages replaced by the
/// solved mean field; twin costs provide the CRN estimate of the limiting
/// costs.
inline PopulationResult simulate_population(const CCSystem& sys, int N_l, int N_f,
                                            uint64_t seed,
                                            const std::optional<Deviation>& dev =
                                                std::nullopt) {
    const int n = sys.dims.n;
    const ModelParams& p = sys.params;
    const TimeGrid& g = sys.grid;
    BrownianBundle bundle(g, seed);

    PopulationResult out;
    out.N_l = N_l;
    out.N_f = N_f;
    out.seed = seed;

    const Mat L0 = detail::chol_factor(sys.initial.cov_xi0, "cov_xi0");
    const Mat Lxi = detail::chol_factor(sys.initial.cov_xi, "cov_xi");
    const Mat Lze = detail::chol_factor(sys.initial.cov_zeta, "cov_zeta");

    // states: column i is agent i
    Vec X0(n);
    Mat Xl(n, N_l), Xf(n, N_f);
    for (int i = 0; i < n; ++i)
        X0(i) = bundle.normal_draw(crng::stream_id(0, 0), static_cast<uint64_t>(i));
    X0 = sys.initial.mean_xi0 + L0 * X0;
    for (int a = 0; a < N_l; ++a) {
        Vec z(n);
        for (int i = 0; i < n; ++i)
            z(i) = bundle.normal_draw(crng::stream_id(1, static_cast<uint64_t>(a)),
                                      static_cast<uint64_t>(i));
        Xl.col(a) = Lxi * z;
    }
    for (int a = 0; a < N_f; ++a) {
        Vec z(n);
        for (int i = 0; i < n; ++i)
            z(i) = bundle.normal_draw(crng::stream_id(2, static_cast<uint64_t>(a)),
                                      static_cast<uint64_t>(i));
        Xf.col(a) = Lze * z;
    }
    // twins share the initial states
    Vec T0 = X0;
    Mat Tl = Xl, Tf = Xf;

    // Discrete mean path of the twin system (forward Euler under the deployed
    // controls).  For linear dynamics the expectation of an Euler-Maruyama
    // step is exactly the Euler step of the mean recursion, so the empirical
    // population averages converge to this path (not to the RK4 limit mean)
    // as N grows at fixed dt; using it for the twins removes an O(dt)
    // discretization floor from the cost-gap estimates.
    std::vector<Vec> mE0(static_cast<size_t>(g.K) + 1), mEl(static_cast<size_t>(g.K) + 1),
        mEf(static_cast<size_t>(g.K) + 1);
    {
        Vec m0 = sys.initial.mean_xi0, ml = Vec::Zero(n), mf_ = Vec::Zero(n);
        for (int k = 0; k <= g.K; ++k) {
            mE0[static_cast<size_t>(k)] = m0;
            mEl[static_cast<size_t>(k)] = ml;
            mEf[static_cast<size_t>(k)] = mf_;
            if (k == g.K) break;
            const Vec mX = sys.mf.EX[k].segment(n, n);
            const Vec mx = sys.mf.EX[k].segment(2 * n, n);
            const Vec mK = sys.mf.EX[k].segment(3 * n, n);
            Vec S(4 * n);
            S << m0, mX, mx, mK;
            const Vec u0m = sys.gains.G_major[k] * S + sys.gains.c_major[k];
            S << m0, ml, mx, mK;
            const Vec ulm = sys.gains.G_minor[k] * S + sys.gains.c_minor[k];
            S << m0, mX, mf_, mK;
            const Vec ufm = sys.gains.G_follower[k] * S + sys.gains.c_follower[k];
            const Vec m0n = m0 + g.dt * (p.A0 * m0 + p.B0 * u0m + p.E01 * ml +
                                         p.F01 * mf_);
            const Vec mln = ml + g.dt * (p.A * ml + p.B * ulm + p.E1 * ml);
            const Vec mfn = mf_ + g.dt * (p.Atil * mf_ + p.Btil * ufm + p.F1 * mf_);
            m0 = m0n;
            ml = mln;
            mf_ = mfn;
        }
    }

    KahanSum c0, c0t, cdev;
    std::vector<KahanSum> cl(static_cast<size_t>(N_l)), clt(static_cast<size_t>(N_l));
    std::vector<KahanSum> cf(static_cast<size_t>(N_f)), cft(static_cast<size_t>(N_f));

    auto dev_shift = [&](int cls, int idx, int k, int mdim) -> Vec {
        Vec s = Vec::Zero(mdim);
        if (dev && dev->agent_class == cls && (cls == 0 || dev->index == idx) &&
            dev->scale != 0.0) {
            for (int c = 0; c < mdim; ++c)
                s(c) = dev->scale *
                       crng::normal(dev->dev_seed,
                                    crng::stream_id(5, static_cast<uint64_t>(c)),
                                    static_cast<uint64_t>(k));
        }
        return s;
    };

    for (int k = 0; k <= g.K; ++k) {
        const Vec mX = sys.mf.EX[k].segment(n, n);
        const Vec mx = sys.mf.EX[k].segment(2 * n, n);
        const Vec mK = sys.mf.EX[k].segment(3 * n, n);
        const Vec& mXe = mEl[static_cast<size_t>(k)]; // Euler twin means
        const Vec& mxe = mEf[static_cast<size_t>(k)];
        const Vec Xbar = N_l > 0 ? Vec(Xl.rowwise().mean()) : Vec(Vec::Zero(n));
        const Vec xbar = N_f > 0 ? Vec(Xf.rowwise().mean()) : Vec(Vec::Zero(n));

        out.sup_dev_minor = std::max(out.sup_dev_minor, (Xbar - mXe).squaredNorm());
        out.sup_dev_follower =
            std::max(out.sup_dev_follower, (xbar - mxe).squaredNorm());

        const double w = (k == 0 || k == g.K) ? 0.5 * g.dt : g.dt;
        const bool last = (k == g.K);

        // --- controls ---------------------------------------------------
        auto stacked = [&](const Vec& s1, const Vec& s2, const Vec& s3,
                           const Vec& s4) {
            Vec S(4 * n);
            S << s1, s2, s3, s4;
            return S;
        };
        const Vec u0 = sys.gains.G_major[k] * stacked(X0, mX, mx, mK) +
                       sys.gains.c_major[k] + dev_shift(0, 0, k, sys.dims.m1);
        const Vec u0t =
            sys.gains.G_major[k] * stacked(T0, mX, mx, mK) + sys.gains.c_major[k];

        // --- cost integrands ---------------------------------------------
        c0.add(w * (detail::quad(p.Q0,
                                 X0 - (p.lambda0 * Xbar + (1.0 - p.lambda0) * xbar)) +
                    detail::quad(p.R0, u0)));
        c0t.add(w * (detail::quad(p.Q0,
                                  T0 - (p.lambda0 * mXe + (1.0 - p.lambda0) * mxe)) +
                     detail::quad(p.R0, u0t)));

        Mat Ul(sys.dims.m2, std::max(N_l, 1)), Ult(sys.dims.m2, std::max(N_l, 1));
        for (int a = 0; a < N_l; ++a) {
            const Vec u = sys.gains.G_minor[k] * stacked(X0, Xl.col(a), mx, mK) +
                          sys.gains.c_minor[k] + dev_shift(1, a, k, sys.dims.m2);
            const Vec ut = sys.gains.G_minor[k] * stacked(T0, Tl.col(a), mx, mK) +
                           sys.gains.c_minor[k];
            Ul.col(a) = u;
            Ult.col(a) = ut;
            cl[static_cast<size_t>(a)].add(
                w * (detail::quad(p.Q, Vec(Xl.col(a)) -
                                           (p.lambda * Xbar + (1.0 - p.lambda) * X0)) +
                     detail::quad(p.R, u)));
            clt[static_cast<size_t>(a)].add(
                w * (detail::quad(p.Q, Vec(Tl.col(a)) -
                                           (p.lambda * mXe + (1.0 - p.lambda) * T0)) +
                     detail::quad(p.R, ut)));
        }
        Mat Uf(sys.dims.m3, std::max(N_f, 1)), Uft(sys.dims.m3, std::max(N_f, 1));
        for (int a = 0; a < N_f; ++a) {
            const Vec v = sys.gains.G_follower[k] * stacked(X0, mX, Xf.col(a), mK) +
                          sys.gains.c_follower[k] + dev_shift(2, a, k, sys.dims.m3);
            const Vec vt = sys.gains.G_follower[k] * stacked(T0, mX, Tf.col(a), mK) +
                           sys.gains.c_follower[k];
            Uf.col(a) = v;
            Uft.col(a) = vt;
            cf[static_cast<size_t>(a)].add(
                w * (detail::quad(p.Qtil,
                                  Vec(Xf.col(a)) - (p.ltil1 * X0 + p.ltil2 * Xbar +
                                                    p.ltil3 * xbar)) +
                     detail::quad(p.Rtil, v)));
            cft[static_cast<size_t>(a)].add(
                w * (detail::quad(p.Qtil, Vec(Tf.col(a)) - (p.ltil1 * T0 +
                                                            p.ltil2 * mXe +
                                                            p.ltil3 * mxe)) +
                     detail::quad(p.Rtil, vt)));
        }
        if (last) break;

        // --- Euler-Maruyama steps ----------------------------------------
        const double dW0 = bundle.increment(crng::stream_id(0, 0), k);
        {
            const Vec drift = p.A0 * X0 + p.B0 * u0 + p.E01 * Xbar + p.F01 * xbar;
            const Vec diff = p.C0 * X0 + p.D0 * u0 + p.E02 * Xbar + p.F02 * xbar;
            const Vec driftT = p.A0 * T0 + p.B0 * u0t + p.E01 * mXe + p.F01 * mxe;
            const Vec diffT = p.C0 * T0 + p.D0 * u0t + p.E02 * mXe + p.F02 * mxe;
            X0 += drift * g.dt + diff * dW0;
            T0 += driftT * g.dt + diffT * dW0;
        }
        for (int a = 0; a < N_l; ++a) {
            const double dW = bundle.increment(crng::stream_id(1, static_cast<uint64_t>(a)), k);
            const Vec u = Ul.col(a), ut = Ult.col(a);
            const Vec drift = p.A * Xl.col(a) + p.B * u + p.E1 * Xbar;
            const Vec diff = p.C * Xl.col(a) + p.D * u + p.E2 * Xbar;
            const Vec driftT = p.A * Tl.col(a) + p.B * ut + p.E1 * mXe;
            const Vec diffT = p.C * Tl.col(a) + p.D * ut + p.E2 * mXe;
            Xl.col(a) += drift * g.dt + diff * dW;
            Tl.col(a) += driftT * g.dt + diffT * dW;
        }
        for (int a = 0; a < N_f; ++a) {
            const double dW = bundle.increment(crng::stream_id(2, static_cast<uint64_t>(a)), k);
            const Vec v = Uf.col(a), vt = Uft.col(a);
            const Vec drift = p.Atil * Xf.col(a) + p.Btil * v + p.F1 * xbar;
            const Vec diff = p.Ctil * Xf.col(a) + p.Dtil * v + p.F2 * xbar;
            const Vec driftT = p.Atil * Tf.col(a) + p.Btil * vt + p.F1 * mxe;
            const Vec diffT = p.Ctil * Tf.col(a) + p.Dtil * vt + p.F2 * mxe;
            Xf.col(a) += drift * g.dt + diff * dW;
            Tf.col(a) += driftT * g.dt + diffT * dW;
        }
        if (!X0.allFinite() || !Xl.allFinite() || !Xf.allFinite())
            throw numerical_error("population simulation produced non-finite state");
    }

    // terminal costs and aggregation
    out.J0 = 0.5 * (c0.value() + detail::quad(p.H0w, X0));
    out.J0_twin = 0.5 * (c0t.value() + detail::quad(p.H0w, T0));
    KahanSum jl, jlt, jf, jft;
    for (int a = 0; a < N_l; ++a) {
        const double J = 0.5 * (cl[static_cast<size_t>(a)].value() +
                                detail::quad(p.Hw, Vec(Xl.col(a))));
        const double Jt = 0.5 * (clt[static_cast<size_t>(a)].value() +
                                 detail::quad(p.Hw, Vec(Tl.col(a))));
        jl.add(J);
        jlt.add(Jt);
        if (dev && dev->agent_class == 1 && dev->index == a) out.J_deviating = J;
    }
    for (int a = 0; a < N_f; ++a) {
        const double J = 0.5 * (cf[static_cast<size_t>(a)].value() +
                                detail::quad(p.Htilw, Vec(Xf.col(a))));
        const double Jt = 0.5 * (cft[static_cast<size_t>(a)].value() +
                                 detail::quad(p.Htilw, Vec(Tf.col(a))));
        jf.add(J);
        jft.add(Jt);
        if (dev && dev->agent_class == 2 && dev->index == a) out.J_deviating = J;
    }
    if (dev && dev->agent_class == 0) out.J_deviating = out.J0;
    out.Jl_mean = N_l ? jl.value() / N_l : 0.0;
    out.Jl_twin_mean = N_l ? jlt.value() / N_l : 0.0;
    out.Jf_mean = N_f ? jf.value() / N_f : 0.0;
    out.Jf_twin_mean = N_f ? jft.value() / N_f : 0.0;
    out.gap0 = out.J0 - out.J0_twin;
    out.gapl = out.Jl_mean - out.Jl_twin_mean;
    out.gapf = out.Jf_mean - out.Jf_twin_mean;
    return out;
}

} // namespace mfglq
