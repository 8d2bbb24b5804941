#pragma once

#include "riccati.hpp"
#include "rng.hpp"

namespace mfglq {

enum class AgentClass { Major = 0, MinorLeader = 1, Follower = 2 };

/// Evaluate the second-order (convexity) functional of one class for a given
/// piecewise-constant perturbation control on the grid, simulating the
/// homogeneous zero-initial perturbation system pathwise (one realization,
/// noise drawn from (seed, probe_tag)).
///
/// Follower / minor-leader classes: plain controlled SDE, frozen mean field.
/// Major class: the follower response is closed at the mean level (see the
/// decoupled P1 representation); the coupled mean system (E[X0], E[x], phi) is
/// resolved by fixed-point iteration before the pathwise pass.
inline double convexity_functional(const ModelParams& p, const Dimensions& d,
                                   const TimeGrid& g, AgentClass cls,
                                   const MatrixPath& control, uint64_t seed,
                                   uint64_t probe_tag) {
    const int n = d.n;
    const BrownianBundle bundle(g, crng::subseed(seed, probe_tag));
    const uint64_t src_a = crng::stream_id(6, 0); // own noise
    const uint64_t src_b = crng::stream_id(6, 1); // follower-response noise

    auto trap_w = [&](int k) { return (k == 0 || k == g.K) ? 0.5 * g.dt : g.dt; };

    if (cls == AgentClass::Follower || cls == AgentClass::MinorLeader) {
        const Mat& Ad = cls == AgentClass::Follower ? p.Atil : p.A;
        const Mat& Bd = cls == AgentClass::Follower ? p.Btil : p.B;
        const Mat& Cd = cls == AgentClass::Follower ? p.Ctil : p.C;
        const Mat& Dd = cls == AgentClass::Follower ? p.Dtil : p.D;
        const Mat& Qw = cls == AgentClass::Follower ? p.Qtil : p.Q;
        const Mat& Rw = cls == AgentClass::Follower ? p.Rtil : p.R;
        const Mat& Hw = cls == AgentClass::Follower ? p.Htilw : p.Hw;
        Vec x = Vec::Zero(n);
        KahanSum acc;
        for (int k = 0; k <= g.K; ++k) {
            const Vec u = control[k].col(0);
            acc.add(trap_w(k) * (x.dot(Qw * x) + u.dot(Rw * u)));
            if (k == g.K) break;
            const double dW = bundle.increment(src_a, k);
            x += (Ad * x + Bd * u) * g.dt + (Cd * x + Dd * u) * dW;
        }
        return acc.value() + x.dot(Hw * x);
    }

    // ---- major class -----------------------------------------------------
    const MatrixPath P1 = solve_follower_P1(p, d, g);
    const Mat Rti = p.Rtil.inverse();

    // leader-route intermediates per grid point
    std::vector<Mat> Acal(g.K + 1), Bcal(g.K + 1), Ahat(g.K + 1), Qhat(g.K + 1),
        Rop(g.K + 1), Sop(g.K + 1);
    for (int k = 0; k <= g.K; ++k) {
        const Mat& P1k = P1[k];
        const Mat Rt = Mat::Identity(n, n) + P1k * p.Dtil * Rti * p.Dtil.transpose();
        if (rcond(Rt) < 1e-10)
            throw breakdown_error("convexity probe: follower operator singular",
                                  g.points[static_cast<size_t>(k)]);
        const Mat Rinv = Rt.inverse();
        const Mat St = p.Ctil - p.Dtil * Rti * p.Btil.transpose() * P1k;
        Rop[static_cast<size_t>(k)] = Rinv;
        Sop[static_cast<size_t>(k)] = St;
        Acal[static_cast<size_t>(k)] =
            p.Atil + p.F1 -
            p.Btil * Rti *
                (p.Btil.transpose() * P1k +
                 p.Dtil.transpose() * Rinv * (P1k * St + P1k * p.F2));
        Bcal[static_cast<size_t>(k)] =
            (p.Btil * Rti * p.Dtil.transpose() * Rinv * P1k * p.Dtil - p.Btil) * Rti *
            p.Btil.transpose();
        Ahat[static_cast<size_t>(k)] =
            (St.transpose() * Rinv * P1k * p.Dtil + P1k * p.Btil) * Rti *
                p.Btil.transpose() -
            p.Atil.transpose();
        Qhat[static_cast<size_t>(k)] = p.ltil3 * p.Qtil - P1k * p.F1 -
                                       St.transpose() * Rinv * P1k * p.F2;
    }

    // mean system (EX0, Ex, phi): fixed-point over the forward/backward pass
    std::vector<Vec> EX0(g.K + 1, Vec::Zero(n)), Ex(g.K + 1, Vec::Zero(n)),
        phi(g.K + 1, Vec::Zero(n));
    for (int it = 0; it < 200; ++it) {
        // EX0 forward (Euler)
        std::vector<Vec> EX0n(g.K + 1, Vec::Zero(n));
        for (int k = 0; k < g.K; ++k) {
            const Vec u0 = control[k].col(0);
            EX0n[k + 1] = EX0n[k] + (p.A0 * EX0n[k] + p.B0 * u0 +
                                     p.F01 * Ex[static_cast<size_t>(k)]) *
                                        g.dt;
        }
        // phi backward (Euler)
        std::vector<Vec> phin(g.K + 1, Vec::Zero(n));
        for (int k = g.K; k >= 1; --k)
            phin[k - 1] = phin[k] - g.dt * (Ahat[static_cast<size_t>(k)] * phin[k] +
                                            p.ltil1 * (p.Qtil * EX0n[k]) +
                                            Qhat[static_cast<size_t>(k)] *
                                                Ex[static_cast<size_t>(k)]);
        // Ex forward (Euler)
        std::vector<Vec> Exn(g.K + 1, Vec::Zero(n));
        for (int k = 0; k < g.K; ++k)
            Exn[k + 1] = Exn[k] + (Acal[static_cast<size_t>(k)] * Exn[k] +
                                   Bcal[static_cast<size_t>(k)] * phin[k]) *
                                      g.dt;
        double delta = 0.0;
        for (int k = 0; k <= g.K; ++k)
            delta = std::max(delta, (Exn[static_cast<size_t>(k)] -
                                     Ex[static_cast<size_t>(k)])
                                        .cwiseAbs()
                                        .maxCoeff());
        EX0 = std::move(EX0n);
        phi = std::move(phin);
        Ex = std::move(Exn);
        if (delta < 1e-13) break;
    }

    // pathwise pass
    Vec X0 = Vec::Zero(n), x = Vec::Zero(n);
    KahanSum acc;
    const double l0 = p.lambda0;
    for (int k = 0; k <= g.K; ++k) {
        const Vec u0 = control[k].col(0);
        const Vec diffv = X0 - (1.0 - l0) * x;
        acc.add(trap_w(k) * (diffv.dot(p.Q0 * diffv) + u0.dot(p.R0 * u0)));
        if (k == g.K) break;
        const Vec& exk = Ex[static_cast<size_t>(k)];
        const Vec& phik = phi[static_cast<size_t>(k)];
        const Vec y = P1[k] * x + phik;
        const Vec z = Rop[static_cast<size_t>(k)] *
                      (P1[k] * (Sop[static_cast<size_t>(k)] * x) +
                       P1[k] * (p.F2 * exk) -
                       P1[k] * (p.Dtil * (Rti * (p.Btil.transpose() * phik))));
        const Vec vresp = -Rti * (p.Btil.transpose() * y + p.Dtil.transpose() * z);
        const double dW0 = bundle.increment(src_a, k);
        const double dWt = bundle.increment(src_b, k);
        const Vec x_new = x + (p.Atil * x + p.Btil * vresp + p.F1 * exk) * g.dt +
                          (p.Ctil * x + p.Dtil * vresp + p.F2 * exk) * dWt;
        X0 += (p.A0 * X0 + p.B0 * u0 + p.F01 * exk) * g.dt +
              (p.C0 * X0 + p.D0 * u0 + p.F02 * exk) * dW0;
        x = x_new;
    }
    return acc.value() + X0.dot(p.H0w * X0);
}

/// Draw n_probes random piecewise-constant perturbation controls (standard
/// normal coefficients) and return the functional value of each.
inline std::vector<double> convexity_probe(const ModelParams& p, const Dimensions& d,
                                           const TimeGrid& g, AgentClass cls,
                                           int n_probes, uint64_t seed) {
    const int m = cls == AgentClass::Major ? d.m1
                  : cls == AgentClass::MinorLeader ? d.m2
                                                   : d.m3;
    std::vector<double> out;
    out.reserve(static_cast<size_t>(n_probes));
    for (int pr = 0; pr < n_probes; ++pr) {
        MatrixPath control(g);
        for (int k = 0; k <= g.K; ++k) {
            Mat u(m, 1);
            for (int c = 0; c < m; ++c)
                u(c, 0) = crng::normal(
                    crng::subseed(seed, 0x1000 + static_cast<uint64_t>(pr)),
                    crng::stream_id(7, static_cast<uint64_t>(c)),
                    static_cast<uint64_t>(k));
            control[k] = u;
        }
        out.push_back(convexity_functional(p, d, g, cls, control, seed,
                                           static_cast<uint64_t>(pr)));
    }
    return out;
}

} // namespace mfglq
