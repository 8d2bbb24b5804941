#pragma once

#include "simulate.hpp"

namespace mfglq {

/// One (population size, metric) record of a scaling study.
struct ScalingRecord {
    int N_l = 0, N_f = 0;
    std::string metric;
    double estimate = 0.0;
    double se = 0.0;
};

/// OLS fit of log(estimate) against log(N), N = min(N_l, N_f).
struct SlopeFit {
    std::string metric;
    double slope = 0.0;
    double slope_se = 0.0;
    double intercept = 0.0;
};

struct ScalingStudy {
    uint64_t seed = 0;
    int replications = 0;
    std::vector<ScalingRecord> records;
    std::vector<SlopeFit> slopes;
};

namespace detail {

inline SlopeFit ols_loglog(const std::string& metric,
                           const std::vector<double>& N,
                           const std::vector<double>& y) {
    SlopeFit f;
    f.metric = metric;
    const size_t m = N.size();
    double sx = 0, sy = 0;
    std::vector<double> lx(m), ly(m);
    for (size_t i = 0; i < m; ++i) {
        lx[i] = std::log(N[i]);
        ly[i] = std::log(std::max(y[i], 1e-300));
        sx += lx[i];
        sy += ly[i];
    }
    const double mx = sx / static_cast<double>(m);
    const double my = sy / static_cast<double>(m);
    double sxx = 0, sxy = 0;
    for (size_t i = 0; i < m; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ssr = 0;
    for (size_t i = 0; i < m; ++i) {
        const double r = ly[i] - (f.intercept + f.slope * lx[i]);
        ssr += r * r;
    }
    const double dof = static_cast<double>(m) - 2.0;
    f.slope_se = dof > 0 ? std::sqrt(ssr / dof / sxx) : 0.0;
    return f;
}

} // namespace detail

/// Replicated population simulations across a ladder of population sizes.
/// Replication r of every population size uses the same derived seed, so the
/// comparison across N is under common random numbers.  Metrics:
///   state_dev_minor / state_dev_follower : E sup_t |empirical avg - mean field|^2
///   cost_gap_major / cost_gap_minor / cost_gap_follower : |E (J^N - J^limit)|
/// (gaps estimated by the limit-twin CRN coupling).
inline ScalingStudy run_scaling_study(const CCSystem& sys,
                                      const std::vector<std::pair<int, int>>& pops,
                                      int replications, uint64_t seed) {
    if (replications < 2)
        throw config_error("run_scaling_study: need at least 2 replications");
    ScalingStudy study;
    study.seed = seed;
    study.replications = replications;

    static const char* metric_names[5] = {"state_dev_minor", "state_dev_follower",
                                          "cost_gap_major", "cost_gap_minor",
                                          "cost_gap_follower"};
    std::vector<std::array<double, 5>> est(pops.size());
    std::vector<std::array<double, 5>> ses(pops.size());

    for (size_t ip = 0; ip < pops.size(); ++ip) {
        RunningStat st[5];
        for (int r = 0; r < replications; ++r) {
            const uint64_t rs = crng::subseed(seed, static_cast<uint64_t>(r));
            const PopulationResult pr =
                simulate_population(sys, pops[ip].first, pops[ip].second, rs);
            st[0].add(pr.sup_dev_minor);
            st[1].add(pr.sup_dev_follower);
            st[2].add(pr.gap0);
            st[3].add(pr.gapl);
            st[4].add(pr.gapf);
        }
        for (int m = 0; m < 5; ++m) {
            est[ip][static_cast<size_t>(m)] =
                m < 2 ? st[m].mean() : std::abs(st[m].mean());
            ses[ip][static_cast<size_t>(m)] = st[m].stderr_mean();
            study.records.push_back({pops[ip].first, pops[ip].second,
                                     metric_names[m], est[ip][static_cast<size_t>(m)],
                                     ses[ip][static_cast<size_t>(m)]});
        }
    }
    for (int m = 0; m < 5; ++m) {
        std::vector<double> N, y;
        for (size_t ip = 0; ip < pops.size(); ++ip) {
            N.push_back(static_cast<double>(std::min(pops[ip].first, pops[ip].second)));
            y.push_back(est[ip][static_cast<size_t>(m)]);
        }
        study.slopes.push_back(detail::ols_loglog(metric_names[m], N, y));
    }
    return study;
}

/// Cost change of a single designated agent that unilaterally perturbs its
/// control by scale * (piecewise-constant standard-normal deviation), all
/// other strategies and all noise held fixed.  scale = 0 returns exactly 0.
inline double perturbation_gap(const CCSystem& sys, int N_l, int N_f, uint64_t seed,
                               int agent_class, int index, double scale,
                               uint64_t dev_seed) {
    Deviation base{agent_class, index, 0.0, dev_seed};
    Deviation dev{agent_class, index, scale, dev_seed};
    const PopulationResult r0 = simulate_population(sys, N_l, N_f, seed, base);
    const PopulationResult r1 = simulate_population(sys, N_l, N_f, seed, dev);
    return r1.J_deviating - r0.J_deviating;
}

} // namespace mfglq
