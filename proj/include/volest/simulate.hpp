#pragma once

// Simulation of the stochastic-volatility market, the linearized optimal
// policy, the controlled wealth process, and synthetic regression datasets.
//
// Variance: full-truncation Euler. Price: log-Euler. Brownian drivers:
//   dW2 = dZ2 (variance), dW1 = rho dZ2 + sqrt(1 - rho^2) dZ1 (price).
// Normals for step k of path i are a pure function of (seed, i, k).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "volest/model_core.hpp"
#include "volest/nls.hpp"
#include "volest/parallel.hpp"
#include "volest/rng.hpp"

namespace volest {

struct PathConfig {
    double horizon = 1.0;
    double dt = 1e-3;
    std::uint64_t seed = 0;
    std::size_t n_paths = 1;

    void validate() const {
        if (!(horizon > 0.0) || !std::isfinite(horizon)) throw InvalidArgument("PathConfig: horizon must be > 0");
        if (!(dt > 0.0) || !(dt < horizon)) throw InvalidArgument("PathConfig: dt must satisfy 0 < dt < horizon");
        if (n_paths < 1) throw InvalidArgument("PathConfig: n_paths must be >= 1");
    }

    std::size_t steps() const {
        // Absorb representation error so that e.g. 1 / 1e-3 gives 1000 steps.
        return static_cast<std::size_t>(std::ceil(horizon / dt * (1.0 - 1e-12)));
    }

    std::vector<double> grid() const {
        const std::size_t n = steps();
        std::vector<double> t(n + 1);
        for (std::size_t k = 0; k <= n; ++k) t[k] = std::min(static_cast<double>(k) * dt, horizon);
        t[n] = horizon;
        return t;
    }
};

struct SimPath {
    std::vector<double> times;
    std::vector<double> variance;
    std::vector<double> price;
    std::optional<std::vector<double>> wealth;
    std::optional<std::vector<double>> policy;

    std::size_t size() const { return times.size(); }

    /// B_s = X_s - pi_s; requires a wealth path.
    std::vector<double> risk_free_holding() const {
        if (!wealth || !policy) throw InvalidArgument("SimPath: no wealth path attached");
        std::vector<double> b(size());
        for (std::size_t k = 0; k < size(); ++k) b[k] = (*wealth)[k] - (*policy)[k];
        return b;
    }
};

inline constexpr double kPolicyVarianceFloor = 1e-12;

/// Expected variance after elapsed time s.
inline double cir_mean(const HestonParams& p, double s) {
    if (!(s >= 0.0)) throw InvalidArgument("cir_mean: elapsed time must be >= 0");
    const double level = p.alpha / p.beta_rev;
    return level + (p.sigma_bar - level) * std::exp(-p.beta_rev * s);
}

/// pi* = -(mu - r)(a0 + a1 x + a2 v) / (v a1) - rho gamma a2 / a1, with v the
/// instantaneous variance.
inline double optimal_policy(double wealth, double sigma_bar, const PolicyCoefficients& c,
                             const HestonParams& p) {
    if (!(sigma_bar > 0.0)) throw InvalidArgument("optimal_policy: sigma_bar must be > 0");
    const double vx = c.alpha0() + c.alpha1() * wealth + c.alpha2() * sigma_bar;
    return -p.excess_return() * vx / (sigma_bar * c.alpha1()) - p.rho * p.gamma * c.alpha2() / c.alpha1();
}

namespace detail {

inline void require_valid(const HestonParams& p) {
    auto report = validate_heston_params(p);
    if (!report.ok()) throw InvalidArgument("HestonParams: " + join(report.violations, "; "));
}

inline void non_finite_step(const char* what, std::size_t k) {
    throw InvalidArgument(std::string("non-finite ") + what + " at step " + std::to_string(k) +
                          " (dt too large for the parameter scale?)");
}

}  // namespace detail

/// Market path driven by caller-supplied independent Brownian increments
/// dz1[k], dz2[k] over [times[k], times[k+1]].
inline SimPath simulate_market_path_from_increments(const HestonParams& p, std::span<const double> times,
                                                    std::span<const double> dz1,
                                                    std::span<const double> dz2) {
    detail::require_valid(p);
    if (times.size() < 2 || dz1.size() + 1 != times.size() || dz2.size() + 1 != times.size())
        throw InvalidArgument("simulate_market_path: increments must have one entry per step");

    const std::size_t n = dz1.size();
    const double rho_perp = std::sqrt(1.0 - p.rho * p.rho);
    SimPath path;
    path.times.assign(times.begin(), times.end());
    path.variance.resize(n + 1);
    path.price.resize(n + 1);
    path.variance[0] = p.sigma_bar;
    double log_s = 0.0;
    path.price[0] = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double h = times[k + 1] - times[k];
        const double v = path.variance[k];  // already >= 0
        const double sd = std::sqrt(v);
        const double dw2 = dz2[k];
        const double dw1 = p.rho * dw2 + rho_perp * dz1[k];
        const double v_next = v + (p.alpha - p.beta_rev * v) * h + p.gamma * sd * dw2;
        if (!std::isfinite(v_next)) detail::non_finite_step("variance", k);
        path.variance[k + 1] = std::max(v_next, 0.0);
        log_s += (p.mu - 0.5 * v) * h + sd * dw1;
        if (!std::isfinite(log_s)) detail::non_finite_step("price", k);
        path.price[k + 1] = std::exp(log_s);
    }
    return path;
}

/// Independent N(0, h_k) increments for one path.
inline std::pair<std::vector<double>, std::vector<double>> brownian_increments(
    const PathConfig& c, std::span<const double> times, std::size_t path_index) {
    const rng::CounterRng gen(c.seed);
    const std::size_t n = times.size() - 1;
    std::vector<double> dz1(n), dz2(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double sh = std::sqrt(times[k + 1] - times[k]);
        const auto [z1, z2] = gen.normal_pair(path_index, k);
        dz1[k] = sh * z1;
        dz2[k] = sh * z2;
    }
    return {std::move(dz1), std::move(dz2)};
}

inline SimPath simulate_market_path(const HestonParams& p, const PathConfig& c, std::size_t path_index) {
    c.validate();
    if (path_index >= c.n_paths) throw InvalidArgument("simulate_market_path: path_index >= n_paths");
    const auto times = c.grid();
    const auto [dz1, dz2] = brownian_increments(c, times, path_index);
    return simulate_market_path_from_increments(p, times, dz1, dz2);
}

/// Variance component only; identical to simulate_market_path(...).variance.
inline std::vector<double> simulate_variance_path(const HestonParams& p, const PathConfig& c,
                                                  std::size_t path_index) {
    detail::require_valid(p);
    c.validate();
    if (path_index >= c.n_paths) throw InvalidArgument("simulate_variance_path: path_index >= n_paths");
    const auto times = c.grid();
    const rng::CounterRng gen(c.seed);
    std::vector<double> v(times.size());
    v[0] = p.sigma_bar;
    for (std::size_t k = 0; k + 1 < times.size(); ++k) {
        const double h = times[k + 1] - times[k];
        const double dw2 = std::sqrt(h) * gen.normal_pair(path_index, k).second;
        const double next = v[k] + (p.alpha - p.beta_rev * v[k]) * h + p.gamma * std::sqrt(v[k]) * dw2;
        if (!std::isfinite(next)) detail::non_finite_step("variance", k);
        v[k + 1] = std::max(next, 0.0);
    }
    return v;
}

/// Variance at the horizon for every path in c, indexed by path.
inline std::vector<double> terminal_variances(const HestonParams& p, const PathConfig& c, unsigned threads = 1) {
    std::vector<double> out(c.n_paths);
    parallel_for(c.n_paths, threads, [&](std::size_t i) { out[i] = simulate_variance_path(p, c, i).back(); });
    return out;
}

/// Euler scheme for the self-financing wealth process under the linearized
/// policy. The price driver is recovered from the log-price increments, so
/// the wealth path shares the market path's Brownian motion exactly.
inline SimPath simulate_wealth_path(const SimPath& market, const PolicyCoefficients& coeffs,
                                    const HestonParams& p, double x0) {
    if (!std::isfinite(x0)) throw InvalidArgument("simulate_wealth_path: x0 must be finite");
    const std::size_t n = market.size();
    if (n < 2 || market.variance.size() != n || market.price.size() != n)
        throw InvalidArgument("simulate_wealth_path: malformed market path");

    SimPath out = market;
    std::vector<double> x(n), pi(n);
    x[0] = x0;
    for (std::size_t k = 0; k < n; ++k) {
        const double v = market.variance[k];
        pi[k] = optimal_policy(x[k], std::max(v, kPolicyVarianceFloor), coeffs, p);
        if (!std::isfinite(pi[k])) detail::non_finite_step("policy", k);
        if (k + 1 == n) break;
        const double h = market.times[k + 1] - market.times[k];
        // sqrt(v_k) dW1 from the log-Euler price update.
        const double vol_dw1 =
            (std::log(market.price[k + 1]) - std::log(market.price[k])) - (p.mu - 0.5 * v) * h;
        x[k + 1] = x[k] + (p.r * x[k] + p.excess_return() * pi[k]) * h + pi[k] * vol_dw1;
        if (!std::isfinite(x[k + 1])) detail::non_finite_step("wealth", k);
    }
    out.wealth = std::move(x);
    out.policy = std::move(pi);
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic datasets
// ---------------------------------------------------------------------------

/// Rows pi* = stage1_model(e; truth) + N(0, noise^2) with e ~ U[e_min, e_max]
/// and mu = r + e.
struct ModelImpliedSpec {
    Stage1Params truth{2.0, 0.5, 0.04};
    std::size_t n = 50;
    double noise = 0.0;
    double e_min = 0.01;
    double e_max = 0.10;
    double r = 0.02;

    void validate() const {
        if (n < 1) throw InvalidArgument("model-implied spec: n must be >= 1");
        if (!(noise >= 0.0) || !std::isfinite(noise)) throw InvalidArgument("model-implied spec: noise must be >= 0");
        if (!(e_min <= e_max) || !std::isfinite(e_min) || !std::isfinite(e_max))
            throw InvalidArgument("model-implied spec: need finite e_min <= e_max");
        if (!(truth.beta3 > 0.0)) throw InvalidArgument("model-implied spec: beta3 must be > 0");
        if (e_min <= -truth.beta3 && -truth.beta3 <= e_max)
            throw InvalidArgument("model-implied spec: e-interval contains the stage-1 pole at -beta3");
    }
};

/// One row per grid point of each simulated wealth path (paths concatenated
/// in index order). The path seed is the seed passed to the generator.
struct StructuralSpec {
    HestonParams heston;
    PolicyCoefficients coeffs{1.0, -2.0, 0.5};
    PathConfig path;
    double x0 = 1.0;
};

using GenerationSpec = std::variant<ModelImpliedSpec, StructuralSpec>;

namespace detail {

inline constexpr std::uint64_t kStreamExcessReturn = 0;
inline constexpr std::uint64_t kStreamNoise = 1;

inline Dataset generate_model_implied(const ModelImpliedSpec& s, std::uint64_t seed) {
    s.validate();
    const rng::CounterRng gen(seed);
    std::vector<MarketObservation> rows;
    rows.reserve(s.n);
    for (std::size_t i = 0; i < s.n; ++i) {
        const double e_draw = s.e_min + (s.e_max - s.e_min) * gen.uniform(kStreamExcessReturn, i);
        const double mu = s.r + e_draw;
        const double e = mu - s.r;  // what a reader of the row will see
        double pi = stage1_model(e, s.truth);
        if (s.noise > 0.0) pi += s.noise * gen.normal(kStreamNoise, i);
        rows.emplace_back(pi, mu, s.r);
    }
    return Dataset(std::move(rows), {"synthetic:model-implied", DatasetMode::CrossSection});
}

inline Dataset generate_structural(const StructuralSpec& s, std::uint64_t seed, unsigned threads) {
    detail::require_valid(s.heston);
    PathConfig cfg = s.path;
    cfg.seed = seed;
    cfg.validate();
    std::vector<SimPath> paths(cfg.n_paths);
    parallel_for(cfg.n_paths, threads, [&](std::size_t i) {
        paths[i] = simulate_wealth_path(simulate_market_path(s.heston, cfg, i), s.coeffs, s.heston, s.x0);
    });
    std::vector<MarketObservation> rows;
    rows.reserve(cfg.n_paths * paths.front().size());
    for (std::size_t i = 0; i < paths.size(); ++i) {
        const auto& pi = *paths[i].policy;
        for (std::size_t k = 0; k < pi.size(); ++k)
            rows.emplace_back(pi[k], s.heston.mu, s.heston.r, "p" + std::to_string(i) + "t" + std::to_string(k));
    }
    return Dataset(std::move(rows), {"synthetic:structural", DatasetMode::TimeSeries});
}

}  // namespace detail

inline Dataset generate_synthetic_dataset(const GenerationSpec& spec, std::uint64_t seed, unsigned threads = 1) {
    if (const auto* m = std::get_if<ModelImpliedSpec>(&spec)) return detail::generate_model_implied(*m, seed);
    return detail::generate_structural(std::get<StructuralSpec>(spec), seed, threads);
}

}  // namespace volest
