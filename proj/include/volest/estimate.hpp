#pragma once

// Two-stage estimation: the volatility regression (stage 1), the
// vol-of-vol regression on inverse positions (stage 2) under an explicit
// gauge, the correlation inversion, diagnostics, and a Monte Carlo harness.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "volest/model_core.hpp"
#include "volest/nls.hpp"
#include "volest/parallel.hpp"
#include "volest/rng.hpp"
#include "volest/simulate.hpp"

namespace volest {

inline constexpr double kB1EqB2Tolerance = 1e-6;
inline constexpr double kPoleProximity = 1e-3;
inline constexpr double kIllConditioned = 1e8;

// ---------------------------------------------------------------------------
// Problems
// ---------------------------------------------------------------------------

namespace detail {

inline Eigen::VectorXd nan_vector(Eigen::Index n) {
    return Eigen::VectorXd::Constant(n, std::numeric_limits<double>::quiet_NaN());
}

/// Stage-1 residuals y - f(e; beta1, beta2, beta3) in report space.
inline ResidualProblem stage1_problem(std::vector<double> e, std::vector<double> y) {
    const auto n = static_cast<Eigen::Index>(e.size());
    ResidualProblem prob;
    prob.n_params = 3;
    prob.n_observations = n;
    prob.residuals = [e, y, n](const Eigen::VectorXd& b) -> Eigen::VectorXd {
        Eigen::VectorXd r(n);
        try {
            const Stage1Params s{b(0), b(1), b(2)};
            for (Eigen::Index i = 0; i < n; ++i) r(i) = y[i] - stage1_model(e[i], s);
        } catch (const InvalidArgument&) {
            return nan_vector(n);
        }
        return r;
    };
    prob.jacobian = [e, n](const Eigen::VectorXd& b) -> Eigen::MatrixXd {
        Eigen::MatrixXd J(n, 3);
        try {
            const Stage1Params s{b(0), b(1), b(2)};
            for (Eigen::Index i = 0; i < n; ++i) {
                const auto d = stage1_jacobian(e[i], s);
                J.row(i) << -d[0], -d[1], -d[2];
            }
        } catch (const InvalidArgument&) {
            J.setConstant(std::numeric_limits<double>::quiet_NaN());
        }
        return J;
    };
    return prob;
}

/// Same residuals with theta = ln beta3 in the third slot, so every iterate
/// has beta3 > 0.
inline ResidualProblem stage1_log_problem(const ResidualProblem& report) {
    ResidualProblem prob = report;
    auto to_report = [](const Eigen::VectorXd& p) {
        Eigen::VectorXd b = p;
        b(2) = std::exp(p(2));
        return b;
    };
    prob.residuals = [f = report.residuals, to_report](const Eigen::VectorXd& p) { return f(to_report(p)); };
    prob.jacobian = [f = report.jacobian, to_report](const Eigen::VectorXd& p) {
        const Eigen::VectorXd b = to_report(p);
        Eigen::MatrixXd J = f(b);
        J.col(2) *= b(2);
        return J;
    };
    return prob;
}

/// Maps the optimized coordinates onto (beta4, beta5, beta6).
struct Stage2Layout {
    GaugeRule gauge;

    Eigen::Index size() const { return gauge.kind == GaugeKind::Free ? 3 : 2; }

    Stage2Params expand(const Eigen::VectorXd& p) const {
        switch (gauge.kind) {
            case GaugeKind::Free: return {p(0), p(1), p(2)};
            case GaugeKind::PinBeta5: return {p(0), gauge.pin_value, p(1)};
            case GaugeKind::PinBeta6: return {p(0), p(1), gauge.pin_value};
        }
        return {};
    }

    Eigen::VectorXd compress(const Stage2Params& b) const {
        switch (gauge.kind) {
            case GaugeKind::Free: return Eigen::Vector3d(b.beta4, b.beta5, b.beta6);
            case GaugeKind::PinBeta5: return Eigen::Vector2d(b.beta4, b.beta6);
            case GaugeKind::PinBeta6: return Eigen::Vector2d(b.beta4, b.beta5);
        }
        return {};
    }

    /// Index in (beta4, beta5, beta6) of each optimized coordinate.
    std::vector<int> free_indices() const {
        switch (gauge.kind) {
            case GaugeKind::Free: return {0, 1, 2};
            case GaugeKind::PinBeta5: return {0, 2};
            case GaugeKind::PinBeta6: return {0, 1};
        }
        return {};
    }
};

inline ResidualProblem stage2_problem(std::vector<double> e, std::vector<double> y_inv, double beta3_hat,
                                      Stage2Layout layout) {
    const auto n = static_cast<Eigen::Index>(e.size());
    ResidualProblem prob;
    prob.n_params = layout.size();
    prob.n_observations = n;
    prob.residuals = [e, y_inv, n, beta3_hat, layout](const Eigen::VectorXd& p) -> Eigen::VectorXd {
        Eigen::VectorXd r(n);
        try {
            const Stage2Params b = layout.expand(p);
            for (Eigen::Index i = 0; i < n; ++i) r(i) = y_inv[i] - stage2_model(e[i], b, beta3_hat);
        } catch (const InvalidArgument&) {
            return nan_vector(n);
        }
        return r;
    };
    prob.jacobian = [e, n, beta3_hat, layout](const Eigen::VectorXd& p) -> Eigen::MatrixXd {
        const auto cols = layout.free_indices();
        Eigen::MatrixXd J(n, static_cast<Eigen::Index>(cols.size()));
        try {
            const Stage2Params b = layout.expand(p);
            for (Eigen::Index i = 0; i < n; ++i) {
                const auto d = stage2_jacobian(e[i], b, beta3_hat);
                for (std::size_t j = 0; j < cols.size(); ++j) J(i, static_cast<Eigen::Index>(j)) = -d[cols[j]];
            }
        } catch (const InvalidArgument&) {
            J.setConstant(std::numeric_limits<double>::quiet_NaN());
        }
        return J;
    };
    return prob;
}

inline double mean(const std::vector<double>& x) {
    return x.empty() ? 0.0 : std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

inline double sample_sd(const std::vector<double>& x) {
    if (x.size() < 2) return 0.0;
    const double m = mean(x);
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

inline double median(std::vector<double> x) {
    if (x.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(x.begin(), x.end());
    const std::size_t h = x.size() / 2;
    return x.size() % 2 ? x[h] : 0.5 * (x[h - 1] + x[h]);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Standard errors and diagnostics
// ---------------------------------------------------------------------------

/// Gauss-Newton standard errors sqrt(diag(s^2 (J^T J)^-1)), s^2 = RSS/(n - p).
/// Empty when n <= p or when J^T J is singular to working precision
/// (cond(J) above kIllConditioned).
inline std::optional<std::vector<double>> standard_errors(const ResidualProblem& problem,
                                                          const Eigen::VectorXd& params, double residual_norm) {
    const Eigen::Index n = problem.n_observations;
    const Eigen::Index p = problem.n_params;
    if (n <= p) return std::nullopt;
    const Eigen::MatrixXd J = problem.jacobian(params);
    if (!J.allFinite() || !(condition_number(J) <= kIllConditioned)) return std::nullopt;
    const double s2 = residual_norm / static_cast<double>(n - p);
    const Eigen::MatrixXd cov = s2 * (J.transpose() * J).inverse();
    std::vector<double> se(static_cast<std::size_t>(p));
    for (Eigen::Index j = 0; j < p; ++j) se[static_cast<std::size_t>(j)] = std::sqrt(std::max(cov(j, j), 0.0));
    return se;
}

inline std::optional<std::vector<double>> standard_errors(const SolverResult& fit, const ResidualProblem& problem) {
    return standard_errors(problem, fit.params, fit.residual_norm);
}

/// Named identifiability warnings for a completed fit (converged or not).
inline std::vector<Diagnostic> identifiability_diagnostics(const FitResult& fit, const Dataset& data) {
    FitResult scratch;
    const auto e = data.excess_returns();
    auto pole_check = [&](double beta3) {
        if (e.empty()) return;
        double closest = std::numeric_limits<double>::infinity();
        for (double x : e) closest = std::min(closest, std::abs(beta3 + x));
        if (closest < kPoleProximity * beta3) scratch.add(Diagnostic::PoleProximity);
    };

    Eigen::MatrixXd J;
    if (fit.is_stage1()) {
        const auto& b = fit.stage1();
        if (std::abs(b.beta1 - b.beta2) < kB1EqB2Tolerance * std::max({std::abs(b.beta1), std::abs(b.beta2), 1.0}))
            scratch.add(Diagnostic::IdentifiabilityB1EqB2);
        pole_check(b.beta3);
        J = detail::stage1_problem(e, data.positions()).jacobian(Eigen::Vector3d(b.beta1, b.beta2, b.beta3));
    } else {
        const double b3 = fit.beta3_hat.value_or(std::numeric_limits<double>::quiet_NaN());
        const GaugeRule gauge = fit.gauge.value_or(GaugeRule::free());
        pole_check(b3);
        const detail::Stage2Layout layout{gauge};
        J = detail::stage2_problem(e, std::vector<double>(e.size(), 0.0), b3, layout)
                .jacobian(layout.compress(fit.stage2()));
        if (gauge.kind == GaugeKind::Free) scratch.add(Diagnostic::GaugeUnidentified);
    }
    if (!J.allFinite() || !(condition_number(J) <= kIllConditioned)) scratch.add(Diagnostic::IllConditioned);
    return scratch.diagnostics;
}

// ---------------------------------------------------------------------------
// Stage 1
// ---------------------------------------------------------------------------

/// Moment-based start: beta2 from the rows with the smallest |e|, beta3 from
/// the spread of e, beta1 offset from beta2 to avoid the beta1 == beta2 ridge.
inline Stage1Params default_stage1_init(const Dataset& data) {
    const auto e = data.excess_returns();
    std::vector<std::size_t> order(e.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return std::abs(e[a]) < std::abs(e[b]); });
    const std::size_t k = std::max<std::size_t>(1, e.size() / 10);
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) sum += data[order[i]].pi_star();
    const double beta2 = sum / static_cast<double>(k);
    const double beta3 = std::max(detail::sample_sd(e), 1e-4);
    return {beta2 + 1.0, beta2, beta3};
}

inline FitResult fit_volatility(const Dataset& data, const SolverOptions& opts = {},
                                std::optional<Stage1Params> init = std::nullopt) {
    if (data.size() < kMinStage1Rows)
        throw DataError("insufficient data: stage-1 needs at least " + std::to_string(kMinStage1Rows) +
                        " rows, got " + std::to_string(data.size()));
    const Stage1Params start = init.value_or(default_stage1_init(data));
    if (!(start.beta3 > 0.0)) throw InvalidArgument("fit_volatility: initial beta3 must be > 0");

    const auto report = detail::stage1_problem(data.excess_returns(), data.positions());
    const auto internal = detail::stage1_log_problem(report);
    SolverResult sr;
    try {
        sr = lm_fit(internal, Eigen::Vector3d(start.beta1, start.beta2, std::log(start.beta3)), opts);
    } catch (const InvalidArgument& ex) {
        throw DataError(std::string("stage-1 fit: ") + ex.what());
    }

    FitResult fit;
    const Eigen::Vector3d b(sr.params(0), sr.params(1), std::exp(sr.params(2)));
    fit.params = Stage1Params{b(0), b(1), b(2)};
    fit.residual_norm = sr.residual_norm;
    fit.iterations = sr.iterations;
    fit.termination = sr.termination;
    fit.converged = sr.converged();
    fit.message = sr.message;
    fit.observations = data.size();
    for (auto& t : sr.trace) {
        t.params[2] = std::exp(t.params[2]);
        fit.trace.push_back(std::move(t));
    }

    const auto se = standard_errors(report, b, sr.residual_norm);
    fit.standard_errors.assign(3, std::nullopt);
    if (se) {
        for (std::size_t j = 0; j < 3; ++j) fit.standard_errors[j] = (*se)[j];
    } else {
        fit.add(Diagnostic::DegenerateCovariance);
    }
    for (auto d : identifiability_diagnostics(fit, data)) fit.add(d);
    return fit;
}

// ---------------------------------------------------------------------------
// Stage 2
// ---------------------------------------------------------------------------

/// Start from the linear form pi* (b3 + e) = (beta5/beta4) b3 + (beta6/beta4) e,
/// or from the constant model beta4 / beta5 = mean(1/pi*) when that fits
/// better (the linear form is singular when e does not vary).
inline Stage2Params default_stage2_init(const Dataset& data, double beta3_hat, const GaugeRule& gauge) {
    const Eigen::Index n = static_cast<Eigen::Index>(data.size());
    Eigen::MatrixXd X(n, 2);
    Eigen::VectorXd y(n);
    double inv_sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = data[static_cast<std::size_t>(i)];
        X(i, 0) = beta3_hat;
        X(i, 1) = row.excess_return();
        y(i) = row.pi_star() * (beta3_hat + row.excess_return());
        inv_sum += row.inverse_position();
    }
    const double inv_mean = n > 0 ? inv_sum / static_cast<double>(n) : 1.0;

    auto from_ratios = [&](double a, double b) -> Stage2Params {
        switch (gauge.kind) {
            case GaugeKind::Free: return {1.0, a, b};
            case GaugeKind::PinBeta5: {
                const double b4 = a != 0.0 ? gauge.pin_value / a : 1.0;
                return {b4, gauge.pin_value, b * b4};
            }
            case GaugeKind::PinBeta6: {
                const double b4 = b != 0.0 ? gauge.pin_value / b : 1.0;
                return {b4, a * b4, gauge.pin_value};
            }
        }
        return {};
    };
    auto sse = [&](const Stage2Params& b) {
        double total = 0.0;
        try {
            for (std::size_t i = 0; i < data.size(); ++i) {
                const double r = data[i].inverse_position() - stage2_model(data[i].excess_return(), b, beta3_hat);
                total += r * r;
            }
        } catch (const InvalidArgument&) {
            return std::numeric_limits<double>::infinity();
        }
        return std::isfinite(total) ? total : std::numeric_limits<double>::infinity();
    };

    const Eigen::Vector2d ab = X.colPivHouseholderQr().solve(y);
    const double level = inv_mean != 0.0 && std::isfinite(inv_mean) ? 1.0 / inv_mean : 1.0;
    const Stage2Params constant = from_ratios(level, level);
    if (!ab.allFinite()) return constant;
    const Stage2Params linear = from_ratios(ab(0), ab(1));
    return sse(linear) <= sse(constant) ? linear : constant;
}

/// Fits 1/pi* = beta4 (b3 + e) / (beta5 b3 + beta6 e) with b3 fixed.
/// gamma_hat = beta4 is meaningful only relative to the declared gauge.
inline FitResult fit_vol_of_vol(const Dataset& data, double beta3_hat, const GaugeRule& gauge,
                                const SolverOptions& opts = {}, std::optional<Stage2Params> init = std::nullopt) {
    if (!(beta3_hat > 0.0) || !std::isfinite(beta3_hat))
        throw InvalidArgument("fit_vol_of_vol: beta3_hat must be > 0");
    if (gauge.kind != GaugeKind::Free && !(gauge.pin_value != 0.0 && std::isfinite(gauge.pin_value)))
        throw InvalidArgument("fit_vol_of_vol: pinned stage-1 estimate must be nonzero");
    if (data.size() < 3)
        throw DataError("insufficient data: stage-2 needs at least 3 rows, got " + std::to_string(data.size()));
    std::vector<double> y_inv(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (data[i].pi_star() == 0.0)
            throw DataError("zero position at row " + std::to_string(i + 1) +
                            (data[i].label() ? " (" + *data[i].label() + ")" : std::string()));
        y_inv[i] = data[i].inverse_position();
    }

    const detail::Stage2Layout layout{gauge};
    const auto problem = detail::stage2_problem(data.excess_returns(), y_inv, beta3_hat, layout);
    Stage2Params start = init.value_or(default_stage2_init(data, beta3_hat, gauge));
    if (gauge.kind == GaugeKind::PinBeta5) start.beta5 = gauge.pin_value;
    if (gauge.kind == GaugeKind::PinBeta6) start.beta6 = gauge.pin_value;

    SolverResult sr;
    try {
        sr = lm_fit(problem, layout.compress(start), opts);
    } catch (const InvalidArgument& ex) {
        throw DataError(std::string("stage-2 fit: ") + ex.what());
    }

    FitResult fit;
    fit.params = layout.expand(sr.params);
    fit.residual_norm = sr.residual_norm;
    fit.iterations = sr.iterations;
    fit.termination = sr.termination;
    fit.converged = sr.converged();
    fit.message = sr.message;
    fit.observations = data.size();
    fit.gauge = gauge;
    fit.beta3_hat = beta3_hat;
    for (const auto& t : sr.trace) {
        const Stage2Params b = layout.expand(Eigen::Map<const Eigen::VectorXd>(t.params.data(),
                                                                             static_cast<Eigen::Index>(t.params.size())));
        fit.trace.push_back({{b.beta4, b.beta5, b.beta6}, t.residual_norm});
    }

    fit.standard_errors.assign(3, std::nullopt);
    const auto cols = layout.free_indices();
    if (const auto se = standard_errors(problem, sr.params, sr.residual_norm)) {
        for (std::size_t j = 0; j < cols.size(); ++j) fit.standard_errors[static_cast<std::size_t>(cols[j])] = (*se)[j];
    } else {
        fit.add(Diagnostic::DegenerateCovariance);
    }
    for (auto d : identifiability_diagnostics(fit, data)) fit.add(d);
    return fit;
}

// ---------------------------------------------------------------------------
// Correlation
// ---------------------------------------------------------------------------

struct RhoEstimate {
    double rho = 0.0;  // never clamped
    bool in_range = true;
    std::vector<Diagnostic> diagnostics;
};

/// Inverts beta2 = -rho gamma (alpha2 / alpha1) for rho.
inline RhoEstimate estimate_rho(double beta2_hat, double gamma_hat, double alpha_ratio) {
    if (!(gamma_hat > 0.0) || !std::isfinite(gamma_hat)) throw InvalidArgument("estimate_rho: gamma_hat must be > 0");
    if (alpha_ratio == 0.0 || !std::isfinite(alpha_ratio))
        throw InvalidArgument("estimate_rho: alpha_ratio must be finite and nonzero");
    if (!std::isfinite(beta2_hat)) throw InvalidArgument("estimate_rho: beta2_hat must be finite");
    RhoEstimate out;
    out.rho = -beta2_hat / (gamma_hat * alpha_ratio);
    out.in_range = std::abs(out.rho) <= 1.0;
    if (!out.in_range) out.diagnostics.push_back(Diagnostic::RhoOutOfRange);
    return out;
}

// ---------------------------------------------------------------------------
// Scale comparison
// ---------------------------------------------------------------------------

/// beta3_hat set against the variance sigma_bar and the volatility sqrt(sigma_bar).
struct ScaleComparison {
    double beta3_hat = 0.0;
    double sigma_bar = 0.0;
    double sqrt_sigma_bar = 0.0;
    double rel_diff_variance = 0.0;
    double rel_diff_volatility = 0.0;

    std::string_view closer() const {
        return std::abs(rel_diff_variance) <= std::abs(rel_diff_volatility) ? "variance" : "volatility";
    }
};

inline ScaleComparison compare_scale(double beta3_hat, double sigma_bar) {
    ScaleComparison c;
    c.beta3_hat = beta3_hat;
    c.sigma_bar = sigma_bar;
    c.sqrt_sigma_bar = std::sqrt(std::max(sigma_bar, 0.0));
    auto rel = [](double x, double ref) {
        return ref != 0.0 ? (x - ref) / ref : std::numeric_limits<double>::infinity();
    };
    c.rel_diff_variance = rel(beta3_hat, c.sigma_bar);
    c.rel_diff_volatility = rel(beta3_hat, c.sqrt_sigma_bar);
    return c;
}

// ---------------------------------------------------------------------------
// Monte Carlo validation
// ---------------------------------------------------------------------------

struct ParameterSummary {
    std::string name;
    std::optional<double> truth;
    double mean = 0.0;
    double median = 0.0;
    double bias = 0.0;  // against truth; 0 when truth is absent
    double rmse = 0.0;
    std::size_t with_standard_error = 0;
    std::size_t covered = 0;  // |estimate - truth| <= 1.96 se
};

struct ValidationOptions {
    std::size_t replications = 100;
    std::uint64_t seed = 0;
    bool stage2 = false;
    GaugeKind gauge = GaugeKind::PinBeta5;
    unsigned threads = 1;
    bool retain_fits = false;
    SolverOptions solver;
};

struct ValidationReport {
    std::size_t replications = 0;
    std::size_t stage1_converged = 0;
    std::size_t stage2_converged = 0;
    std::size_t failures = 0;  // replications that raised an error
    std::vector<ParameterSummary> stage1;
    std::vector<ParameterSummary> stage2;
    std::optional<Stage1Params> truth;
    std::optional<double> gamma_truth;
    /// Structural runs: mean beta3_hat against sigma_bar and sqrt(sigma_bar).
    std::optional<ScaleComparison> scale;
    std::vector<std::optional<FitResult>> stage1_fits;
    std::vector<std::optional<FitResult>> stage2_fits;

    double convergence_rate() const {
        return replications ? static_cast<double>(stage1_converged) / static_cast<double>(replications) : 0.0;
    }
};

namespace detail {

inline ParameterSummary summarize(std::string name, const std::vector<double>& est,
                                  const std::vector<std::optional<double>>& se, std::optional<double> truth) {
    ParameterSummary s;
    s.name = std::move(name);
    s.truth = truth;
    s.mean = mean(est);
    s.median = median(est);
    if (truth && !est.empty()) {
        double sq = 0.0;
        for (std::size_t i = 0; i < est.size(); ++i) {
            const double d = est[i] - *truth;
            sq += d * d;
            if (se[i]) {
                ++s.with_standard_error;
                if (std::abs(d) <= 1.96 * *se[i]) ++s.covered;
            }
        }
        s.bias = s.mean - *truth;
        s.rmse = std::max(std::sqrt(sq / static_cast<double>(est.size())), std::abs(s.bias));
    }
    return s;
}

}  // namespace detail

/// Repeats generate -> fit_volatility (-> fit_vol_of_vol) with replication
/// seeds derive_seed(opts.seed, m). Results are aggregated in index order, so
/// the report does not depend on opts.threads. Summaries use converged
/// replications only.
inline ValidationReport monte_carlo_validation(const GenerationSpec& spec, const ValidationOptions& opts) {
    if (opts.replications < 2) throw InvalidArgument("monte_carlo_validation: need at least 2 replications");
    opts.solver.validate();

    struct Rep {
        std::optional<FitResult> s1;
        std::optional<FitResult> s2;
        bool failed = false;
    };
    std::vector<Rep> reps(opts.replications);
    parallel_for(opts.replications, opts.threads, [&](std::size_t m) {
        Rep& rep = reps[m];
        try {
            const Dataset data = generate_synthetic_dataset(spec, rng::derive_seed(opts.seed, m));
            rep.s1 = fit_volatility(data, opts.solver);
            if (opts.stage2 && rep.s1->converged) {
                const auto& b = rep.s1->stage1();
                rep.s2 = fit_vol_of_vol(data, b.beta3, GaugeRule::from_stage1(opts.gauge, b), opts.solver);
            }
        } catch (const std::exception&) {
            rep.failed = true;
        }
    });

    ValidationReport out;
    out.replications = opts.replications;
    std::optional<double> gamma_truth;
    std::optional<double> sigma_bar;
    if (const auto* m = std::get_if<ModelImpliedSpec>(&spec)) {
        out.truth = m->truth;
    } else {
        const auto& s = std::get<StructuralSpec>(spec);
        gamma_truth = s.heston.gamma;
        sigma_bar = s.heston.sigma_bar;
    }
    out.gamma_truth = gamma_truth;

    std::vector<std::vector<double>> est1(3), est2(3);
    std::vector<std::vector<std::optional<double>>> se1(3), se2(3);
    for (auto& rep : reps) {
        if (rep.failed) ++out.failures;
        if (rep.s1 && rep.s1->converged) {
            ++out.stage1_converged;
            const auto v = rep.s1->param_vector();
            for (std::size_t j = 0; j < 3; ++j) {
                est1[j].push_back(v[j]);
                se1[j].push_back(rep.s1->standard_errors[j]);
            }
        }
        if (rep.s2 && rep.s2->converged) {
            ++out.stage2_converged;
            const auto v = rep.s2->param_vector();
            for (std::size_t j = 0; j < 3; ++j) {
                est2[j].push_back(v[j]);
                se2[j].push_back(rep.s2->standard_errors[j]);
            }
        }
        if (opts.retain_fits) {
            out.stage1_fits.push_back(rep.s1);
            out.stage2_fits.push_back(rep.s2);
        }
    }

    const char* names1[] = {"beta1", "beta2", "beta3"};
    for (std::size_t j = 0; j < 3; ++j) {
        std::optional<double> t;
        if (out.truth) t = std::array{out.truth->beta1, out.truth->beta2, out.truth->beta3}[j];
        out.stage1.push_back(detail::summarize(names1[j], est1[j], se1[j], t));
    }
    if (opts.stage2) {
        const char* names2[] = {"beta4", "beta5", "beta6"};
        for (std::size_t j = 0; j < 3; ++j)
            out.stage2.push_back(detail::summarize(names2[j], est2[j], se2[j], j == 0 ? gamma_truth : std::nullopt));
    }
    if (sigma_bar && !est1[2].empty()) out.scale = compare_scale(out.stage1[2].mean, *sigma_bar);
    return out;
}

}  // namespace volest
