#pragma once

// Domain types shared by the simulator, the regressions and the I/O layer.
//
// sigma_bar is an instantaneous VARIANCE throughout (sigma_t^2 == sigma_bar).
// Code that needs a volatility takes std::sqrt(sigma_bar).

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace volest {

/// Thrown by constructors and operations whose preconditions fail.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Input data cannot support the requested operation (I/O, schema, estimation).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// HestonParams
// ---------------------------------------------------------------------------

struct HestonValidation {
    std::vector<std::string> violations;
    bool feller = false;  // 2 alpha >= gamma^2

    bool ok() const { return violations.empty(); }
};

/// Market and variance-process constants.
///
/// Variance follows dv = (alpha - beta_rev v) ds + gamma sqrt(v) dW2 with
/// v(0) = sigma_bar, and the price follows dS = S (mu ds + sqrt(v) dW1) with
/// corr(dW1, dW2) = rho.
struct HestonParams {
    double mu = 0.0;
    double r = 0.0;
    double alpha = 0.0;
    double beta_rev = 1.0;
    double gamma = 0.0;
    double rho = 0.0;
    double sigma_bar = 0.0;

    double excess_return() const { return mu - r; }
};

inline bool all_finite(std::initializer_list<double> xs) {
    for (double x : xs) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

/// Reports every violated constraint; never throws.
inline HestonValidation validate_heston_params(const HestonParams& p) {
    HestonValidation out;
    if (!all_finite({p.mu, p.r, p.alpha, p.beta_rev, p.gamma, p.rho, p.sigma_bar})) {
        out.violations.emplace_back("all parameters must be finite");
    }
    if (!(std::abs(p.rho) < 1.0)) out.violations.emplace_back("|rho| must be < 1");
    if (!(p.gamma >= 0.0)) out.violations.emplace_back("gamma must be >= 0");
    if (!(p.beta_rev > 0.0)) out.violations.emplace_back("beta_rev must be > 0");
    if (!(p.sigma_bar >= 0.0)) out.violations.emplace_back("sigma_bar must be >= 0");
    if (!(p.alpha >= 0.0)) out.violations.emplace_back("alpha must be >= 0");
    out.feller = 2.0 * p.alpha >= p.gamma * p.gamma;
    return out;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string s;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) s += sep;
        s += parts[i];
    }
    return s;
}

/// Checked construction: throws InvalidArgument listing every violation.
inline HestonParams make_heston_params(double mu, double r, double alpha, double beta_rev,
                                       double gamma, double rho, double sigma_bar) {
    HestonParams p{mu, r, alpha, beta_rev, gamma, rho, sigma_bar};
    auto report = validate_heston_params(p);
    if (!report.ok()) throw InvalidArgument("HestonParams: " + join(report.violations, "; "));
    return p;
}

// ---------------------------------------------------------------------------
// PolicyCoefficients
// ---------------------------------------------------------------------------

/// Coefficients of the linear expansion V_x ~ alpha0 + alpha1 x + alpha2 sigma_bar.
/// alpha1 plays the role of V_xx and must be negative (concave utility).
class PolicyCoefficients {
public:
    PolicyCoefficients(double alpha0, double alpha1, double alpha2)
        : alpha0_(alpha0), alpha1_(alpha1), alpha2_(alpha2) {
        if (!all_finite({alpha0, alpha1, alpha2}))
            throw InvalidArgument("PolicyCoefficients: coefficients must be finite");
        if (!(alpha1 < 0.0))
            throw InvalidArgument("PolicyCoefficients: alpha1 must be < 0 (V_xx < 0)");
    }

    double alpha0() const { return alpha0_; }
    double alpha1() const { return alpha1_; }
    double alpha2() const { return alpha2_; }
    double alpha_ratio() const { return alpha2_ / alpha1_; }

private:
    double alpha0_;
    double alpha1_;
    double alpha2_;
};

// ---------------------------------------------------------------------------
// Observations
// ---------------------------------------------------------------------------

class MarketObservation {
public:
    MarketObservation(double pi_star, double mu, double r, std::optional<std::string> label = {})
        : pi_star_(pi_star), mu_(mu), r_(r), label_(std::move(label)) {
        if (label_ && label_->empty()) label_.reset();
        if (!all_finite({pi_star, mu, r}))
            throw InvalidArgument("MarketObservation: pi_star, mu and r must be finite");
        if (label_ && label_->find_first_of(",\r\n") != std::string::npos)
            throw InvalidArgument("MarketObservation: label must not contain ',' or newlines");
    }

    double pi_star() const { return pi_star_; }
    double mu() const { return mu_; }
    double r() const { return r_; }
    double excess_return() const { return mu_ - r_; }
    /// The stage-2 regressand 1/pi_star; requires pi_star != 0.
    double inverse_position() const { return 1.0 / pi_star_; }
    const std::optional<std::string>& label() const { return label_; }

    friend bool operator==(const MarketObservation&, const MarketObservation&) = default;

private:
    double pi_star_;
    double mu_;
    double r_;
    std::optional<std::string> label_;
};

enum class DatasetMode { TimeSeries, CrossSection };

inline std::string_view to_string(DatasetMode m) {
    return m == DatasetMode::TimeSeries ? "time-series" : "cross-section";
}

struct DatasetMetadata {
    std::string source;
    DatasetMode mode = DatasetMode::CrossSection;

    friend bool operator==(const DatasetMetadata&, const DatasetMetadata&) = default;
};

class Dataset {
public:
    Dataset() = default;
    Dataset(std::vector<MarketObservation> rows, DatasetMetadata meta)
        : rows_(std::move(rows)), meta_(std::move(meta)) {}

    const std::vector<MarketObservation>& rows() const { return rows_; }
    std::size_t size() const { return rows_.size(); }
    bool empty() const { return rows_.empty(); }
    const MarketObservation& operator[](std::size_t i) const { return rows_[i]; }
    const DatasetMetadata& metadata() const { return meta_; }

    std::vector<double> excess_returns() const {
        std::vector<double> e;
        e.reserve(rows_.size());
        for (const auto& o : rows_) e.push_back(o.excess_return());
        return e;
    }
    std::vector<double> positions() const {
        std::vector<double> y;
        y.reserve(rows_.size());
        for (const auto& o : rows_) y.push_back(o.pi_star());
        return y;
    }

    friend bool operator==(const Dataset&, const Dataset&) = default;

private:
    std::vector<MarketObservation> rows_;
    DatasetMetadata meta_;
};

inline constexpr std::size_t kMinStage1Rows = 4;

// ---------------------------------------------------------------------------
// Regression parameters
// ---------------------------------------------------------------------------

/// Stage-1 regression parameters. beta3 is the volatility estimate.
struct Stage1Params {
    double beta1 = 0.0;
    double beta2 = 0.0;
    double beta3 = 1.0;

    static Stage1Params checked(double b1, double b2, double b3) {
        if (!all_finite({b1, b2, b3})) throw InvalidArgument("Stage1Params: non-finite value");
        if (!(b3 > 0.0)) throw InvalidArgument("Stage1Params: beta3 must be > 0");
        return {b1, b2, b3};
    }

    friend bool operator==(const Stage1Params&, const Stage1Params&) = default;
};

/// Stage-2 regression parameters. beta4 is read as gamma under a declared gauge.
struct Stage2Params {
    double beta4 = 1.0;
    double beta5 = 1.0;
    double beta6 = 1.0;

    static Stage2Params checked(double b4, double b5, double b6) {
        if (!all_finite({b4, b5, b6})) throw InvalidArgument("Stage2Params: non-finite value");
        return {b4, b5, b6};
    }

    Stage2Params scaled(double c) const { return {c * beta4, c * beta5, c * beta6}; }

    friend bool operator==(const Stage2Params&, const Stage2Params&) = default;
};

// ---------------------------------------------------------------------------
// Fit results
// ---------------------------------------------------------------------------

enum class Diagnostic {
    IdentifiabilityB1EqB2,
    PoleProximity,
    IllConditioned,
    GaugeUnidentified,
    DegenerateCovariance,
    RhoOutOfRange,
};

inline std::string_view to_string(Diagnostic d) {
    switch (d) {
        case Diagnostic::IdentifiabilityB1EqB2: return "IDENTIFIABILITY_B1_EQ_B2";
        case Diagnostic::PoleProximity: return "POLE_PROXIMITY";
        case Diagnostic::IllConditioned: return "ILL_CONDITIONED";
        case Diagnostic::GaugeUnidentified: return "GAUGE_UNIDENTIFIED";
        case Diagnostic::DegenerateCovariance: return "DEGENERATE_COVARIANCE";
        case Diagnostic::RhoOutOfRange: return "RHO_OUT_OF_RANGE";
    }
    return "UNKNOWN";
}

/// Why a solver run stopped.
enum class Termination {
    GradientTolerance,
    StepTolerance,
    MaxIterations,
    DampingExhausted,
    SingularNormalEquations,
    NonFiniteEvaluation,
};

inline std::string_view to_string(Termination t) {
    switch (t) {
        case Termination::GradientTolerance: return "gradient_tolerance";
        case Termination::StepTolerance: return "step_tolerance";
        case Termination::MaxIterations: return "max_iterations";
        case Termination::DampingExhausted: return "damping_exhausted";
        case Termination::SingularNormalEquations: return "singular_normal_equations";
        case Termination::NonFiniteEvaluation: return "non_finite_evaluation";
    }
    return "unknown";
}

inline bool is_converged(Termination t) {
    return t == Termination::GradientTolerance || t == Termination::StepTolerance;
}

struct TraceEntry {
    std::vector<double> params;
    double residual_norm = 0.0;

    friend bool operator==(const TraceEntry&, const TraceEntry&) = default;
};

enum class GaugeKind { Free, PinBeta5, PinBeta6 };

inline std::string_view to_string(GaugeKind g) {
    switch (g) {
        case GaugeKind::Free: return "free";
        case GaugeKind::PinBeta5: return "pin-beta5";
        case GaugeKind::PinBeta6: return "pin-beta6";
    }
    return "free";
}

inline GaugeKind parse_gauge(std::string_view s) {
    if (s == "free") return GaugeKind::Free;
    if (s == "pin-beta5") return GaugeKind::PinBeta5;
    if (s == "pin-beta6") return GaugeKind::PinBeta6;
    throw InvalidArgument("unknown gauge rule: " + std::string(s));
}

/// Stage-2 identification convention. Pin variants freeze beta5 (resp. beta6)
/// at a stage-1 estimate (beta2, resp. beta1).
struct GaugeRule {
    GaugeKind kind = GaugeKind::PinBeta5;
    double pin_value = 0.0;

    static GaugeRule free() { return {GaugeKind::Free, 0.0}; }
    static GaugeRule pin_beta5(double beta2_hat) { return checked(GaugeKind::PinBeta5, beta2_hat); }
    static GaugeRule pin_beta6(double beta1_hat) { return checked(GaugeKind::PinBeta6, beta1_hat); }

    static GaugeRule from_stage1(GaugeKind kind, const Stage1Params& s1) {
        switch (kind) {
            case GaugeKind::Free: return free();
            case GaugeKind::PinBeta5: return pin_beta5(s1.beta2);
            case GaugeKind::PinBeta6: return pin_beta6(s1.beta1);
        }
        return free();
    }

    friend bool operator==(const GaugeRule&, const GaugeRule&) = default;

private:
    static GaugeRule checked(GaugeKind k, double v) {
        if (!std::isfinite(v) || v == 0.0)
            throw InvalidArgument(std::string("gauge ") + std::string(to_string(k)) +
                                  ": pinned stage-1 estimate must be finite and nonzero");
        return {k, v};
    }
};

struct FitResult {
    std::variant<Stage1Params, Stage2Params> params;
    double residual_norm = 0.0;  // sum of squared residuals
    int iterations = 0;
    bool converged = false;
    Termination termination = Termination::MaxIterations;
    std::string message;
    /// Report-space standard errors; nullopt where absent (pinned or degenerate).
    std::vector<std::optional<double>> standard_errors;
    std::vector<Diagnostic> diagnostics;
    /// Accepted steps only, in report space.
    std::vector<TraceEntry> trace;
    std::size_t observations = 0;
    /// Stage-2 only.
    std::optional<GaugeRule> gauge;
    std::optional<double> beta3_hat;

    bool is_stage1() const { return std::holds_alternative<Stage1Params>(params); }
    const Stage1Params& stage1() const { return std::get<Stage1Params>(params); }
    const Stage2Params& stage2() const { return std::get<Stage2Params>(params); }

    bool has(Diagnostic d) const {
        for (auto x : diagnostics)
            if (x == d) return true;
        return false;
    }
    void add(Diagnostic d) {
        if (!has(d)) diagnostics.push_back(d);
    }

    std::vector<double> param_vector() const {
        if (is_stage1()) {
            const auto& p = stage1();
            return {p.beta1, p.beta2, p.beta3};
        }
        const auto& p = stage2();
        return {p.beta4, p.beta5, p.beta6};
    }
};

}  // namespace volest
