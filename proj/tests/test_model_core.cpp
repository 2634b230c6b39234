#include <gtest/gtest.h>

#include <random>

#include "volest/model_core.hpp"

using namespace volest;

namespace {

HestonParams reference_params() { return {0.08, 0.02, 0.04, 2.0, 0.3, -0.5, 0.04}; }

bool mentions(const HestonValidation& v, const std::string& text) {
    for (const auto& s : v.violations)
        if (s.find(text) != std::string::npos) return true;
    return false;
}

}  // namespace

TEST(HestonParams, ReferenceSetIsValidButViolatesFeller) {
    const auto v = validate_heston_params(reference_params());
    EXPECT_TRUE(v.ok());
    // 2 * 0.04 = 0.08 < 0.3^2 = 0.09
    EXPECT_FALSE(v.feller);
}

TEST(HestonParams, RhoOnBoundaryIsAViolation) {
    auto p = reference_params();
    p.rho = 1.0;
    const auto v = validate_heston_params(p);
    EXPECT_FALSE(v.ok());
    EXPECT_TRUE(mentions(v, "|rho| must be < 1"));
    EXPECT_THROW(make_heston_params(p.mu, p.r, p.alpha, p.beta_rev, p.gamma, p.rho, p.sigma_bar), InvalidArgument);
}

TEST(HestonParams, ZeroVolOfVolSatisfiesFeller) {
    auto p = reference_params();
    p.gamma = 0.0;
    for (double alpha : {0.0, 0.01, 1.0}) {
        p.alpha = alpha;
        const auto v = validate_heston_params(p);
        EXPECT_TRUE(v.ok());
        EXPECT_TRUE(v.feller);
    }
}

TEST(HestonParams, ReportsEveryViolation) {
    const HestonParams p{0.0, 0.0, -1.0, 0.0, -0.1, 2.0, -0.5};
    const auto v = validate_heston_params(p);
    EXPECT_EQ(v.violations.size(), 5u);
}

TEST(HestonParams, RandomInvalidDrawsAreAllRejected) {
    std::mt19937_64 gen(20261016);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 2000; ++trial) {
        auto p = reference_params();
        switch (trial % 5) {
            case 0: p.rho = (u(gen) < 0.5 ? -1.0 : 1.0) * (1.0 + 3.0 * u(gen)); break;
            case 1: p.gamma = -1e-9 - u(gen); break;
            case 2: p.beta_rev = -u(gen); break;
            case 3: p.sigma_bar = -1e-12 - u(gen); break;
            case 4: p.alpha = -1e-12 - u(gen); break;
        }
        EXPECT_THROW(make_heston_params(p.mu, p.r, p.alpha, p.beta_rev, p.gamma, p.rho, p.sigma_bar),
                     InvalidArgument)
            << "trial " << trial;
    }
}

TEST(PolicyCoefficients, RequiresNegativeAlpha1) {
    EXPECT_NO_THROW(PolicyCoefficients(1.0, -2.0, 0.5));
    EXPECT_THROW(PolicyCoefficients(1.0, 0.0, 0.5), InvalidArgument);
    EXPECT_THROW(PolicyCoefficients(1.0, 0.1, 0.5), InvalidArgument);
    EXPECT_THROW(PolicyCoefficients(std::nan(""), -1.0, 0.5), InvalidArgument);
    EXPECT_DOUBLE_EQ(PolicyCoefficients(1.0, -2.0, 0.5).alpha_ratio(), -0.25);
}

TEST(MarketObservation, RejectsNonFiniteFields) {
    EXPECT_THROW(MarketObservation(std::numeric_limits<double>::infinity(), 0.1, 0.02), InvalidArgument);
    EXPECT_THROW(MarketObservation(1.0, std::nan(""), 0.02), InvalidArgument);
    EXPECT_THROW(MarketObservation(1.0, 0.1, 0.02, "a,b"), InvalidArgument);
    const MarketObservation o(2.0, 0.08, 0.02, "t0");
    EXPECT_DOUBLE_EQ(o.excess_return(), 0.08 - 0.02);
    EXPECT_DOUBLE_EQ(o.inverse_position(), 0.5);
    EXPECT_FALSE(MarketObservation(1.0, 0.1, 0.0, "").label().has_value());
}

TEST(Stage1Params, CheckedConstructionRequiresPositiveBeta3) {
    EXPECT_NO_THROW(Stage1Params::checked(2.0, 0.5, 0.04));
    EXPECT_THROW(Stage1Params::checked(2.0, 0.5, 0.0), InvalidArgument);
    EXPECT_THROW(Stage1Params::checked(2.0, std::nan(""), 0.04), InvalidArgument);
}

TEST(GaugeRule, PinVariantsNeedNonzeroStage1Estimate) {
    EXPECT_THROW(GaugeRule::pin_beta5(0.0), InvalidArgument);
    EXPECT_THROW(GaugeRule::pin_beta6(0.0), InvalidArgument);
    const auto g = GaugeRule::from_stage1(GaugeKind::PinBeta6, {2.0, 0.5, 0.04});
    EXPECT_EQ(g.kind, GaugeKind::PinBeta6);
    EXPECT_EQ(g.pin_value, 2.0);
    EXPECT_EQ(parse_gauge("pin-beta5"), GaugeKind::PinBeta5);
    EXPECT_THROW(parse_gauge("pinned"), InvalidArgument);
}

TEST(FitResult, DiagnosticsAreDeduplicated) {
    FitResult f;
    f.params = Stage1Params{1.0, 2.0, 3.0};
    f.add(Diagnostic::PoleProximity);
    f.add(Diagnostic::PoleProximity);
    EXPECT_EQ(f.diagnostics.size(), 1u);
    EXPECT_EQ(to_string(Diagnostic::IdentifiabilityB1EqB2), "IDENTIFIABILITY_B1_EQ_B2");
    EXPECT_EQ(f.param_vector(), (std::vector<double>{1.0, 2.0, 3.0}));
}
