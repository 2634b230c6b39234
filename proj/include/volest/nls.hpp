#pragma once

// Regression model functions with analytic Jacobians, and a damped
// Gauss-Newton (Levenberg-Marquardt) solver over generic residual problems.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "volest/model_core.hpp"

namespace volest {

/// The evaluation point sits on (or numerically at) a pole of the model.
class PoleError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

namespace detail {

inline constexpr double kPoleGuard = 1e-12;

inline void guard_pole(double denom, double scale_a, double scale_b, const char* what) {
    const double scale = std::max({std::abs(scale_a), std::abs(scale_b), 1.0});
    if (!(std::abs(denom) >= kPoleGuard * scale)) throw PoleError(what);
}

inline void guard_stage1(double e, double beta3) {
    if (!(beta3 > 0.0)) throw InvalidArgument("stage-1 model requires beta3 > 0");
    guard_pole(beta3 + e, beta3, e, "stage-1 model pole: beta3 + e ~ 0");
}

inline void guard_stage2(double e, const Stage2Params& b, double beta3_hat) {
    if (!(beta3_hat > 0.0)) throw InvalidArgument("stage-2 model requires beta3_hat > 0");
    guard_pole(beta3_hat + e, beta3_hat, e, "stage-2 model pole: beta3_hat + e ~ 0");
    const double a = b.beta5 * beta3_hat;
    const double c = b.beta6 * e;
    guard_pole(a + c, a, c, "stage-2 model pole: beta5 beta3_hat + beta6 e ~ 0");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Stage 1: pi* = beta2 / (1 + e/beta3) + beta1 e / (beta3 + e)
//              = (beta2 beta3 + beta1 e) / (beta3 + e)
// ---------------------------------------------------------------------------

inline double stage1_model(double e, const Stage1Params& b) {
    detail::guard_stage1(e, b.beta3);
    return (b.beta2 * b.beta3 + b.beta1 * e) / (b.beta3 + e);
}

/// Partial derivatives with respect to (beta1, beta2, beta3).
inline std::array<double, 3> stage1_jacobian(double e, const Stage1Params& b) {
    detail::guard_stage1(e, b.beta3);
    const double n = b.beta3 + e;
    return {e / n, b.beta3 / n, (b.beta2 - b.beta1) * e / (n * n)};
}

// ---------------------------------------------------------------------------
// Stage 2: 1/pi* = beta4 / (beta5 / (1 + e/b3) + beta6 e / (b3 + e))
//                = beta4 (b3 + e) / (beta5 b3 + beta6 e)
// with b3 the stage-1 volatility estimate held fixed.
// ---------------------------------------------------------------------------

inline double stage2_model(double e, const Stage2Params& b, double beta3_hat) {
    detail::guard_stage2(e, b, beta3_hat);
    return b.beta4 * (beta3_hat + e) / (b.beta5 * beta3_hat + b.beta6 * e);
}

/// Partial derivatives with respect to (beta4, beta5, beta6).
inline std::array<double, 3> stage2_jacobian(double e, const Stage2Params& b, double beta3_hat) {
    detail::guard_stage2(e, b, beta3_hat);
    const double n = beta3_hat + e;
    const double d = b.beta5 * beta3_hat + b.beta6 * e;
    return {n / d, -b.beta4 * n * beta3_hat / (d * d), -b.beta4 * n * e / (d * d)};
}

// ---------------------------------------------------------------------------
// Solver
// ---------------------------------------------------------------------------

/// Residuals and their Jacobian (rows = observations, cols = parameters).
/// Evaluators must be pure and safe for concurrent read-only use.
struct ResidualProblem {
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> residuals;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> jacobian;
    Eigen::Index n_params = 0;
    Eigen::Index n_observations = 0;
};

struct SolverOptions {
    int max_iterations = 200;
    double g_tol = 1e-10;          // on max |J^T r|
    double x_tol = 1e-12;          // on relative parameter change
    double lambda0 = 1e-3;
    double lambda_factor = 10.0;
    double lambda_max = 1e12;

    void validate() const {
        if (max_iterations < 1) throw InvalidArgument("SolverOptions: max_iterations must be >= 1");
        if (!(g_tol > 0.0) || !(x_tol > 0.0) || !(lambda0 > 0.0) || !(lambda_max > 0.0))
            throw InvalidArgument("SolverOptions: tolerances and damping must be > 0");
        if (!(lambda_factor > 1.0))
            throw InvalidArgument("SolverOptions: lambda_factor must be > 1");
    }
};

inline constexpr double kStallTolerance = 1e-14;

struct SolverResult {
    Eigen::VectorXd params;
    double residual_norm = 0.0;  // sum of squares
    int iterations = 0;          // linear solves performed
    Termination termination = Termination::MaxIterations;
    std::string message;
    std::vector<TraceEntry> trace;  // accepted steps

    bool converged() const { return is_converged(termination); }
};

/// Levenberg-Marquardt with Marquardt (diag J^T J) damping.
///
/// Solves (J^T J + lambda D) delta = -J^T r. A trial point is accepted only
/// if its sum of squares is strictly smaller; otherwise lambda grows by
/// lambda_factor and the step is retried. D is the running maximum of
/// diag(J^T J), floored at 1e-6 of its largest entry so that a momentarily
/// flat direction does not make the damped system singular.
inline SolverResult lm_fit(const ResidualProblem& problem, const Eigen::VectorXd& init,
                           const SolverOptions& opts = {}) {
    opts.validate();
    if (init.size() != problem.n_params)
        throw InvalidArgument("lm_fit: initial vector has " + std::to_string(init.size()) +
                              " entries, problem expects " + std::to_string(problem.n_params));

    SolverResult out;
    Eigen::VectorXd p = init;
    Eigen::VectorXd r = problem.residuals(p);
    if (r.size() != problem.n_observations)
        throw InvalidArgument("lm_fit: residual vector has the wrong length");
    if (!r.allFinite()) throw InvalidArgument("lm_fit: non-finite residuals at the initial point");
    double cost = r.squaredNorm();

    auto finish = [&](Termination t, std::string msg) {
        out.params = p;
        out.residual_norm = cost;
        out.termination = t;
        out.message = std::move(msg);
        return out;
    };

    Eigen::MatrixXd J = problem.jacobian(p);
    if (J.rows() != problem.n_observations || J.cols() != problem.n_params)
        throw InvalidArgument("lm_fit: Jacobian has the wrong shape");
    if (!J.allFinite()) return finish(Termination::NonFiniteEvaluation, "non-finite Jacobian at the initial point");

    double lambda = opts.lambda0;
    Eigen::VectorXd scale = Eigen::VectorXd::Zero(problem.n_params);
    bool last_trial_nonfinite = false;
    bool fresh = true;  // no rejected trial since the last accepted point

    while (true) {
        const Eigen::VectorXd g = J.transpose() * r;
        if (g.cwiseAbs().maxCoeff() < opts.g_tol)
            return finish(Termination::GradientTolerance, "gradient below tolerance");
        if (out.iterations >= opts.max_iterations)
            return finish(Termination::MaxIterations,
                          "max iterations (" + std::to_string(opts.max_iterations) + ") reached");

        const Eigen::MatrixXd H = J.transpose() * J;
        scale = scale.cwiseMax(H.diagonal());
        const double floor = std::max(1e-6 * scale.maxCoeff(), std::numeric_limits<double>::min());
        const Eigen::VectorXd damping = scale.cwiseMax(floor);

        Eigen::MatrixXd A = H;
        A.diagonal() += lambda * damping;
        ++out.iterations;
        Eigen::LDLT<Eigen::MatrixXd> ldlt;
        Eigen::VectorXd delta;
        if (A.allFinite()) {
            ldlt.compute(A);
            if (ldlt.info() == Eigen::Success) delta = ldlt.solve(-g);
        }
        if (!A.allFinite() || ldlt.info() != Eigen::Success || !delta.allFinite() || !ldlt.isPositive())
            return finish(Termination::SingularNormalEquations,
                          "singular normal equations at iteration " + std::to_string(out.iterations));

        // Only an undamped-by-rejection step measures closeness to the
        // minimum; a step shrunk by a growing lambda says nothing.
        const bool small_step = delta.norm() <= opts.x_tol * (p.norm() + opts.x_tol);
        if (fresh && small_step) return finish(Termination::StepTolerance, "relative step below tolerance");
        // Predicted decrease of the Gauss-Newton model. When even the first
        // step from a new point promises less than rounding in the cost, the
        // cost cannot certify progress and the point is a minimum to working
        // precision.
        const double predicted = -delta.dot(g) - 0.5 * delta.dot(H * delta);
        if (fresh && predicted <= kStallTolerance * cost)
            return finish(Termination::StepTolerance, "no decrease representable at working precision");

        const Eigen::VectorXd p_trial = p + delta;
        const Eigen::VectorXd r_trial = problem.residuals(p_trial);
        last_trial_nonfinite = !r_trial.allFinite();
        const double cost_trial = last_trial_nonfinite ? std::numeric_limits<double>::infinity()
                                                       : r_trial.squaredNorm();
        if (cost_trial < cost) {
            Eigen::MatrixXd J_trial = problem.jacobian(p_trial);
            if (!J_trial.allFinite()) {
                last_trial_nonfinite = true;
            } else {
                p = p_trial;
                r = r_trial;
                cost = cost_trial;
                J = std::move(J_trial);
                out.trace.push_back({std::vector<double>(p.data(), p.data() + p.size()), cost});
                lambda = std::max(lambda / opts.lambda_factor, std::numeric_limits<double>::min());
                fresh = true;
                if (small_step) return finish(Termination::StepTolerance, "relative step below tolerance");
                continue;
            }
        }
        fresh = false;
        lambda *= opts.lambda_factor;
        if (lambda > opts.lambda_max) {
            if (last_trial_nonfinite)
                return finish(Termination::NonFiniteEvaluation,
                              "non-finite evaluation at trial point (iteration " +
                                  std::to_string(out.iterations) + ")");
            return finish(Termination::DampingExhausted, "damping exhausted");
        }
    }
}

/// Ratio of extreme singular values of J; +inf when J is rank deficient.
inline double condition_number(const Eigen::MatrixXd& J) {
    if (J.size() == 0) return std::numeric_limits<double>::infinity();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(J);
    const auto& s = svd.singularValues();
    const double smax = s(0);
    const double smin = s(s.size() - 1);
    const double eps = std::numeric_limits<double>::epsilon() * double(std::max(J.rows(), J.cols()));
    if (!(smin > smax * eps)) return std::numeric_limits<double>::infinity();
    return smax / smin;
}

}  // namespace volest
