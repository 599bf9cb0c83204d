#include "coordlqr/softcoord.hpp"

#include <cmath>
#include <sstream>

namespace coordlqr {

using namespace numkit;

namespace {

void check_lambda(double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        std::ostringstream os;
        os << "lambda = " << lambda << " is outside [0, 1]";
        throw Error(ErrorCode::InvalidArgument, os.str());
    }
}

void require_order(const Mat& lower, const Mat& upper, const Tolerances& tol, const char* what) {
    const double gap = min_eig_sym(upper - lower);
    if (gap < -tol.psd_slack * (1.0 + upper.norm() + lower.norm())) {
        std::ostringstream os;
        os << what << " violated by " << gap;
        throw Error(ErrorCode::InternalInconsistency, os.str());
    }
}

}  // namespace

SoftSolution solve_soft(const Plant& plant, const CostSpec& cost, const SoftSpec& soft,
                        const Tolerances& tol) {
    check_lambda(soft.lambda);
    plant.validate(tol);
    cost.validate(plant, tol);
    const Eigen::Index n = plant.n();
    const Eigen::Index m = plant.m();
    require_shape(soft.Fbar, m, n, "Fbar");
    require_finite(soft.Fbar, "Fbar");
    if (!is_hurwitz(plant.A + plant.B * soft.Fbar, tol)) {
        throw Error(ErrorCode::NotHurwitz, "A + B*Fbar is not Hurwitz");
    }

    const double lambda = soft.lambda;
    const Mat& B = plant.B;
    const Mat& Fbar = soft.Fbar;
    SoftSolution sol;
    sol.lambda = lambda;
    if (lambda == 1.0) {
        sol.X_lambda = center_value(plant, cost, HardSpec{Fbar}, tol);
        sol.F_center = Fbar;
    } else {
        const double w = lambda / (1.0 - lambda);
        const Mat Q = cost.Q + w * Fbar.transpose() * Fbar;
        const Mat R = Mat::Identity(m, m) / (1.0 - lambda);
        const Mat S = -w * Fbar.transpose();
        sol.X_lambda = solve_care(plant.A, B, Q, R, S, tol);
        sol.F_center = lambda * Fbar - (1.0 - lambda) * B.transpose() * sol.X_lambda;
    }
    sol.A_lambda = plant.A + B * sol.F_center;

    // Differentiating the Riccati equation in lambda gives
    //   A_l'Y + Y A_l + K'K = 0,               K = Fbar + B'X
    //   A_l'Z + Z A_l - 2 G'G = 0,             G = K - (1 - lambda) B'Y
    const Mat K = Fbar + B.transpose() * sol.X_lambda;
    sol.Y_lambda = solve_lyapunov(sol.A_lambda, K.transpose() * K, tol);
    const Mat G = K - (1.0 - lambda) * B.transpose() * sol.Y_lambda;
    sol.Z_lambda = solve_lyapunov(sol.A_lambda, -2.0 * G.transpose() * G, tol);

    if (min_eig_sym(sol.Y_lambda) < -tol.psd_slack * (1.0 + sol.Y_lambda.norm())) {
        throw Error(ErrorCode::InternalInconsistency, "Y_lambda is not positive semidefinite");
    }
    return sol;
}

SoftCostReport soft_cost_report(const SoftSolution& sol, const Mat& X_alpha, const Mat& Xbar,
                                const Weights& weights, InitialStates x0s, const Tolerances& tol) {
    const double lambda = sol.lambda;
    const double lw = lambda * (1.0 - lambda);
    const Mat X_excess = sol.X_lambda - lw * sol.Y_lambda - X_alpha;

    SoftCostReport out;
    out.report = cost_report(X_alpha, X_excess, x0s, weights, tol);
    const Vec xbar0 = center_of_mass(x0s, weights);
    out.sigma = (1.0 - lambda) * (1.0 - lambda) * xbar0.dot(sol.Y_lambda * xbar0);

    const double hard_center = xbar0.dot((Xbar - X_alpha) * xbar0);
    const double alpha_center = xbar0.dot((Xbar - sol.X_lambda + lw * sol.Y_lambda) * xbar0);
    const Vec mu2 = weights.mu().cwiseAbs2();
    out.alphas = mu2 * alpha_center;
    out.hard_excess = mu2 * hard_center;

    const double slack = tol.psd_slack * (1.0 + Xbar.norm()) * (1.0 + xbar0.squaredNorm());
    if (alpha_center < -slack || out.sigma < -slack) {
        std::ostringstream os;
        os << "negative trade-off quantity (alpha " << alpha_center << ", sigma " << out.sigma << ")";
        throw Error(ErrorCode::InternalInconsistency, os.str());
    }
    return out;
}

SoftCostReport soft_cost_report(const Plant& plant, const CostSpec& cost, const Weights& weights,
                                const SoftSpec& soft, InitialStates x0s, const Tolerances& tol) {
    const SoftSolution sol = solve_soft(plant, cost, soft, tol);
    const LocalSolution local = local_gain(plant, cost, tol);
    const Mat Xbar = center_value(plant, cost, HardSpec{soft.Fbar}, tol);
    require_order(local.X_alpha, sol.X_lambda, tol, "X_alpha <= X_lambda");
    require_order(sol.X_lambda, Xbar, tol, "X_lambda <= Xbar");
    return soft_cost_report(sol, local.X_alpha, Xbar, weights, x0s, tol);
}

HardSpec equivalence_as_hard(const Plant& plant, const CostSpec& cost, const SoftSpec& soft,
                             const Tolerances& tol) {
    const SoftSolution sol = solve_soft(plant, cost, soft, tol);
    if (!is_hurwitz(sol.A_lambda, tol)) {
        throw Error(ErrorCode::InternalInconsistency, "soft closed loop is not Hurwitz");
    }
    return HardSpec{sol.F_center};
}

std::vector<TradeoffPoint> sweep_lambda(const Plant& plant, const CostSpec& cost,
                                        const Weights& weights, const Mat& Fbar,
                                        const std::vector<double>& grid, InitialStates x0s,
                                        const Tolerances& tol) {
    const LocalSolution local = local_gain(plant, cost, tol);
    const Mat Xbar = center_value(plant, cost, HardSpec{Fbar}, tol);
    std::vector<TradeoffPoint> points;
    points.reserve(grid.size());
    for (const double lambda : grid) {
        try {
            if (!(lambda >= 0.0 && lambda < 1.0)) {
                throw Error(ErrorCode::InvalidArgument, "sweep grid must lie in [0, 1)");
            }
            const SoftSolution sol = solve_soft(plant, cost, SoftSpec{Fbar, lambda}, tol);
            const SoftCostReport rep = soft_cost_report(sol, local.X_alpha, Xbar, weights, x0s, tol);
            points.push_back({lambda, rep.sigma, rep.report.J_excess});
        } catch (const Error& e) {
            std::ostringstream os;
            os << "lambda = " << lambda << ": " << e.what();
            throw Error(e.code(), os.str());
        }
    }
    return points;
}

}  // namespace coordlqr
