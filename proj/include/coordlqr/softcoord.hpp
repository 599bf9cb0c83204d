#pragma once

// Soft coordination: the center-of-mass equality is replaced by the penalty
// lambda/(1-lambda) * ||ubar - Fbar xbar||^2 for lambda in [0, 1].

#include <vector>

#include "coordlqr/coordsynth.hpp"

namespace coordlqr {

struct SoftSpec {
    Mat Fbar;
    double lambda = 0.0;
};

struct SoftSolution {
    double lambda = 0.0;
    Mat X_lambda;
    Mat F_center;  // lambda Fbar - (1 - lambda) B'X_lambda
    Mat Y_lambda;  // dX_lambda / dlambda
    Mat Z_lambda;  // (1 - lambda) dY_lambda / dlambda - 2 Y_lambda
    Mat A_lambda;  // A + B F_center
};

/// Solves the soft-constraint Riccati equation and the sensitivity Lyapunov
/// equations for Y and Z. lambda = 1 is handled as the hard constraint.
SoftSolution solve_soft(const Plant& plant, const CostSpec& cost, const SoftSpec& soft,
                        const Tolerances& tol = {});

struct SoftCostReport {
    CostReport report;  // local costs plus the relaxed coordination cost
    double sigma = 0.0;  // ||ubar - Fbar xbar||^2
    Vec alphas;          // reduction of each agent's hard coordination cost
    Vec hard_excess;     // hard-constraint coordination cost per agent
};

SoftCostReport soft_cost_report(const Plant& plant, const CostSpec& cost, const Weights& weights,
                                const SoftSpec& soft, InitialStates x0s, const Tolerances& tol = {});

/// Same, reusing an existing solution and the hard-case matrices.
SoftCostReport soft_cost_report(const SoftSolution& sol, const Mat& X_alpha, const Mat& Xbar,
                                const Weights& weights, InitialStates x0s, const Tolerances& tol = {});

/// Hard constraint with the same optimal law: Fbar_eff = lambda Fbar - (1 - lambda) B'X_lambda.
HardSpec equivalence_as_hard(const Plant& plant, const CostSpec& cost, const SoftSpec& soft,
                             const Tolerances& tol = {});

struct TradeoffPoint {
    double lambda = 0.0;
    double sigma = 0.0;
    Vec per_agent_excess;
};

/// Evaluates the trade-off at every lambda of the grid (each in [0, 1)).
std::vector<TradeoffPoint> sweep_lambda(const Plant& plant, const CostSpec& cost,
                                        const Weights& weights, const Mat& Fbar,
                                        const std::vector<double>& grid, InitialStates x0s,
                                        const Tolerances& tol = {});

}  // namespace coordlqr
