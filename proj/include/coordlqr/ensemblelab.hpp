#pragma once

// Aggregate (nu*n dimensional) view of the ensemble: Kronecker-structured
// problem data, a brute-force constrained LQR used as an independent check
// of the factored synthesis, and exact-discretization simulation.

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "coordlqr/coordsynth.hpp"
#include "coordlqr/freqcoord.hpp"

namespace coordlqr {

struct AggregateProblem {
    std::size_t nu = 0;
    Mat A_agg;  // I (x) A
    Mat B_agg;  // I (x) B
    Mat Q_agg;  // I (x) Q
    Mat C_u;    // mu' (x) I_m
    Mat C_x;    // mu' (x) Fbar
    std::vector<std::string> warnings;
};

AggregateProblem build_aggregate(const Plant& plant, const CostSpec& cost, const Weights& weights,
                                 const Mat& Fbar, std::size_t nu);

struct TransformReport {
    double constraint_residual = 0.0;  // transformed constraint outside the first block
    double structure_residual = 0.0;   // change of the block-diagonal data
    double center_identity_residual = 0.0;  // first transformed state block vs xbar

    bool ok(double tol = 1e-10) const {
        return constraint_residual <= tol && structure_residual <= tol &&
               center_identity_residual <= tol;
    }
};

/// Applies x~ = (U (x) I) x, u~ = (U (x) I) u with U mu = e1 and measures
/// how well the constraint decouples. `probe` is an arbitrary aggregate state
/// for the xbar identity; a fixed vector is used when empty.
TransformReport transform_check(const AggregateProblem& agg, const Weights& weights,
                                const Vec& probe = Vec());

struct OracleResult {
    double J = 0.0;
    Mat gain;  // nu*m x nu*n
    Mat X;     // aggregate value matrix
};

/// Solves the constrained aggregate LQR directly: u is parameterized as
/// (mu mu') (x) Fbar x + N w with N spanning the null space of mu' (x) I,
/// and the reduced problem (with state-input cross terms) goes through the
/// general Riccati solver. Optional per-agent cost weights lambda_i scale
/// each agent's cost. Limited to nu*n <= kOracleMaxStates.
OracleResult oracle_constrained_cost(const Plant& plant, const CostSpec& cost, const Weights& weights,
                                     const Mat& Fbar, InitialStates x0s,
                                     const std::optional<Vec>& agent_cost_weights = std::nullopt,
                                     const Tolerances& tol = {});

inline constexpr Eigen::Index kOracleMaxStates = 128;

/// States of z' = Acl z at t = k*dt, k = 0..steps, by repeated application of expm(Acl dt).
std::vector<Vec> propagate_linear(const Mat& Acl, const Vec& z0, double dt, std::size_t steps);

// ---- simulation --------------------------------------------------------------

/// White disturbance w_i of the given intensity entering each agent as
/// x_i' = ... + G w_i. Increments are G * sqrt(intensity * dt) * xi with
/// xi standard normal from NormalStream.
struct NoiseSpec {
    double intensity = 0.0;
    std::uint64_t seed = 0;
    Mat input;  // n x d; identity when empty
};

/// Standard normal stream: mt19937_64 seeded with `seed`, 53-bit uniforms
/// u = (word >> 11) * 2^-53, Box-Muller pairs
/// (sqrt(-2 ln(1 - u1)) cos(2 pi u2), sqrt(-2 ln(1 - u1)) sin(2 pi u2)).
class NormalStream {
public:
    explicit NormalStream(std::uint64_t seed);
    double next();

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

using ReferenceSignal = std::function<Vec(double t)>;
using EnsembleController = std::variant<GainDecomposition, WeightedController>;

struct SimulationOptions {
    double T = 1.0;
    double dt = 1e-2;
    std::optional<NoiseSpec> noise;
    ReferenceSignal reference;  // r(t), held constant over each step
    bool require_stable = false;
};

struct Trajectory {
    std::size_t nu = 0;
    Eigen::Index n = 0;
    Eigen::Index m = 0;
    Eigen::Index p = 0;
    std::vector<double> times;
    std::vector<Vec> states;        // nu*n
    std::vector<Vec> inputs;        // nu*m
    std::vector<Vec> center_state;  // xbar
    std::vector<Vec> center_input;  // ubar
    std::vector<Vec> mismatch;      // ubar - F_target xbar - r
    std::vector<Vec> reference;     // r, empty without a reference
    std::vector<Vec> filter_state;  // x_phi, empty for static controllers
    Mat closed_loop;                // aggregate (x, x_phi) dynamics
    Mat input_map;                  // u = input_map * (x, x_phi) + (mu (x) I) r
    bool noisy = false;

    Vec agent_state(std::size_t k, std::size_t i) const {
        return states[k].segment(static_cast<Eigen::Index>(i) * n, n);
    }
    Vec agent_input(std::size_t k, std::size_t i) const {
        return inputs[k].segment(static_cast<Eigen::Index>(i) * m, m);
    }
};

Trajectory simulate(const Plant& plant, const EnsembleController& controller, InitialStates x0s,
                    const SimulationOptions& options, const Tolerances& tol = {});

/// T with exp(max Re(lambda) T) <= 1e-8, capped at 1e4.
double default_cost_horizon(const Mat& Acl);

struct EmpiricalCost {
    Vec per_agent;
    double total = 0.0;
    double tail_bound = 0.0;  // cost-to-go from the final state; NaN when not applicable
};

/// Trapezoidal quadrature of x_i'Q x_i + u_i'u_i for every agent.
EmpiricalCost empirical_cost(const Trajectory& traj, const CostSpec& cost, const Tolerances& tol = {});

}  // namespace coordlqr
