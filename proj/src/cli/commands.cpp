#include <cmath>
#include <sstream>

#include "coordlqr/coordcli.hpp"

namespace coordlqr::cli {

using namespace numkit;

namespace {

json mat_json(const Mat& M) {
    json out = json::array();
    for (Eigen::Index r = 0; r < M.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < M.cols(); ++c) {
            row.push_back(M(r, c));
        }
        out.push_back(std::move(row));
    }
    return out;
}

json vec_json(const Vec& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out.push_back(v(i));
    }
    return out;
}

json eig_json(const Mat& A) {
    json out = json::array();
    for (const auto& ev : eigenvalues(A)) {
        out.push_back({ev.real(), ev.imag()});
    }
    return out;
}

json state_space_json(const StateSpace& ss) {
    return {{"A", mat_json(ss.A)}, {"B", mat_json(ss.B)}, {"C", mat_json(ss.C)}, {"D", mat_json(ss.D)}};
}

// Second moments of the initial condition. Costs are traces against these:
// explicit states give x x', the disturbance impulse gives the expectation
// over unit-variance v_i, i.e. Bw Bw' for every agent and for xbar.
struct Moments {
    std::vector<Mat> agent;
    Mat center;
};

Moments moments(const Scenario& sc, const Weights& w) {
    Moments out;
    if (sc.initial.kind == InitialKind::BwImpulse) {
        const Mat S = sc.initial.Bw * sc.initial.Bw.transpose();
        out.agent.assign(w.size(), S);
        out.center = S;
        return out;
    }
    for (const Vec& x : sc.initial.x0) {
        out.agent.push_back(x * x.transpose());
    }
    const Vec xbar = center_of_mass(sc.initial.x0, w);
    out.center = xbar * xbar.transpose();
    return out;
}

double trace_form(const Mat& M, const Mat& S) { return M.cwiseProduct(S).sum(); }

json cost_json(const Mat& X_alpha, const Mat& X_excess, const Moments& mom, const Weights& w) {
    const auto nu = static_cast<Eigen::Index>(w.size());
    Vec local(nu);
    Vec excess(nu);
    const double center_excess = trace_form(X_excess, mom.center);
    for (Eigen::Index i = 0; i < nu; ++i) {
        local(i) = trace_form(X_alpha, mom.agent[static_cast<std::size_t>(i)]);
        excess(i) = w.mu()(i) * w.mu()(i) * center_excess;
    }
    return {
        {"J_total", local.sum() + excess.sum()},
        {"J_local", vec_json(local)},
        {"J_excess", vec_json(excess)},
        {"J_consensus", local.sum() - trace_form(X_alpha, mom.center)},
    };
}

std::string mode_name(Mode m) {
    switch (m) {
        case Mode::Hard: return "hard";
        case Mode::Soft: return "soft";
        case Mode::Weighted: return "weighted";
        case Mode::Partial: return "partial";
    }
    return "";
}

void attach_validation(json& out, const Scenario& sc) {
    if (!sc.wind) {
        return;
    }
    json unstable = json::array();
    for (const auto& ev : sc.wind->unstable_eigenvalues) {
        unstable.push_back({ev.real(), ev.imag()});
    }
    out["validation"] = {
        {"variant", sc.wind->variant},
        {"A_hurwitz", sc.wind->hurwitz},
        {"A_spectral_abscissa", sc.wind->spectral_abscissa},
        {"A_unstable_eigenvalues", unstable},
        {"Q_pbh_imaginary_axis_ok", sc.wind->pbh_q_ok},
    };
}

void require_static_hard(const Scenario& sc, const char* cmd) {
    if (sc.mode != Mode::Hard && sc.mode != Mode::Partial) {
        throw ConfigError(ErrorCode::InvalidArgument, std::string(cmd) + " needs coordination.mode hard or partial");
    }
}

}  // namespace

json cmd_synth(const Scenario& sc, const Tolerances& tol) {
    const Weights w = sc.weights();
    const Moments mom = moments(sc, w);
    const LocalSolution local = local_gain(sc.plant, sc.cost, tol);
    const Mat& A = sc.plant.A;
    const Mat& B = sc.plant.B;
    const Mat R = Mat::Identity(B.cols(), B.cols());

    json out;
    out["mode"] = mode_name(sc.mode);
    out["scenario"] = sc.name;
    out["nu"] = w.size();
    out["mu"] = vec_json(w.mu());
    out["F_alpha"] = mat_json(local.F_alpha);
    out["X_alpha"] = mat_json(local.X_alpha);
    json diag;
    diag["local_care_residual"] = care_residual(local.X_alpha, A, B, sc.cost.Q, R);
    diag["local_loop_eigenvalues"] = eig_json(A + B * local.F_alpha);

    switch (sc.mode) {
        case Mode::Hard:
        case Mode::Partial: {
            const Mat Fbar = sc.effective_Fbar(tol);
            const HardSolution hs = synthesize_hard(sc.plant, sc.cost, w, HardSpec{Fbar}, tol);
            if (sc.mode == Mode::Partial) {
                const PartialConstraint pc = partial_constraint(sc.plant, sc.cost, sc.E, sc.Fbar1, tol);
                out["Fbar_equivalent"] = mat_json(pc.Fbar);
                out["X2"] = mat_json(pc.X2);
            }
            out["F_center"] = mat_json(hs.gains.F_center);
            out["Xbar"] = mat_json(hs.Xbar);
            out["cost"] = cost_json(hs.X_alpha, hs.Xbar - hs.X_alpha, mom, w);
            const Mat Acl = A + B * Fbar;
            diag["center_loop_eigenvalues"] = eig_json(Acl);
            diag["center_lyapunov_residual"] =
                lyapunov_residual(hs.Xbar, Acl, sc.cost.Q + Fbar.transpose() * Fbar);
            diag["coordination_rank"] = numerical_rank(Fbar - local.F_alpha, tol);
            out["controller"] = {{"F_alpha", mat_json(hs.gains.F_alpha)},
                                 {"F_center", mat_json(hs.gains.F_center)}};
            break;
        }
        case Mode::Soft: {
            const SoftSolution s = solve_soft(sc.plant, sc.cost, SoftSpec{sc.Fbar, sc.lambda}, tol);
            const Mat Xbar = center_value(sc.plant, sc.cost, HardSpec{sc.Fbar}, tol);
            const double lw = sc.lambda * (1.0 - sc.lambda);
            out["lambda"] = sc.lambda;
            out["F_center"] = mat_json(s.F_center);
            out["X_lambda"] = mat_json(s.X_lambda);
            out["Y_lambda"] = mat_json(s.Y_lambda);
            out["Z_lambda"] = mat_json(s.Z_lambda);
            out["Xbar"] = mat_json(Xbar);
            json cost = cost_json(local.X_alpha, s.X_lambda - lw * s.Y_lambda - local.X_alpha, mom, w);
            const double one_minus = 1.0 - sc.lambda;
            cost["sigma"] = one_minus * one_minus * trace_form(s.Y_lambda, mom.center);
            cost["alphas"] = vec_json(w.mu().cwiseAbs2() *
                                      trace_form(Xbar - s.X_lambda + lw * s.Y_lambda, mom.center));
            out["cost"] = std::move(cost);
            diag["center_loop_eigenvalues"] = eig_json(s.A_lambda);
            out["controller"] = {{"F_alpha", mat_json(local.F_alpha)}, {"F_center", mat_json(s.F_center)}};
            break;
        }
        case Mode::Weighted: {
            const AugmentedSynthesis synth = synthesize_weighted(sc.plant, sc.cost, w, sc.Fbar, *sc.weight, tol);
            const WeightedController ctrl = weighted_controller(synth, local.F_alpha, w);
            const WeightedEnergyMatrices mats = weighted_energy_matrices(synth, local.F_alpha, tol);
            out["X_sigma"] = mat_json(synth.X_sigma);
            out["F_sigma1"] = mat_json(synth.F_sigma1);
            out["F_sigma2"] = mat_json(synth.F_sigma2);
            out["omega_sigma"] = synth.omega_sigma ? json(*synth.omega_sigma) : json(nullptr);
            out["M_phi"] = state_space_json(synth.M_phi);
            json cost = cost_json(local.X_alpha, mats.X_v22, mom, w);
            cost["mismatch_energy"] = trace_form(mats.X_phi22, mom.center);
            out["cost"] = std::move(cost);
            diag["augmented_loop_eigenvalues"] = eig_json(synth.closed_loop());
            out["controller"] = {{"F_alpha", mat_json(ctrl.F_alpha)},
                                 {"F_center", mat_json(ctrl.Fbar)},
                                 {"filter", state_space_json(ctrl.filter)}};
            break;
        }
    }
    out["diagnostics"] = std::move(diag);
    out["initial"] = sc.initial.kind == InitialKind::BwImpulse ? "bw-impulse expectation" : "explicit";
    attach_validation(out, sc);
    return out;
}

std::string cmd_cost_vs_nu(const Scenario& sc, std::size_t nu_lo, std::size_t nu_hi, const Tolerances& tol) {
    require_static_hard(sc, "cost-vs-nu");
    if (sc.initial.kind != InitialKind::BwImpulse) {
        throw ConfigError(ErrorCode::InvalidArgument, "cost-vs-nu needs initial.x0 = \"bw-impulse\"");
    }
    const Mat Fbar = sc.effective_Fbar(tol);
    const LocalSolution local = local_gain(sc.plant, sc.cost, tol);
    const Mat Xbar = center_value(sc.plant, sc.cost, HardSpec{Fbar}, tol);
    const Mat& Bw = sc.initial.Bw;
    const double full = (Bw.transpose() * (Xbar - local.X_alpha) * Bw).trace();

    CsvWriter csv({"nu", "per_agent_excess", "nu_times_excess"});
    for (std::size_t nu = nu_lo; nu <= nu_hi; ++nu) {
        const Weights w = Weights::uniform(nu);
        const double excess = w[0] * w[0] * full;
        csv.row({static_cast<double>(nu), excess, static_cast<double>(nu) * excess});
    }
    return csv.str();
}

std::string cmd_sweep(const Scenario& sc, const std::vector<double>& grid, const std::string& family,
                      const Tolerances& tol) {
    if (sc.mode != Mode::Soft && sc.mode != Mode::Weighted) {
        throw ConfigError(ErrorCode::InvalidArgument, "sweep needs coordination.mode soft or weighted");
    }
    const Eigen::Index m = sc.plant.m();
    WeightFamily fam;
    const bool integrator = family == "integrator";
    if (family == "static") {
        fam = static_family(m);
    } else if (integrator) {
        fam = integrator_family(m);
    } else {
        throw ConfigError(ErrorCode::InvalidArgument, "--weight-family must be static or integrator");
    }
    for (const double lambda : grid) {
        if (!(lambda >= 0.0 && lambda < 1.0)) {
            throw ConfigError(ErrorCode::InvalidArgument, "--lambda-grid values must lie in [0, 1)");
        }
    }
    const Weights w = sc.weights();
    const Moments mom = moments(sc, w);
    const LocalSolution local = local_gain(sc.plant, sc.cost, tol);
    const double mean_mu2 = 1.0 / static_cast<double>(w.size());

    std::vector<std::string> header{"lambda", "mismatch_energy", "per_agent_excess"};
    if (integrator) {
        header.push_back("omega_sigma");
    }
    CsvWriter csv(header);
    for (const double lambda : grid) {
        try {
            const AugmentedSynthesis synth = synthesize_weighted(sc.plant, sc.cost, w, sc.Fbar, fam(lambda), tol);
            const WeightedEnergyMatrices mats = weighted_energy_matrices(synth, local.F_alpha, tol);
            std::vector<double> row{lambda, trace_form(mats.X_phi22, mom.center),
                                    mean_mu2 * trace_form(mats.X_v22, mom.center)};
            if (integrator) {
                // The zero weight at lambda = 0 leaves the mismatch unfiltered: cutoff 0.
                row.push_back(synth.omega_sigma.value_or(0.0));
            }
            csv.row(row);
        } catch (const ConfigError&) {
            throw;
        } catch (const Error& e) {
            std::ostringstream os;
            os << "lambda = " << lambda << ": " << e.what();
            throw Error(e.code(), os.str());
        }
    }
    return csv.str();
}

namespace {

EnsembleController build_controller(const Scenario& sc, const Weights& w, Mat& F_target,
                                     const Tolerances& tol) {
    if (sc.controller) {
        F_target = sc.controller->F_center;
        if (sc.controller->filter) {
            return WeightedController{sc.controller->F_alpha, sc.controller->F_center, w, *sc.controller->filter};
        }
        return GainDecomposition{sc.controller->F_alpha, sc.controller->F_center, w};
    }
    const LocalSolution local = local_gain(sc.plant, sc.cost, tol);
    switch (sc.mode) {
        case Mode::Hard:
        case Mode::Partial: {
            const HardSolution hs = synthesize_hard(sc.plant, sc.cost, w, HardSpec{sc.effective_Fbar(tol)}, tol);
            F_target = hs.gains.F_center;
            return hs.gains;
        }
        case Mode::Soft: {
            const SoftSolution s = solve_soft(sc.plant, sc.cost, SoftSpec{sc.Fbar, sc.lambda}, tol);
            F_target = s.F_center;
            return GainDecomposition{local.F_alpha, s.F_center, w};
        }
        case Mode::Weighted: {
            const AugmentedSynthesis synth = synthesize_weighted(sc.plant, sc.cost, w, sc.Fbar, *sc.weight, tol);
            F_target = sc.Fbar;
            return weighted_controller(synth, local.F_alpha, w);
        }
    }
    throw Error(ErrorCode::InternalInconsistency, "unhandled mode");
}

}  // namespace

std::string cmd_simulate(const Scenario& sc, const Tolerances& tol) {
    const Weights w = sc.weights();
    const Eigen::Index n = sc.plant.n();
    const Eigen::Index m = sc.plant.m();
    Mat F_target;
    const EnsembleController ctrl = build_controller(sc, w, F_target, tol);

    std::vector<Vec> x0s = sc.initial.x0;
    if (sc.initial.kind == InitialKind::BwImpulse) {
        // Unit impulse in every disturbance channel of every agent.
        const Vec x = sc.initial.Bw.rowwise().sum();
        x0s.assign(w.size(), x);
    }

    SimulationOptions opts;
    opts.T = sc.sim.T;
    opts.dt = sc.sim.dt;
    if (sc.sim.noise_intensity > 0.0) {
        NoiseSpec noise;
        noise.intensity = sc.sim.noise_intensity;
        noise.seed = sc.sim.seed;
        if (sc.initial.kind == InitialKind::BwImpulse) {
            noise.input = sc.initial.Bw;
        }
        opts.noise = noise;
    }
    Mat ff;
    if (sc.reference) {
        if (std::holds_alternative<WeightedController>(ctrl)) {
            throw ConfigError(ErrorCode::InvalidArgument, "references are supported for static controllers only");
        }
        ff = dc_feedforward_gain(sc.plant, HardSpec{F_target}, w, tol);
        const ReferenceSpec ref = *sc.reference;
        opts.reference = [ref, ff](double t) { return Vec(ff * ref.x_ref(t)); };
    }
    const Trajectory traj = simulate(sc.plant, ctrl, x0s, opts, tol);

    std::vector<std::string> header{"t"};
    for (std::size_t i = 1; i <= w.size(); ++i) {
        for (Eigen::Index j = 1; j <= n; ++j) {
            header.push_back("x" + std::to_string(i) + "_" + std::to_string(j));
        }
    }
    for (std::size_t i = 1; i <= w.size(); ++i) {
        for (Eigen::Index j = 1; j <= m; ++j) {
            header.push_back("u" + std::to_string(i) + "_" + std::to_string(j));
        }
    }
    for (Eigen::Index j = 1; j <= n; ++j) header.push_back("xbar_" + std::to_string(j));
    for (Eigen::Index j = 1; j <= m; ++j) header.push_back("ubar_" + std::to_string(j));
    for (Eigen::Index j = 1; j <= m; ++j) header.push_back("mismatch_" + std::to_string(j));
    if (sc.reference) {
        for (Eigen::Index j = 1; j <= n; ++j) header.push_back("xref_" + std::to_string(j));
        for (Eigen::Index j = 1; j <= m; ++j) header.push_back("r_" + std::to_string(j));
    }

    CsvWriter csv(header);
    std::vector<double> row;
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        row.clear();
        row.push_back(traj.times[k]);
        auto append = [&row](const Vec& v) { row.insert(row.end(), v.data(), v.data() + v.size()); };
        append(traj.states[k]);
        append(traj.inputs[k]);
        append(traj.center_state[k]);
        append(traj.center_input[k]);
        append(traj.mismatch[k]);
        if (sc.reference) {
            append(sc.reference->x_ref(traj.times[k]));
            append(traj.reference[k]);
        }
        csv.row(row);
    }
    return csv.str();
}

json cmd_oracle(const Scenario& sc, const Tolerances& tol) {
    require_static_hard(sc, "oracle");
    if (sc.initial.kind == InitialKind::BwImpulse) {
        throw ConfigError(ErrorCode::InvalidArgument, "oracle needs explicit or random initial states");
    }
    const Weights w = sc.weights();
    const auto nu = static_cast<Eigen::Index>(w.size());
    if (nu * sc.plant.n() > kOracleMaxStates) {
        std::ostringstream os;
        os << "oracle is limited to nu*n <= " << kOracleMaxStates;
        throw ConfigError(ErrorCode::TooLarge, os.str());
    }
    const Mat Fbar = sc.effective_Fbar(tol);
    const HardSolution hs = synthesize_hard(sc.plant, sc.cost, w, HardSpec{Fbar}, tol);
    const CostReport rep = optimal_cost(hs.X_alpha, hs.Xbar, sc.initial.x0, w, tol);
    const OracleResult orc = oracle_constrained_cost(sc.plant, sc.cost, w, Fbar, sc.initial.x0, std::nullopt, tol);
    const double gap = std::abs(rep.J_total - orc.J) / std::max(std::abs(orc.J), 1e-300);
    const double gain_gap = (orc.gain - hs.gains.materialize()).cwiseAbs().maxCoeff();

    // Shrinking F_alpha by 1% keeps ubar = Fbar xbar, so the perturbed law is
    // admissible and its cost bounds the constrained optimum from above.
    const GainDecomposition perturbed{0.99 * hs.gains.F_alpha, hs.gains.F_center, w};
    const Mat K = perturbed.materialize();
    const Mat I = Mat::Identity(nu, nu);
    const Mat Acl = kron(I, sc.plant.A) + kron(I, sc.plant.B) * K;
    json pert;
    pert["description"] = "F_alpha scaled by 0.99, F_center kept at Fbar";
    if (is_hurwitz(Acl, tol)) {
        const Mat P = solve_lyapunov(Acl, symmetrize(kron(I, sc.cost.Q) + K.transpose() * K), tol);
        Vec x0(nu * sc.plant.n());
        for (Eigen::Index i = 0; i < nu; ++i) {
            x0.segment(i * sc.plant.n(), sc.plant.n()) = sc.initial.x0[static_cast<std::size_t>(i)];
        }
        const double Jp = x0.dot(P * x0);
        pert["cost"] = Jp;
        pert["excess_over_oracle"] = Jp - orc.J;
        pert["oracle_strictly_lower"] = orc.J < Jp;
    } else {
        pert["cost"] = nullptr;
        pert["note"] = "perturbed loop is not Hurwitz; its cost is infinite";
        pert["oracle_strictly_lower"] = true;
    }

    json out;
    out["factored_cost"] = rep.J_total;
    out["oracle_cost"] = orc.J;
    out["relative_gap"] = gap;
    out["gain_max_abs_difference"] = gain_gap;
    out["tolerance"] = 1e-6;
    out["pass"] = gap <= 1e-6;
    out["perturbed"] = std::move(pert);
    attach_validation(out, sc);
    return out;
}

}  // namespace coordlqr::cli
