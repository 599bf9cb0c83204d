// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "coordlqr/coordcli.hpp"
#include "support/random_instance.hpp"

using namespace coordlqr;
using namespace coordlqr::numkit;
using coordlqr::cli::json;
using testing_support::InstanceGenerator;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << "[failed: " << what << "] ";
        }
    }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

double min_eig(const Mat& M) { return min_eig_sym(symmetrize(M)); }

double max_abs(const Mat& M) { return M.size() == 0 ? 0.0 : M.cwiseAbs().maxCoeff(); }

struct Csv {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::size_t column(const std::string& name) const {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw std::runtime_error("missing CSV column " + name);
        return static_cast<std::size_t>(it - header.begin());
    }
    std::vector<double> values(const std::string& name) const {
        const std::size_t c = column(name);
        std::vector<double> out;
        for (const auto& r : rows) out.push_back(r[c]);
        return out;
    }
};

Csv parse_csv(const std::string& text) {
    Csv csv;
    std::istringstream in(text);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (first) {
            csv.header = cells;
            first = false;
        } else {
            std::vector<double> row;
            for (const auto& c : cells) row.push_back(std::stod(c));
            csv.rows.push_back(std::move(row));
        }
    }
    return csv;
}

Vec stack(const std::vector<Vec>& xs) {
    Eigen::Index total = 0;
    for (const Vec& x : xs) total += x.size();
    Vec out(total);
    Eigen::Index at = 0;
    for (const Vec& x : xs) {
        out.segment(at, x.size()) = x;
        at += x.size();
    }
    return out;
}

// Time step resolving the fastest closed-loop mode over a horizon.
SimulationOptions quadrature_options(const Mat& Acl) {
    const double T = default_cost_horizon(Acl);
    double fastest = 0.0;
    for (const auto& ev : eigenvalues(Acl)) fastest = std::max(fastest, std::abs(ev));
    const double dt = std::min(T / 20000.0, 0.02 / std::max(fastest, 1e-12));
    return SimulationOptions{T, dt};
}

// ---------------------------------------------------------------------------

Outcome criterion1() {
    Outcome out;
    const auto t0 = Clock::now();
    InstanceGenerator gen(1001);
    double worst_gap = 0.0;
    double worst_traj = 0.0;
    for (int k = 0; k < 20; ++k) {
        const Eigen::Index nu = gen.integer(2, 4);
        const auto inst = gen.make(gen.integer(1, 4), gen.integer(1, 2), nu);
        const HardSolution hs = synthesize_hard(inst.plant, inst.cost, inst.weights, HardSpec{inst.Fbar});
        const CostReport rep = optimal_cost(hs.X_alpha, hs.Xbar, inst.x0s, inst.weights);
        const OracleResult orc = oracle_constrained_cost(inst.plant, inst.cost, inst.weights, inst.Fbar, inst.x0s);
        worst_gap = std::max(worst_gap, std::abs(rep.J_total - orc.J) / orc.J);

        const double dt = 0.01;
        const Trajectory tr = simulate(inst.plant, hs.gains, inst.x0s, SimulationOptions{10.0, dt});
        const Mat I = Mat::Identity(nu, nu);
        const Mat Acl = kron(I, inst.plant.A) + kron(I, inst.plant.B) * orc.gain;
        const auto ref = propagate_linear(Acl, stack(inst.x0s), dt, tr.times.size() - 1);
        const double scale = 1.0 + max_abs(stack(inst.x0s));
        for (std::size_t s = 0; s < ref.size(); ++s) {
            worst_traj = std::max(worst_traj, max_abs(tr.states[s] - ref[s]) / scale);
        }
    }
    const double elapsed = seconds_since(t0);
    out.require(worst_gap <= 1e-6, "relative cost gap");
    out.require(worst_traj <= 1e-6, "trajectory agreement");
    out.require(elapsed <= 30.0, "runtime");
    out.detail << "max relative gap " << worst_gap << ", max trajectory deviation " << worst_traj << ", "
               << elapsed << " s";
    return out;
}

Outcome criterion2() {
    Outcome out;
    const cli::Scenario sc =
        cli::parse_scenario(json{{"scenario", "wind-farm"}, {"variant", "pitch-sign-corrected"}});
    const auto t0 = Clock::now();
    const std::string text = cli::cmd_cost_vs_nu(sc, 2, 128);
    const double elapsed = seconds_since(t0);
    const Csv csv = parse_csv(text);
    const auto nus = csv.values("nu");
    const auto scaled = csv.values("nu_times_excess");
    const auto [lo, hi] = std::minmax_element(scaled.begin(), scaled.end());
    const double spread = *hi - *lo;
    out.require(nus.size() == 127 && nus.front() == 2.0 && nus.back() == 128.0, "nu range");
    out.require(spread <= 1e-10, "nu * excess constant");
    out.require(scaled.front() > 0.0, "positive excess");
    out.require(elapsed <= 5.0, "runtime");
    out.detail << "validated pitch-sign-corrected wind model, nu*excess = " << scaled.front() << ", spread "
               << spread << ", " << elapsed << " s";
    return out;
}

Outcome criterion3() {
    Outcome out;
    InstanceGenerator gen(1003);
    double worst = std::numeric_limits<double>::infinity();
    auto track = [&](double v) { worst = std::min(worst, v); };
    for (int k = 0; k < 10; ++k) {
        const auto inst = gen.make(gen.integer(1, 4), gen.integer(1, 2), 2);
        const Mat Xa = local_gain(inst.plant, inst.cost).X_alpha;
        const Mat Xb = center_value(inst.plant, inst.cost, HardSpec{inst.Fbar});
        track(min_eig(Xb - Xa));
    }
    for (int k = 0; k < 10; ++k) {
        const auto inst = gen.make(gen.integer(1, 4), gen.integer(1, 2), 2);
        const Mat Xa = local_gain(inst.plant, inst.cost).X_alpha;
        const Mat Xb = center_value(inst.plant, inst.cost, HardSpec{inst.Fbar});
        const SoftSolution s = solve_soft(inst.plant, inst.cost, SoftSpec{inst.Fbar, gen.uniform(0.0, 0.99)});
        track(min_eig(s.X_lambda - Xa));
        track(min_eig(Xb - s.X_lambda));
        track(min_eig(s.Y_lambda));
    }
    for (int k = 0; k < 10; ++k) {
        const auto inst = gen.make(gen.integer(1, 4), gen.integer(1, 2), 2);
        const Eigen::Index m = inst.plant.m();
        const LocalSolution loc = local_gain(inst.plant, inst.cost);
        const Mat Xb = center_value(inst.plant, inst.cost, HardSpec{inst.Fbar});
        const double c = gen.uniform(0.2, 5.0);
        const WeightFilter w = k % 2 == 0 ? WeightFilter::integrator(c, m)
                                          : WeightFilter{-Mat::Identity(m, m), Mat::Identity(m, m),
                                                         c * Mat::Identity(m, m), Mat::Zero(m, m)};
        const AugmentedSynthesis s = synthesize_weighted(inst.plant, inst.cost, inst.weights, inst.Fbar, w);
        const WeightedEnergyMatrices e = weighted_energy_matrices(s, loc.F_alpha);
        track(min_eig(s.X_sigma22() - loc.X_alpha));
        track(min_eig(Xb - s.X_sigma22()));
        track(min_eig(Xb - loc.X_alpha - e.X_v22));
    }
    out.require(worst >= -1e-8, "minimum eigenvalue");
    out.detail << "30 instances, smallest gap eigenvalue " << worst;
    return out;
}

Outcome criterion4() {
    Outcome out;
    const Plant axis{Mat::Zero(1, 1), Mat::Ones(1, 1)};
    const SoftSolution s = solve_soft(axis, CostSpec{Mat::Ones(1, 1)}, SoftSpec{Mat::Constant(1, 1, -25.0), 0.5});
    const double X = s.X_lambda(0, 0);
    const double Y = s.Y_lambda(0, 0);
    out.require(std::abs(X - 10.3837) <= 1e-3, "X_lambda");
    out.require(std::abs(Y - 6.0378) <= 1e-3, "Y_lambda");
    out.detail.precision(10);
    out.detail << "X_lambda = " << X << ", Y_lambda = " << Y;
    return out;
}

Outcome criterion5() {
    Outcome out;
    InstanceGenerator gen(1005);
    double worst_y = 0.0;
    double worst_id = 0.0;
    for (int k = 0; k < 3; ++k) {
        const auto inst = gen.make(gen.integer(2, 4), gen.integer(1, 2), 3);
        const Mat Xa = local_gain(inst.plant, inst.cost).X_alpha;
        const Mat Xb = center_value(inst.plant, inst.cost, HardSpec{inst.Fbar});
        const Vec xbar = center_of_mass(inst.x0s, inst.weights);
        auto solve = [&](double l) { return solve_soft(inst.plant, inst.cost, SoftSpec{inst.Fbar, l}); };
        for (const double lambda : {0.25, 0.5, 0.75}) {
            const double h = 1e-5;
            const SoftSolution s0 = solve(lambda);
            const SoftSolution sp = solve(lambda + h);
            const SoftSolution sm = solve(lambda - h);
            const Mat cd = (sp.X_lambda - sm.X_lambda) / (2.0 * h);
            worst_y = std::max(worst_y, (s0.Y_lambda - cd).norm() / (1.0 + s0.Y_lambda.norm()));

            const SoftCostReport r0 = soft_cost_report(s0, Xa, Xb, inst.weights, inst.x0s);
            const SoftCostReport rp = soft_cost_report(sp, Xa, Xb, inst.weights, inst.x0s);
            const SoftCostReport rm = soft_cost_report(sm, Xa, Xb, inst.weights, inst.x0s);
            const double z = xbar.dot(s0.Z_lambda * xbar);
            for (std::size_t i = 0; i < inst.weights.size(); ++i) {
                const auto ii = static_cast<Eigen::Index>(i);
                const double alpha_dot = (rp.alphas(ii) - rm.alphas(ii)) / (2.0 * h);
                const double predicted = lambda * inst.weights[i] * inst.weights[i] * z;
                worst_id = std::max(worst_id, std::abs(alpha_dot - predicted) / std::abs(predicted));
            }
            const double sigma_dot = (rp.sigma - rm.sigma) / (2.0 * h);
            const double predicted = (1.0 - lambda) * z;
            worst_id = std::max(worst_id, std::abs(sigma_dot - predicted) / std::abs(predicted));
        }
    }
    out.require(worst_y <= 1e-4, "Y_lambda vs central difference");
    out.require(worst_id <= 1e-3, "derivative identities");
    out.detail << "max scaled Y error " << worst_y << ", max relative identity error " << worst_id;
    return out;
}

Outcome criterion6() {
    Outcome out;
    InstanceGenerator gen(1006);
    double worst_hard = 0.0;
    double worst_soft = 0.0;
    for (int k = 0; k < 5; ++k) {
        const auto inst = gen.make(gen.integer(1, 3), gen.integer(1, 2), gen.integer(2, 4));
        const Eigen::Index nu = static_cast<Eigen::Index>(inst.weights.size());
        const Mat I = Mat::Identity(nu, nu);

        const HardSolution hs = synthesize_hard(inst.plant, inst.cost, inst.weights, HardSpec{inst.Fbar});
        const CostReport rep = optimal_cost(hs.X_alpha, hs.Xbar, inst.x0s, inst.weights);
        const Mat Acl = kron(I, inst.plant.A) + kron(I, inst.plant.B) * hs.gains.materialize();
        const EmpiricalCost ec = empirical_cost(simulate(inst.plant, hs.gains, inst.x0s, quadrature_options(Acl)), inst.cost);
        const Vec Jh = rep.J_agent();
        for (Eigen::Index i = 0; i < nu; ++i) {
            worst_hard = std::max(worst_hard, std::abs(ec.per_agent(i) - Jh(i)) / Jh(i));
        }

        const double lambda = gen.uniform(0.1, 0.9);
        const SoftCostReport srep =
            soft_cost_report(inst.plant, inst.cost, inst.weights, SoftSpec{inst.Fbar, lambda}, inst.x0s);
        const HardSpec eq = equivalence_as_hard(inst.plant, inst.cost, SoftSpec{inst.Fbar, lambda});
        const GainDecomposition soft_law{hs.gains.F_alpha, eq.Fbar, inst.weights};
        const Mat Acl_s = kron(I, inst.plant.A) + kron(I, inst.plant.B) * soft_law.materialize();
        const EmpiricalCost es =
            empirical_cost(simulate(inst.plant, soft_law, inst.x0s, quadrature_options(Acl_s)), inst.cost);
        const Vec Js = srep.report.J_agent();
        for (Eigen::Index i = 0; i < nu; ++i) {
            worst_soft = std::max(worst_soft, std::abs(es.per_agent(i) - Js(i)) / Js(i));
        }
    }
    out.require(worst_hard <= 0.005, "hard per-agent costs");
    out.require(worst_soft <= 0.005, "soft per-agent costs");
    out.detail << "max relative deviation hard " << worst_hard << ", soft " << worst_soft;
    return out;
}

Outcome criterion7() {
    Outcome out;
    InstanceGenerator gen(1007);
    double worst_pair = 0.0;
    double worst_forms = 0.0;
    for (int k = 0; k < 5; ++k) {
        const auto inst = gen.make(gen.integer(1, 4), gen.integer(1, 2), gen.integer(2, 6));
        const Mat Fb2 = gen.hurwitz_gain(inst.plant);
        const ConsensusPair pr = consensus_invariance_check(inst.plant, inst.cost, inst.weights, inst.Fbar, Fb2, inst.x0s);
        worst_pair = std::max(worst_pair, std::abs(pr.J_a - pr.J_b));
        const Mat Xa = local_gain(inst.plant, inst.cost).X_alpha;
        worst_forms = std::max(worst_forms, std::abs(consensus_cost_kron(Xa, inst.x0s, inst.weights) - pr.J_a));
    }
    out.require(worst_pair <= 1e-10, "invariance across Fbar");
    out.require(worst_forms <= 1e-10, "algebraic forms agree");
    out.detail << "max difference across Fbar " << worst_pair << ", between forms " << worst_forms;
    return out;
}

// Interpolated y at x on a curve with increasing x; NaN outside the range.
double interpolate(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
    for (std::size_t k = 1; k < xs.size(); ++k) {
        if (x >= xs[k - 1] && x <= xs[k]) {
            if (xs[k] == xs[k - 1]) return std::min(ys[k], ys[k - 1]);
            const double t = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
            return ys[k - 1] + t * (ys[k] - ys[k - 1]);
        }
    }
    return std::numeric_limits<double>::quiet_NaN();
}

Outcome criterion8() {
    Outcome out;
    InstanceGenerator gen(1008);
    double worst_static = 0.0;
    for (int k = 0; k < 10; ++k) {
        const auto inst = gen.make(gen.integer(1, 4), gen.integer(1, 2), 2);
        const double lambda = gen.uniform(0.05, 0.95);
        const AugmentedSynthesis s = synthesize_weighted(inst.plant, inst.cost, inst.weights, inst.Fbar,
                                                         static_family(inst.plant.m())(lambda));
        const SoftSolution soft = solve_soft(inst.plant, inst.cost, SoftSpec{inst.Fbar, lambda});
        worst_static = std::max({worst_static, max_abs(s.X_sigma22() - soft.X_lambda) / (1.0 + soft.X_lambda.norm()),
                                 max_abs(s.F_sigma2 - soft.F_center) / (1.0 + soft.X_lambda.norm())});
    }
    out.require(worst_static <= 1e-8, "static weight vs soft constraint");

    cli::Scenario sc = cli::parse_scenario(json{{"scenario", "wind-farm"},
                                                {"variant", "pitch-sign-corrected"},
                                                {"coordination", {{"mode", "soft"}, {"lambda", 0.5}}}});
    double dc = 0.0;
    for (const double lambda : {0.1, 0.5, 0.9}) {
        const AugmentedSynthesis s = synthesize_weighted(sc.plant, sc.cost, sc.weights(), sc.Fbar,
                                                         integrator_family(sc.plant.m())(lambda));
        dc = std::max(dc, max_abs(s.M_phi.evaluate(0.0)));
    }
    out.require(dc <= 1e-8, "integrator |M_phi(0)|");

    const std::vector<double> grid = cli::parse_lambda_grid("0:0.99:21");
    const Csv st = parse_csv(cli::cmd_sweep(sc, grid, "static"));
    const Csv in = parse_csv(cli::cmd_sweep(sc, grid, "integrator"));
    bool shape = st.rows.size() == 21 && in.rows.size() == 21;
    for (const Csv* c : {&st, &in}) {
        const auto mis = c->values("mismatch_energy");
        const auto exc = c->values("per_agent_excess");
        for (std::size_t k = 1; k < mis.size(); ++k) {
            shape = shape && mis[k] <= mis[k - 1] * (1.0 + 1e-12) && exc[k] >= exc[k - 1] * (1.0 - 1e-12);
        }
    }
    out.require(shape, "monotone trade-off curves");

    const auto st_exc = st.values("per_agent_excess");
    const auto st_mis = st.values("mismatch_energy");
    const auto in_exc = in.values("per_agent_excess");
    const auto in_mis = in.values("mismatch_energy");
    std::size_t compared = 0;
    double worst_dom = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < in_exc.size(); ++k) {
        const double ms = interpolate(st_exc, st_mis, in_exc[k]);
        if (std::isnan(ms)) continue;
        ++compared;
        worst_dom = std::max(worst_dom, (ms - in_mis[k]) / (1.0 + in_mis[k]));
    }
    out.require(compared >= 2 && worst_dom <= 1e-9, "static family dominates at matched excess");
    out.detail << "static/soft " << worst_static << ", |M_phi(0)| " << dc << ", " << compared
               << " matched points, max (static - integrator) mismatch " << worst_dom;
    return out;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

int run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "coordlqr");
    std::vector<char*> argv;
    for (std::string& a : args) argv.push_back(a.data());
    return cli::run(static_cast<int>(argv.size()), argv.data());
}

Outcome criterion9() {
    Outcome out;
    const cli::Scenario sc = cli::parse_scenario(json{{"scenario", "tadpole"}});
    const HardSolution hs = synthesize_hard(sc.plant, sc.cost, sc.weights(), HardSpec{sc.Fbar});
    double pole_err = 0.0;
    for (const auto& ev : eigenvalues(sc.plant.A + sc.plant.B * hs.gains.F_center)) {
        pole_err = std::max(pole_err, std::abs(ev - std::complex<double>(-25.0, 0.0)));
    }
    out.require(pole_err <= 1e-8, "center-of-mass poles");

    const cli::Scenario cst = cli::parse_scenario(
        json{{"scenario", "tadpole"}, {"reference", {{"type", "constant"}, {"value", {0.3, -0.2}}}}});
    const Csv traj = parse_csv(cli::cmd_simulate(cst));
    const auto& last = traj.rows.back();
    double ss_err = 0.0;
    for (int j = 1; j <= 2; ++j) {
        double avg = 0.0;
        for (int i = 1; i <= 50; ++i) avg += last[traj.column("x" + std::to_string(i) + "_" + std::to_string(j))];
        avg /= 50.0;
        ss_err = std::max(ss_err, std::abs(avg - (j == 1 ? 0.3 : -0.2)));
    }
    out.require(ss_err <= 1e-6, "constant-reference steady state");

    const auto dir = std::filesystem::temp_directory_path() / "coordlqr_acceptance";
    std::filesystem::create_directories(dir);
    const auto cfg = dir / "tadpole.json";
    std::ofstream(cfg) << json{{"scenario", "tadpole"}}.dump();
    double worst_time = 0.0;
    int codes = 0;
    for (const char* name : {"a.csv", "b.csv"}) {
        const auto t0 = Clock::now();
        codes += run_cli({"simulate", "--config", cfg.string(), "--out", (dir / name).string(), "--seed", "1"});
        worst_time = std::max(worst_time, seconds_since(t0));
    }
    const std::string a = slurp(dir / "a.csv");
    const bool same = codes == 0 && !a.empty() && a == slurp(dir / "b.csv");
    std::filesystem::remove_all(dir);
    out.require(same, "deterministic figure-eight CSV");
    out.require(worst_time <= 5.0, "runtime");
    out.detail << "pole error " << pole_err << ", steady-state error " << ss_err << ", figure-eight CSV "
               << a.size() << " bytes in " << worst_time << " s";
    return out;
}

Outcome criterion10() {
    Outcome out;
    InstanceGenerator gen(1010);
    int checked = 0;
    int mismatched = 0;
    for (Eigen::Index nu = 2; nu <= 8; ++nu) {
        for (int variant = 0; variant < 3; ++variant) {
            const auto inst = gen.make(gen.integer(2, 4), 2, nu);
            const LocalSolution loc = local_gain(inst.plant, inst.cost);
            Mat Fbar = inst.Fbar;
            if (variant == 1) {
                // Rank-one departure from the local gain.
                Fbar = loc.F_alpha + 0.05 * gen.gaussian_vec(2) * gen.gaussian_vec(inst.plant.n()).transpose();
            } else if (variant == 2) {
                Fbar = loc.F_alpha;
            }
            if (!is_hurwitz(inst.plant.A + inst.plant.B * Fbar)) continue;
            const HardSolution hs = synthesize_hard(inst.plant, inst.cost, inst.weights, HardSpec{Fbar});
            const Mat diff = hs.gains.materialize() - kron(Mat::Identity(nu, nu), hs.gains.F_alpha);
            ++checked;
            if (numerical_rank(diff) != numerical_rank(Fbar - hs.gains.F_alpha)) ++mismatched;
        }
    }
    out.require(checked >= 14 && mismatched == 0, "rank equality");
    out.detail << checked << " instances, " << mismatched << " mismatches";
    return out;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"1 oracle equivalence", criterion1},
        {"2 per-agent excess scales as 1/nu", criterion2},
        {"3 PSD sandwiches", criterion3},
        {"4 scalar soft-constraint anchor", criterion4},
        {"5 sensitivity identities", criterion5},
        {"6 cost formulas vs simulation", criterion6},
        {"7 consensus invariance", criterion7},
        {"8 frequency-weighted checks", criterion8},
        {"9 tadpole scenario", criterion9},
        {"10 rank structure", criterion10},
    };
    int failures = 0;
    for (const auto& [name, fn] : criteria) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << "exception: " << e.what();
        }
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << name << ": " << o.detail.str() << std::endl;
        failures += o.pass ? 0 : 1;
    }
    return failures == 0 ? 0 : 1;
}
