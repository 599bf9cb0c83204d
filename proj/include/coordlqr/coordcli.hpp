#pragma once

// Command-line front end: JSON scenario configs, built-in scenarios and
// CSV/JSON emitters. Commands return their output as text; `run` writes it.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "coordlqr/ensemblelab.hpp"
#include "coordlqr/freqcoord.hpp"
#include "coordlqr/softcoord.hpp"

namespace coordlqr::cli {

using json = nlohmann::json;

/// Malformed or inconsistent input; always exits with code 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

enum class Mode { Hard, Soft, Weighted, Partial };

enum class InitialKind { Explicit, BwImpulse, Random };

struct InitialSpec {
    InitialKind kind = InitialKind::Explicit;
    std::vector<Vec> x0;  // materialized agent states for Explicit and Random
    Mat Bw;               // n x d disturbance input for BwImpulse
    double scale = 1.0;   // standard deviation for Random
};

struct SimSpec {
    double T = 1.0;
    double dt = 1e-2;
    std::uint64_t seed = 0;
    double noise_intensity = 0.0;
};

enum class ReferenceKind { Constant, FigureEight };

/// Desired average agent state x_ref(t); converted to the center-of-mass
/// input r through the DC feedforward gain.
struct ReferenceSpec {
    ReferenceKind kind = ReferenceKind::Constant;
    Vec value;  // x_ref for Constant, amplitudes (a1, a2) for FigureEight

    Vec x_ref(double t) const;
};

/// Explicit gains that replace synthesis in `simulate`. With a filter the
/// controller is dynamic and F_center is the center-of-mass target Fbar.
struct ExplicitGains {
    Mat F_alpha;
    Mat F_center;
    std::optional<StateSpace> filter;
};

struct WindValidation {
    std::string variant;
    bool hurwitz = false;
    double spectral_abscissa = 0.0;
    std::vector<std::complex<double>> unstable_eigenvalues;
    bool pbh_q_ok = false;
};

struct Scenario {
    std::string name;  // "custom", "tadpole" or "wind-farm"
    Plant plant;
    CostSpec cost;
    std::size_t nu = 2;
    std::optional<Vec> mu;  // uniform when empty
    Mode mode = Mode::Hard;
    Mat Fbar;
    double lambda = 0.0;
    std::optional<WeightFilter> weight;
    Mat E;
    Mat Fbar1;
    std::optional<ExplicitGains> controller;
    InitialSpec initial;
    SimSpec sim;
    std::optional<ReferenceSpec> reference;
    std::optional<WindValidation> wind;

    Weights weights() const;
    /// Center-of-mass gain after resolving partial constraints.
    Mat effective_Fbar(const Tolerances& tol = {}) const;
};

/// Built-in scenario defaults as a config document.
json builtin_scenario(const std::string& name, const std::string& variant);

/// Printed wind turbine data [A Bw Bu] (5 x 7) and its pitch-sign-corrected variant.
Mat wind_farm_data(const std::string& variant);
Mat wind_farm_Q();

/// Parses a config document; `seed_override` replaces sim.seed before
/// seed-dependent data (random initial states) is generated.
Scenario parse_scenario(const json& config, std::optional<std::uint64_t> seed_override = std::nullopt);
Scenario load_scenario(const std::string& path, std::optional<std::uint64_t> seed_override = std::nullopt);

/// "a:b" inclusive integer range.
std::pair<std::size_t, std::size_t> parse_nu_range(const std::string& text);
/// "a:b:count" inclusive linear grid.
std::vector<double> parse_lambda_grid(const std::string& text);

json cmd_synth(const Scenario& sc, const Tolerances& tol = {});
std::string cmd_cost_vs_nu(const Scenario& sc, std::size_t nu_lo, std::size_t nu_hi,
                           const Tolerances& tol = {});
std::string cmd_sweep(const Scenario& sc, const std::vector<double>& grid, const std::string& family,
                      const Tolerances& tol = {});
std::string cmd_simulate(const Scenario& sc, const Tolerances& tol = {});
json cmd_oracle(const Scenario& sc, const Tolerances& tol = {});

/// Rows of doubles with a header, 17 significant digits, comma separated.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header);
    void row(const std::vector<double>& values);
    std::string str() const { return text_; }

private:
    std::size_t columns_;
    std::string text_;
};

std::string format_double(double v);

/// Writes to a temporary sibling file and renames it over `path`.
void write_atomic(const std::string& path, const std::string& contents);

/// Exit code for an error: 2 for input problems, 3 for numerical failures.
int exit_code_for(const Error& e);
/// Single-line JSON diagnostic.
std::string error_line(std::string_view code, std::string_view message, int exit_code);

/// Full command-line entry point.
int run(int argc, char** argv);

}  // namespace coordlqr::cli
