#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "brokersim/closed_form.hpp"
#include "brokersim/params.hpp"

namespace brokersim {

enum class Scheme { euler, exact };

// Monte Carlo run configuration. The model horizon is infinite; `horizon`
// is the truncation time and the tail it discards must satisfy
// e^{-beta*horizon} <= discount_tail_tol (checked against the params at
// run time by the discounted estimators).
struct SimConfig {
    double dt = 1e-2;
    double horizon = 1382.0;
    int n_paths = 2000;
    std::uint64_t seed = 0;
    double discount_tail_tol = 1e-6;
    Scheme scheme = Scheme::exact;
};

// Trading policy for either player. Interpretation by role:
//   optimal        informed: nu = A*alpha - B*q_I; broker: closed-form rate.
//   scaled         optimal with coefficients multiplied by `factors`:
//                  informed (A,B) use factors[0..1]; broker (C,D,E,F) use
//                  factors[0..3].
//   constant_rate  nu = rate.
//   custom_linear  broker: nu_B = -c*q_B - g*q_I + h*nu_I + f*nu_U (the
//                  flow form); informed: nu_I = h*alpha - c*q_I.
struct Policy {
    enum class Kind { optimal, scaled, constant_rate, custom_linear };
    Kind kind = Kind::optimal;
    std::array<double, 4> factors{1.0, 1.0, 1.0, 1.0};
    double rate = 0.0;
    double c = 0.0, g = 0.0, h = 0.0, f = 0.0;

    static Policy optimal() { return {}; }
    static Policy scaled(const std::array<double, 4>& factors);
    static Policy constant(double rate);
    static Policy custom(double c, double g, double h, double f);
};

double informed_policy_rate(const Policy& pol, const InformedCoefficients& ic,
                            double alpha, double q_I);
double broker_policy_rate(const Policy& pol, const BrokerCoefficients& bc, double q_B,
                          double q_I, double nu_I, double alpha, double nu_U);

// Discretized trajectory. states has n_steps+1 entries; the rate and
// execution-price vectors have n_steps entries (left-endpoint values held
// over each step). hatS_I/hatS_U are the impact-adjusted client execution
// prices S + k*nu at the step start.
struct PathRecord {
    std::vector<MarketState> states;
    std::vector<double> nu_I, nu_B, nu_U;
    std::vector<double> hatS_I, hatS_U, hatS_B;
};

struct Estimate {
    double mean = 0.0;
    double std_error = 0.0;
    long n = 0;
    std::pair<double, double> ci95{0.0, 0.0};
};

MarketState initial_state(const ValidatedParams& p);

// One path of the full system, deterministic given (cfg.seed, path_index).
// Three independent Gaussian increments per step drive (alpha, S, nu_U);
// inventories and cash use left-endpoint rates.
PathRecord simulate_path(const ValidatedParams& p, const Policy& pol_I,
                         const Policy& pol_B, const SimConfig& cfg,
                         std::uint64_t path_index);
PathRecord simulate_path(const ValidatedParams& p, const Policy& pol_I,
                         const Policy& pol_B, const SimConfig& cfg,
                         std::uint64_t path_index, const MarketState& start);

// Discounted infinite-horizon performance criteria, truncated at
// cfg.horizon (ConfigError if the discount tail exceeds the tolerance).
Estimate estimate_informed_performance(const ValidatedParams& p, const SimConfig& cfg,
                                       const Policy& pol_I);
Estimate estimate_informed_performance(const ValidatedParams& p, const SimConfig& cfg,
                                       const Policy& pol_I, const MarketState& start);
Estimate estimate_broker_performance(const ValidatedParams& p, const SimConfig& cfg,
                                     const Policy& pol_I, const Policy& pol_B);
Estimate estimate_broker_performance(const ValidatedParams& p, const SimConfig& cfg,
                                     const Policy& pol_I, const Policy& pol_B,
                                     const MarketState& start);

// Broker criteria for several policies on shared noise (common random
// numbers): one market/informed trajectory per path, one broker state per
// policy. Returns one Estimate per policy plus, for k >= 1, the paired
// difference (policy k - policy 0).
struct MultiPolicyEstimates {
    std::vector<Estimate> per_policy;
    std::vector<Estimate> diff_vs_first;
};
MultiPolicyEstimates estimate_broker_multi(const ValidatedParams& p, const SimConfig& cfg,
                                           const Policy& pol_I,
                                           const std::vector<Policy>& pols_B);
MultiPolicyEstimates estimate_broker_multi(const ValidatedParams& p, const SimConfig& cfg,
                                           const Policy& pol_I,
                                           const std::vector<Policy>& pols_B,
                                           const MarketState& start);

// Scales each of C, D, E, F in turn by each factor and compares against
// the optimal broker policy under common random numbers.
struct PerturbationRow {
    std::string coefficient;
    double factor = 1.0;
    Estimate estimate;
    // paired statistics of (perturbed - optimal)
    double mean_diff = 0.0;
    double se_diff = 0.0;
    bool lower_95 = false;       // one-sided: mean_diff < -1.645*se_diff
    bool exceeds_optimal = false;  // mean_diff > 2*se_diff
};
struct PerturbationReport {
    Estimate optimal;
    std::vector<PerturbationRow> rows;
    bool any_exceeds = false;
};
PerturbationReport perturbation_report(const ValidatedParams& p, const SimConfig& cfg,
                                       const std::vector<double>& factors);

// Undiscounted single-day broker objective over [0, cfg.horizon]:
// X_B + Q_B S - a_B Q_B^2 - phi_B * integral of Q_B^2. No tail check.
Estimate estimate_broker_day_objective(const ValidatedParams& p, const SimConfig& cfg,
                                       const Policy& pol_I, const Policy& pol_B);

// Day objective of a single recorded path (same formula, one sample).
double broker_day_objective(const ValidatedParams& p, const PathRecord& rec);

void write_path_csv(const std::string& path, const PathRecord& rec);

}  // namespace brokersim
