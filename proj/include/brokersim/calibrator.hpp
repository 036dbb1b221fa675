#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "brokersim/params.hpp"

namespace brokersim {

// The four trainable constants of the interval-discretized trading rule
//   V_B = -c*Q_B - g*Q_I + h*V_I + f*V_U.
// c and g carry units of 1/interval (the continuous-time analogs are
// c/delta and g/delta); h and f are dimensionless.
struct StrategyConstants {
    double c = 0.0;
    double g = 0.0;
    double h = 0.0;
    double f = 0.0;
};

struct SessionRecord {
    double t = 0.0;
    double S = 0.0;    // mid price at t
    double V_I = 0.0;  // informed volume over the interval ending at t
    double V_U = 0.0;  // uninformed volume over the interval ending at t
};

// One day: m+1 equally spaced records at t = 0, delta, ..., m*delta.
// The t = 0 record carries the opening mid and zero volumes.
struct Session {
    std::vector<SessionRecord> records;
};

struct SessionSet {
    double delta = 0.0;
    double k_I = 0.0, k_U = 0.0, k_B = 0.0;  // execution-price impacts
    std::vector<Session> days;
};

struct BacktestResult {
    double P = 0.0;
    std::vector<double> per_day;
    std::vector<double> terminal_inventory;
    std::vector<double> terminal_cash;
    double per_day_std_error = 0.0;
};

struct OptResult {
    StrategyConstants best;
    double P_best = 0.0;
    std::vector<std::pair<StrategyConstants, double>> trace;
    std::string method;
};

// Search box of the grid stage; counts are per axis.
struct GridSpec {
    double c_lo = 0.0, c_hi = 0.0;
    double g_lo = 0.0, g_hi = 0.0;
    double h_lo = 0.0, h_hi = 2.0;
    double f_lo = 0.0, f_hi = 1.0;
    int n_c = 11, n_g = 21, n_h = 21, n_f = 21;

    // c in [0, 10*delta] (11 pts), g in [-10*delta, 10*delta] (21),
    // h in [0, 2] (21), f in [0, 1] (21).
    static GridSpec defaults(double delta);
};

enum class OptMethod { grid, simplex, grid_then_simplex };

// Simulates n_days independent days of length m_intervals*delta with the
// informed trader on the optimal policy and the uninformed OU flow;
// V_I = delta*nu_I and V_U = delta*nu_U at left-endpoint rates, mid S at
// interval boundaries. Deterministic per seed.
SessionSet generate_sessions(const ValidatedParams& p, int n_days, double delta,
                             int m_intervals, std::uint64_t seed);

// One day of the backtest: start from zero cash/inventories, per interval
// update Q_I += V_I, trade V_B = -c*Q_B - g*Q_I + h*V_I + f*V_U,
// Q_B += -V_I - V_U + V_B, settle cash at execution prices
// S + k*V/delta off the interval's opening mid; return
// X + Q_B*S_end - a_B*Q_B^2 - phi_B * sum of Q_B^2*delta.
double backtest_day(const SessionSet& meta, const Session& day,
                    const StrategyConstants& k, double a_B, double phi_B);

BacktestResult evaluate_P(const SessionSet& sessions, const StrategyConstants& k,
                          double a_B, double phi_B);

// Derivative-free maximization of an arbitrary objective over the
// constraint set c, h, f >= 0 (test seam; optimize() routes through it).
OptResult optimize_objective(const std::function<double(const StrategyConstants&)>& obj,
                             const GridSpec& grid, const StrategyConstants& init,
                             OptMethod method);

OptResult optimize(const SessionSet& sessions, const StrategyConstants& init,
                   OptMethod method, const GridSpec& grid, double a_B, double phi_B);

// Session CSV (`day,t,S,V_I,V_U`) plus a JSON metadata sidecar
// (<path>.meta.json) holding delta and the impact parameters.
void write_sessions(const std::string& csv_path, const SessionSet& sessions);
SessionSet read_sessions(const std::string& csv_path);

}  // namespace brokersim
