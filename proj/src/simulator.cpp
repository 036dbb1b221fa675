#include "brokersim/simulator.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

namespace brokersim {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t path_seed(std::uint64_t seed, std::uint64_t path_index) {
    return splitmix64(splitmix64(seed) ^ splitmix64(path_index + 1));
}

struct Kahan {
    double s = 0.0, c = 0.0;
    void add(double x) {
        const double y = x - c;
        const double t = s + y;
        c = (t - s) - y;
        s = t;
    }
};

// Per-step transition constants. The update is
//   S'     = S + alpha*psi + l1*Z1 + l0*Z0
//   alpha' = alpha*a_dec + a_sd*Z1
//   nu_U'  = nu_U*u_dec + u_sd*Z2
// In exact mode these reproduce the joint Gaussian law of (alpha', S')
// including the integrated-OU drift contribution to S; in Euler mode they
// reduce to the plain Euler-Maruyama scheme with independent increments.
struct StepCoeffs {
    double dt;
    double a_dec, a_sd;
    double psi, l1, l0;
    double u_dec, u_sd;
};

// dt - 2*(1-e^{-x})/x*dt + ... in the form dt*f(x); f has a removable
// cancellation at small x handled by its Taylor expansion.
double int_ou_var_factor(double x) {
    if (x < 1e-3) return x * x / 3.0 - x * x * x / 4.0 + 7.0 * x * x * x * x / 60.0;
    return 1.0 - 2.0 * (-std::expm1(-x)) / x + (-std::expm1(-2.0 * x)) / (2.0 * x);
}

StepCoeffs make_coeffs(const ValidatedParams& p, const SimConfig& cfg) {
    const auto& m = p.market();
    const double dt = cfg.dt;
    const double sig_u = flow_diffusion(p);
    StepCoeffs c{};
    c.dt = dt;
    if (cfg.scheme == Scheme::euler) {
        c.a_dec = 1.0 - m.kappa_alpha * dt;
        c.a_sd = m.sigma_alpha * std::sqrt(dt);
        c.psi = dt;
        c.l1 = 0.0;
        c.l0 = m.sigma_s * std::sqrt(dt);
        c.u_dec = 1.0 - p.flow().kappa_u * dt;
        c.u_sd = sig_u * std::sqrt(dt);
        return c;
    }
    const double ka = m.kappa_alpha, sa = m.sigma_alpha;
    double a_var, covIA, varI;
    if (ka <= 0.0) {
        c.a_dec = 1.0;
        a_var = sa * sa * dt;
        c.psi = dt;
        covIA = sa * sa * dt * dt / 2.0;
        varI = sa * sa * dt * dt * dt / 3.0;
    } else {
        const double x = ka * dt;
        const double one_m = -std::expm1(-x);
        c.a_dec = std::exp(-x);
        a_var = sa * sa * (-std::expm1(-2.0 * x)) / (2.0 * ka);
        c.psi = one_m / ka;
        covIA = sa * sa * one_m * one_m / (2.0 * ka * ka);
        varI = sa * sa * dt * int_ou_var_factor(x) / (ka * ka);
    }
    c.a_sd = std::sqrt(a_var);
    c.l1 = c.a_sd > 0.0 ? covIA / c.a_sd : 0.0;
    const double resid = m.sigma_s * m.sigma_s * dt + varI - c.l1 * c.l1;
    c.l0 = std::sqrt(std::max(0.0, resid));
    const double ku = p.flow().kappa_u;
    if (ku <= 0.0) {
        c.u_dec = 1.0;
        c.u_sd = sig_u * std::sqrt(dt);
    } else {
        c.u_dec = std::exp(-ku * dt);
        c.u_sd = sig_u * std::sqrt((-std::expm1(-2.0 * ku * dt)) / (2.0 * ku));
    }
    return c;
}

long n_steps_of(const SimConfig& cfg) {
    if (!(cfg.dt > 0.0)) throw ConfigError("dt must be positive");
    if (!(cfg.horizon > 0.0)) throw ConfigError("horizon must be positive");
    if (cfg.n_paths < 1) throw ConfigError("n_paths must be >= 1");
    const long n = std::lround(cfg.horizon / cfg.dt);
    if (n < 1) throw ConfigError("horizon shorter than one step");
    return n;
}

void check_tail(const ValidatedParams& p, const SimConfig& cfg) {
    if (std::exp(-p.informed().beta * cfg.horizon) > cfg.discount_tail_tol)
        throw ConfigError("discount tail exceeds tolerance: increase horizon");
}

void check_policy(const Policy& pol) {
    for (double f : pol.factors)
        if (!(std::isfinite(f) && f >= 0.0))
            throw ConfigError("scaled policy factors must be finite and >= 0");
}

Estimate make_estimate(const Kahan& sum, const Kahan& sumsq, long n) {
    Estimate e;
    e.n = n;
    e.mean = sum.s / static_cast<double>(n);
    if (n > 1) {
        const double var =
            std::max(0.0, sumsq.s / static_cast<double>(n) - e.mean * e.mean);
        e.std_error = std::sqrt(var / static_cast<double>(n - 1));
    }
    e.ci95 = {e.mean - 1.96 * e.std_error, e.mean + 1.96 * e.std_error};
    return e;
}

}  // namespace

Policy Policy::scaled(const std::array<double, 4>& factors) {
    Policy p;
    p.kind = Kind::scaled;
    p.factors = factors;
    return p;
}

Policy Policy::constant(double rate) {
    Policy p;
    p.kind = Kind::constant_rate;
    p.rate = rate;
    return p;
}

Policy Policy::custom(double c, double g, double h, double f) {
    Policy p;
    p.kind = Kind::custom_linear;
    p.c = c;
    p.g = g;
    p.h = h;
    p.f = f;
    return p;
}

double informed_policy_rate(const Policy& pol, const InformedCoefficients& ic,
                            double alpha, double q_I) {
    switch (pol.kind) {
        case Policy::Kind::optimal: return ic.A * alpha - ic.B * q_I;
        case Policy::Kind::scaled:
            return pol.factors[0] * ic.A * alpha - pol.factors[1] * ic.B * q_I;
        case Policy::Kind::constant_rate: return pol.rate;
        case Policy::Kind::custom_linear: return pol.h * alpha - pol.c * q_I;
    }
    return 0.0;
}

double broker_policy_rate(const Policy& pol, const BrokerCoefficients& bc, double q_B,
                          double q_I, double nu_I, double alpha, double nu_U) {
    switch (pol.kind) {
        case Policy::Kind::optimal:
            return -bc.C * q_B - bc.D * q_I + bc.E * alpha + bc.F * nu_U;
        case Policy::Kind::scaled:
            return -pol.factors[0] * bc.C * q_B - pol.factors[1] * bc.D * q_I +
                   pol.factors[2] * bc.E * alpha + pol.factors[3] * bc.F * nu_U;
        case Policy::Kind::constant_rate: return pol.rate;
        case Policy::Kind::custom_linear:
            return -pol.c * q_B - pol.g * q_I + pol.h * nu_I + pol.f * nu_U;
    }
    return 0.0;
}

MarketState initial_state(const ValidatedParams& p) {
    MarketState s;
    s.S = p.market().S0;
    s.alpha = p.market().alpha0;
    s.nu_U = p.flow().nu_U0;
    return s;
}

PathRecord simulate_path(const ValidatedParams& p, const Policy& pol_I,
                         const Policy& pol_B, const SimConfig& cfg,
                         std::uint64_t path_index) {
    return simulate_path(p, pol_I, pol_B, cfg, path_index, initial_state(p));
}

PathRecord simulate_path(const ValidatedParams& p, const Policy& pol_I,
                         const Policy& pol_B, const SimConfig& cfg,
                         std::uint64_t path_index, const MarketState& start) {
    const long n = n_steps_of(cfg);
    check_policy(pol_I);
    check_policy(pol_B);
    const StepCoeffs sc = make_coeffs(p, cfg);
    const InformedCoefficients ic = solve_informed(p);
    const BrokerCoefficients bc = solve_broker(p, ic);
    const double kI = p.informed().k_I, kU = p.broker().k_U, kB = p.broker().k_B;
    const double dt = cfg.dt;

    std::mt19937_64 rng(path_seed(cfg.seed, path_index));
    std::normal_distribution<double> gauss;

    PathRecord rec;
    rec.states.reserve(n + 1);
    rec.nu_I.reserve(n);
    rec.nu_B.reserve(n);
    rec.nu_U.reserve(n);
    rec.hatS_I.reserve(n);
    rec.hatS_U.reserve(n);
    rec.hatS_B.reserve(n);

    MarketState st = start;
    rec.states.push_back(st);
    for (long k = 0; k < n; ++k) {
        const double nuI = informed_policy_rate(pol_I, ic, st.alpha, st.Q_I);
        const double nuB =
            broker_policy_rate(pol_B, bc, st.Q_B, st.Q_I, nuI, st.alpha, st.nu_U);
        const double nuU = st.nu_U;
        rec.nu_I.push_back(nuI);
        rec.nu_B.push_back(nuB);
        rec.nu_U.push_back(nuU);
        rec.hatS_I.push_back(st.S + kI * nuI);
        rec.hatS_U.push_back(st.S + kU * nuU);
        rec.hatS_B.push_back(st.S + kB * nuB);

        const double z1 = gauss(rng), z0 = gauss(rng), z2 = gauss(rng);
        MarketState nx = st;
        nx.t = st.t + dt;
        nx.S = st.S + st.alpha * sc.psi + sc.l1 * z1 + sc.l0 * z0;
        nx.alpha = st.alpha * sc.a_dec + sc.a_sd * z1;
        nx.nu_U = st.nu_U * sc.u_dec + sc.u_sd * z2;
        nx.Q_I = st.Q_I + nuI * dt;
        nx.Q_B = st.Q_B + (nuB - nuI - nuU) * dt;
        nx.X_I = st.X_I - nuI * (st.S + kI * nuI) * dt;
        nx.X_B = st.X_B + (nuI * (st.S + kI * nuI) + nuU * (st.S + kU * nuU) -
                           nuB * (st.S + kB * nuB)) * dt;
        st = nx;
        rec.states.push_back(st);
    }
    return rec;
}

Estimate estimate_informed_performance(const ValidatedParams& p, const SimConfig& cfg,
                                       const Policy& pol_I) {
    return estimate_informed_performance(p, cfg, pol_I, initial_state(p));
}

// Discounted-criterion estimator. With Y = X + Q S - a Q^2, Ito gives
//   integrand dt = beta*Y dt - phi*Q^2 dt + dY - Q dM,   dM = dS - E[dS],
// so each step contributes the exactly-integrable pieces
//   w * (beta*Ybar - phi*<Q^2> [+ b*Qbar*nu_B])  with  w = (1-e^{-b dt})/b,
// plus (w/dt) * (dY - Qbar*dM), whose dM part is a zero-mean control
// variate. This removes the O(dt)/beta bias of the plain Riemann sum.
Estimate estimate_informed_performance(const ValidatedParams& p, const SimConfig& cfg,
                                       const Policy& pol_I, const MarketState& start) {
    check_tail(p, cfg);
    const long n = n_steps_of(cfg);
    check_policy(pol_I);
    const StepCoeffs sc = make_coeffs(p, cfg);
    const InformedCoefficients ic = solve_informed(p);
    const double kI = p.informed().k_I, aI = p.informed().a_I;
    const double phiI = p.informed().phi_I, beta = p.informed().beta;
    const double dt = cfg.dt;
    const double ddec = std::exp(-beta * dt);
    const double w = (-std::expm1(-beta * dt)) / beta;

    Kahan sum, sumsq;
    std::normal_distribution<double> gauss;
    for (int path = 0; path < cfg.n_paths; ++path) {
        std::mt19937_64 rng(path_seed(cfg.seed, static_cast<std::uint64_t>(path)));
        double S = start.S, alpha = start.alpha, nuU = start.nu_U;
        double qI = start.Q_I, xI = start.X_I;
        double Y1 = xI + qI * S - aI * qI * qI;
        double disc = 1.0;
        Kahan acc;
        for (long k = 0; k < n; ++k) {
            const double nu = informed_policy_rate(pol_I, ic, alpha, qI);
            const double z1 = gauss(rng), z0 = gauss(rng), z2 = gauss(rng);
            const double S2 = S + alpha * sc.psi + sc.l1 * z1 + sc.l0 * z0;
            const double alpha2 = alpha * sc.a_dec + sc.a_sd * z1;
            const double nuU2 = nuU * sc.u_dec + sc.u_sd * z2;
            const double qI2 = qI + nu * dt;
            const double xI2 = xI - nu * (S + kI * nu) * dt;
            const double Y2 = xI2 + qI2 * S2 - aI * qI2 * qI2;
            const double qbar = 0.5 * (qI + qI2);
            const double mnoise = (S2 - S) - alpha * sc.psi;
            acc.add(disc * (w * (beta * 0.5 * (Y1 + Y2) -
                                 phiI * (qI * qI + qI * qI2 + qI2 * qI2) / 3.0) +
                            (w / dt) * ((Y2 - Y1) - qbar * mnoise)));
            disc *= ddec;
            S = S2;
            alpha = alpha2;
            nuU = nuU2;
            qI = qI2;
            xI = xI2;
            Y1 = Y2;
        }
        sum.add(acc.s);
        sumsq.add(acc.s * acc.s);
    }
    return make_estimate(sum, sumsq, cfg.n_paths);
}

Estimate estimate_broker_performance(const ValidatedParams& p, const SimConfig& cfg,
                                     const Policy& pol_I, const Policy& pol_B) {
    return estimate_broker_performance(p, cfg, pol_I, pol_B, initial_state(p));
}

Estimate estimate_broker_performance(const ValidatedParams& p, const SimConfig& cfg,
                                     const Policy& pol_I, const Policy& pol_B,
                                     const MarketState& start) {
    return estimate_broker_multi(p, cfg, pol_I, {pol_B}, start).per_policy.front();
}

MultiPolicyEstimates estimate_broker_multi(const ValidatedParams& p, const SimConfig& cfg,
                                           const Policy& pol_I,
                                           const std::vector<Policy>& pols_B) {
    return estimate_broker_multi(p, cfg, pol_I, pols_B, initial_state(p));
}

MultiPolicyEstimates estimate_broker_multi(const ValidatedParams& p, const SimConfig& cfg,
                                           const Policy& pol_I,
                                           const std::vector<Policy>& pols_B,
                                           const MarketState& start) {
    check_tail(p, cfg);
    const long n = n_steps_of(cfg);
    check_policy(pol_I);
    for (const auto& pol : pols_B) check_policy(pol);
    if (pols_B.empty()) throw ConfigError("no broker policies given");
    const StepCoeffs sc = make_coeffs(p, cfg);
    const InformedCoefficients ic = solve_informed(p);
    const BrokerCoefficients bc = solve_broker(p, ic);
    const double kI = p.informed().k_I;
    const double kU = p.broker().k_U, kB = p.broker().k_B;
    const double aB = p.broker().a_B, phiB = p.broker().phi_B, b = p.broker().b;
    const double beta = p.broker().beta;
    const double dt = cfg.dt;
    const double ddec = std::exp(-beta * dt);
    const double w = (-std::expm1(-beta * dt)) / beta;

    const std::size_t np = pols_B.size();
    std::vector<Kahan> sum(np), sumsq(np), dsum(np), dsumsq(np);
    std::vector<double> qB(np), xB(np), Y(np), val(np);
    std::vector<Kahan> acc(np);
    std::normal_distribution<double> gauss;

    for (int path = 0; path < cfg.n_paths; ++path) {
        std::mt19937_64 rng(path_seed(cfg.seed, static_cast<std::uint64_t>(path)));
        double S = start.S, alpha = start.alpha, nuU = start.nu_U;
        double qI = start.Q_I;
        for (std::size_t j = 0; j < np; ++j) {
            qB[j] = start.Q_B;
            xB[j] = start.X_B;
            Y[j] = xB[j] + qB[j] * S - aB * qB[j] * qB[j];
            acc[j] = Kahan{};
        }
        double disc = 1.0;
        for (long k = 0; k < n; ++k) {
            const double nuI = informed_policy_rate(pol_I, ic, alpha, qI);
            const double z1 = gauss(rng), z0 = gauss(rng), z2 = gauss(rng);
            const double S2 = S + alpha * sc.psi + sc.l1 * z1 + sc.l0 * z0;
            const double alpha2 = alpha * sc.a_dec + sc.a_sd * z1;
            const double nuU2 = nuU * sc.u_dec + sc.u_sd * z2;
            const double qI2 = qI + nuI * dt;
            const double mnoise = (S2 - S) - alpha * sc.psi;
            const double client_cash =
                (nuI * (S + kI * nuI) + nuU * (S + kU * nuU)) * dt;
            for (std::size_t j = 0; j < np; ++j) {
                const double nuB =
                    broker_policy_rate(pols_B[j], bc, qB[j], qI, nuI, alpha, nuU);
                const double qB2 = qB[j] + (nuB - nuI - nuU) * dt;
                const double xB2 = xB[j] + client_cash - nuB * (S + kB * nuB) * dt;
                const double Y2 = xB2 + qB2 * S2 - aB * qB2 * qB2;
                const double qbar = 0.5 * (qB[j] + qB2);
                acc[j].add(disc *
                           (w * (beta * 0.5 * (Y[j] + Y2) -
                                 phiB * (qB[j] * qB[j] + qB[j] * qB2 + qB2 * qB2) / 3.0 +
                                 b * qbar * nuB) +
                            (w / dt) * ((Y2 - Y[j]) - qbar * mnoise)));
                qB[j] = qB2;
                xB[j] = xB2;
                Y[j] = Y2;
            }
            disc *= ddec;
            S = S2;
            alpha = alpha2;
            nuU = nuU2;
            qI = qI2;
        }
        for (std::size_t j = 0; j < np; ++j) {
            val[j] = acc[j].s;
            sum[j].add(val[j]);
            sumsq[j].add(val[j] * val[j]);
            const double d = val[j] - val[0];
            dsum[j].add(d);
            dsumsq[j].add(d * d);
        }
    }
    MultiPolicyEstimates out;
    for (std::size_t j = 0; j < np; ++j) {
        out.per_policy.push_back(make_estimate(sum[j], sumsq[j], cfg.n_paths));
        if (j >= 1) out.diff_vs_first.push_back(make_estimate(dsum[j], dsumsq[j], cfg.n_paths));
    }
    return out;
}

PerturbationReport perturbation_report(const ValidatedParams& p, const SimConfig& cfg,
                                       const std::vector<double>& factors) {
    static const char* names[4] = {"C", "D", "E", "F"};
    std::vector<Policy> pols{Policy::optimal()};
    std::vector<std::pair<int, double>> labels;
    for (int i = 0; i < 4; ++i) {
        for (double f : factors) {
            std::array<double, 4> fac{1.0, 1.0, 1.0, 1.0};
            fac[i] = f;
            pols.push_back(Policy::scaled(fac));
            labels.emplace_back(i, f);
        }
    }
    const MultiPolicyEstimates m = estimate_broker_multi(p, cfg, Policy::optimal(), pols);
    PerturbationReport rep;
    rep.optimal = m.per_policy.front();
    for (std::size_t k = 0; k < labels.size(); ++k) {
        PerturbationRow row;
        row.coefficient = names[labels[k].first];
        row.factor = labels[k].second;
        row.estimate = m.per_policy[k + 1];
        row.mean_diff = m.diff_vs_first[k].mean;
        row.se_diff = m.diff_vs_first[k].std_error;
        row.lower_95 = row.mean_diff < -1.645 * row.se_diff;
        row.exceeds_optimal = row.mean_diff > 2.0 * row.se_diff;
        rep.any_exceeds = rep.any_exceeds || row.exceeds_optimal;
        rep.rows.push_back(row);
    }
    return rep;
}

Estimate estimate_broker_day_objective(const ValidatedParams& p, const SimConfig& cfg,
                                       const Policy& pol_I, const Policy& pol_B) {
    const long n = n_steps_of(cfg);
    check_policy(pol_I);
    check_policy(pol_B);
    const StepCoeffs sc = make_coeffs(p, cfg);
    const InformedCoefficients ic = solve_informed(p);
    const BrokerCoefficients bc = solve_broker(p, ic);
    const double kI = p.informed().k_I;
    const double kU = p.broker().k_U, kB = p.broker().k_B;
    const double aB = p.broker().a_B, phiB = p.broker().phi_B;
    const double dt = cfg.dt;
    const MarketState start = initial_state(p);

    Kahan sum, sumsq;
    std::normal_distribution<double> gauss;
    for (int path = 0; path < cfg.n_paths; ++path) {
        std::mt19937_64 rng(path_seed(cfg.seed, static_cast<std::uint64_t>(path)));
        double S = start.S, alpha = start.alpha, nuU = start.nu_U;
        double qI = start.Q_I, qB = start.Q_B, xB = start.X_B;
        Kahan pen;
        for (long k = 0; k < n; ++k) {
            const double nuI = informed_policy_rate(pol_I, ic, alpha, qI);
            const double nuB = broker_policy_rate(pol_B, bc, qB, qI, nuI, alpha, nuU);
            const double z1 = gauss(rng), z0 = gauss(rng), z2 = gauss(rng);
            const double S2 = S + alpha * sc.psi + sc.l1 * z1 + sc.l0 * z0;
            const double alpha2 = alpha * sc.a_dec + sc.a_sd * z1;
            const double nuU2 = nuU * sc.u_dec + sc.u_sd * z2;
            const double qB2 = qB + (nuB - nuI - nuU) * dt;
            xB += (nuI * (S + kI * nuI) + nuU * (S + kU * nuU) - nuB * (S + kB * nuB)) * dt;
            pen.add((qB * qB + qB * qB2 + qB2 * qB2) / 3.0 * dt);
            qI += nuI * dt;
            qB = qB2;
            S = S2;
            alpha = alpha2;
            nuU = nuU2;
        }
        const double v = xB + qB * S - aB * qB * qB - phiB * pen.s;
        sum.add(v);
        sumsq.add(v * v);
    }
    return make_estimate(sum, sumsq, cfg.n_paths);
}

double broker_day_objective(const ValidatedParams& p, const PathRecord& rec) {
    const double aB = p.broker().a_B, phiB = p.broker().phi_B;
    if (rec.states.size() < 2) throw DataError("path record too short");
    Kahan pen;
    for (std::size_t k = 0; k + 1 < rec.states.size(); ++k) {
        const double q1 = rec.states[k].Q_B, q2 = rec.states[k + 1].Q_B;
        const double dt = rec.states[k + 1].t - rec.states[k].t;
        pen.add((q1 * q1 + q1 * q2 + q2 * q2) / 3.0 * dt);
    }
    const MarketState& last = rec.states.back();
    return last.X_B + last.Q_B * last.S - aB * last.Q_B * last.Q_B - phiB * pen.s;
}

void write_path_csv(const std::string& path, const PathRecord& rec) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open output file: " + path);
    out << "t,S,alpha,nu_U,nu_I,nu_B,Q_I,Q_B,X_I,X_B\n";
    char buf[512];
    for (std::size_t k = 0; k < rec.states.size(); ++k) {
        const auto& s = rec.states[k];
        const bool has_rate = k < rec.nu_I.size();
        std::snprintf(buf, sizeof(buf),
                      "%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n",
                      s.t, s.S, s.alpha, s.nu_U, has_rate ? rec.nu_I[k] : 0.0,
                      has_rate ? rec.nu_B[k] : 0.0, s.Q_I, s.Q_B, s.X_I, s.X_B);
        out << buf;
    }
}

}  // namespace brokersim
