// Acceptance suite: one pass/fail line per criterion, exit code = number
// of failed criteria. Tolerances and budgets are pinned in-line.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "brokersim/calibrator.hpp"
#include "brokersim/closed_form.hpp"
#include "brokersim/experiments.hpp"
#include "brokersim/simulator.hpp"

using namespace brokersim;

namespace {

int g_failures = 0;

void report(int n, bool ok, const std::string& what, double secs) {
    if (!ok) ++g_failures;
    std::printf("%s criterion %d: %s  [%.1f s]\n", ok ? "PASS" : "FAIL", n, what.c_str(),
                secs);
    std::fflush(stdout);
}

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double secs() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

ValidatedParams baseline() { return validate(example_params()); }

// Same draw law as the unit identity/sign suite: b >= 0 and a_I, a_B
// bounded away from zero, the regime in which the sign claims hold.
ModelParams random_params(std::mt19937_64& rng) {
    auto unif = [&](double lo, double hi) {
        return lo + (hi - lo) * std::uniform_real_distribution<double>{}(rng);
    };
    auto logu = [&](double lo, double hi) {
        return std::exp(unif(std::log(lo), std::log(hi)));
    };
    ModelParams p;
    p.market.S0 = unif(10.0, 200.0);
    p.market.alpha0 = unif(-1.0, 1.0);
    p.market.kappa_alpha = unif(0.1, 20.0);
    p.market.sigma_alpha = unif(0.1, 2.0);
    p.market.sigma_s = unif(0.0, 2.0);
    p.informed.k_I = logu(1e-4, 1e-2);
    p.informed.a_I = unif(0.1, 2.0);
    p.informed.phi_I = logu(1e-4, 1e-1);
    p.informed.beta = logu(1e-3, 1e-1);
    p.broker.beta = p.informed.beta;
    p.broker.k_B = logu(1e-4, 1e-2);
    p.broker.k_U = logu(1e-4, 1e-2);
    p.broker.a_B = unif(0.1, 2.0);
    p.broker.phi_B = logu(1e-4, 1e-1);
    p.broker.b = unif(0.0, 1.5 * p.broker.a_B);
    p.flow.nu_U0 = unif(-10.0, 10.0);
    p.flow.kappa_u = unif(0.1, 30.0);
    p.flow.sigma_U = unif(0.0, 200.0);
    return p;
}

bool close_rel(double a, double b, double tol) {
    return std::abs(a - b) <= tol * std::max({std::abs(a), std::abs(b), 1e-300});
}

// ---------------------------------------------------------------- 1
void criterion1() {
    Timer tm;
    bool ok = true;
    std::mt19937_64 rng(20240901);
    for (int draw = 0; draw < 100 && ok; ++draw) {
        const ValidatedParams p = validate(random_params(rng));
        const double kI = p.informed().k_I, aI = p.informed().a_I;
        const double kB = p.broker().k_B, aB = p.broker().a_B, b = p.broker().b;
        const InformedCoefficients ic = solve_informed(p);
        const BrokerCoefficients bc = solve_broker(p, ic);
        ok = ok && close_rel(ic.g1, 4.0 * kI * ic.A, 1e-12);
        ok = ok && close_rel(ic.B, (2.0 * aI - ic.h2) / (2.0 * kI), 1e-12);
        ok = ok && close_rel(2.0 * kB * bc.C, 2.0 * aB - b - bc.q2, 1e-12);
        ok = ok && close_rel(bc.D, -bc.d1 / (4.0 * kB), 1e-12);
        ok = ok && close_rel(bc.E, bc.d0 / (4.0 * kB), 1e-12);
        ok = ok && close_rel(bc.F, bc.d2 / (4.0 * kB), 1e-12);
        ok = ok && close_rel(bc.G, bc.D - ic.B * bc.E / ic.A, 1e-12);
        ok = ok && close_rel(bc.H, bc.E / ic.A, 1e-12);
        ok = ok && ic.A > 0.0 && ic.B > 0.0;
        ok = ok && bc.C > 0.0 && bc.D > 0.0 && bc.E > 0.0 && bc.F > 0.0 && bc.H > 0.0;
        ok = ok && bc.d1 < 0.0 && bc.d2 > 0.0 && bc.d0 > 0.0;
    }
    const double secs = tm.secs();
    report(1, ok && secs < 1.0,
           "closed-form identities to 1e-12 and signs over 100 random draws (< 1 s)", secs);
}

// ---------------------------------------------------------------- 2
void criterion2() {
    Timer tm;
    bool ok = true;
    double worst = 0.0;
    auto check_set = [&](const ValidatedParams& p, std::mt19937_64& rng) {
        const InformedCoefficients ic = solve_informed(p);
        const BrokerCoefficients bc = solve_broker(p, ic);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (int s = 0; s < 1000; ++s) {
            const double x = 10.0 * u(rng), S = p.market().S0 * (1.0 + 0.2 * u(rng));
            const double alpha = 2.0 * u(rng), qI = 5.0 * u(rng), qB = 5.0 * u(rng);
            const double nuU = 50.0 * u(rng);
            const double rI = std::abs(hjb_residual_informed(p, ic, x, S, alpha, qI));
            const double rB =
                std::abs(hjb_residual_broker(p, ic, bc, x, S, alpha, qB, qI, nuU));
            worst = std::max({worst, rI, rB});
        }
    };
    std::mt19937_64 rng(777);
    check_set(baseline(), rng);
    for (int draw = 0; draw < 100; ++draw) check_set(validate(random_params(rng)), rng);
    ok = worst < 1e-9;
    const double secs = tm.secs();
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "HJB residuals < 1e-9 at 1e3 states, baseline + 100 draws (max %.3g)",
                  worst);
    report(2, ok && secs < 10.0, buf, secs);
}

// ---------------------------------------------------------------- 3
SimConfig budget_config() {
    SimConfig cfg;
    cfg.dt = 1e-2;
    cfg.horizon = 1382.0;  // e^{-beta*T} <= 1e-6 at beta = 1e-2
    cfg.n_paths = 2000;
    cfg.seed = 0;
    cfg.scheme = Scheme::exact;
    return cfg;
}

void criterion3() {
    Timer tm;
    const ValidatedParams p = baseline();
    const InformedCoefficients ic = solve_informed(p);
    const BrokerCoefficients bc = solve_broker(p, ic);
    const SimConfig cfg = budget_config();
    const Estimate ei = estimate_informed_performance(p, cfg, Policy::optimal());
    const Estimate eb = estimate_broker_performance(p, cfg, Policy::optimal(),
                                                    Policy::optimal());
    // CI width = 1.96 * std error; accept within two widths
    const double wi = 2.0 * 1.96 * ei.std_error, wb = 2.0 * 1.96 * eb.std_error;
    const bool ok_i = std::abs(ei.mean - ic.f0) <= wi;
    const bool ok_b = std::abs(eb.mean - bc.c0) <= wb;
    const double secs = tm.secs();
    char buf[240];
    std::snprintf(buf, sizeof buf,
                  "MC vs closed form: informed %.4f vs f0 %.4f (tol %.3f), broker %.4f vs "
                  "c0 %.4f (tol %.3f)",
                  ei.mean, ic.f0, wi, eb.mean, bc.c0, wb);
    report(3, ok_i && ok_b && secs < 300.0, buf, secs);
}

// ---------------------------------------------------------------- 4
void criterion4() {
    Timer tm;
    const ValidatedParams p = baseline();
    const PerturbationReport rep = perturbation_report(p, budget_config(), {0.8, 1.2});
    bool ok = rep.rows.size() == 8;
    for (const auto& row : rep.rows) ok = ok && row.lower_95;
    const double secs = tm.secs();
    report(4, ok && secs < 600.0,
           "each of C,D,E,F scaled by 0.8/1.2 underperforms the optimum (one-sided 95%)",
           secs);
}

// ---------------------------------------------------------------- 5
void criterion5() {
    Timer tm;
    const ValidatedParams p = baseline();
    const InformedCoefficients ic = solve_informed(p);
    const BrokerCoefficients bc = solve_broker(p, ic);
    const double delta = 1e-3;
    const SessionSet sessions = generate_sessions(p, 200, delta, 1000, /*seed=*/0);
    const double a_B = p.broker().a_B, phi_B = p.broker().phi_B;
    const OptResult res = optimize(sessions, StrategyConstants{}, OptMethod::grid_then_simplex,
                                   GridSpec::defaults(delta), a_B, phi_B);
    const StrategyConstants theo{bc.C * delta, bc.G * delta, bc.H, bc.F};
    const BacktestResult bt = evaluate_P(sessions, theo, a_B, phi_B);
    const bool ok_h = std::abs(res.best.h - bc.H) <= 0.1 * bc.H;
    const bool ok_f = std::abs(res.best.f - bc.F) <= 0.1 * bc.F;
    const bool ok_p = res.P_best >= bt.P - bt.per_day_std_error;
    const double secs = tm.secs();
    char buf[240];
    std::snprintf(buf, sizeof buf,
                  "calibration recovery: h %.4f vs %.4f, f %.4f vs %.4f, P_best %.3f vs "
                  "theoretical %.3f (se %.3f)",
                  res.best.h, bc.H, res.best.f, bc.F, res.P_best, bt.P,
                  bt.per_day_std_error);
    report(5, ok_h && ok_f && ok_p && secs < 900.0, buf, secs);
}

// ---------------------------------------------------------------- 6
void criterion6() {
    Timer tm;
    const Fig4Table t = figure4_curve(baseline(), default_ratio_grid());
    const bool ok = t.argmax_ratio >= 0.50 && t.argmax_ratio <= 0.70;
    const double secs = tm.secs();
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "broker value over k_I = k_U peaks at %.2f * k_B (target [0.50, 0.70])",
                  t.argmax_ratio);
    report(6, ok && secs < 5.0, buf, secs);
}

// ---------------------------------------------------------------- 7
void criterion7() {
    Timer tm;
    const ValidatedParams p = baseline();
    const MonotonicityReport mono = monotonicity_report(p);

    SweepSpec spec;
    spec.target = SweepTarget::broker_value;
    spec.base = p.get();
    const double kB = p.broker().k_B;
    spec.axis1 = {"k_U", 0.1 * kB, 1.0 * kB, 10, false};
    spec.axis2 = {"k_I", 0.1 * kB, 1.0 * kB, 10, false};
    const SurfaceTable surf = run_sweep(spec);
    bool pos = false, neg = false;
    for (const auto& r : surf.rows) {
        if (r.status != "ok") continue;
        (r.value > 0.0 ? pos : neg) = true;
    }
    const double secs = tm.secs();
    report(7, mono.all_pass && pos && neg && secs < 10.0,
           "value-function monotonicities hold and the ratio-box surface has both signs",
           secs);
}

// ---------------------------------------------------------------- 8
void criterion8() {
    Timer tm;
    bool ok = true;

    ModelParams raw = example_params();
    raw.informed.a_I = 0.0;
    raw.informed.phi_I = 0.0;
    ok = ok && solve_informed(validate(raw)).B == 0.0;

    raw = example_params();
    raw.broker.k_U = raw.broker.k_B;
    raw.flow.elasticity_enabled = true;
    ok = ok && flow_diffusion(validate(raw)) == 0.0;

    // zero noise: the path is deterministic (independent of path index) and,
    // from the zero state, exactly constant
    raw = example_params();
    raw.market.sigma_alpha = 0.0;
    raw.market.sigma_s = 0.0;
    raw.flow.sigma_U = 0.0;
    const ValidatedParams pz = validate(raw);
    SimConfig cfg;
    cfg.dt = 1e-2;
    cfg.horizon = 2.0;
    const PathRecord a = simulate_path(pz, Policy::optimal(), Policy::optimal(), cfg, 0);
    const PathRecord b = simulate_path(pz, Policy::optimal(), Policy::optimal(), cfg, 17);
    for (size_t i = 0; i < a.states.size() && ok; ++i) {
        ok = ok && a.states[i].S == b.states[i].S && a.states[i].alpha == b.states[i].alpha &&
             a.states[i].Q_B == b.states[i].Q_B && a.states[i].X_B == b.states[i].X_B;
        ok = ok && a.states[i].S == pz.market().S0 && a.states[i].alpha == 0.0 &&
             a.states[i].nu_U == 0.0 && a.states[i].Q_I == 0.0 && a.states[i].Q_B == 0.0 &&
             a.states[i].X_I == 0.0 && a.states[i].X_B == 0.0;
    }
    report(8, ok, "trivial limits are exact (B = 0, flow shutoff, zero-noise trajectory)",
           tm.secs());
}

}  // namespace

int main() {
    criterion1();
    criterion2();
    criterion3();
    criterion4();
    criterion5();
    criterion6();
    criterion7();
    criterion8();
    std::printf("%d of 8 criteria passed\n", 8 - g_failures);
    return g_failures == 0 ? 0 : 1;
}
