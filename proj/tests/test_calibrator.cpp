#include <algorithm>
#include <cmath>
#include <cstdio>

#include "doctest.h"

#include "brokersim/calibrator.hpp"
#include "brokersim/closed_form.hpp"
#include "brokersim/simulator.hpp"

using namespace brokersim;

namespace {

ValidatedParams baseline() { return validate(example_params()); }

SessionSet one_day_set(double delta, std::vector<SessionRecord> records) {
    SessionSet s;
    s.delta = delta;
    s.k_I = 1e-3;
    s.k_U = 1e-3;
    s.k_B = 1.2e-3;
    Session day;
    day.records = std::move(records);
    s.days.push_back(day);
    return s;
}

}  // namespace

TEST_CASE("generate_sessions: determinism and shape") {
    const ValidatedParams p = baseline();
    const SessionSet a = generate_sessions(p, 3, 1e-3, 100, 42);
    const SessionSet b = generate_sessions(p, 3, 1e-3, 100, 42);
    REQUIRE(a.days.size() == 3);
    REQUIRE(a.days[0].records.size() == 101);
    CHECK(a.days[0].records[0].t == 0.0);
    CHECK(a.days[0].records[0].V_I == 0.0);
    CHECK(a.days[0].records[0].V_U == 0.0);
    CHECK(a.days[0].records[0].S == 100.0);
    for (std::size_t d = 0; d < 3; ++d)
        for (std::size_t j = 0; j < a.days[d].records.size(); ++j) {
            CHECK(a.days[d].records[j].S == b.days[d].records[j].S);
            CHECK(a.days[d].records[j].V_I == b.days[d].records[j].V_I);
            CHECK(a.days[d].records[j].V_U == b.days[d].records[j].V_U);
        }
    // different days are genuinely different
    CHECK(a.days[0].records[50].S != a.days[1].records[50].S);
}

TEST_CASE("generate_sessions: no noise, no flow") {
    ModelParams raw = example_params();
    raw.market.sigma_alpha = 0.0;
    raw.flow.sigma_U = 0.0;
    const SessionSet s = generate_sessions(validate(raw), 2, 1e-3, 50, 0);
    for (const Session& day : s.days)
        for (const SessionRecord& r : day.records) {
            CHECK(r.V_I == 0.0);
            CHECK(r.V_U == 0.0);
        }
}

TEST_CASE("generate_sessions: informed volume is centered") {
    const ValidatedParams p = baseline();
    const SessionSet s = generate_sessions(p, 50, 1e-3, 1000, 0);
    // volumes are autocorrelated within a day; days are independent, so
    // test the grand mean against the across-day spread of day means
    std::vector<double> day_means;
    for (const Session& day : s.days) {
        double sum = 0.0;
        for (std::size_t j = 1; j < day.records.size(); ++j) sum += day.records[j].V_I;
        day_means.push_back(sum / double(day.records.size() - 1));
    }
    double mean = 0.0, var = 0.0;
    for (double m : day_means) mean += m;
    mean /= double(day_means.size());
    for (double m : day_means) var += (m - mean) * (m - mean);
    var /= double(day_means.size() - 1);
    const double se = std::sqrt(var / double(day_means.size()));
    CHECK(std::abs(mean) < 3.0 * se);
}

TEST_CASE("backtest_day: hand-computed single-interval oracle") {
    // V_I = 1 fully externalized (h=1): P = (k_I - k_B)/delta < 0
    const double delta = 0.5;
    SessionSet s = one_day_set(delta, {{0.0, 100.0, 0.0, 0.0}, {delta, 100.0, 1.0, 0.0}});
    const double P = backtest_day(s, s.days[0], {0.0, 0.0, 1.0, 0.0}, 1.0, 1e-2);
    CHECK(P == doctest::Approx((s.k_I - s.k_B) / delta).epsilon(1e-12));
}

TEST_CASE("backtest_day: all-zero volumes do nothing") {
    SessionSet s = one_day_set(0.1, {{0.0, 100.0, 0.0, 0.0},
                                     {0.1, 101.0, 0.0, 0.0},
                                     {0.2, 99.0, 0.0, 0.0}});
    CHECK(backtest_day(s, s.days[0], {3.0, -1.0, 0.5, 0.25}, 1.0, 1e-2) == 0.0);
}

TEST_CASE("backtest_day: passive broker accumulates the uninformed flow") {
    const double delta = 0.25;
    SessionSet s = one_day_set(
        delta, {{0.0, 100.0, 0.0, 0.0}, {0.25, 102.0, 0.0, 2.0}, {0.5, 101.0, 0.0, -1.0}});
    const double a_B = 1.0, phi_B = 1e-2;
    const double P = backtest_day(s, s.days[0], {0.0, 0.0, 0.0, 0.0}, a_B, phi_B);
    // hand-rolled accumulation with V_B = 0 every interval
    double Q = 0.0, X = 0.0, pen = 0.0;
    for (std::size_t j = 1; j < 3; ++j) {
        const double S = s.days[0].records[j - 1].S;
        const double vU = s.days[0].records[j].V_U;
        Q -= vU;
        X += vU * (S + s.k_U * vU / delta);
        pen += Q * Q * delta;
    }
    CHECK(P == doctest::Approx(X + Q * 101.0 - a_B * Q * Q - phi_B * pen).epsilon(1e-12));
}

TEST_CASE("backtest_day rejects irregular spacing") {
    SessionSet s = one_day_set(0.1, {{0.0, 100.0, 0.0, 0.0},
                                     {0.1, 100.0, 0.0, 0.0},
                                     {0.35, 100.0, 0.0, 0.0}});
    CHECK_THROWS_AS(backtest_day(s, s.days[0], {0, 0, 0, 0}, 1.0, 1e-2), DataError);
}

TEST_CASE("evaluate_P: mean semantics") {
    const ValidatedParams p = baseline();
    SessionSet s = generate_sessions(p, 4, 1e-3, 200, 9);
    const StrategyConstants k{1e-3, 0.0, 1.0, 0.2};
    const BacktestResult r = evaluate_P(s, k, 1.0, 1e-2);
    REQUIRE(r.per_day.size() == 4);
    double mean = 0.0;
    for (double v : r.per_day) mean += v;
    CHECK(r.P == doctest::Approx(mean / 4.0).epsilon(1e-12));
    CHECK(r.per_day[0] == doctest::Approx(backtest_day(s, s.days[0], k, 1.0, 1e-2)));

    // one day -> P = P^1; duplication leaves the mean unchanged
    SessionSet single = s;
    single.days = {s.days[0]};
    CHECK(evaluate_P(single, k, 1.0, 1e-2).P == doctest::Approx(r.per_day[0]));
    SessionSet doubled = single;
    doubled.days.push_back(s.days[0]);
    CHECK(evaluate_P(doubled, k, 1.0, 1e-2).P ==
          doctest::Approx(evaluate_P(single, k, 1.0, 1e-2).P).epsilon(1e-12));

    // reordering days leaves P unchanged
    SessionSet shuffled = s;
    std::reverse(shuffled.days.begin(), shuffled.days.end());
    CHECK(evaluate_P(shuffled, k, 1.0, 1e-2).P == doctest::Approx(r.P).epsilon(1e-12));
}

TEST_CASE("session CSV round trip") {
    const ValidatedParams p = baseline();
    const SessionSet s = generate_sessions(p, 2, 1e-3, 25, 5);
    const char* path = "sessions_roundtrip.csv";
    write_sessions(path, s);
    const SessionSet r = read_sessions(path);
    CHECK(r.delta == s.delta);
    CHECK(r.k_I == s.k_I);
    CHECK(r.k_B == s.k_B);
    REQUIRE(r.days.size() == s.days.size());
    for (std::size_t d = 0; d < s.days.size(); ++d) {
        REQUIRE(r.days[d].records.size() == s.days[d].records.size());
        for (std::size_t j = 0; j < s.days[d].records.size(); ++j) {
            CHECK(r.days[d].records[j].S == s.days[d].records[j].S);
            CHECK(r.days[d].records[j].V_I == s.days[d].records[j].V_I);
            CHECK(r.days[d].records[j].V_U == s.days[d].records[j].V_U);
        }
    }
    std::remove(path);
    std::remove("sessions_roundtrip.csv.meta.json");

    CHECK_THROWS_AS(read_sessions("no_such_sessions.csv"), DataError);
}

TEST_CASE("optimizer recovers a fabricated quadratic optimum") {
    const StrategyConstants target{2e-3, -1e-3, 1.1, 0.3};
    const auto obj = [&](const StrategyConstants& k) {
        const double dc = k.c - target.c, dg = k.g - target.g;
        const double dh = k.h - target.h, df = k.f - target.f;
        return -(dc * dc + dg * dg + dh * dh + df * df);
    };
    GridSpec grid = GridSpec::defaults(1e-3);
    const OptResult res =
        optimize_objective(obj, grid, StrategyConstants{}, OptMethod::grid_then_simplex);
    CHECK(std::abs(res.best.c - target.c) < 1e-4);
    CHECK(std::abs(res.best.g - target.g) < 1e-4);
    CHECK(std::abs(res.best.h - target.h) < 1e-4);
    CHECK(std::abs(res.best.f - target.f) < 1e-4);
    CHECK(res.P_best == doctest::Approx(obj(res.best)));
    // P_best is the max over the trace
    for (const auto& [k, v] : res.trace) CHECK(v <= res.P_best);
}

TEST_CASE("optimizer respects the sign constraints") {
    // optimum of the unconstrained quadratic sits at negative h
    const auto obj = [&](const StrategyConstants& k) {
        return -(k.h + 1.0) * (k.h + 1.0) - k.c * k.c - k.g * k.g - k.f * k.f;
    };
    GridSpec grid = GridSpec::defaults(1e-3);
    const OptResult res =
        optimize_objective(obj, grid, StrategyConstants{}, OptMethod::grid_then_simplex);
    for (const auto& [k, v] : res.trace) {
        CHECK(k.c >= 0.0);
        CHECK(k.h >= 0.0);
        CHECK(k.f >= 0.0);
    }
    CHECK(res.best.h == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("degenerate grid box returns the single candidate") {
    const auto obj = [](const StrategyConstants& k) { return -k.c; };
    GridSpec grid;
    grid.c_lo = grid.c_hi = 1e-3;
    grid.g_lo = grid.g_hi = 0.0;
    grid.h_lo = grid.h_hi = 1.0;
    grid.f_lo = grid.f_hi = 0.5;
    grid.n_c = grid.n_g = grid.n_h = grid.n_f = 1;
    const OptResult res =
        optimize_objective(obj, grid, StrategyConstants{}, OptMethod::grid);
    CHECK(res.best.c == 1e-3);
    CHECK(res.best.h == 1.0);
    CHECK(res.P_best == doctest::Approx(-1e-3));
}

TEST_CASE("infeasible grid box raises OptError") {
    const auto obj = [](const StrategyConstants&) { return 0.0; };
    GridSpec grid;
    grid.c_lo = grid.c_hi = -1.0;  // c < 0 everywhere
    grid.h_lo = grid.h_hi = 1.0;
    grid.f_lo = grid.f_hi = 0.5;
    grid.n_c = grid.n_g = grid.n_h = grid.n_f = 1;
    CHECK_THROWS_AS(optimize_objective(obj, grid, StrategyConstants{}, OptMethod::grid),
                    OptError);
}

TEST_CASE("backtest P agrees with the continuous one-day criterion as delta shrinks") {
    const ValidatedParams p = baseline();
    const InformedCoefficients ic = solve_informed(p);
    const BrokerCoefficients bc = solve_broker(p, ic);
    // broker runs the theoretical flow-form strategy in both worlds
    const Policy pol_B = Policy::custom(bc.C, bc.G, bc.H, bc.F);

    SimConfig fine;
    fine.dt = 1e-4;
    fine.horizon = 1.0;
    fine.discount_tail_tol = 1.0;
    const PathRecord rec = simulate_path(p, Policy::optimal(), pol_B, fine, 11);
    const double continuous = broker_day_objective(p, rec);

    const auto backtest_at = [&](double delta) {
        const int stride = static_cast<int>(std::lround(delta / fine.dt));
        const int m = static_cast<int>(rec.nu_I.size()) / stride;
        SessionSet s;
        s.delta = delta;
        s.k_I = p.informed().k_I;
        s.k_U = p.broker().k_U;
        s.k_B = p.broker().k_B;
        Session day;
        day.records.push_back({0.0, rec.states[0].S, 0.0, 0.0});
        for (int j = 1; j <= m; ++j) {
            double vI = 0.0, vU = 0.0;
            for (int i = (j - 1) * stride; i < j * stride; ++i) {
                vI += rec.nu_I[i] * fine.dt;
                vU += rec.nu_U[i] * fine.dt;
            }
            day.records.push_back({j * delta, rec.states[j * stride].S, vI, vU});
        }
        s.days.push_back(day);
        const StrategyConstants k{bc.C * delta, bc.G * delta, bc.H, bc.F};
        return backtest_day(s, s.days[0], k, p.broker().a_B, p.broker().phi_B);
    };

    const double err_coarse = std::abs(backtest_at(1e-2) - continuous);
    const double err_fine = std::abs(backtest_at(1e-3) - continuous);
    CHECK(err_fine < err_coarse);
}

TEST_CASE("theoretical constants: backtest P matches the continuous simulator") {
    const ValidatedParams p = baseline();
    const InformedCoefficients ic = solve_informed(p);
    const BrokerCoefficients bc = solve_broker(p, ic);
    const double delta = 1e-3;
    const SessionSet s = generate_sessions(p, 100, delta, 1000, 21);
    const StrategyConstants k{bc.C * delta, bc.G * delta, bc.H, bc.F};
    const BacktestResult bt = evaluate_P(s, k, p.broker().a_B, p.broker().phi_B);

    SimConfig cfg;
    cfg.dt = delta;
    cfg.horizon = 1.0;
    cfg.n_paths = 400;
    cfg.seed = 77;
    cfg.discount_tail_tol = 1.0;
    const Policy pol_B = Policy::custom(bc.C, bc.G, bc.H, bc.F);
    const Estimate cont = estimate_broker_day_objective(p, cfg, Policy::optimal(), pol_B);

    const double tol = 2.0 * (bt.per_day_std_error + cont.std_error);
    CHECK(std::abs(bt.P - cont.mean) < tol);
}
