#include "brokersim/calibrator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "brokersim/simulator.hpp"
#include "json.hpp"

namespace brokersim {

namespace {

struct Kahan {
    double s = 0.0, c = 0.0;
    void add(double x) {
        const double y = x - c;
        const double t = s + y;
        c = (t - s) - y;
        s = t;
    }
};

void check_spacing(const Session& day, double delta) {
    if (day.records.size() < 2) throw DataError("session day has no intervals");
    const double tol = 1e-9 * std::max(1.0, delta);
    for (std::size_t j = 1; j < day.records.size(); ++j) {
        const double gap = day.records[j].t - day.records[j - 1].t;
        if (std::abs(gap - delta) > tol)
            throw DataError("irregular record spacing in session");
    }
}

}  // namespace

GridSpec GridSpec::defaults(double delta) {
    GridSpec g;
    g.c_lo = 0.0;
    g.c_hi = 10.0 * delta;
    g.g_lo = -10.0 * delta;
    g.g_hi = 10.0 * delta;
    return g;
}

SessionSet generate_sessions(const ValidatedParams& p, int n_days, double delta,
                             int m_intervals, std::uint64_t seed) {
    if (n_days < 1) throw ConfigError("n_days must be >= 1");
    if (m_intervals < 1) throw ConfigError("m_intervals must be >= 1");
    if (!(delta > 0.0)) throw ConfigError("delta must be positive");

    SimConfig cfg;
    cfg.dt = delta;
    cfg.horizon = m_intervals * delta;
    cfg.n_paths = 1;
    cfg.seed = seed;
    cfg.scheme = Scheme::exact;

    SessionSet out;
    out.delta = delta;
    out.k_I = p.informed().k_I;
    out.k_U = p.broker().k_U;
    out.k_B = p.broker().k_B;
    out.days.resize(n_days);
    for (int d = 0; d < n_days; ++d) {
        const PathRecord rec = simulate_path(p, Policy::optimal(), Policy::constant(0.0),
                                             cfg, static_cast<std::uint64_t>(d));
        Session& day = out.days[d];
        day.records.resize(m_intervals + 1);
        for (int j = 0; j <= m_intervals; ++j) {
            SessionRecord& r = day.records[j];
            r.t = j * delta;
            r.S = rec.states[j].S;
            r.V_I = j > 0 ? rec.nu_I[j - 1] * delta : 0.0;
            r.V_U = j > 0 ? rec.nu_U[j - 1] * delta : 0.0;
        }
    }
    return out;
}

double backtest_day(const SessionSet& meta, const Session& day,
                    const StrategyConstants& k, double a_B, double phi_B) {
    check_spacing(day, meta.delta);
    const double delta = meta.delta;
    double Q_I = 0.0, Q_B = 0.0;
    Kahan X, pen;
    for (std::size_t j = 1; j < day.records.size(); ++j) {
        const double S = day.records[j - 1].S;
        const double V_I = day.records[j].V_I;
        const double V_U = day.records[j].V_U;
        Q_I += V_I;
        const double V_B = -k.c * Q_B - k.g * Q_I + k.h * V_I + k.f * V_U;
        Q_B += -V_I - V_U + V_B;
        X.add(V_I * (S + meta.k_I * V_I / delta));
        X.add(V_U * (S + meta.k_U * V_U / delta));
        X.add(-V_B * (S + meta.k_B * V_B / delta));
        pen.add(Q_B * Q_B * delta);
    }
    const double S_end = day.records.back().S;
    return X.s + Q_B * S_end - a_B * Q_B * Q_B - phi_B * pen.s;
}

BacktestResult evaluate_P(const SessionSet& sessions, const StrategyConstants& k,
                          double a_B, double phi_B) {
    if (sessions.days.empty()) throw DataError("empty session set");
    BacktestResult res;
    Kahan sum, sumsq;
    for (const Session& day : sessions.days) {
        check_spacing(day, sessions.delta);
        // rerun to also capture terminal inventory/cash
        const double delta = sessions.delta;
        double Q_I = 0.0, Q_B = 0.0;
        Kahan X, pen;
        for (std::size_t j = 1; j < day.records.size(); ++j) {
            const double S = day.records[j - 1].S;
            const double V_I = day.records[j].V_I;
            const double V_U = day.records[j].V_U;
            Q_I += V_I;
            const double V_B = -k.c * Q_B - k.g * Q_I + k.h * V_I + k.f * V_U;
            Q_B += -V_I - V_U + V_B;
            X.add(V_I * (S + sessions.k_I * V_I / delta));
            X.add(V_U * (S + sessions.k_U * V_U / delta));
            X.add(-V_B * (S + sessions.k_B * V_B / delta));
            pen.add(Q_B * Q_B * delta);
        }
        const double Pi =
            X.s + Q_B * day.records.back().S - a_B * Q_B * Q_B - phi_B * pen.s;
        res.per_day.push_back(Pi);
        res.terminal_inventory.push_back(Q_B);
        res.terminal_cash.push_back(X.s);
        sum.add(Pi);
        sumsq.add(Pi * Pi);
    }
    const double n = static_cast<double>(res.per_day.size());
    res.P = sum.s / n;
    if (res.per_day.size() > 1) {
        const double var = std::max(0.0, sumsq.s / n - res.P * res.P);
        res.per_day_std_error = std::sqrt(var / (n - 1.0));
    }
    return res;
}

namespace {

// Per-day candidate-independent precomputation: only the broker's own
// trades depend on (c,g,h,f), so client cash settles once.
struct DayCache {
    std::vector<double> S_prev, V_I, V_U, neg_flow, Q_I;
    double client_cash = 0.0;
    double S_end = 0.0;
};

std::vector<DayCache> build_caches(const SessionSet& sessions) {
    std::vector<DayCache> caches;
    caches.reserve(sessions.days.size());
    const double delta = sessions.delta;
    for (const Session& day : sessions.days) {
        check_spacing(day, delta);
        DayCache dc;
        const std::size_t m = day.records.size() - 1;
        dc.S_prev.reserve(m);
        dc.V_I.reserve(m);
        dc.V_U.reserve(m);
        dc.neg_flow.reserve(m);
        dc.Q_I.reserve(m);
        Kahan cash;
        double qI = 0.0;
        for (std::size_t j = 1; j <= m; ++j) {
            const double S = day.records[j - 1].S;
            const double vI = day.records[j].V_I;
            const double vU = day.records[j].V_U;
            qI += vI;
            dc.S_prev.push_back(S);
            dc.V_I.push_back(vI);
            dc.V_U.push_back(vU);
            dc.neg_flow.push_back(-vI - vU);
            dc.Q_I.push_back(qI);
            cash.add(vI * (S + sessions.k_I * vI / delta));
            cash.add(vU * (S + sessions.k_U * vU / delta));
        }
        dc.client_cash = cash.s;
        dc.S_end = day.records.back().S;
        caches.push_back(std::move(dc));
    }
    return caches;
}

double cached_P(const std::vector<DayCache>& caches, const StrategyConstants& k,
                double delta, double kB_over_delta, double a_B, double phi_B) {
    Kahan sum;
    for (const DayCache& dc : caches) {
        const std::size_t m = dc.S_prev.size();
        double Q_B = 0.0, X = 0.0, pen = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            const double V_B =
                -k.c * Q_B - k.g * dc.Q_I[j] + k.h * dc.V_I[j] + k.f * dc.V_U[j];
            Q_B += dc.neg_flow[j] + V_B;
            X -= V_B * (dc.S_prev[j] + kB_over_delta * V_B);
            pen += Q_B * Q_B;
        }
        sum.add(dc.client_cash + X + Q_B * dc.S_end - a_B * Q_B * Q_B -
                phi_B * pen * delta);
    }
    return sum.s / static_cast<double>(caches.size());
}

StrategyConstants project(StrategyConstants k) {
    k.c = std::max(k.c, 0.0);
    k.h = std::max(k.h, 0.0);
    k.f = std::max(k.f, 0.0);
    return k;
}

std::vector<double> axis(double lo, double hi, int n) {
    std::vector<double> v;
    if (n <= 1 || hi <= lo) {
        v.push_back(lo);
        return v;
    }
    for (int i = 0; i < n; ++i) v.push_back(lo + (hi - lo) * i / (n - 1));
    return v;
}

using Point = std::array<double, 4>;

StrategyConstants to_k(const Point& x) { return {x[0], x[1], x[2], x[3]}; }
Point to_point(const StrategyConstants& k) { return {k.c, k.g, k.h, k.f}; }

double diameter(const std::vector<Point>& simplex) {
    double d = 0.0;
    for (std::size_t i = 0; i < simplex.size(); ++i)
        for (std::size_t j = i + 1; j < simplex.size(); ++j)
            for (int a = 0; a < 4; ++a)
                d = std::max(d, std::abs(simplex[i][a] - simplex[j][a]));
    return d;
}

}  // namespace

OptResult optimize_objective(const std::function<double(const StrategyConstants&)>& obj,
                             const GridSpec& grid, const StrategyConstants& init,
                             OptMethod method) {
    OptResult res;
    bool have_best = false;
    const auto eval = [&](const StrategyConstants& k) {
        const double v = obj(k);
        res.trace.emplace_back(k, v);
        if (!have_best || v > res.P_best) {
            res.P_best = v;
            res.best = k;
            have_best = true;
        }
        return v;
    };

    if (method == OptMethod::grid || method == OptMethod::grid_then_simplex) {
        res.method = method == OptMethod::grid ? "grid" : "grid_then_simplex";
        bool any_feasible = false;
        for (double c : axis(grid.c_lo, grid.c_hi, grid.n_c))
            for (double g : axis(grid.g_lo, grid.g_hi, grid.n_g))
                for (double h : axis(grid.h_lo, grid.h_hi, grid.n_h))
                    for (double f : axis(grid.f_lo, grid.f_hi, grid.n_f)) {
                        if (c < 0.0 || h < 0.0 || f < 0.0) continue;
                        any_feasible = true;
                        eval({c, g, h, f});
                    }
        if (!any_feasible) throw OptError("grid box contains no feasible candidate");
        if (method == OptMethod::grid) return res;
    } else {
        res.method = "simplex";
        eval(project(init));
    }

    // Downhill simplex (maximizing), candidates projected onto c,h,f >= 0.
    const Point x0 = to_point(res.best);
    const double spans[4] = {grid.c_hi - grid.c_lo, grid.g_hi - grid.g_lo,
                             grid.h_hi - grid.h_lo, grid.f_hi - grid.f_lo};
    std::vector<Point> simplex{x0};
    std::vector<double> fv{res.P_best};
    for (int a = 0; a < 4; ++a) {
        Point x = x0;
        const double step =
            spans[a] > 0.0 ? 0.05 * spans[a] : std::max(0.1 * std::abs(x[a]), 1e-3);
        x[a] += step;
        simplex.push_back(to_point(project(to_k(x))));
        fv.push_back(eval(to_k(simplex.back())));
    }

    const double alpha = 1.0, gamma = 2.0, rho = 0.5, sigma = 0.5;
    for (int it = 0; it < 500 && diameter(simplex) >= 1e-6; ++it) {
        std::array<int, 5> order{0, 1, 2, 3, 4};
        std::sort(order.begin(), order.end(), [&](int i, int j) { return fv[i] > fv[j]; });
        std::vector<Point> sx(5);
        std::vector<double> sf(5);
        for (int i = 0; i < 5; ++i) {
            sx[i] = simplex[order[i]];
            sf[i] = fv[order[i]];
        }
        simplex = sx;
        fv = sf;

        Point centroid{};
        for (int i = 0; i < 4; ++i)
            for (int a = 0; a < 4; ++a) centroid[a] += simplex[i][a] / 4.0;

        const auto affine = [&](double t) {
            Point x;
            for (int a = 0; a < 4; ++a) x[a] = centroid[a] + t * (centroid[a] - simplex[4][a]);
            return to_point(project(to_k(x)));
        };

        const Point xr = affine(alpha);
        const double fr = eval(to_k(xr));
        if (fr > fv[0]) {
            const Point xe = affine(gamma);
            const double fe = eval(to_k(xe));
            if (fe > fr) {
                simplex[4] = xe;
                fv[4] = fe;
            } else {
                simplex[4] = xr;
                fv[4] = fr;
            }
        } else if (fr > fv[3]) {
            simplex[4] = xr;
            fv[4] = fr;
        } else {
            const Point xc = affine(-rho);
            const double fc = eval(to_k(xc));
            if (fc > fv[4]) {
                simplex[4] = xc;
                fv[4] = fc;
            } else {
                for (int i = 1; i < 5; ++i) {
                    Point x;
                    for (int a = 0; a < 4; ++a)
                        x[a] = simplex[0][a] + sigma * (simplex[i][a] - simplex[0][a]);
                    simplex[i] = to_point(project(to_k(x)));
                    fv[i] = eval(to_k(simplex[i]));
                }
            }
        }
    }
    return res;
}

OptResult optimize(const SessionSet& sessions, const StrategyConstants& init,
                   OptMethod method, const GridSpec& grid, double a_B, double phi_B) {
    const std::vector<DayCache> caches = build_caches(sessions);
    const double kB_over_delta = sessions.k_B / sessions.delta;
    const auto obj = [&](const StrategyConstants& k) {
        return cached_P(caches, k, sessions.delta, kB_over_delta, a_B, phi_B);
    };
    return optimize_objective(obj, grid, init, method);
}

void write_sessions(const std::string& csv_path, const SessionSet& sessions) {
    std::ofstream out(csv_path);
    if (!out) throw ConfigError("cannot open output file: " + csv_path);
    out << "day,t,S,V_I,V_U\n";
    char buf[256];
    for (std::size_t d = 0; d < sessions.days.size(); ++d) {
        for (const SessionRecord& r : sessions.days[d].records) {
            std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g\n", d + 1, r.t,
                          r.S, r.V_I, r.V_U);
            out << buf;
        }
    }
    nlohmann::json meta = {{"delta", sessions.delta},
                           {"k_I", sessions.k_I},
                           {"k_U", sessions.k_U},
                           {"k_B", sessions.k_B}};
    std::ofstream mout(csv_path + ".meta.json");
    if (!mout) throw ConfigError("cannot open output file: " + csv_path + ".meta.json");
    mout << meta.dump(2) << "\n";
}

SessionSet read_sessions(const std::string& csv_path) {
    std::ifstream meta_in(csv_path + ".meta.json");
    if (!meta_in) throw DataError("missing session metadata: " + csv_path + ".meta.json");
    nlohmann::json meta;
    try {
        meta_in >> meta;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("bad session metadata: ") + e.what());
    }
    SessionSet out;
    try {
        out.delta = meta.at("delta").get<double>();
        out.k_I = meta.at("k_I").get<double>();
        out.k_U = meta.at("k_U").get<double>();
        out.k_B = meta.at("k_B").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("incomplete session metadata: ") + e.what());
    }

    std::ifstream in(csv_path);
    if (!in) throw DataError("cannot open session file: " + csv_path);
    std::string line;
    if (!std::getline(in, line) || line != "day,t,S,V_I,V_U")
        throw DataError("bad session header, expected day,t,S,V_I,V_U");
    long current_day = -1;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        long day;
        SessionRecord r;
        char c1, c2, c3, c4;
        if (!(ss >> day >> c1 >> r.t >> c2 >> r.S >> c3 >> r.V_I >> c4 >> r.V_U) ||
            c1 != ',' || c2 != ',' || c3 != ',' || c4 != ',')
            throw DataError("bad session row: " + line);
        if (day != current_day) {
            if (day != current_day + 1 && current_day != -1)
                throw DataError("non-contiguous day numbering in session file");
            out.days.emplace_back();
            current_day = day;
        }
        out.days.back().records.push_back(r);
    }
    if (out.days.empty()) throw DataError("session file has no records");
    return out;
}

}  // namespace brokersim
