#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "brokersim/calibrator.hpp"
#include "brokersim/closed_form.hpp"
#include "brokersim/experiments.hpp"
#include "brokersim/params.hpp"
#include "brokersim/simulator.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace brokersim;

namespace {

struct Common {
    std::string params_file;
    std::vector<std::string> overrides;
    std::uint64_t seed = 0;  // fixed default so every run is reproducible
    std::string out_dir = "out";
    int threads = 1;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--params", c.params_file, "parameter config file (key = value)");
    cmd->add_option("--override", c.overrides, "parameter override key=value")
        ->take_all();
    cmd->add_option("--seed", c.seed, "RNG seed (default 0)");
    cmd->add_option("--out-dir", c.out_dir, "output directory (default ./out)");
    cmd->add_option("--threads", c.threads, "worker cap (current build is sequential)");
}

ModelParams resolve_params(const Common& c) {
    ModelParams raw = c.params_file.empty() ? example_params()
                                            : load_params_file(c.params_file);
    for (const std::string& ov : c.overrides) {
        const auto eq = ov.find('=');
        if (eq == std::string::npos)
            throw ConfigError("override must be key=value: " + ov);
        apply_override(raw, ov.substr(0, eq), ov.substr(eq + 1));
    }
    return raw;
}

void print_header(const ModelParams& raw, const Common& c) {
    std::cout << "# resolved configuration (seed=" << c.seed << ", out_dir=" << c.out_dir
              << ")\n";
    for (const auto& [k, v] : params_as_map(raw)) std::cout << "# " << k << " = " << v << "\n";
}

fs::path out_path(const Common& c, const std::string& name) {
    fs::create_directories(c.out_dir);
    return fs::path(c.out_dir) / name;
}

json coeffs_json(const ValidatedParams& p, const InformedCoefficients& ic,
                 const BrokerCoefficients& bc) {
    json j;
    j["b"] = p.broker().b;
    j["informed"] = {{"A", ic.A},   {"B", ic.B},   {"h2", ic.h2}, {"g1", ic.g1},
                     {"f0", ic.f0}, {"f1", ic.f1}, {"f2", ic.f2}};
    j["broker"] = {{"q2", bc.q2}, {"C", bc.C},   {"D", bc.D},   {"E", bc.E},
                   {"F", bc.F},   {"G", bc.G},   {"H", bc.H},   {"d0", bc.d0},
                   {"d1", bc.d1}, {"d2", bc.d2}, {"f2", bc.f2b}, {"e1", bc.e1},
                   {"e2", bc.e2}, {"c0", bc.c0}, {"c1", bc.c1}, {"c2", bc.c2},
                   {"c3", bc.c3}, {"c4", bc.c4}, {"c5", bc.c5}};
    j["g_sign_identity"] = bc.g_sign_identity;
    j["resolved_coefficients"] = bc.resolved;
    return j;
}

void print_estimate(const char* label, const Estimate& e) {
    std::printf("%s: mean=%.6f std_error=%.6f n=%ld ci95=[%.6f, %.6f]\n", label, e.mean,
                e.std_error, e.n, e.ci95.first, e.ci95.second);
}

int cmd_coeffs(const Common& c) {
    const ModelParams raw = resolve_params(c);
    print_header(raw, c);
    const ValidatedParams p = validate(raw);
    const InformedCoefficients ic = solve_informed(p);
    const BrokerCoefficients bc = solve_broker(p, ic);
    const json j = coeffs_json(p, ic, bc);
    for (const auto& [group, vals] : j.items()) {
        if (!vals.is_object()) continue;
        for (const auto& [k, v] : vals.items())
            std::printf("%s.%s = %.12g\n", group.c_str(), k.c_str(), v.get<double>());
    }
    std::printf("g_sign_identity = %.12g\n", j["g_sign_identity"].get<double>());
    std::printf("resolved_coefficients = %zu\n", bc.resolved.size());
    std::cout << j.dump() << "\n";
    std::ofstream(out_path(c, "coeffs.json")) << j.dump(2) << "\n";
    return 0;
}

int cmd_params(const Common& c) {
    const ModelParams raw = resolve_params(c);
    validate(raw);
    print_params(std::cout, raw);
    return 0;
}

int cmd_simulate(const Common& c, SimConfig cfg, const std::string& scheme,
                 const std::string& target, int dump_path) {
    const ModelParams raw = resolve_params(c);
    print_header(raw, c);
    const ValidatedParams p = validate(raw);
    cfg.seed = c.seed;
    cfg.scheme = scheme == "euler" ? Scheme::euler : Scheme::exact;
    json j;
    j["config"] = {{"dt", cfg.dt},     {"horizon", cfg.horizon}, {"n_paths", cfg.n_paths},
                   {"seed", cfg.seed}, {"scheme", scheme}};
    if (target == "informed" || target == "both") {
        const Estimate e = estimate_informed_performance(p, cfg, Policy::optimal());
        print_estimate("informed", e);
        j["informed"] = {{"mean", e.mean}, {"std_error", e.std_error}, {"n", e.n}};
        j["informed_closed_form"] = solve_informed(p).f0;
    }
    if (target == "broker" || target == "both") {
        const Estimate e =
            estimate_broker_performance(p, cfg, Policy::optimal(), Policy::optimal());
        print_estimate("broker", e);
        j["broker"] = {{"mean", e.mean}, {"std_error", e.std_error}, {"n", e.n}};
        j["broker_closed_form"] = solve_broker(p, solve_informed(p)).c0;
    }
    if (dump_path >= 0) {
        const PathRecord rec = simulate_path(p, Policy::optimal(), Policy::optimal(), cfg,
                                             static_cast<std::uint64_t>(dump_path));
        write_path_csv(out_path(c, "path.csv").string(), rec);
    }
    std::ofstream(out_path(c, "simulate.json")) << j.dump(2) << "\n";
    return 0;
}

int cmd_perturb(const Common& c, SimConfig cfg, std::vector<double> factors) {
    const ModelParams raw = resolve_params(c);
    print_header(raw, c);
    const ValidatedParams p = validate(raw);
    cfg.seed = c.seed;
    if (factors.empty()) factors = {0.8, 0.9, 1.1, 1.2};
    const PerturbationReport rep = perturbation_report(p, cfg, factors);
    print_estimate("optimal", rep.optimal);
    std::ofstream csv(out_path(c, "perturb.csv"));
    csv << "coefficient,factor,mean,std_error,mean_diff,se_diff,lower_95,exceeds_optimal\n";
    for (const PerturbationRow& r : rep.rows) {
        std::printf("%s x%.2f: mean=%.4f diff=%.4f (se %.4f) %s\n", r.coefficient.c_str(),
                    r.factor, r.estimate.mean, r.mean_diff, r.se_diff,
                    r.exceeds_optimal ? "EXCEEDS OPTIMAL" : (r.lower_95 ? "lower@95%" : ""));
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%s,%.4g,%.10g,%.10g,%.10g,%.10g,%d,%d\n",
                      r.coefficient.c_str(), r.factor, r.estimate.mean,
                      r.estimate.std_error, r.mean_diff, r.se_diff, r.lower_95 ? 1 : 0,
                      r.exceeds_optimal ? 1 : 0);
        csv << buf;
    }
    std::printf("any perturbation exceeds optimal: %s\n", rep.any_exceeds ? "yes" : "no");
    return 0;
}

int cmd_sessions(const Common& c, int days, double delta, int intervals,
                 const std::string& out_name) {
    const ModelParams raw = resolve_params(c);
    print_header(raw, c);
    const ValidatedParams p = validate(raw);
    const SessionSet s = generate_sessions(p, days, delta, intervals, c.seed);
    const fs::path path = out_path(c, out_name);
    write_sessions(path.string(), s);
    std::printf("wrote %d days x %d intervals to %s\n", days, intervals,
                path.string().c_str());
    return 0;
}

GridSpec parse_grid_spec(const std::string& spec, double delta) {
    if (spec.empty()) return GridSpec::defaults(delta);
    std::vector<double> v;
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ',')) v.push_back(std::stod(tok));
    if (v.size() != 12)
        throw ConfigError(
            "--grid-spec wants 12 values: c_lo,c_hi,n_c,g_lo,g_hi,n_g,h_lo,h_hi,n_h,"
            "f_lo,f_hi,n_f");
    GridSpec g;
    g.c_lo = v[0]; g.c_hi = v[1]; g.n_c = static_cast<int>(v[2]);
    g.g_lo = v[3]; g.g_hi = v[4]; g.n_g = static_cast<int>(v[5]);
    g.h_lo = v[6]; g.h_hi = v[7]; g.n_h = static_cast<int>(v[8]);
    g.f_lo = v[9]; g.f_hi = v[10]; g.n_f = static_cast<int>(v[11]);
    return g;
}

int cmd_calibrate(const Common& c, const std::string& sessions_file, int synthetic_days,
                  double delta, int intervals, const std::string& method,
                  const std::string& grid_spec) {
    const ModelParams raw = resolve_params(c);
    print_header(raw, c);
    const ValidatedParams p = validate(raw);
    SessionSet sessions;
    if (!sessions_file.empty()) {
        sessions = read_sessions(sessions_file);
    } else {
        sessions = generate_sessions(p, synthetic_days, delta, intervals, c.seed);
    }
    const GridSpec grid = parse_grid_spec(grid_spec, sessions.delta);
    const OptMethod m = method == "grid"      ? OptMethod::grid
                        : method == "simplex" ? OptMethod::simplex
                                              : OptMethod::grid_then_simplex;
    const OptResult res = optimize(sessions, StrategyConstants{}, m, grid,
                                   p.broker().a_B, p.broker().phi_B);
    std::printf("best: c=%.8g g=%.8g h=%.8g f=%.8g  P=%.8g  (%zu evaluations)\n",
                res.best.c, res.best.g, res.best.h, res.best.f, res.P_best,
                res.trace.size());
    const InformedCoefficients ic = solve_informed(p);
    const BrokerCoefficients bc = solve_broker(p, ic);
    std::printf("theoretical: c=%.8g g=%.8g h=%.8g f=%.8g\n", bc.C * sessions.delta,
                bc.G * sessions.delta, bc.H, bc.F);
    json j = {{"method", res.method},
              {"P_best", res.P_best},
              {"best", {{"c", res.best.c}, {"g", res.best.g}, {"h", res.best.h}, {"f", res.best.f}}},
              {"evaluations", res.trace.size()},
              {"theoretical",
               {{"c", bc.C * sessions.delta}, {"g", bc.G * sessions.delta}, {"h", bc.H}, {"f", bc.F}}}};
    std::ofstream(out_path(c, "calibrate.json")) << j.dump(2) << "\n";
    std::ofstream trace(out_path(c, "calibrate_trace.csv"));
    trace << "c,g,h,f,P\n";
    char buf[256];
    for (const auto& [k, v] : res.trace) {
        std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.10g,%.10g,%.10g\n", k.c, k.g, k.h,
                      k.f, v);
        trace << buf;
    }
    return 0;
}

SweepAxis parse_axis(const std::string& s) {
    std::stringstream ss(s);
    std::string tok;
    std::vector<std::string> parts;
    while (std::getline(ss, tok, ',')) parts.push_back(tok);
    if (parts.size() != 5)
        throw ConfigError("axis wants name,min,max,count,lin|log: " + s);
    SweepAxis a;
    a.name = parts[0];
    a.min = std::stod(parts[1]);
    a.max = std::stod(parts[2]);
    a.count = std::stoi(parts[3]);
    a.log = parts[4] == "log";
    return a;
}

int cmd_sweep(const Common& c, const std::string& target, const std::string& axis1,
              const std::string& axis2, const std::string& out_name) {
    const ModelParams raw = resolve_params(c);
    print_header(raw, c);
    validate(raw);
    SweepSpec spec;
    spec.base = raw;
    spec.target = target == "broker" ? SweepTarget::broker_value
                                     : SweepTarget::informed_value;
    spec.axis1 = parse_axis(axis1);
    if (!axis2.empty()) spec.axis2 = parse_axis(axis2);
    const SurfaceTable table = run_sweep(spec);
    const fs::path path = out_path(c, out_name);
    write_surface_csv(path.string(), table);
    std::printf("wrote %zu rows to %s\n", table.rows.size(), path.string().c_str());
    return 0;
}

int cmd_fig4(const Common& c, const std::string& out_name) {
    const ModelParams raw = resolve_params(c);
    print_header(raw, c);
    const ValidatedParams p = validate(raw);
    const Fig4Table table = figure4_curve(p, default_ratio_grid());
    const fs::path path = out_path(c, out_name);
    write_fig4_csv(path.string(), table);
    std::printf("argmax ratio = %.4f (value %.6f); wrote %s\n", table.argmax_ratio,
                table.max_value, path.string().c_str());
    return 0;
}

int cmd_demo(const Common& c) {
    const ModelParams raw = resolve_params(c);
    print_header(raw, c);
    const ValidatedParams p = validate(raw);

    std::printf("== coefficients ==\n");
    const InformedCoefficients ic = solve_informed(p);
    const BrokerCoefficients bc = solve_broker(p, ic);
    std::ofstream(out_path(c, "coeffs.json")) << coeffs_json(p, ic, bc).dump(2) << "\n";
    std::printf("A=%.6g B=%.6g f0=%.6g | C=%.6g D=%.6g E=%.6g F=%.6g c0=%.6g\n", ic.A,
                ic.B, ic.f0, bc.C, bc.D, bc.E, bc.F, bc.c0);

    std::printf("== Monte Carlo check (reduced budget) ==\n");
    SimConfig cfg;
    cfg.n_paths = 400;
    cfg.seed = c.seed;
    const Estimate ei = estimate_informed_performance(p, cfg, Policy::optimal());
    const Estimate eb =
        estimate_broker_performance(p, cfg, Policy::optimal(), Policy::optimal());
    print_estimate("informed (target f0)", ei);
    print_estimate("broker   (target c0)", eb);

    std::printf("== synthetic calibration (reduced budget) ==\n");
    const SessionSet sessions = generate_sessions(p, 50, 1e-3, 1000, c.seed);
    write_sessions(out_path(c, "sessions.csv").string(), sessions);
    GridSpec grid = GridSpec::defaults(sessions.delta);
    grid.n_c = 5; grid.n_g = 5; grid.n_h = 11; grid.n_f = 11;
    const OptResult res = optimize(sessions, StrategyConstants{}, OptMethod::grid_then_simplex,
                                   grid, p.broker().a_B, p.broker().phi_B);
    std::printf("best: c=%.6g g=%.6g h=%.6g f=%.6g P=%.6g\n", res.best.c, res.best.g,
                res.best.h, res.best.f, res.P_best);

    std::printf("== figure 4 ==\n");
    const Fig4Table f4 = figure4_curve(p, default_ratio_grid());
    write_fig4_csv(out_path(c, "fig4.csv").string(), f4);
    std::printf("argmax ratio = %.4f\n", f4.argmax_ratio);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"broker/informed-trader model: closed forms, simulation, calibration"};
    app.require_subcommand(1);

    Common c;
    SimConfig cfg;
    std::string scheme = "exact", target = "both";
    int dump_path = -1;
    std::vector<double> factors;
    int days = 50, intervals = 1000;
    double delta = 1e-3;
    std::string sessions_file, method = "grid_then_simplex", grid_spec;
    std::string axis1, axis2, sweep_target = "informed";
    std::string out_name_sessions = "sessions.csv", out_name_sweep = "sweep.csv",
                out_name_fig4 = "fig4.csv";

    auto* coeffs = app.add_subcommand("coeffs", "print all solved coefficients");
    add_common(coeffs, c);

    auto* params = app.add_subcommand("params", "print the resolved parameter set");
    add_common(params, c);

    auto* sim = app.add_subcommand("simulate", "Monte Carlo performance estimates");
    add_common(sim, c);
    sim->add_option("--dt", cfg.dt);
    sim->add_option("--horizon", cfg.horizon);
    sim->add_option("--paths", cfg.n_paths);
    sim->add_option("--scheme", scheme)->check(CLI::IsMember({"euler", "exact"}));
    sim->add_option("--target", target)->check(CLI::IsMember({"informed", "broker", "both"}));
    sim->add_option("--dump-path", dump_path, "also write one trajectory as CSV");

    auto* pert = app.add_subcommand("perturb", "optimality check by coefficient scaling");
    add_common(pert, c);
    pert->add_option("--dt", cfg.dt);
    pert->add_option("--horizon", cfg.horizon);
    pert->add_option("--paths", cfg.n_paths);
    pert->add_option("--factors", factors, "scaling factors (default 0.8 0.9 1.1 1.2)")
        ->take_all();

    auto* sess = app.add_subcommand("sessions", "generate synthetic session tapes");
    add_common(sess, c);
    sess->add_option("--days", days);
    sess->add_option("--delta", delta);
    sess->add_option("--intervals", intervals);
    sess->add_option("--out", out_name_sessions, "file name inside out_dir");

    auto* cal = app.add_subcommand("calibrate", "train (c,g,h,f) on session tapes");
    add_common(cal, c);
    cal->add_option("--sessions", sessions_file, "session CSV (else synthetic)");
    cal->add_option("--synthetic", days, "synthetic day count");
    cal->add_option("--delta", delta);
    cal->add_option("--intervals", intervals);
    cal->add_option("--method", method)
        ->check(CLI::IsMember({"grid", "simplex", "grid_then_simplex"}));
    cal->add_option("--grid-spec", grid_spec, "c_lo,c_hi,n_c,g_lo,...,n_f");

    auto* sweep = app.add_subcommand("sweep", "value-function parameter sweep");
    add_common(sweep, c);
    sweep->add_option("--target", sweep_target)->check(CLI::IsMember({"informed", "broker"}));
    sweep->add_option("--axis1", axis1, "name,min,max,count,lin|log")->required();
    sweep->add_option("--axis2", axis2, "name,min,max,count,lin|log");
    sweep->add_option("--out", out_name_sweep);

    auto* fig4 = app.add_subcommand("fig4", "broker value vs client liquidity cost");
    add_common(fig4, c);
    fig4->add_option("--out", out_name_fig4);

    auto* demo = app.add_subcommand("demo", "full pipeline at the baseline parameters");
    add_common(demo, c);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e);
        return 2;
    }

    try {
        if (coeffs->parsed()) return cmd_coeffs(c);
        if (params->parsed()) return cmd_params(c);
        if (sim->parsed()) return cmd_simulate(c, cfg, scheme, target, dump_path);
        if (pert->parsed()) return cmd_perturb(c, cfg, factors);
        if (sess->parsed()) return cmd_sessions(c, days, delta, intervals, out_name_sessions);
        if (cal->parsed())
            return cmd_calibrate(c, sessions_file, days, delta, intervals, method, grid_spec);
        if (sweep->parsed()) return cmd_sweep(c, sweep_target, axis1, axis2, out_name_sweep);
        if (fig4->parsed()) return cmd_fig4(c, out_name_fig4);
        if (demo->parsed()) return cmd_demo(c);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
