#include "brokersim/experiments.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "brokersim/closed_form.hpp"
#include "json.hpp"

namespace brokersim {

namespace {

void set_param(ModelParams& p, const std::string& name, double value) {
    std::ostringstream ss;
    ss.precision(17);
    ss << value;
    apply_override(p, name, ss.str());
}

std::vector<double> axis_grid(const SweepAxis& a) {
    std::vector<double> v;
    if (a.count <= 1) {
        v.push_back(a.min);
        return v;
    }
    if (!(a.max > a.min)) throw ConfigError("sweep axis must be strictly increasing");
    if (a.log) {
        if (!(a.min > 0.0)) throw ConfigError("log axis requires positive bounds");
        const double lo = std::log(a.min), hi = std::log(a.max);
        for (int i = 0; i < a.count; ++i)
            v.push_back(std::exp(lo + (hi - lo) * i / (a.count - 1)));
    } else {
        for (int i = 0; i < a.count; ++i)
            v.push_back(a.min + (a.max - a.min) * i / (a.count - 1));
    }
    return v;
}

// Value function at the study's initial state (all zeros, S = S0): the
// informed value collapses to f0 and the broker value to c0.
double value_at_initial(const ModelParams& raw, SweepTarget target) {
    const ValidatedParams p = validate(raw);
    const InformedCoefficients ic = solve_informed(p);
    if (target == SweepTarget::informed_value) return ic.f0;
    return solve_broker(p, ic).c0;
}

}  // namespace

SurfaceTable run_sweep(const SweepSpec& spec) {
    if (spec.axis1.name.empty()) throw ConfigError("axis1 must name a parameter");
    {
        // fail fast on unresolvable names
        ModelParams probe = spec.base;
        set_param(probe, spec.axis1.name, spec.axis1.min);
        if (!spec.axis2.name.empty()) set_param(probe, spec.axis2.name, spec.axis2.min);
    }
    SurfaceTable table;
    table.spec = spec;
    table.metadata = params_as_map(spec.base);
    table.metadata["target"] = spec.target == SweepTarget::informed_value
                                   ? "informed_value"
                                   : "broker_value";
    table.metadata["version"] = "brokersim 1.0";

    const std::vector<double> g1 = axis_grid(spec.axis1);
    const std::vector<double> g2 =
        spec.axis2.name.empty() ? std::vector<double>{0.0} : axis_grid(spec.axis2);
    for (double v1 : g1) {
        for (double v2 : g2) {
            SurfaceRow row;
            row.axis1 = v1;
            row.axis2 = v2;
            ModelParams raw = spec.base;
            try {
                set_param(raw, spec.axis1.name, v1);
                if (!spec.axis2.name.empty()) set_param(raw, spec.axis2.name, v2);
                row.value = value_at_initial(raw, spec.target);
                row.status = "ok";
            } catch (const RegimeError&) {
                row.value = std::nan("");
                row.status = "RegimeError";
            } catch (const DomainError&) {
                row.value = std::nan("");
                row.status = "DomainError";
            }
            table.rows.push_back(row);
        }
    }
    return table;
}

std::vector<double> default_ratio_grid() {
    std::vector<double> g;
    for (int i = 0; i <= 90; ++i) g.push_back(0.10 + 0.01 * i);
    return g;
}

Fig4Table figure4_curve(const ValidatedParams& p, const std::vector<double>& ratio_grid) {
    Fig4Table table;
    bool first = true;
    for (double r : ratio_grid) {
        if (!(r > 0.0 && r <= 1.0))
            throw DomainError("fig4 ratio must lie in (0, 1]");
        ModelParams raw = p.get();
        const double kB = raw.broker.k_B;
        raw.informed.k_I = r * kB;
        raw.broker.k_U = r * kB;
        raw.flow.elasticity_enabled = true;
        raw.flow.k_U_ref = 1e-3;
        Fig4Row row;
        row.ratio = r;
        row.sigma_scale = (kB - raw.broker.k_U) / (kB - raw.flow.k_U_ref);
        row.degenerate_flow = raw.broker.k_U == kB;
        row.value = value_at_initial(raw, SweepTarget::broker_value);
        if (first || row.value > table.max_value) {
            table.max_value = row.value;
            table.argmax_ratio = r;
            first = false;
        }
        table.rows.push_back(row);
    }
    return table;
}

namespace {

struct AxisCheck {
    std::string param;
    SweepTarget target;
    bool expect_decreasing;
    SweepAxis axis;
};

std::string direction_status(const std::vector<double>& values, bool expect_decreasing) {
    if (values.size() < 2) return "degenerate";
    bool flat = true, mono = true;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] != values[i - 1]) flat = false;
        const bool ok = expect_decreasing ? values[i] < values[i - 1]
                                          : values[i] > values[i - 1];
        if (!ok) mono = false;
    }
    if (flat) return "flat";
    return mono ? "pass" : "fail";
}

}  // namespace

MonotonicityReport monotonicity_report(const ValidatedParams& p) {
    const SweepAxis kI_axis{"k_I", 2e-4, 2e-3, 10, false};
    const SweepAxis phiI_axis{"phi_I", 1e-3, 1e-1, 10, true};
    const SweepAxis phiB_axis{"phi_B", 1e-3, 1e-1, 10, true};
    const AxisCheck checks[] = {
        {"k_I", SweepTarget::informed_value, true, kI_axis},
        {"phi_I", SweepTarget::informed_value, true, phiI_axis},
        {"phi_I", SweepTarget::broker_value, false, phiI_axis},
        {"phi_B", SweepTarget::broker_value, true, phiB_axis},
    };

    MonotonicityReport rep;
    rep.all_pass = true;
    for (const AxisCheck& c : checks) {
        std::vector<double> values;
        for (double v : axis_grid(c.axis)) {
            ModelParams raw = p.get();
            set_param(raw, c.param, v);
            values.push_back(value_at_initial(raw, c.target));
        }
        MonotonicityCheck out;
        out.description =
            std::string(c.target == SweepTarget::informed_value ? "informed" : "broker") +
            " value " + (c.expect_decreasing ? "decreasing" : "increasing") + " in " +
            c.param;
        out.status = direction_status(values, c.expect_decreasing);
        rep.all_pass = rep.all_pass && out.status == "pass";
        rep.checks.push_back(out);
    }

    // best-fit plane of the broker value over (phi_I, phi_B); reported only
    std::vector<double> xs, ys, zs;
    for (double x : axis_grid(phiI_axis)) {
        for (double y : axis_grid(phiB_axis)) {
            ModelParams raw = p.get();
            set_param(raw, "phi_I", x);
            set_param(raw, "phi_B", y);
            xs.push_back(x);
            ys.push_back(y);
            zs.push_back(value_at_initial(raw, SweepTarget::broker_value));
        }
    }
    const double n = static_cast<double>(zs.size());
    double sx = 0, sy = 0, sz = 0, sxx = 0, syy = 0, sxy = 0, sxz = 0, syz = 0;
    for (std::size_t i = 0; i < zs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sz += zs[i];
        sxx += xs[i] * xs[i];
        syy += ys[i] * ys[i];
        sxy += xs[i] * ys[i];
        sxz += xs[i] * zs[i];
        syz += ys[i] * zs[i];
    }
    // normal equations for z = a + b x + c y (Cramer's rule)
    const double m[3][3] = {{n, sx, sy}, {sx, sxx, sxy}, {sy, sxy, syy}};
    const double rhs[3] = {sz, sxz, syz};
    const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                       m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                       m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    double coef[3] = {0, 0, 0};
    if (det != 0.0) {
        for (int k = 0; k < 3; ++k) {
            double mm[3][3];
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) mm[i][j] = j == k ? rhs[i] : m[i][j];
            coef[k] = (mm[0][0] * (mm[1][1] * mm[2][2] - mm[1][2] * mm[2][1]) -
                       mm[0][1] * (mm[1][0] * mm[2][2] - mm[1][2] * mm[2][0]) +
                       mm[0][2] * (mm[1][0] * mm[2][1] - mm[1][1] * mm[2][0])) /
                      det;
        }
    }
    const double zbar = sz / n;
    double ss_tot = 0.0, ss_res = 0.0;
    for (std::size_t i = 0; i < zs.size(); ++i) {
        const double fit = coef[0] + coef[1] * xs[i] + coef[2] * ys[i];
        ss_tot += (zs[i] - zbar) * (zs[i] - zbar);
        ss_res += (zs[i] - fit) * (zs[i] - fit);
    }
    rep.plane_r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
    return rep;
}

void write_surface_csv(const std::string& path, const SurfaceTable& table) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open output file: " + path);
    out << "axis1,axis2,value,status\n";
    char buf[256];
    for (const SurfaceRow& r : table.rows) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%s\n", r.axis1, r.axis2,
                      r.value, r.status.c_str());
        out << buf;
    }
    nlohmann::json meta(table.metadata);
    meta["axis1"] = table.spec.axis1.name;
    meta["axis2"] = table.spec.axis2.name;
    std::ofstream mout(path + ".meta.json");
    mout << meta.dump(2) << "\n";
    std::ofstream gp(path + ".gp");
    gp << "set datafile separator ','\n"
       << "set xlabel '" << table.spec.axis1.name << "'\n"
       << "set ylabel '" << table.spec.axis2.name << "'\n"
       << "splot '" << path << "' every ::1 using 1:2:3 with points palette\n";
}

void write_fig4_csv(const std::string& path, const Fig4Table& table) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open output file: " + path);
    out << "ratio,value,sigma_scale,degenerate_flow\n";
    char buf[256];
    for (const Fig4Row& r : table.rows) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%d\n", r.ratio, r.value,
                      r.sigma_scale, r.degenerate_flow ? 1 : 0);
        out << buf;
    }
    nlohmann::json meta = {{"argmax_ratio", table.argmax_ratio},
                           {"max_value", table.max_value}};
    std::ofstream mout(path + ".meta.json");
    mout << meta.dump(2) << "\n";
}

}  // namespace brokersim
