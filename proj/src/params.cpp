#include "brokersim/params.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>
#include <vector>

namespace brokersim {

namespace {

void require(bool cond, const std::string& msg, bool regime = false) {
    if (!cond) {
        if (regime) throw RegimeError(msg);
        throw DomainError(msg);
    }
}

bool finite(double x) { return std::isfinite(x); }

}  // namespace

ValidatedParams validate(const ModelParams& raw) {
    const auto& m = raw.market;
    const auto& i = raw.informed;
    const auto& b = raw.broker;
    const auto& f = raw.flow;

    require(finite(m.S0) && m.S0 > 0.0, "S0 must be positive");
    require(finite(m.alpha0), "alpha0 must be finite");
    require(finite(m.kappa_alpha) && m.kappa_alpha >= 0.0, "kappa_alpha must be >= 0");
    require(finite(m.sigma_alpha) && m.sigma_alpha >= 0.0, "sigma_alpha must be >= 0");
    require(finite(m.sigma_s) && m.sigma_s >= 0.0, "sigma_s must be >= 0");

    require(finite(i.k_I) && i.k_I > 0.0, "k_I must be positive");
    require(finite(i.a_I) && i.a_I >= 0.0, "a_I must be >= 0");
    require(finite(i.phi_I) && i.phi_I >= 0.0, "phi_I must be >= 0");
    require(finite(i.beta) && i.beta > 0.0, "beta must be positive");

    require(finite(b.k_B) && b.k_B > 0.0, "k_B must be positive");
    require(finite(b.k_U) && b.k_U > 0.0, "k_U must be positive");
    require(finite(b.a_B) && b.a_B >= 0.0, "a_B must be >= 0");
    require(finite(b.phi_B) && b.phi_B >= 0.0, "phi_B must be >= 0");
    require(finite(b.b), "b must be finite");
    require(finite(b.beta) && b.beta > 0.0, "beta must be positive");
    require(i.beta == b.beta, "informed and broker discount rates must be equal");

    require(2.0 * b.a_B > b.b, "regime assumption violated: 2*a_B must exceed b", true);
    const double radicand = 4.0 * b.a_B * b.beta * b.k_B - 2.0 * b.b * b.beta * b.k_B +
                            b.beta * b.beta * b.k_B * b.k_B + 2.0 * b.k_B * b.phi_B;
    require(radicand >= 0.0, "broker radicand is negative", true);

    require(finite(f.nu_U0), "nu_U0 must be finite");
    require(finite(f.kappa_u) && f.kappa_u >= 0.0, "kappa_u must be >= 0");
    require(finite(f.sigma_U) && f.sigma_U >= 0.0, "sigma_U must be >= 0");
    if (f.elasticity_enabled) {
        require(b.k_U <= b.k_B, "elasticity requires k_U <= k_B");
        require(f.k_U_ref < b.k_B, "elasticity requires k_U_ref < k_B");
    }

    return ValidatedParams(raw);
}

double flow_diffusion(const ValidatedParams& p) {
    const auto& f = p.flow();
    if (!f.elasticity_enabled) return f.sigma_U;
    return f.sigma_U * (p.broker().k_B - p.broker().k_U) / (p.broker().k_B - f.k_U_ref);
}

ModelParams example_params() {
    return ModelParams{};  // field defaults are the baseline set
}

namespace {

struct Field {
    std::function<double(const ModelParams&)> get;
    std::function<void(ModelParams&, double)> set;
};

// beta is listed once and writes both discount rates.
const std::vector<std::pair<std::string, Field>>& fields() {
    static const std::vector<std::pair<std::string, Field>> f = {
        {"S0", {[](const ModelParams& p) { return p.market.S0; },
                [](ModelParams& p, double v) { p.market.S0 = v; }}},
        {"alpha0", {[](const ModelParams& p) { return p.market.alpha0; },
                    [](ModelParams& p, double v) { p.market.alpha0 = v; }}},
        {"kappa_alpha", {[](const ModelParams& p) { return p.market.kappa_alpha; },
                         [](ModelParams& p, double v) { p.market.kappa_alpha = v; }}},
        {"sigma_alpha", {[](const ModelParams& p) { return p.market.sigma_alpha; },
                         [](ModelParams& p, double v) { p.market.sigma_alpha = v; }}},
        {"sigma_s", {[](const ModelParams& p) { return p.market.sigma_s; },
                     [](ModelParams& p, double v) { p.market.sigma_s = v; }}},
        {"k_I", {[](const ModelParams& p) { return p.informed.k_I; },
                 [](ModelParams& p, double v) { p.informed.k_I = v; }}},
        {"a_I", {[](const ModelParams& p) { return p.informed.a_I; },
                 [](ModelParams& p, double v) { p.informed.a_I = v; }}},
        {"phi_I", {[](const ModelParams& p) { return p.informed.phi_I; },
                   [](ModelParams& p, double v) { p.informed.phi_I = v; }}},
        {"beta", {[](const ModelParams& p) { return p.informed.beta; },
                  [](ModelParams& p, double v) { p.informed.beta = v; p.broker.beta = v; }}},
        {"k_B", {[](const ModelParams& p) { return p.broker.k_B; },
                 [](ModelParams& p, double v) { p.broker.k_B = v; }}},
        {"k_U", {[](const ModelParams& p) { return p.broker.k_U; },
                 [](ModelParams& p, double v) { p.broker.k_U = v; }}},
        {"a_B", {[](const ModelParams& p) { return p.broker.a_B; },
                 [](ModelParams& p, double v) { p.broker.a_B = v; }}},
        {"phi_B", {[](const ModelParams& p) { return p.broker.phi_B; },
                   [](ModelParams& p, double v) { p.broker.phi_B = v; }}},
        {"b", {[](const ModelParams& p) { return p.broker.b; },
               [](ModelParams& p, double v) { p.broker.b = v; }}},
        {"nu_U0", {[](const ModelParams& p) { return p.flow.nu_U0; },
                   [](ModelParams& p, double v) { p.flow.nu_U0 = v; }}},
        {"kappa_u", {[](const ModelParams& p) { return p.flow.kappa_u; },
                     [](ModelParams& p, double v) { p.flow.kappa_u = v; }}},
        {"sigma_U", {[](const ModelParams& p) { return p.flow.sigma_U; },
                     [](ModelParams& p, double v) { p.flow.sigma_U = v; }}},
        {"elasticity_enabled",
         {[](const ModelParams& p) { return p.flow.elasticity_enabled ? 1.0 : 0.0; },
          [](ModelParams& p, double v) { p.flow.elasticity_enabled = (v != 0.0); }}},
        {"k_U_ref", {[](const ModelParams& p) { return p.flow.k_U_ref; },
                     [](ModelParams& p, double v) { p.flow.k_U_ref = v; }}},
    };
    return f;
}

double parse_double(const std::string& key, const std::string& value) {
    if (value == "true") return 1.0;
    if (value == "false") return 0.0;
    try {
        size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("cannot parse value '" + value + "' for key '" + key + "'");
    }
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

void apply_override(ModelParams& p, const std::string& key, const std::string& value) {
    for (const auto& [name, field] : fields()) {
        if (name == key) {
            field.set(p, parse_double(key, value));
            return;
        }
    }
    throw ConfigError("unknown parameter key: " + key);
}

ModelParams load_params_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open params file: " + path);
    ModelParams p = example_params();
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("bad config line: " + line);
        apply_override(p, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return p;
}

std::map<std::string, std::string> params_as_map(const ModelParams& p) {
    std::map<std::string, std::string> out;
    for (const auto& [name, field] : fields()) {
        if (name == "elasticity_enabled") {
            out[name] = p.flow.elasticity_enabled ? "true" : "false";
            continue;
        }
        std::ostringstream ss;
        ss.precision(17);
        ss << field.get(p);
        out[name] = ss.str();
    }
    return out;
}

void print_params(std::ostream& os, const ModelParams& p) {
    for (const auto& [k, v] : params_as_map(p)) os << k << " = " << v << "\n";
}

}  // namespace brokersim
