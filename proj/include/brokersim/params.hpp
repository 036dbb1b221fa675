#pragma once

#include <iosfwd>
#include <map>
#include <string>

#include "brokersim/errors.hpp"

namespace brokersim {

// Lit-market price and alpha-signal dynamics:
//   dS = alpha dt + sigma_s dW^S,   dalpha = -kappa_alpha alpha dt + sigma_alpha dW^alpha.
struct MarketParams {
    double S0 = 100.0;        // initial midprice
    double alpha0 = 0.0;      // initial signal
    double kappa_alpha = 5.0; // signal mean-reversion rate
    double sigma_alpha = 1.0; // signal volatility
    double sigma_s = 1.0;     // midprice volatility
};

// Informed trader: pays k_I per unit rate, penalises inventory through a_I
// (terminal-type) and phi_I (running), discounts at beta.
struct InformedParams {
    double k_I = 1e-3;
    double a_I = 1.0;
    double phi_I = 1e-2;
    double beta = 1e-2;
};

// Broker: hedges in the lit market at cost k_B, charges the uninformed
// client k_U, penalises inventory through a_B / phi_B, and carries the
// permanent-impact-style coefficient b in her criterion.
struct BrokerParams {
    double k_B = 1.2e-3;
    double k_U = 1e-3;
    double a_B = 1.0;
    double phi_B = 1e-2;
    double b = 0.0;
    double beta = 1e-2;
};

// Uninformed client flow: OU rate process
//   dnu_U = -kappa_u nu_U dt + sigma_eff dW^U,
// where sigma_eff = sigma_U, or sigma_U (k_B - k_U)/(k_B - k_U_ref) when the
// flow elasticity to the price of liquidity is switched on.
struct UninformedFlowParams {
    double nu_U0 = 0.0;
    double kappa_u = 15.0;
    double sigma_U = 100.0;
    bool elasticity_enabled = false;
    double k_U_ref = 1e-3;
};

// Instantaneous state of the whole system.
struct MarketState {
    double t = 0.0;
    double S = 0.0;
    double alpha = 0.0;
    double nu_U = 0.0;
    double Q_I = 0.0;
    double Q_B = 0.0;
    double X_I = 0.0;
    double X_B = 0.0;
};

struct ModelParams {
    MarketParams market;
    InformedParams informed;
    BrokerParams broker;
    UninformedFlowParams flow;
};

// ModelParams that passed validate(). Downstream solvers and simulators
// only accept this wrapper.
class ValidatedParams {
  public:
    const ModelParams& get() const { return p_; }
    const MarketParams& market() const { return p_.market; }
    const InformedParams& informed() const { return p_.informed; }
    const BrokerParams& broker() const { return p_.broker; }
    const UninformedFlowParams& flow() const { return p_.flow; }

  private:
    friend ValidatedParams validate(const ModelParams& raw);
    explicit ValidatedParams(const ModelParams& p) : p_(p) {}
    ModelParams p_;
};

// Effective diffusion coefficient of nu_U: sigma_U, scaled by
// (k_B - k_U)/(k_B - k_U_ref) when flow elasticity is on.
double flow_diffusion(const ValidatedParams& p);

// Checks domain constraints (strictly positive impact costs and discount
// rate, non-negative volatilities and penalties), the regime assumption
// 2 a_B > b, the broker radicand, the equality of the two discount rates,
// and the elasticity configuration. Throws DomainError / RegimeError.
ValidatedParams validate(const ModelParams& raw);

// Baseline parameter set of the worked example (b defaults to 0; the
// figures are reproduced under this choice and every output records it).
ModelParams example_params();

// Flat key/value config I/O. Keys are exactly the field names above
// (beta sets both discount rates). Unknown keys throw ConfigError.
ModelParams load_params_file(const std::string& path);
void apply_override(ModelParams& p, const std::string& key, const std::string& value);
std::map<std::string, std::string> params_as_map(const ModelParams& p);
void print_params(std::ostream& os, const ModelParams& p);

}  // namespace brokersim
