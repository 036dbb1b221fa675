#pragma once

#include <array>
#include <string>
#include <vector>

#include "brokersim/params.hpp"

namespace brokersim {

// Solved coefficients of the informed trader's problem. The optimal rate is
//   nu_I = A*alpha - B*q_I
// and the value function is
//   x + q_I*S - a_I*q_I^2 + (f0 + f2*alpha^2) + g1*alpha*q_I + h2*q_I^2.
struct InformedCoefficients {
    double A = 0.0;
    double B = 0.0;
    double h2 = 0.0;
    double g1 = 0.0;
    double f0 = 0.0;
    double f1 = 0.0;  // identically zero
    double f2 = 0.0;
    double a_I = 0.0;  // carried along for value evaluation
};

// Solved coefficients of the broker's problem. The optimal rate is
//   nu_B = -C*q_B - D*q_I + E*alpha + F*nu_U
//        = -C*q_B - G*q_I + H*nu_I + F*nu_U
// and the value function is
//   x_B + q_B*S - a_B*q_B^2 + q0 + q1*q_B + q2*q_B^2, with
//   q1 = d0*alpha + d1*q_I + d2*nu_U,
//   q0 = c0 + c3*alpha*nu_U + c4*alpha^2 + c5*nu_U^2
//        + (e1*alpha + e2*nu_U)*q_I + f2b*q_I^2.
struct BrokerCoefficients {
    double q2 = 0.0;
    double C = 0.0, D = 0.0, E = 0.0, F = 0.0, G = 0.0, H = 0.0;
    double d0 = 0.0, d1 = 0.0, d2 = 0.0;
    double f2b = 0.0;
    double e1 = 0.0, e2 = 0.0;
    double c0 = 0.0, c1 = 0.0, c2 = 0.0, c3 = 0.0, c4 = 0.0, c5 = 0.0;
    double a_B = 0.0, b = 0.0;
    // The sign of G is parameter dependent; this is the value whose sign
    // the companion identity claims to match. Exposed, never asserted.
    double g_sign_identity = 0.0;
    // Names of constant-level coefficients that failed the residual check
    // against their published closed form and were re-solved from the
    // residual-induced linear system.
    std::vector<std::string> resolved;
};

InformedCoefficients solve_informed(const ValidatedParams& p);

// nu_I = A*alpha - B*q_I
double informed_rate(const InformedCoefficients& c, double alpha, double q_I);

double informed_value(const InformedCoefficients& c, double x, double S, double alpha,
                      double q_I);

BrokerCoefficients solve_broker(const ValidatedParams& p, const InformedCoefficients& ic);

// nu_B = -C*q_B - D*q_I + E*alpha + F*nu_U
double broker_rate(const BrokerCoefficients& c, double q_B, double q_I, double alpha,
                   double nu_U);

// Flow form: nu_B = -C*q_B - G*q_I + H*nu_I + F*nu_U. Coincides with
// broker_rate whenever nu_I = A*alpha - B*q_I.
double broker_rate_flow_form(const BrokerCoefficients& c, double q_B, double q_I,
                             double nu_I, double nu_U);

double broker_value(const BrokerCoefficients& c, double x_B, double S, double alpha,
                    double q_B, double q_I, double nu_U);

// Full HJB residuals at a point, evaluated with analytic partials of the
// quadratic value functions and the sup replaced by its feedback maximizer.
// Normalized by the largest constituent term (floor 1) so the value is
// scale-free; zero (to roundoff) characterises the solution.
double hjb_residual_informed(const ValidatedParams& p, const InformedCoefficients& c,
                             double x, double S, double alpha, double q_I);

double hjb_residual_broker(const ValidatedParams& p, const InformedCoefficients& ic,
                           const BrokerCoefficients& bc, double x_B, double S, double alpha,
                           double q_B, double q_I, double nu_U);

// Subsystem diagnostics used by the test suites: the q2 quadratic residual
// and the three linear equations pinning d0, d1, d2.
double q2_quadratic_residual(const ValidatedParams& p, const BrokerCoefficients& bc);
std::array<double, 3> d_system_residuals(const ValidatedParams& p,
                                         const InformedCoefficients& ic,
                                         const BrokerCoefficients& bc);

// Central finite-difference gradient of a value function in (x, S, alpha,
// q_I[, q_B, nu_U]); cross-checks the analytic partials in tests.
std::array<double, 4> informed_value_gradient_fd(const InformedCoefficients& c, double x,
                                                 double S, double alpha, double q_I,
                                                 double step = 1e-5);
std::array<double, 6> broker_value_gradient_fd(const BrokerCoefficients& c, double x_B,
                                               double S, double alpha, double q_B,
                                               double q_I, double nu_U, double step = 1e-5);

}  // namespace brokersim
