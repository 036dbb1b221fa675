#include "brokersim/closed_form.hpp"

#include <cmath>

namespace brokersim {

InformedCoefficients solve_informed(const ValidatedParams& p) {
    const auto& i = p.informed();
    const auto& m = p.market();
    const double kI = i.k_I, aI = i.a_I, phiI = i.phi_I, beta = i.beta;
    const double kap = m.kappa_alpha;

    const double root = std::sqrt(4.0 * aI * beta * kI + beta * beta * kI * kI +
                                  2.0 * kI * phiI);

    InformedCoefficients c;
    c.a_I = aI;
    c.h2 = 2.0 * aI + beta * kI - root;
    c.A = 1.0 / (beta * kI + 2.0 * kI * kap + root);
    // rationalized form of sqrt(a b/k + b^2/4 + phi/2k) - b/2: exactly 0
    // when a_I = phi_I = 0 and better conditioned near that limit
    const double q = aI * beta / kI + phiI / (2.0 * kI);
    c.B = q / (std::sqrt(q + 0.25 * beta * beta) + 0.5 * beta);
    c.g1 = 4.0 * kI / (2.0 * aI - c.h2 + 2.0 * beta * kI + 2.0 * kap * kI);
    c.f1 = 0.0;
    c.f2 = c.g1 * c.g1 / (8.0 * beta * kI + 16.0 * kap * kI);
    // The constant term solves the constant-level equation beta*f0 = f2*sigma_alpha^2.
    c.f0 = c.f2 * m.sigma_alpha * m.sigma_alpha / beta;
    return c;
}

double informed_rate(const InformedCoefficients& c, double alpha, double q_I) {
    return c.A * alpha - c.B * q_I;
}

double informed_value(const InformedCoefficients& c, double x, double S, double alpha,
                      double q_I) {
    const double h0 = c.f0 + c.f1 * alpha + c.f2 * alpha * alpha;
    const double h1 = c.g1 * alpha;
    return x + q_I * S - c.a_I * q_I * q_I + h0 + h1 * q_I + c.h2 * q_I * q_I;
}

double hjb_residual_informed(const ValidatedParams& p, const InformedCoefficients& c,
                             double x, double S, double alpha, double q_I) {
    const auto& i = p.informed();
    const auto& m = p.market();
    const double kI = i.k_I, aI = i.a_I, phiI = i.phi_I, beta = i.beta;

    const double H = informed_value(c, x, S, alpha, q_I);
    const double H_x = 1.0;
    const double H_S = q_I;
    const double H_SS = 0.0;
    const double H_a = 2.0 * c.f2 * alpha + c.f1 + c.g1 * q_I;
    const double H_aa = 2.0 * c.f2;
    const double H_q = S - 2.0 * aI * q_I + c.g1 * alpha + 2.0 * c.h2 * q_I;

    const double gen_alpha = -m.kappa_alpha * alpha * H_a +
                             0.5 * m.sigma_alpha * m.sigma_alpha * H_aa;
    const double gen_S = alpha * H_S + 0.5 * m.sigma_s * m.sigma_s * H_SS;

    // maximizing rate, then the residual as a scale-free quantity: the raw
    // term sum divided by the largest constituent term, so the 1e-9
    // characterization is meaningful at any parameter/state magnitude
    const double nu = (H_q - S * H_x - 2.0 * aI * q_I) / (2.0 * kI * (1.0 + H_x));
    const double terms[] = {-beta * (H - x - q_I * S + aI * q_I * q_I),
                            gen_alpha,
                            gen_S,
                            alpha * q_I,
                            -phiI * q_I * q_I,
                            nu * H_q,
                            -nu * (S + kI * nu) * H_x,
                            -2.0 * aI * q_I * nu,
                            -kI * nu * nu};
    double sum = 0.0, scale = 1.0;
    for (double t : terms) {
        sum += t;
        scale = std::max(scale, std::abs(t));
    }
    return sum / scale;
}

namespace {

// Constant-level coefficients re-derived by collecting monomial coefficients
// of the broker HJB residual; linear in each unknown.
struct ConstantLevel {
    double f2b, e1, e2, c3, c4, c5, c0;
};

ConstantLevel solve_constant_level(const ValidatedParams& p, const InformedCoefficients& ic,
                                   const BrokerCoefficients& bc) {
    const auto& br = p.broker();
    const auto& m = p.market();
    const auto& fl = p.flow();
    const double kI = p.informed().k_I, kU = br.k_U, kB = br.k_B, beta = br.beta;
    const double kap = m.kappa_alpha, kau = fl.kappa_u;
    const double A = ic.A, B = ic.B;
    const double d0 = bc.d0, d1 = bc.d1, d2 = bc.d2;

    ConstantLevel r;
    r.f2b = (2.0 * kI * B * B + B * d1 + d1 * d1 / (8.0 * kB)) / (beta + 2.0 * B);
    r.e2 = (B * d2 - d1 + d1 * d2 / (4.0 * kB)) / (beta + kau + B);
    r.e1 = (-4.0 * kI * A * B + 2.0 * A * r.f2b - A * d1 + B * d0 +
            d0 * d1 / (4.0 * kB)) / (beta + kap + B);
    r.c5 = (2.0 * kU - d2 + d2 * d2 / (8.0 * kB)) / (beta + 2.0 * kau);
    r.c4 = (2.0 * kI * A * A + A * r.e1 - A * d0 + d0 * d0 / (8.0 * kB)) /
           (beta + 2.0 * kap);
    r.c3 = (A * r.e2 - A * d2 - d0 + d0 * d2 / (4.0 * kB)) / (beta + kap + kau);
    const double sig_u = flow_diffusion(p);
    r.c0 = (r.c4 * m.sigma_alpha * m.sigma_alpha + r.c5 * sig_u * sig_u) / beta;
    return r;
}

bool close_rel(double a, double b, double tol) {
    const double scale = std::max({std::abs(a), std::abs(b), 1e-30});
    return std::abs(a - b) <= tol * scale;
}

}  // namespace

BrokerCoefficients solve_broker(const ValidatedParams& p, const InformedCoefficients& ic) {
    const auto& br = p.broker();
    const auto& m = p.market();
    const auto& fl = p.flow();
    const double kB = br.k_B, aB = br.a_B, phiB = br.phi_B, b = br.b, beta = br.beta;
    const double kap = m.kappa_alpha, kau = fl.kappa_u;
    const double A = ic.A, B = ic.B;

    BrokerCoefficients c;
    c.a_B = aB;
    c.b = b;

    const double root = std::sqrt(4.0 * aB * beta * kB - 2.0 * b * beta * kB +
                                  beta * beta * kB * kB + 2.0 * kB * phiB);
    c.q2 = 2.0 * aB - b + beta * kB - root;
    c.C = (2.0 * aB - b - c.q2) / (2.0 * kB);

    const double gap = 2.0 * aB - c.q2;
    c.d2 = 2.0 * gap / (beta + kau + c.C);
    c.d1 = -2.0 * B * gap / (beta + B + c.C);
    c.d0 = (2.0 + 2.0 * A * gap + A * c.d1) / (beta + kap + c.C);

    c.D = -c.d1 / (4.0 * kB);
    c.E = c.d0 / (4.0 * kB);
    c.F = c.d2 / (4.0 * kB);
    c.G = c.D - B * c.E / A;
    c.H = c.E / A;
    c.g_sign_identity = 1.0 / A - kap * (2.0 * kB * c.C + b) / (beta + B + c.C);

    // Published closed forms for the constant-level block.
    const double kI = p.informed().k_I, kU = br.k_U;
    const double d0 = c.d0, d1 = c.d1, d2 = c.d2;
    c.f2b = (-d1 * d1 - 8.0 * B * d1 * kB - 16.0 * B * B * kB * kI) /
            (-8.0 * beta * kB - 16.0 * B * kB);
    c.e2 = (-d1 * d2 + 4.0 * d1 * kB - 4.0 * B * d2 * kB) /
           (-4.0 * beta * kB - 4.0 * B * kB - 4.0 * kau * kB);
    c.e1 = (-d0 * d1 - 4.0 * B * d0 * kB + 4.0 * A * d1 * kB - 8.0 * A * c.f2b * kB +
            16.0 * A * B * kB * kI) /
           (-4.0 * beta * kB - 4.0 * B * kB - 4.0 * kap * kB);
    c.c5 = (-d2 * d2 + 8.0 * d2 * kB - 16.0 * kB * kU) /
           (-8.0 * beta * kB - 16.0 * kau * kB);
    c.c4 = (-d0 * d0 + 8.0 * A * d0 * kB - 8.0 * A * c.e1 * kB - 16.0 * A * A * kB * kI) /
           (-8.0 * beta * kB - 16.0 * kap * kB);
    c.c3 = (-d0 * d2 + 4.0 * d0 * kB + 4.0 * A * d2 * kB - 4.0 * A * c.e2 * kB) /
           (-4.0 * beta * kB - 4.0 * kap * kB - 4.0 * kau * kB);
    c.c1 = 0.0;
    c.c2 = 0.0;
    const double sig_u = flow_diffusion(p);
    c.c0 = (c.c4 * m.sigma_alpha * m.sigma_alpha + c.c5 * sig_u * sig_u) / beta;

    // Cross-check against the residual-induced linear system; any published
    // coefficient that disagrees is replaced by the re-derived value.
    const ConstantLevel d = solve_constant_level(p, ic, c);
    constexpr double tol = 1e-9;
    const auto check = [&](double& published, double derived, const char* name) {
        if (!close_rel(published, derived, tol)) {
            c.resolved.emplace_back(name);
            published = derived;
        }
    };
    check(c.f2b, d.f2b, "f2b");
    check(c.e2, d.e2, "e2");
    check(c.e1, d.e1, "e1");
    check(c.c5, d.c5, "c5");
    check(c.c4, d.c4, "c4");
    check(c.c3, d.c3, "c3");
    check(c.c0, d.c0, "c0");
    return c;
}

double broker_rate(const BrokerCoefficients& c, double q_B, double q_I, double alpha,
                   double nu_U) {
    return -c.C * q_B - c.D * q_I + c.E * alpha + c.F * nu_U;
}

double broker_rate_flow_form(const BrokerCoefficients& c, double q_B, double q_I,
                             double nu_I, double nu_U) {
    return -c.C * q_B - c.G * q_I + c.H * nu_I + c.F * nu_U;
}

double broker_value(const BrokerCoefficients& c, double x_B, double S, double alpha,
                    double q_B, double q_I, double nu_U) {
    const double q0 = c.c0 + c.c1 * alpha + c.c2 * nu_U + c.c3 * alpha * nu_U +
                      c.c4 * alpha * alpha + c.c5 * nu_U * nu_U +
                      (c.e1 * alpha + c.e2 * nu_U) * q_I + c.f2b * q_I * q_I;
    const double q1 = c.d0 * alpha + c.d1 * q_I + c.d2 * nu_U;
    return x_B + q_B * S - c.a_B * q_B * q_B + q0 + q1 * q_B + c.q2 * q_B * q_B;
}

double hjb_residual_broker(const ValidatedParams& p, const InformedCoefficients& ic,
                           const BrokerCoefficients& bc, double x_B, double S, double alpha,
                           double q_B, double q_I, double nu_U) {
    const auto& br = p.broker();
    const auto& m = p.market();
    const auto& fl = p.flow();
    const double kI = p.informed().k_I, kU = br.k_U, kB = br.k_B;
    const double aB = br.a_B, phiB = br.phi_B, b = br.b, beta = br.beta;

    const double nu_I = informed_rate(ic, alpha, q_I);

    const double Q = broker_value(bc, x_B, S, alpha, q_B, q_I, nu_U);
    const double Q_x = 1.0;
    const double Q_S = q_B;
    const double Q_SS = 0.0;
    const double q1 = bc.d0 * alpha + bc.d1 * q_I + bc.d2 * nu_U;
    const double Q_a = bc.c1 + bc.c3 * nu_U + 2.0 * bc.c4 * alpha + bc.e1 * q_I +
                       q_B * bc.d0;
    const double Q_aa = 2.0 * bc.c4;
    const double Q_u = bc.c2 + bc.c3 * alpha + 2.0 * bc.c5 * nu_U + bc.e2 * q_I +
                       q_B * bc.d2;
    const double Q_uu = 2.0 * bc.c5;
    const double Q_qI = bc.e1 * alpha + bc.e2 * nu_U + 2.0 * bc.f2b * q_I + q_B * bc.d1;
    const double Q_qB = S - 2.0 * aB * q_B + q1 + 2.0 * bc.q2 * q_B;

    const double gen_alpha = -m.kappa_alpha * alpha * Q_a +
                             0.5 * m.sigma_alpha * m.sigma_alpha * Q_aa;
    const double sigU = flow_diffusion(p);  // elasticity-scaled when enabled
    const double gen_nuU = -fl.kappa_u * nu_U * Q_u + 0.5 * sigU * sigU * Q_uu;

    // maximizing rate, then the scale-free residual (see the informed case)
    const double nu = (b * q_B - 2.0 * aB * q_B - Q_x * S + Q_S * b + Q_qB) /
                      (2.0 * kB * (1.0 + Q_x));
    const double terms[] = {-beta * (Q - x_B - q_B * S + aB * q_B * q_B),
                            kI * nu_I * nu_I,
                            kU * nu_U * nu_U,
                            q_B * alpha,
                            2.0 * aB * q_B * (nu_I + nu_U),
                            gen_alpha,
                            gen_nuU,
                            Q_x * nu_I * (S + kI * nu_I),
                            Q_x * nu_U * (S + kU * nu_U),
                            nu_I * Q_qI,
                            alpha * Q_S,
                            0.5 * m.sigma_s * m.sigma_s * Q_SS,
                            -(nu_I + nu_U) * Q_qB,
                            -phiB * q_B * q_B,
                            -kB * nu * nu,
                            b * q_B * nu,
                            -2.0 * aB * q_B * nu,
                            -Q_x * nu * (S + kB * nu),
                            Q_S * b * nu,
                            nu * Q_qB};
    double sum = 0.0, scale = 1.0;
    for (double t : terms) {
        sum += t;
        scale = std::max(scale, std::abs(t));
    }
    return sum / scale;
}

double q2_quadratic_residual(const ValidatedParams& p, const BrokerCoefficients& bc) {
    const auto& br = p.broker();
    const double gap = br.b - 2.0 * br.a_B + bc.q2;
    return -br.beta * bc.q2 - br.phi_B + gap * gap / (2.0 * br.k_B);
}

std::array<double, 3> d_system_residuals(const ValidatedParams& p,
                                         const InformedCoefficients& ic,
                                         const BrokerCoefficients& bc) {
    const auto& br = p.broker();
    const double kB = br.k_B, aB = br.a_B, b = br.b, beta = br.beta;
    const double kap = p.market().kappa_alpha, kau = p.flow().kappa_u;
    const double A = ic.A, B = ic.B;
    const double slope = (b - 2.0 * aB + bc.q2) / (2.0 * kB);  // = -C
    return {
        -beta * bc.d0 + 2.0 + 4.0 * aB * A + A * bc.d1 - 2.0 * A * bc.q2 -
            bc.d0 * kap + bc.d0 * slope,
        -beta * bc.d1 - 4.0 * aB * B - B * bc.d1 + 2.0 * B * bc.q2 + bc.d1 * slope,
        -beta * bc.d2 + 4.0 * aB - 2.0 * bc.q2 - bc.d2 * kau + bc.d2 * slope,
    };
}

std::array<double, 4> informed_value_gradient_fd(const InformedCoefficients& c, double x,
                                                 double S, double alpha, double q_I,
                                                 double step) {
    const auto f = [&](double a0, double a1, double a2, double a3) {
        return informed_value(c, a0, a1, a2, a3);
    };
    return {(f(x + step, S, alpha, q_I) - f(x - step, S, alpha, q_I)) / (2 * step),
            (f(x, S + step, alpha, q_I) - f(x, S - step, alpha, q_I)) / (2 * step),
            (f(x, S, alpha + step, q_I) - f(x, S, alpha - step, q_I)) / (2 * step),
            (f(x, S, alpha, q_I + step) - f(x, S, alpha, q_I - step)) / (2 * step)};
}

std::array<double, 6> broker_value_gradient_fd(const BrokerCoefficients& c, double x_B,
                                               double S, double alpha, double q_B,
                                               double q_I, double nu_U, double step) {
    const auto f = [&](double a0, double a1, double a2, double a3, double a4, double a5) {
        return broker_value(c, a0, a1, a2, a3, a4, a5);
    };
    std::array<double, 6> g{};
    std::array<double, 6> z{x_B, S, alpha, q_B, q_I, nu_U};
    for (int k = 0; k < 6; ++k) {
        auto up = z, dn = z;
        up[k] += step;
        dn[k] -= step;
        g[k] = (f(up[0], up[1], up[2], up[3], up[4], up[5]) -
                f(dn[0], dn[1], dn[2], dn[3], dn[4], dn[5])) / (2 * step);
    }
    return g;
}

}  // namespace brokersim
