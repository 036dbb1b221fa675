#include <cstdio>
#include <fstream>

#include "doctest.h"

#include "brokersim/params.hpp"

using namespace brokersim;

TEST_CASE("baseline parameter set validates") {
    const ModelParams raw = example_params();
    CHECK_NOTHROW(validate(raw));
    CHECK(raw.broker.b == 0.0);
    CHECK(raw.informed.beta == raw.broker.beta);
}

TEST_CASE("validation is idempotent") {
    const ValidatedParams p = validate(example_params());
    const ValidatedParams p2 = validate(p.get());
    CHECK(params_as_map(p.get()) == params_as_map(p2.get()));
}

TEST_CASE("domain errors") {
    ModelParams raw = example_params();
    raw.informed.k_I = 0.0;
    CHECK_THROWS_AS(validate(raw), DomainError);

    raw = example_params();
    raw.broker.k_B = -1e-3;
    CHECK_THROWS_AS(validate(raw), DomainError);

    raw = example_params();
    raw.informed.beta = 0.0;
    raw.broker.beta = 0.0;
    CHECK_THROWS_AS(validate(raw), DomainError);

    raw = example_params();
    raw.broker.beta = 0.02;
    CHECK_THROWS_AS(validate(raw), DomainError);

    raw = example_params();
    raw.market.S0 = -100.0;
    CHECK_THROWS_AS(validate(raw), DomainError);
}

TEST_CASE("regime errors") {
    ModelParams raw = example_params();
    raw.broker.a_B = 0.4;
    raw.broker.b = 1.0;
    raw.broker.beta = 1e-6;
    raw.informed.beta = 1e-6;
    raw.broker.phi_B = 0.0;
    CHECK_THROWS_AS(validate(raw), RegimeError);
}

TEST_CASE("overrides and key lookup") {
    ModelParams raw = example_params();
    apply_override(raw, "k_I", "2e-3");
    CHECK(raw.informed.k_I == 2e-3);
    apply_override(raw, "beta", "0.05");
    CHECK(raw.informed.beta == 0.05);
    CHECK(raw.broker.beta == 0.05);
    apply_override(raw, "elasticity_enabled", "true");
    CHECK(raw.flow.elasticity_enabled);
    CHECK_THROWS_AS(apply_override(raw, "no_such_key", "1"), ConfigError);
    CHECK_THROWS_AS(apply_override(raw, "k_I", "abc"), ConfigError);
}

TEST_CASE("config file round trip") {
    const char* path = "params_roundtrip.cfg";
    {
        std::ofstream out(path);
        out << "# comment line\n";
        out << "k_I = 5e-4   # trailing comment\n";
        out << "sigma_U=50\n";
        out << "\n";
    }
    const ModelParams raw = load_params_file(path);
    CHECK(raw.informed.k_I == 5e-4);
    CHECK(raw.flow.sigma_U == 50.0);
    CHECK(raw.market.S0 == 100.0);  // untouched default
    std::remove(path);

    CHECK_THROWS_AS(load_params_file("does_not_exist.cfg"), ConfigError);
}

TEST_CASE("elasticity configuration constraints") {
    ModelParams raw = example_params();
    raw.flow.elasticity_enabled = true;
    CHECK_NOTHROW(validate(raw));  // k_U = 1e-3 <= k_B = 1.2e-3

    raw.broker.k_U = raw.broker.k_B;  // boundary: zero diffusion, allowed
    CHECK_NOTHROW(validate(raw));

    raw.broker.k_U = 2e-3;  // above k_B
    CHECK_THROWS_AS(validate(raw), DomainError);

    raw = example_params();
    raw.flow.elasticity_enabled = true;
    raw.flow.k_U_ref = 1.2e-3;  // denominator would vanish
    CHECK_THROWS_AS(validate(raw), DomainError);
}

TEST_CASE("params_as_map covers every key") {
    const auto m = params_as_map(example_params());
    for (const char* key :
         {"S0", "alpha0", "kappa_alpha", "sigma_alpha", "sigma_s", "k_I", "a_I", "phi_I",
          "beta", "k_B", "k_U", "a_B", "phi_B", "b", "nu_U0", "kappa_u", "sigma_U",
          "elasticity_enabled", "k_U_ref"})
        CHECK(m.count(key) == 1);
}
