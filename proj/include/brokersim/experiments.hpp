#pragma once

#include <string>
#include <vector>

#include "brokersim/params.hpp"

namespace brokersim {

enum class SweepTarget { informed_value, broker_value };

struct SweepAxis {
    std::string name;
    double min = 0.0;
    double max = 0.0;
    int count = 1;
    bool log = false;
};

// Two-axis parameter sweep of a value function at the zero initial
// state (x = q_I = q_B = alpha = nu_U = 0, S = S0), where the informed
// value reduces to f0 and the broker value to c0.
struct SweepSpec {
    SweepTarget target = SweepTarget::informed_value;
    SweepAxis axis1;
    SweepAxis axis2;  // count = 1 and empty name for a 1-D sweep
    ModelParams base;
};

struct SurfaceRow {
    double axis1 = 0.0;
    double axis2 = 0.0;
    double value = 0.0;
    std::string status;  // "ok" or the validation error category
};

struct SurfaceTable {
    SweepSpec spec;
    std::vector<SurfaceRow> rows;  // row-major over (axis1, axis2)
    std::map<std::string, std::string> metadata;  // resolved base params
};

SurfaceTable run_sweep(const SweepSpec& spec);

struct Fig4Row {
    double ratio = 0.0;   // k_U/k_B = k_I/k_B
    double value = 0.0;   // broker value c0
    double sigma_scale = 0.0;
    bool degenerate_flow = false;  // ratio = 1: client flow diffusion is 0
};

struct Fig4Table {
    std::vector<Fig4Row> rows;
    double argmax_ratio = 0.0;
    double max_value = 0.0;
};

// Broker value against the common client liquidity cost k_I = k_U =
// ratio*k_B, with the uninformed flow volatility scaled elastically by
// (k_B - k_U)/(k_B - 1e-3).
Fig4Table figure4_curve(const ValidatedParams& p, const std::vector<double>& ratio_grid);
std::vector<double> default_ratio_grid();  // 0.10 .. 1.00, 91 points

struct MonotonicityCheck {
    std::string description;
    std::string status;  // "pass", "fail", "flat", "degenerate"
};

struct MonotonicityReport {
    std::vector<MonotonicityCheck> checks;
    double plane_r_squared = 0.0;  // broker value over (phi_I, phi_B)
    bool all_pass = false;
};

MonotonicityReport monotonicity_report(const ValidatedParams& p);

void write_surface_csv(const std::string& path, const SurfaceTable& table);
void write_fig4_csv(const std::string& path, const Fig4Table& table);

}  // namespace brokersim
