#pragma once

// Single-timestep branch-flow OPF with the second-order cone relaxation
// v_from * l >= P^2 + Q^2, EV turn-up flexibility per (cluster, bus) and wind
// curtailment as decisions.

#include <complex>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "flexgrid/conic.hpp"
#include "flexgrid/grid_model.hpp"

namespace flexgrid::opf {

inline constexpr double kVoltageSlack = 1e-6;     // tolerance on v_sq bounds
inline constexpr double kBoundSlack = 1e-8;       // tolerance on flex/curtail bounds
inline constexpr double kExactnessFlag = 1e-6;    // relaxation gap flag (p.u.^2 ... p.u.^3)
inline constexpr double kDefaultLossWeight = 200.0;

// Upper bound on turn-up flexibility of one cluster at one bus (p.u.).
struct FlexBound {
    int cluster = 0;
    std::size_t bus = 0;
    double ub = 0.0;
};

struct OpfInstance {
    std::shared_ptr<const grid::PerUnitNetwork> network;
    std::size_t t = 0;
    std::vector<double> demand_p;     // per bus, p.u., including any baseline EV load
    std::vector<double> demand_q;     // per bus, p.u.
    std::vector<double> gen_output;   // per generator: available wind or firm output, p.u.
    std::vector<double> pi_curtail;   // per generator; unused for firm units
    std::vector<FlexBound> flex;      // one entry per (cluster, bus)
    std::vector<double> pi_flex;      // per cluster
    double loss_weight = kDefaultLossWeight;
    double slack_import_max = grid::kUnlimited;  // p.u.
    double slack_export_max = grid::kUnlimited;  // p.u.
};

// Validates costs and bounds: every curtailable generator must cost more
// than every cluster's flexibility. Throws ConfigError otherwise.
OpfInstance build_instance(std::shared_ptr<const grid::PerUnitNetwork> network, std::size_t t,
                           std::vector<FlexBound> bounds, std::vector<double> pi_flex, double loss_weight,
                           const std::vector<double>& extra_demand_p = {});

// Relaxation may be loose when curtailing is cheaper than burning the same
// power in fictitious line losses. Returns the lines where that can happen.
std::vector<std::string> loose_relaxation_lines(const OpfInstance& instance);

struct VariableMap {
    std::vector<int> v;        // per bus
    std::vector<int> p, q, l;  // per line
    std::vector<int> flex;     // per FlexBound; -1 when the bound is zero
    std::vector<int> curtail;  // per generator; -1 when not curtailable or nothing available
    std::vector<int> gen_q;    // per generator; -1 without reactive capability
    int slack_p = -1;
    int slack_q = -1;
};

struct ConstraintCounts {
    int ohm = 0;              // one per line
    int balance = 0;          // one complex balance per bus
    int relaxation_cones = 0; // one rotated cone per line
    int thermal_cones = 0;
    int bound_rows = 0;
    int equality_rows = 0;
};

struct AssembledOpf {
    conic::ConicProgram program;
    VariableMap vars;
    ConstraintCounts counts;
    double cost_scale = 1.0;  // objective coefficients were divided by this
};

AssembledOpf assemble_conic(const OpfInstance& instance);

enum class SolveStatus { optimal, infeasible, numeric_failure };
std::string to_string(SolveStatus status);

struct ObjectiveParts {
    double flex_cost = 0.0;
    double curtail_cost = 0.0;
    double loss_term = 0.0;
    double total() const { return flex_cost + curtail_cost + loss_term; }
};

struct OpfSolution {
    SolveStatus status = SolveStatus::numeric_failure;
    std::vector<double> v_sq;
    std::vector<std::complex<double>> s_flow;  // sending-end, parent -> child
    std::vector<double> l_sq;
    std::vector<double> flex;      // per FlexBound
    std::vector<double> curtail;   // per generator
    std::vector<double> gen_q;     // per generator
    std::complex<double> slack_injection;
    ObjectiveParts objective;
    double exactness = 0.0;        // max |v_from * l - |S|^2|
    int iterations = 0;
    std::string message;
};

OpfSolution solve(const AssembledOpf& assembled, const OpfInstance& instance,
                  const conic::BackendFactory& backend = conic::default_backend_factory());

// Convenience: assemble and solve.
OpfSolution solve_instance(const OpfInstance& instance,
                           const conic::BackendFactory& backend = conic::default_backend_factory());

struct ExactnessReport {
    std::vector<double> gap;  // per line: v_from * l - |S|^2
    double max_gap = 0.0;
    double min_gap = 0.0;
    bool flagged = false;
};

ExactnessReport exactness_report(const OpfSolution& solution, const OpfInstance& instance);

// Residuals recomputed from the solution fields alone.
struct PhysicalResiduals {
    double balance = 0.0;  // max over buses, p.u.
    double ohm = 0.0;      // max over lines, p.u.
    double cone = 0.0;     // most negative v_from * l - |S|^2 (reported as a positive violation)
};

PhysicalResiduals physical_residuals(const OpfSolution& solution, const OpfInstance& instance);

struct OperatingPoint {
    std::vector<double> v_pu;     // per bus
    std::vector<double> i_pu;     // per line
    std::vector<double> loss_pu;  // per line, r * l
    double total_loss_pu = 0.0;
    bool physical = false;        // false: relaxed values, not a power-flow solution
};

OperatingPoint recover_operating_point(const OpfSolution& solution, const OpfInstance& instance);

// `element_type,id,quantity,value_pu` rows followed by a `# ...` summary line.
void write_solution_dump(std::ostream& out, const OpfSolution& solution, const OpfInstance& instance);

}  // namespace flexgrid::opf
