#include "flexgrid/opf.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>
#include <utility>

#include "flexgrid/csv.hpp"
#include "flexgrid/error.hpp"

namespace flexgrid::opf {

using conic::Affine;

namespace {

bool curtailable(const grid::PuGenerator& g) { return g.kind == grid::GeneratorKind::wind_curtailable; }

}  // namespace

OpfInstance build_instance(std::shared_ptr<const grid::PerUnitNetwork> network, std::size_t t,
                           std::vector<FlexBound> bounds, std::vector<double> pi_flex, double loss_weight,
                           const std::vector<double>& extra_demand_p) {
    if (!network) throw ConfigError("opf: no network");
    const auto& net = *network;
    if (t >= net.time.n_steps)
        throw ConfigError("opf: timestep " + std::to_string(t) + " outside horizon of " +
                          std::to_string(net.time.n_steps));
    if (!(loss_weight > 0.0) || !std::isfinite(loss_weight)) throw ConfigError("opf: loss_weight must be positive");
    const std::size_t nb = net.buses.size();
    if (!extra_demand_p.empty() && extra_demand_p.size() != nb)
        throw ConfigError("opf: extra demand has wrong length");

    double pi_max = 0.0;
    for (std::size_t i = 0; i < pi_flex.size(); ++i) {
        if (!(pi_flex[i] > 0.0) || !std::isfinite(pi_flex[i]))
            throw ConfigError("opf: pi_flex[" + std::to_string(i) + "] must be positive and finite");
        pi_max = std::max(pi_max, pi_flex[i]);
    }
    std::set<std::pair<int, std::size_t>> seen;
    for (const auto& b : bounds) {
        if (b.cluster < 0 || static_cast<std::size_t>(b.cluster) >= pi_flex.size())
            throw ConfigError("opf: flex bound references cluster " + std::to_string(b.cluster) + " without a cost");
        if (b.bus >= nb) throw ConfigError("opf: flex bound references bus index " + std::to_string(b.bus));
        if (!(b.ub >= 0.0) || !std::isfinite(b.ub))
            throw ConfigError("opf: negative or non-finite flex bound for cluster " + std::to_string(b.cluster) +
                              " at bus '" + net.buses[b.bus].id + "'");
        if (!seen.emplace(b.cluster, b.bus).second)
            throw ConfigError("opf: duplicate flex bound for cluster " + std::to_string(b.cluster) + " at bus '" +
                              net.buses[b.bus].id + "'");
    }

    OpfInstance inst;
    inst.t = t;
    inst.loss_weight = loss_weight;
    const double tan_phi = std::tan(std::acos(net.load_power_factor));
    inst.demand_p.assign(nb, 0.0);
    inst.demand_q.assign(nb, 0.0);
    for (std::size_t j = 0; j < nb; ++j) {
        const double base = net.has_demand[j] ? net.demand[j][t] : 0.0;
        inst.demand_p[j] = base + (extra_demand_p.empty() ? 0.0 : extra_demand_p[j]);
        // EV load is taken at unity power factor.
        inst.demand_q[j] = base * tan_phi;
    }
    for (const auto& g : net.generators) {
        const double p = g.p_profile.at(t);
        if (p < 0.0) throw DataError("generator '" + g.id + "': negative output at step " + std::to_string(t));
        inst.gen_output.push_back(p);
        inst.pi_curtail.push_back(curtailable(g) ? g.curtail_cost : 0.0);
        if (curtailable(g) && !pi_flex.empty() && !(g.curtail_cost > pi_max))
            throw ConfigError("opf: curtail cost of generator '" + g.id + "' (" + csv::format_double(g.curtail_cost) +
                              ") must exceed every flexibility cost (max " + csv::format_double(pi_max) + ")");
    }
    const auto& slack = net.buses[net.topology.slack];
    inst.slack_import_max = slack.p_import_max;
    inst.slack_export_max = slack.p_export_max;
    inst.flex = std::move(bounds);
    inst.pi_flex = std::move(pi_flex);
    inst.network = std::move(network);
    return inst;
}

std::vector<std::string> loose_relaxation_lines(const OpfInstance& inst) {
    double pi_g = 0.0;
    for (double c : inst.pi_curtail) pi_g = std::max(pi_g, c);
    std::vector<std::string> out;
    if (pi_g == 0.0) return out;
    for (const auto& l : inst.network->lines) {
        const double z = l.z_abs();
        // Burning power as fictitious losses must cost more than curtailing
        // it, both as an energy sink and as a voltage reducer.
        const bool sink_ok = l.r == 0.0 || inst.loss_weight * z > pi_g * l.r;
        const bool volt_ok = l.r == 0.0 || 2.0 * l.r * inst.loss_weight > pi_g * z;
        if (!sink_ok || !volt_ok) out.push_back(l.id);
    }
    return out;
}

AssembledOpf assemble_conic(const OpfInstance& inst) {
    const auto& net = *inst.network;
    const std::size_t nb = net.buses.size();
    const std::size_t nl = net.lines.size();
    const std::size_t ng = net.generators.size();
    const std::size_t slack = net.topology.slack;

    AssembledOpf out;
    auto& vars = out.vars;
    conic::ProgramBuilder pb;

    for (std::size_t j = 0; j < nb; ++j) vars.v.push_back(pb.add_variable());
    for (std::size_t l = 0; l < nl; ++l) {
        vars.p.push_back(pb.add_variable());
        vars.q.push_back(pb.add_variable());
        vars.l.push_back(pb.add_variable(inst.loss_weight * net.lines[l].z_abs()));
    }
    for (const auto& f : inst.flex)
        vars.flex.push_back(f.ub > 0.0 ? pb.add_variable(inst.pi_flex[static_cast<std::size_t>(f.cluster)]) : -1);
    for (std::size_t g = 0; g < ng; ++g) {
        const auto& gen = net.generators[g];
        vars.curtail.push_back(curtailable(gen) && inst.gen_output[g] > 0.0 ? pb.add_variable(inst.pi_curtail[g]) : -1);
        vars.gen_q.push_back(gen.has_q_capability ? pb.add_variable() : -1);
    }
    vars.slack_p = pb.add_variable();
    vars.slack_q = pb.add_variable();

    const auto& slack_bus = net.buses[slack];
    pb.add_equality(Affine::var(vars.v[slack]), slack_bus.v_set * slack_bus.v_set);

    for (std::size_t l = 0; l < nl; ++l) {
        const auto& line = net.lines[l];
        const std::size_t k = net.topology.line_from[l];
        const std::size_t j = net.topology.line_to[l];
        Affine ohm = Affine::var(vars.v[j]);
        ohm.add(vars.v[k], -1.0)
            .add(vars.p[l], 2.0 * line.r)
            .add(vars.q[l], 2.0 * line.x)
            .add(vars.l[l], -line.z_abs_sq());
        pb.add_equality(ohm, 0.0);
        ++out.counts.ohm;
    }

    std::vector<Affine> bal_p(nb), bal_q(nb);
    for (std::size_t l = 0; l < nl; ++l) {
        const auto& line = net.lines[l];
        const std::size_t k = net.topology.line_from[l];
        const std::size_t j = net.topology.line_to[l];
        bal_p[j].add(vars.p[l], 1.0).add(vars.l[l], -line.r);
        bal_q[j].add(vars.q[l], 1.0).add(vars.l[l], -line.x);
        bal_p[k].add(vars.p[l], -1.0);
        bal_q[k].add(vars.q[l], -1.0);
    }
    bal_p[slack].add(vars.slack_p, 1.0);
    bal_q[slack].add(vars.slack_q, 1.0);
    std::vector<double> rhs_p = inst.demand_p;
    std::vector<double> rhs_q = inst.demand_q;
    for (std::size_t g = 0; g < ng; ++g) {
        const std::size_t j = net.generators[g].bus;
        rhs_p[j] -= inst.gen_output[g];
        if (vars.curtail[g] >= 0) bal_p[j].add(vars.curtail[g], -1.0);
        if (vars.gen_q[g] >= 0) bal_q[j].add(vars.gen_q[g], 1.0);
    }
    for (std::size_t f = 0; f < inst.flex.size(); ++f)
        if (vars.flex[f] >= 0) bal_p[inst.flex[f].bus].add(vars.flex[f], -1.0);
    for (std::size_t j = 0; j < nb; ++j) {
        pb.add_equality(bal_p[j], rhs_p[j]);
        pb.add_equality(bal_q[j], rhs_q[j]);
        ++out.counts.balance;
    }

    auto lower = [&](int var, double lo) {
        Affine a = Affine::var(var);
        a.constant = -lo;
        pb.add_nonneg(a);
        ++out.counts.bound_rows;
    };
    auto upper = [&](int var, double hi) {
        Affine a = Affine::var(var, -1.0);
        a.constant = hi;
        pb.add_nonneg(a);
        ++out.counts.bound_rows;
    };

    for (std::size_t j = 0; j < nb; ++j) {
        if (j == slack) continue;
        lower(vars.v[j], net.buses[j].v_min * net.buses[j].v_min);
        upper(vars.v[j], net.buses[j].v_max * net.buses[j].v_max);
    }
    for (std::size_t f = 0; f < inst.flex.size(); ++f) {
        if (vars.flex[f] < 0) continue;
        lower(vars.flex[f], 0.0);
        upper(vars.flex[f], inst.flex[f].ub);
    }
    for (std::size_t g = 0; g < ng; ++g) {
        if (vars.curtail[g] >= 0) {
            lower(vars.curtail[g], 0.0);
            upper(vars.curtail[g], inst.gen_output[g]);
        }
        if (vars.gen_q[g] >= 0) {
            lower(vars.gen_q[g], net.generators[g].q_min);
            upper(vars.gen_q[g], net.generators[g].q_max);
        }
    }
    if (std::isfinite(inst.slack_import_max)) upper(vars.slack_p, inst.slack_import_max);
    if (std::isfinite(inst.slack_export_max)) lower(vars.slack_p, -inst.slack_export_max);

    for (std::size_t l = 0; l < nl; ++l) {
        const std::size_t k = net.topology.line_from[l];
        // v_k * l >= P^2 + Q^2  <=>  |(2P, 2Q, v_k - l)| <= v_k + l
        pb.add_soc({Affine::var(vars.v[k]).add(vars.l[l], 1.0), Affine::var(vars.p[l], 2.0),
                    Affine::var(vars.q[l], 2.0), Affine::var(vars.v[k]).add(vars.l[l], -1.0)});
        ++out.counts.relaxation_cones;
    }
    for (std::size_t l = 0; l < nl; ++l) {
        pb.add_soc({Affine(net.lines[l].s_max), Affine::var(vars.p[l]), Affine::var(vars.q[l])});
        ++out.counts.thermal_cones;
    }
    out.counts.equality_rows = pb.n_equalities();

    out.program = pb.finish();
    const double cmax = out.program.c.size() ? out.program.c.cwiseAbs().maxCoeff() : 0.0;
    if (cmax > 0.0) {
        out.cost_scale = cmax;
        out.program.c /= cmax;
    }
    return out;
}

std::string to_string(SolveStatus status) {
    switch (status) {
        case SolveStatus::optimal: return "optimal";
        case SolveStatus::infeasible: return "infeasible";
        case SolveStatus::numeric_failure: return "numeric_failure";
    }
    return "unknown";
}

OpfSolution solve(const AssembledOpf& assembled, const OpfInstance& inst, const conic::BackendFactory& backend) {
    const auto& net = *inst.network;
    const auto& vars = assembled.vars;
    auto solver = backend();
    const conic::Result res = solver->solve(assembled.program);

    OpfSolution sol;
    sol.iterations = res.iterations;
    sol.message = res.message;
    switch (res.status) {
        case conic::Status::optimal: sol.status = SolveStatus::optimal; break;
        case conic::Status::primal_infeasible: sol.status = SolveStatus::infeasible; break;
        default: sol.status = SolveStatus::numeric_failure; break;
    }
    const std::size_t nb = net.buses.size();
    const std::size_t nl = net.lines.size();
    const std::size_t ng = net.generators.size();
    sol.v_sq.assign(nb, 0.0);
    sol.s_flow.assign(nl, {0.0, 0.0});
    sol.l_sq.assign(nl, 0.0);
    sol.flex.assign(inst.flex.size(), 0.0);
    sol.curtail.assign(ng, 0.0);
    sol.gen_q.assign(ng, 0.0);
    if (sol.status != SolveStatus::optimal) return sol;

    const auto& x = res.x;
    for (std::size_t j = 0; j < nb; ++j) sol.v_sq[j] = x[vars.v[j]];
    for (std::size_t l = 0; l < nl; ++l) {
        sol.s_flow[l] = {x[vars.p[l]], x[vars.q[l]]};
        sol.l_sq[l] = x[vars.l[l]];
        sol.objective.loss_term += inst.loss_weight * net.lines[l].z_abs() * sol.l_sq[l];
    }
    for (std::size_t f = 0; f < inst.flex.size(); ++f) {
        if (vars.flex[f] < 0) continue;
        sol.flex[f] = x[vars.flex[f]];
        sol.objective.flex_cost += inst.pi_flex[static_cast<std::size_t>(inst.flex[f].cluster)] * sol.flex[f];
    }
    for (std::size_t g = 0; g < ng; ++g) {
        if (vars.curtail[g] >= 0) {
            sol.curtail[g] = x[vars.curtail[g]];
            sol.objective.curtail_cost += inst.pi_curtail[g] * sol.curtail[g];
        }
        if (vars.gen_q[g] >= 0) sol.gen_q[g] = x[vars.gen_q[g]];
    }
    sol.slack_injection = {x[vars.slack_p], x[vars.slack_q]};
    sol.exactness = 0.0;
    for (std::size_t l = 0; l < nl; ++l) {
        const double gap = sol.v_sq[net.topology.line_from[l]] * sol.l_sq[l] - std::norm(sol.s_flow[l]);
        sol.exactness = std::max(sol.exactness, std::abs(gap));
    }
    return sol;
}

OpfSolution solve_instance(const OpfInstance& instance, const conic::BackendFactory& backend) {
    return solve(assemble_conic(instance), instance, backend);
}

ExactnessReport exactness_report(const OpfSolution& sol, const OpfInstance& inst) {
    const auto& net = *inst.network;
    ExactnessReport rep;
    for (std::size_t l = 0; l < net.lines.size(); ++l) {
        const double gap = sol.v_sq[net.topology.line_from[l]] * sol.l_sq[l] - std::norm(sol.s_flow[l]);
        rep.gap.push_back(gap);
    }
    if (!rep.gap.empty()) {
        rep.max_gap = *std::max_element(rep.gap.begin(), rep.gap.end());
        rep.min_gap = *std::min_element(rep.gap.begin(), rep.gap.end());
    }
    rep.flagged = rep.max_gap > kExactnessFlag;
    return rep;
}

PhysicalResiduals physical_residuals(const OpfSolution& sol, const OpfInstance& inst) {
    const auto& net = *inst.network;
    const std::size_t nb = net.buses.size();
    std::vector<std::complex<double>> mismatch(nb);
    for (std::size_t j = 0; j < nb; ++j) mismatch[j] = {-inst.demand_p[j], -inst.demand_q[j]};
    for (std::size_t l = 0; l < net.lines.size(); ++l) {
        const auto& line = net.lines[l];
        const std::complex<double> z(line.r, line.x);
        mismatch[net.topology.line_to[l]] += sol.s_flow[l] - z * sol.l_sq[l];
        mismatch[net.topology.line_from[l]] -= sol.s_flow[l];
    }
    for (std::size_t g = 0; g < net.generators.size(); ++g)
        mismatch[net.generators[g].bus] += std::complex<double>(inst.gen_output[g] - sol.curtail[g], sol.gen_q[g]);
    for (std::size_t f = 0; f < inst.flex.size(); ++f) mismatch[inst.flex[f].bus] -= sol.flex[f];
    mismatch[net.topology.slack] += sol.slack_injection;

    PhysicalResiduals r;
    for (const auto& m : mismatch) r.balance = std::max({r.balance, std::abs(m.real()), std::abs(m.imag())});
    for (std::size_t l = 0; l < net.lines.size(); ++l) {
        const auto& line = net.lines[l];
        const double lhs = sol.v_sq[net.topology.line_to[l]];
        const double rhs = sol.v_sq[net.topology.line_from[l]] -
                           2.0 * (line.r * sol.s_flow[l].real() + line.x * sol.s_flow[l].imag()) +
                           line.z_abs_sq() * sol.l_sq[l];
        r.ohm = std::max(r.ohm, std::abs(lhs - rhs));
        const double gap = sol.v_sq[net.topology.line_from[l]] * sol.l_sq[l] - std::norm(sol.s_flow[l]);
        r.cone = std::max(r.cone, -gap);
    }
    return r;
}

OperatingPoint recover_operating_point(const OpfSolution& sol, const OpfInstance& inst) {
    const auto& net = *inst.network;
    OperatingPoint op;
    for (double v : sol.v_sq) op.v_pu.push_back(std::sqrt(std::max(v, 0.0)));
    for (std::size_t l = 0; l < net.lines.size(); ++l) {
        op.i_pu.push_back(std::sqrt(std::max(sol.l_sq[l], 0.0)));
        op.loss_pu.push_back(net.lines[l].r * sol.l_sq[l]);
        op.total_loss_pu += op.loss_pu.back();
    }
    op.physical = sol.status == SolveStatus::optimal && !exactness_report(sol, inst).flagged;
    return op;
}

void write_solution_dump(std::ostream& out, const OpfSolution& sol, const OpfInstance& inst) {
    const auto& net = *inst.network;
    auto row = [&](const char* type, const std::string& id, const char* qty, double v) {
        out << type << ',' << id << ',' << qty << ',' << csv::format_double(v) << '\n';
    };
    out << "element_type,id,quantity,value_pu\n";
    for (std::size_t j = 0; j < net.buses.size(); ++j) row("bus", net.buses[j].id, "v_sq", sol.v_sq[j]);
    for (std::size_t l = 0; l < net.lines.size(); ++l) {
        row("line", net.lines[l].id, "p", sol.s_flow[l].real());
        row("line", net.lines[l].id, "q", sol.s_flow[l].imag());
        row("line", net.lines[l].id, "l_sq", sol.l_sq[l]);
    }
    for (std::size_t f = 0; f < inst.flex.size(); ++f)
        row("flex", "c" + std::to_string(inst.flex[f].cluster) + "@" + net.buses[inst.flex[f].bus].id, "p",
            sol.flex[f]);
    for (std::size_t g = 0; g < net.generators.size(); ++g) {
        row("generator", net.generators[g].id, "curtail", sol.curtail[g]);
        row("generator", net.generators[g].id, "q", sol.gen_q[g]);
    }
    row("slack", net.buses[net.topology.slack].id, "p", sol.slack_injection.real());
    row("slack", net.buses[net.topology.slack].id, "q", sol.slack_injection.imag());
    out << "# status=" << to_string(sol.status) << " flex_cost=" << csv::format_double(sol.objective.flex_cost)
        << " curtail_cost=" << csv::format_double(sol.objective.curtail_cost)
        << " loss_term=" << csv::format_double(sol.objective.loss_term)
        << " exactness=" << csv::format_double(sol.exactness) << '\n';
}

}  // namespace flexgrid::opf
