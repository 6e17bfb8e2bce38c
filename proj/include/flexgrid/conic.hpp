#pragma once

// Second-order cone programs in the standard form
//
//     minimize    c'x
//     subject to  A x = b
//                 G x + s = h,   s in K
//
// where K is a product of one nonnegative orthant (the first `nonneg` rows of
// G) followed by second-order cones {(t, u) : |u| <= t}. The dual is
//
//     maximize   -b'y - h'z   subject to  A'y + G'z + c = 0,  z in K.

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace flexgrid::conic {

using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

struct ConeDims {
    int nonneg = 0;
    std::vector<int> soc;  // dimension of each second-order cone, in row order

    int rows() const;
    int degree() const { return nonneg + static_cast<int>(soc.size()); }
};

struct ConicProgram {
    Vector c;
    SparseMatrix A;
    Vector b;
    SparseMatrix G;
    Vector h;
    ConeDims cones;

    int n_vars() const { return static_cast<int>(c.size()); }
    int n_eq() const { return static_cast<int>(b.size()); }
    int n_cone_rows() const { return static_cast<int>(h.size()); }
};

// Sparse linear expression sum(coef_i * x_i) + constant.
struct Affine {
    std::vector<std::pair<int, double>> terms;
    double constant = 0.0;

    Affine() = default;
    Affine(double k) : constant(k) {}  // NOLINT(google-explicit-constructor)
    static Affine var(int index, double coef = 1.0) {
        Affine a;
        a.terms.emplace_back(index, coef);
        return a;
    }
    Affine& add(int index, double coef) {
        terms.emplace_back(index, coef);
        return *this;
    }
};

// Incremental assembly: nonnegative rows and cones may be added in any order;
// finish() places all orthant rows ahead of the cone blocks.
class ProgramBuilder {
public:
    int add_variable(double cost = 0.0);
    void set_cost(int index, double cost);
    int n_vars() const { return static_cast<int>(cost_.size()); }

    void add_equality(const Affine& lhs, double rhs);  // lhs (constant ignored) == rhs - constant
    void add_nonneg(const Affine& expr);                 // expr >= 0
    void add_soc(const std::vector<Affine>& exprs);      // |exprs[1..]| <= exprs[0]

    int n_equalities() const { return static_cast<int>(eq_rhs_.size()); }
    int n_nonneg() const { return static_cast<int>(nonneg_.size()); }
    int n_socs() const { return static_cast<int>(socs_.size()); }

    ConicProgram finish() const;

private:
    std::vector<double> cost_;
    std::vector<Affine> eq_lhs_;
    std::vector<double> eq_rhs_;
    std::vector<Affine> nonneg_;
    std::vector<std::vector<Affine>> socs_;
};

enum class Status { optimal, primal_infeasible, dual_infeasible, numeric_failure };

std::string to_string(Status status);

struct Result {
    Status status = Status::numeric_failure;
    Vector x, y, z, s;
    double primal_objective = 0.0;
    double dual_objective = 0.0;
    double primal_residual = 0.0;  // max(|Ax-b|, |Gx+s-h|) relative to max(1, |b|), max(1, |h|)
    double dual_residual = 0.0;    // |A'y+G'z+c| relative to max(1, |c|)
    double relative_gap = 0.0;
    int iterations = 0;
    int attempts = 0;
    std::string message;
};

struct SolverSettings {
    double feastol = 1e-9;
    double abstol = 1e-10;
    double reltol = 1e-9;
    // Accepted when progress stalls before reaching the targets above.
    double fallback_tol = 1e-7;
    int max_iter = 120;
    double step_fraction = 0.99;
    int refinement_steps = 3;
    double regularization = 1e-11;
    int max_attempts = 3;
};

class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string name() const = 0;
    virtual Result solve(const ConicProgram& program) = 0;
};

// Backends are created once per solve; implementations need not be re-entrant.
using BackendFactory = std::function<std::unique_ptr<Backend>()>;

// Homogeneous self-dual embedding with Nesterov-Todd scaling and a Mehrotra
// predictor-corrector; KKT systems are solved by sparse LU with iterative
// refinement. Infeasibility is reported through the embedding's certificates.
class InteriorPointBackend final : public Backend {
public:
    explicit InteriorPointBackend(SolverSettings settings = {}) : settings_(settings) {}
    std::string name() const override { return "hsde-ipm"; }
    Result solve(const ConicProgram& program) override;

private:
    SolverSettings settings_;
};

BackendFactory default_backend_factory(SolverSettings settings = {});

// Independent feasibility measures of a candidate primal point.
double max_equality_violation(const ConicProgram& program, const Vector& x);
// Most negative cone "eigenvalue" of h - Gx (0 when inside K).
double max_cone_violation(const ConicProgram& program, const Vector& x);

}  // namespace flexgrid::conic
