#include "flexgrid/conic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/SparseLU>

namespace flexgrid::conic {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using Triplet = Eigen::Triplet<double>;
using Matrix = Eigen::MatrixXd;

}  // namespace

int ConeDims::rows() const { return nonneg + std::accumulate(soc.begin(), soc.end(), 0); }

std::string to_string(Status status) {
    switch (status) {
        case Status::optimal: return "optimal";
        case Status::primal_infeasible: return "infeasible";
        case Status::dual_infeasible: return "unbounded";
        case Status::numeric_failure: return "numeric_failure";
    }
    return "numeric_failure";
}

// ---------------------------------------------------------------------------
// Builder

int ProgramBuilder::add_variable(double cost) {
    cost_.push_back(cost);
    return static_cast<int>(cost_.size()) - 1;
}

void ProgramBuilder::set_cost(int index, double cost) { cost_.at(static_cast<std::size_t>(index)) = cost; }

void ProgramBuilder::add_equality(const Affine& lhs, double rhs) {
    eq_lhs_.push_back(lhs);
    eq_rhs_.push_back(rhs - lhs.constant);
}

void ProgramBuilder::add_nonneg(const Affine& expr) { nonneg_.push_back(expr); }

void ProgramBuilder::add_soc(const std::vector<Affine>& exprs) { socs_.push_back(exprs); }

ConicProgram ProgramBuilder::finish() const {
    ConicProgram p;
    const int n = n_vars();
    p.c = Eigen::Map<const Vector>(cost_.data(), n);

    std::vector<Triplet> trips;
    for (std::size_t r = 0; r < eq_lhs_.size(); ++r)
        for (const auto& [j, v] : eq_lhs_[r].terms) trips.emplace_back(static_cast<int>(r), j, v);
    p.A.resize(static_cast<int>(eq_lhs_.size()), n);
    p.A.setFromTriplets(trips.begin(), trips.end());
    p.b = Eigen::Map<const Vector>(eq_rhs_.data(), static_cast<int>(eq_rhs_.size()));

    // s = h - Gx equals the expression: G row = -coefficients, h = constant.
    trips.clear();
    std::vector<double> h;
    int row = 0;
    auto push = [&](const Affine& e) {
        for (const auto& [j, v] : e.terms) trips.emplace_back(row, j, -v);
        h.push_back(e.constant);
        ++row;
    };
    for (const auto& e : nonneg_) push(e);
    p.cones.nonneg = row;
    for (const auto& cone : socs_) {
        for (const auto& e : cone) push(e);
        p.cones.soc.push_back(static_cast<int>(cone.size()));
    }
    p.G.resize(row, n);
    p.G.setFromTriplets(trips.begin(), trips.end());
    p.h = Eigen::Map<const Vector>(h.data(), row);
    return p;
}

// ---------------------------------------------------------------------------
// Cone algebra

namespace {

struct SocScaling {
    int offset = 0;
    int dim = 0;
    Matrix W;
    Matrix Winv;
};

class Cones {
public:
    explicit Cones(const ConeDims& dims) : dims_(dims) {
        int off = dims.nonneg;
        for (int d : dims.soc) {
            soc_offsets_.push_back(off);
            off += d;
        }
        rows_ = off;
    }

    int rows() const { return rows_; }
    int degree() const { return dims_.degree(); }

    Vector identity() const {
        Vector e = Vector::Zero(rows_);
        e.head(dims_.nonneg).setOnes();
        for (int off : soc_offsets_) e[off] = 1.0;
        return e;
    }

    // Smallest "eigenvalue" of u with respect to K.
    double min_eig(const Vector& u) const {
        double m = kInf;
        if (dims_.nonneg > 0) m = u.head(dims_.nonneg).minCoeff();
        for (std::size_t i = 0; i < soc_offsets_.size(); ++i) {
            const int off = soc_offsets_[i];
            const int d = dims_.soc[i];
            m = std::min(m, u[off] - u.segment(off + 1, d - 1).norm());
        }
        return m;
    }

    Vector prod(const Vector& u, const Vector& v) const {
        Vector out(rows_);
        out.head(dims_.nonneg) = u.head(dims_.nonneg).cwiseProduct(v.head(dims_.nonneg));
        for (std::size_t i = 0; i < soc_offsets_.size(); ++i) {
            const int off = soc_offsets_[i];
            const int d = dims_.soc[i];
            out[off] = u.segment(off, d).dot(v.segment(off, d));
            out.segment(off + 1, d - 1) = u[off] * v.segment(off + 1, d - 1) + v[off] * u.segment(off + 1, d - 1);
        }
        return out;
    }

    // x such that lambda o x = r.
    Vector div(const Vector& lambda, const Vector& r) const {
        Vector out(rows_);
        out.head(dims_.nonneg) = r.head(dims_.nonneg).cwiseQuotient(lambda.head(dims_.nonneg));
        for (std::size_t i = 0; i < soc_offsets_.size(); ++i) {
            const int off = soc_offsets_[i];
            const int d = dims_.soc[i];
            const double l0 = lambda[off];
            const auto l1 = lambda.segment(off + 1, d - 1);
            const double det = l0 * l0 - l1.squaredNorm();
            const double x0 = (l0 * r[off] - l1.dot(r.segment(off + 1, d - 1))) / det;
            out[off] = x0;
            out.segment(off + 1, d - 1) = (r.segment(off + 1, d - 1) - l1 * x0) / l0;
        }
        return out;
    }

    // Largest alpha with u + alpha d in K (u interior); kInf when unbounded.
    double max_step(const Vector& u, const Vector& d) const {
        double alpha = kInf;
        for (int i = 0; i < dims_.nonneg; ++i)
            if (d[i] < 0.0) alpha = std::min(alpha, -u[i] / d[i]);
        for (std::size_t i = 0; i < soc_offsets_.size(); ++i) {
            const int off = soc_offsets_[i];
            const int dim = dims_.soc[i];
            alpha = std::min(alpha, soc_step(u.segment(off, dim), d.segment(off, dim)));
        }
        return alpha;
    }

    // Nesterov-Todd scaling point of (s, z), both interior.
    void scale(const Vector& s, const Vector& z, Vector& w_lp, std::vector<SocScaling>& socs) const {
        w_lp = (s.head(dims_.nonneg).cwiseQuotient(z.head(dims_.nonneg))).cwiseSqrt();
        socs.resize(soc_offsets_.size());
        for (std::size_t i = 0; i < soc_offsets_.size(); ++i) {
            const int off = soc_offsets_[i];
            const int d = dims_.soc[i];
            SocScaling& sc = socs[i];
            sc.offset = off;
            sc.dim = d;
            const Vector si = s.segment(off, d);
            const Vector zi = z.segment(off, d);
            const double s_res = si[0] * si[0] - si.tail(d - 1).squaredNorm();
            const double z_res = zi[0] * zi[0] - zi.tail(d - 1).squaredNorm();
            const Vector sb = si / std::sqrt(s_res);
            const Vector zb = zi / std::sqrt(z_res);
            const double gamma = std::sqrt((1.0 + sb.dot(zb)) / 2.0);
            Vector w(d);
            w[0] = (sb[0] + zb[0]) / (2.0 * gamma);
            w.tail(d - 1) = (sb.tail(d - 1) - zb.tail(d - 1)) / (2.0 * gamma);
            const double eta = std::pow(s_res / z_res, 0.25);
            Matrix M = Matrix::Identity(d, d);
            M(0, 0) = w[0];
            M.block(1, 0, d - 1, 1) = w.tail(d - 1);
            M.block(0, 1, 1, d - 1) = w.tail(d - 1).transpose();
            M.block(1, 1, d - 1, d - 1) += w.tail(d - 1) * w.tail(d - 1).transpose() / (1.0 + w[0]);
            Matrix Mi = M;
            Mi.block(1, 0, d - 1, 1) *= -1.0;
            Mi.block(0, 1, 1, d - 1) *= -1.0;
            sc.W = eta * M;
            sc.Winv = Mi / eta;
        }
    }

    int nonneg() const { return dims_.nonneg; }

private:
    static double soc_step(const Vector& u, const Vector& d) {
        const double a = d[0] * d[0] - d.tail(d.size() - 1).squaredNorm();
        const double b = 2.0 * (u[0] * d[0] - u.tail(u.size() - 1).dot(d.tail(d.size() - 1)));
        const double c = std::max(u[0] * u[0] - u.tail(u.size() - 1).squaredNorm(), 0.0);
        double alpha = kInf;
        if (d[0] < 0.0) alpha = -u[0] / d[0];
        const double scale = std::max({std::abs(a), std::abs(b), c, 1e-300});
        if (std::abs(a) <= 1e-14 * scale) {
            if (b < 0.0) alpha = std::min(alpha, -c / b);
            return alpha;
        }
        const double disc = b * b - 4.0 * a * c;
        if (disc < 0.0) return alpha;
        const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
        double r1 = q / a;
        double r2 = q != 0.0 ? c / q : kInf;
        if (r1 > r2) std::swap(r1, r2);
        if (r1 > 0.0)
            alpha = std::min(alpha, r1);
        else if (r2 > 0.0)
            alpha = std::min(alpha, r2);
        return alpha;
    }

    ConeDims dims_;
    std::vector<int> soc_offsets_;
    int rows_ = 0;
};

struct Scaling {
    Vector w_lp;
    std::vector<SocScaling> socs;

    Vector apply(const Vector& v, bool inverse) const {
        Vector out(v.size());
        const auto nl = w_lp.size();
        if (inverse)
            out.head(nl) = v.head(nl).cwiseQuotient(w_lp);
        else
            out.head(nl) = v.head(nl).cwiseProduct(w_lp);
        for (const auto& sc : socs) out.segment(sc.offset, sc.dim) = (inverse ? sc.Winv : sc.W) * v.segment(sc.offset, sc.dim);
        return out;
    }
    // W is symmetric, so W' = W and W'W = W^2.
    Vector apply_sq(const Vector& v) const { return apply(apply(v, false), false); }
};

// The reduced KKT operator [0 A' G'; A 0 0; G 0 -W'W].
class Kkt {
public:
    Kkt(const ConicProgram& p, double reg) : p_(p), reg_(reg) {
        n_ = p.n_vars();
        m_eq_ = p.n_eq();
        m_ = p.n_cone_rows();
    }

    int size() const { return n_ + m_eq_ + m_; }

    bool factor(const Scaling& sc) {
        std::vector<Triplet> trips;
        trips.reserve(static_cast<std::size_t>(2 * (p_.A.nonZeros() + p_.G.nonZeros()) + size() + 16 * m_));
        for (int k = 0; k < p_.A.outerSize(); ++k)
            for (SparseMatrix::InnerIterator it(p_.A, k); it; ++it) {
                trips.emplace_back(n_ + static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
                trips.emplace_back(static_cast<int>(it.col()), n_ + static_cast<int>(it.row()), it.value());
            }
        for (int k = 0; k < p_.G.outerSize(); ++k)
            for (SparseMatrix::InnerIterator it(p_.G, k); it; ++it) {
                trips.emplace_back(n_ + m_eq_ + static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
                trips.emplace_back(static_cast<int>(it.col()), n_ + m_eq_ + static_cast<int>(it.row()), it.value());
            }
        const int z0 = n_ + m_eq_;
        for (int i = 0; i < sc.w_lp.size(); ++i) trips.emplace_back(z0 + i, z0 + i, -sc.w_lp[i] * sc.w_lp[i]);
        for (const auto& s : sc.socs) {
            const Matrix W2 = s.W * s.W;
            for (int r = 0; r < s.dim; ++r)
                for (int c = 0; c < s.dim; ++c) trips.emplace_back(z0 + s.offset + r, z0 + s.offset + c, -W2(r, c));
        }
        exact_.resize(size(), size());
        exact_.setFromTriplets(trips.begin(), trips.end());
        for (int i = 0; i < n_; ++i) trips.emplace_back(i, i, reg_);
        for (int i = 0; i < m_eq_; ++i) trips.emplace_back(n_ + i, n_ + i, -reg_);
        for (int i = 0; i < m_; ++i) trips.emplace_back(z0 + i, z0 + i, -reg_);
        SparseMatrix K(size(), size());
        K.setFromTriplets(trips.begin(), trips.end());
        K.makeCompressed();
        lu_.compute(K);
        return lu_.info() == Eigen::Success;
    }

    // Solves with the factorization and refines against the exact operator.
    bool solve(const Vector& rhs, Vector& out, int refinement_steps) {
        out = lu_.solve(rhs);
        if (lu_.info() != Eigen::Success || !out.allFinite()) return false;
        for (int k = 0; k < refinement_steps; ++k) {
            const Vector r = rhs - exact_ * out;
            if (r.lpNorm<Eigen::Infinity>() <= 1e-15 * std::max(1.0, rhs.lpNorm<Eigen::Infinity>())) break;
            const Vector d = lu_.solve(r);
            if (!d.allFinite()) return false;
            out += d;
        }
        return out.allFinite();
    }

    int n() const { return n_; }
    int m_eq() const { return m_eq_; }
    int m() const { return m_; }

private:
    const ConicProgram& p_;
    double reg_;
    int n_ = 0, m_eq_ = 0, m_ = 0;
    SparseMatrix exact_;
    Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu_;
};

struct Iterate {
    Vector x, y, z, s;
    double tau = 1.0;
    double kappa = 1.0;
};

struct Measures {
    double pres = kInf;
    double dres = kInf;
    double gap = kInf;
    double relgap = kInf;
    double pcost = 0.0;
    double dcost = 0.0;
};

Result solve_once(const ConicProgram& p, const SolverSettings& st) {
    Result res;
    const int n = p.n_vars();
    const int meq = p.n_eq();
    const int m = p.n_cone_rows();
    const Cones cones(p.cones);
    if (cones.rows() != m || p.A.cols() != n || p.G.cols() != n) {
        res.message = "inconsistent program dimensions";
        return res;
    }
    Kkt kkt(p, st.regularization);
    const Vector e = cones.identity();
    const double nb = std::max(1.0, p.b.norm());
    const double nh = std::max(1.0, p.h.norm());
    const double nc = std::max(1.0, p.c.norm());

    auto split = [&](const Vector& v, Vector& x, Vector& y, Vector& z) {
        x = v.head(n);
        y = v.segment(n, meq);
        z = v.tail(m);
    };
    auto stack = [&](const Vector& x, const Vector& y, const Vector& z) {
        Vector v(n + meq + m);
        v << x, y, z;
        return v;
    };

    // Initial point: least-squares primal and dual solutions with W = I,
    // shifted into the cone interior.
    Iterate it;
    {
        Scaling unit;
        unit.w_lp = Vector::Ones(p.cones.nonneg);
        int off = p.cones.nonneg;
        for (int d : p.cones.soc) {
            unit.socs.push_back({off, d, Matrix::Identity(d, d), Matrix::Identity(d, d)});
            off += d;
        }
        if (!kkt.factor(unit)) {
            res.message = "initial KKT factorization failed";
            return res;
        }
        Vector sol;
        if (!kkt.solve(stack(Vector::Zero(n), p.b, p.h), sol, st.refinement_steps)) {
            res.message = "initial primal solve failed";
            return res;
        }
        Vector dummy_y, z_tmp;
        split(sol, it.x, dummy_y, z_tmp);
        it.s = -z_tmp;
        if (!kkt.solve(stack(-p.c, Vector::Zero(meq), Vector::Zero(m)), sol, st.refinement_steps)) {
            res.message = "initial dual solve failed";
            return res;
        }
        Vector dummy_x;
        split(sol, dummy_x, it.y, it.z);
        const double ts = -cones.min_eig(it.s);
        if (m > 0 && ts >= -1e-8 * std::max(1.0, it.s.norm())) it.s += (1.0 + ts) * e;
        const double tz = -cones.min_eig(it.z);
        if (m > 0 && tz >= -1e-8 * std::max(1.0, it.z.norm())) it.z += (1.0 + tz) * e;
    }

    Iterate best;
    Measures best_meas;
    bool have_best = false;
    const SparseMatrix At = p.A.transpose();
    const SparseMatrix Gt = p.G.transpose();

    for (int iter = 0; iter <= st.max_iter; ++iter) {
        res.iterations = iter;
        const Vector rx = At * it.y + Gt * it.z + p.c * it.tau;
        const Vector ry = p.A * it.x - p.b * it.tau;
        const Vector rz = p.G * it.x + it.s - p.h * it.tau;
        const double cx = p.c.dot(it.x);
        const double by = p.b.dot(it.y);
        const double hz = p.h.dot(it.z);
        const double rt = it.kappa + cx + by + hz;
        const double sz = it.s.dot(it.z);
        const double mu = (sz + it.tau * it.kappa) / (cones.degree() + 1);

        Measures ms;
        ms.pcost = cx / it.tau;
        ms.dcost = -(by + hz) / it.tau;
        ms.pres = std::max(ry.norm() / nb, rz.norm() / nh) / it.tau;
        ms.dres = rx.norm() / nc / it.tau;
        ms.gap = sz / (it.tau * it.tau);
        const double denom = std::max(std::abs(ms.pcost), std::abs(ms.dcost));
        ms.relgap = denom > 0.0 ? std::max(ms.gap, std::abs(ms.pcost - ms.dcost)) / denom : kInf;
        if (!std::isfinite(ms.pres) || !std::isfinite(ms.dres)) break;

        auto score = [](const Measures& a) { return std::max({a.pres, a.dres, std::min(a.gap, a.relgap)}); };
        if (!have_best || score(ms) < score(best_meas)) {
            best = it;
            best_meas = ms;
            have_best = true;
        }

        if (ms.pres <= st.feastol && ms.dres <= st.feastol && (ms.gap <= st.abstol || ms.relgap <= st.reltol)) {
            res.status = Status::optimal;
            break;
        }
        if (by + hz < 0.0) {
            const double pinf = (At * it.y + Gt * it.z).norm() / nc / (-(by + hz));
            if (pinf <= st.feastol) {
                res.status = Status::primal_infeasible;
                res.y = it.y / (-(by + hz));
                res.z = it.z / (-(by + hz));
                res.message = "primal infeasibility certificate found";
                return res;
            }
        }
        if (cx < 0.0) {
            const double dinf = std::max((p.A * it.x).norm() / nb, (p.G * it.x + it.s).norm() / nh) / (-cx);
            if (dinf <= st.feastol) {
                res.status = Status::dual_infeasible;
                res.x = it.x / (-cx);
                res.message = "dual infeasibility certificate found";
                return res;
            }
        }
        if (iter == st.max_iter) break;

        Scaling sc;
        cones.scale(it.s, it.z, sc.w_lp, sc.socs);
        const Vector lambda = sc.apply(it.z, false);
        if (!lambda.allFinite() || !kkt.factor(sc)) break;

        Vector u;
        if (!kkt.solve(stack(-p.c, p.b, p.h), u, st.refinement_steps)) break;
        Vector ux, uy, uz;
        split(u, ux, uy, uz);
        const double u_denom = p.c.dot(ux) + p.b.dot(uy) + p.h.dot(uz) - it.kappa / it.tau;

        struct Direction {
            Vector dx, dy, dz, ds;
            double dtau = 0.0, dkappa = 0.0;
        };
        auto direction = [&](double sigma, const Vector& rhs_c, double rhs_kappa, Direction& d) {
            const Vector dsr = cones.div(lambda, rhs_c);
            const Vector r3 = -(1.0 - sigma) * rz - sc.apply(dsr, false);
            Vector v;
            if (!kkt.solve(stack(-(1.0 - sigma) * rx, -(1.0 - sigma) * ry, r3), v, st.refinement_steps)) return false;
            Vector vx, vy, vz;
            split(v, vx, vy, vz);
            d.dtau = (-(1.0 - sigma) * rt - rhs_kappa / it.tau - (p.c.dot(vx) + p.b.dot(vy) + p.h.dot(vz))) / u_denom;
            d.dx = vx + d.dtau * ux;
            d.dy = vy + d.dtau * uy;
            d.dz = vz + d.dtau * uz;
            d.ds = sc.apply(dsr - sc.apply(d.dz, false), false);
            d.dkappa = (rhs_kappa - it.kappa * d.dtau) / it.tau;
            return d.dx.allFinite() && d.ds.allFinite() && std::isfinite(d.dtau);
        };
        auto step_length = [&](const Direction& d) {
            double a = std::min(cones.max_step(it.s, d.ds), cones.max_step(it.z, d.dz));
            if (d.dtau < 0.0) a = std::min(a, -it.tau / d.dtau);
            if (d.dkappa < 0.0) a = std::min(a, -it.kappa / d.dkappa);
            return a;
        };

        Direction aff;
        if (!direction(0.0, -cones.prod(lambda, lambda), -it.tau * it.kappa, aff)) break;
        const double alpha_aff = std::min(1.0, step_length(aff));
        const double sigma = std::pow(1.0 - alpha_aff, 3);

        const Vector corr = cones.prod(sc.apply(aff.ds, true), sc.apply(aff.dz, false));
        const Vector rhs_c = -cones.prod(lambda, lambda) + sigma * mu * e - corr;
        const double rhs_k = -it.tau * it.kappa + sigma * mu - aff.dtau * aff.dkappa;
        Direction dir;
        if (!direction(sigma, rhs_c, rhs_k, dir)) break;
        const double alpha = std::min(1.0, st.step_fraction * step_length(dir));
        if (!(alpha > 1e-12)) break;

        it.x += alpha * dir.dx;
        it.y += alpha * dir.dy;
        it.z += alpha * dir.dz;
        it.s += alpha * dir.ds;
        it.tau += alpha * dir.dtau;
        it.kappa += alpha * dir.dkappa;
        if (!(it.tau > 0.0) || !(it.kappa > 0.0)) break;
    }

    if (res.status != Status::optimal) {
        // Stalled: accept the best iterate if it meets the reduced targets.
        const double tol = st.fallback_tol;
        if (have_best && best_meas.pres <= tol && best_meas.dres <= tol &&
            (best_meas.gap <= tol || best_meas.relgap <= tol)) {
            it = best;
            res.status = Status::optimal;
            res.message = "converged to reduced accuracy";
        } else {
            res.status = Status::numeric_failure;
            if (res.message.empty()) res.message = "no convergence";
            return res;
        }
    }
    res.x = it.x / it.tau;
    res.y = it.y / it.tau;
    res.z = it.z / it.tau;
    res.s = it.s / it.tau;
    res.primal_objective = p.c.dot(res.x);
    res.dual_objective = -(p.b.dot(res.y) + p.h.dot(res.z));
    res.primal_residual = std::max((p.A * res.x - p.b).norm() / nb, (p.G * res.x + res.s - p.h).norm() / nh);
    res.dual_residual = (At * res.y + Gt * res.z + p.c).norm() / nc;
    const double denom = std::max({std::abs(res.primal_objective), std::abs(res.dual_objective), 1e-300});
    res.relative_gap = std::abs(res.primal_objective - res.dual_objective) / std::max(denom, 1.0);
    return res;
}

}  // namespace

Result InteriorPointBackend::solve(const ConicProgram& program) {
    // Retries rescale the objective and strengthen regularization.
    Result last;
    SolverSettings st = settings_;
    for (int attempt = 1; attempt <= std::max(1, settings_.max_attempts); ++attempt) {
        ConicProgram scaled = program;
        double factor = 1.0;
        if (attempt > 1) {
            const double cmax = program.c.lpNorm<Eigen::Infinity>();
            factor = cmax > 0.0 ? std::pow(10.0, -(attempt - 1)) / cmax : 1.0;
            scaled.c *= factor;
            st.regularization = settings_.regularization * std::pow(100.0, attempt - 1);
        }
        Result r = solve_once(scaled, st);
        r.attempts = attempt;
        if (r.status == Status::optimal) {
            if (factor != 1.0) {
                r.y /= factor;
                r.z /= factor;
                r.primal_objective /= factor;
                r.dual_objective /= factor;
            }
            return r;
        }
        if (r.status == Status::primal_infeasible || r.status == Status::dual_infeasible) return r;
        last = std::move(r);
    }
    return last;
}

BackendFactory default_backend_factory(SolverSettings settings) {
    return [settings] { return std::make_unique<InteriorPointBackend>(settings); };
}

double max_equality_violation(const ConicProgram& program, const Vector& x) {
    if (program.n_eq() == 0) return 0.0;
    return (program.A * x - program.b).lpNorm<Eigen::Infinity>();
}

double max_cone_violation(const ConicProgram& program, const Vector& x) {
    const Vector s = program.h - program.G * x;
    const Cones cones(program.cones);
    if (s.size() == 0) return 0.0;
    return std::max(0.0, -cones.min_eig(s));
}

}  // namespace flexgrid::conic
