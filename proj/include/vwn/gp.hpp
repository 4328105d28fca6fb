#pragma once

/// \file
/// Geometric programs in standard form (posynomial objective, posynomial
/// constraints <= 1, monomial constraints == 1, optional positive boxes) and
/// an interior-point solver working on the log-transformed convex program.
///
/// Objective and inequality entries are products of posynomials; a plain
/// posynomial is the one-factor case. The log of a product is a sum of
/// log-sum-exp terms and stays convex, which lets callers express products of
/// AGMA surrogates without expanding them.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vwn::gp {

using VarId = std::size_t;

/// c * prod_j x_j^{a_j}; exponents are kept sorted by variable and merged.
struct Monomial {
    double coefficient = 1.0;
    std::vector<std::pair<VarId, double>> exponents;

    Monomial() = default;
    explicit Monomial(double c) : coefficient(c) {}
    Monomial(double c, std::vector<std::pair<VarId, double>> exps) : coefficient(c), exponents(std::move(exps)) {
        normalize();
    }

    static Monomial variable(VarId v, double exponent = 1.0, double c = 1.0) { return Monomial(c, {{v, exponent}}); }

    /// Sort by variable, merge duplicates and drop zero exponents.
    void normalize() {
        std::sort(exponents.begin(), exponents.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        std::vector<std::pair<VarId, double>> merged;
        for (const auto& [v, a] : exponents) {
            if (!merged.empty() && merged.back().first == v) {
                merged.back().second += a;
            } else {
                merged.emplace_back(v, a);
            }
        }
        std::erase_if(merged, [](const auto& e) { return e.second == 0.0; });
        exponents = std::move(merged);
    }

    Monomial& operator*=(const Monomial& o) {
        coefficient *= o.coefficient;
        exponents.insert(exponents.end(), o.exponents.begin(), o.exponents.end());
        normalize();
        return *this;
    }
    friend Monomial operator*(Monomial a, const Monomial& b) { return a *= b; }

    Monomial pow(double e) const {
        Monomial out(std::pow(coefficient, e));
        for (const auto& [v, a] : exponents) out.exponents.emplace_back(v, a * e);
        out.normalize();
        return out;
    }
};

struct Posynomial {
    std::vector<Monomial> terms;

    Posynomial() = default;
    Posynomial(Monomial m) : terms{std::move(m)} {}  // NOLINT: a monomial is a posynomial
    explicit Posynomial(std::vector<Monomial> t) : terms(std::move(t)) {}

    Posynomial& operator+=(const Monomial& m) {
        terms.push_back(m);
        return *this;
    }
    Posynomial& operator+=(const Posynomial& p) {
        terms.insert(terms.end(), p.terms.begin(), p.terms.end());
        return *this;
    }
    /// Multiply every term by a monomial.
    Posynomial& operator*=(const Monomial& m) {
        for (auto& t : terms) t *= m;
        return *this;
    }
};

/// Product of posynomials. Objective and inequality left-hand sides use this.
struct PosynomialProduct {
    std::vector<Posynomial> factors;

    PosynomialProduct() = default;
    PosynomialProduct(Posynomial p) : factors{std::move(p)} {}       // NOLINT
    PosynomialProduct(Monomial m) : factors{Posynomial(std::move(m))} {}  // NOLINT
    explicit PosynomialProduct(std::vector<Posynomial> f) : factors(std::move(f)) {}

    bool is_monomial() const { return factors.size() == 1 && factors.front().terms.size() == 1; }
};

struct Variable {
    std::string name;
    std::optional<double> lower;
    std::optional<double> upper;
};

struct Inequality {
    PosynomialProduct lhs;  ///< lhs <= 1
    std::string label;
};

struct Equality {
    Monomial lhs;  ///< lhs == 1
    std::string label;
};

struct GpProblem {
    std::vector<Variable> variables;
    PosynomialProduct objective;
    std::vector<Inequality> ineq;
    std::vector<Equality> eq;

    VarId add_variable(std::string name, std::optional<double> lower = {}, std::optional<double> upper = {}) {
        if (lower && !(*lower > 0.0)) throw std::invalid_argument("GP variable lower bound must be positive");
        if (upper && !(*upper > 0.0)) throw std::invalid_argument("GP variable upper bound must be positive");
        if (lower && upper && *lower > *upper) throw std::invalid_argument("GP variable has empty box");
        variables.push_back({std::move(name), lower, upper});
        return variables.size() - 1;
    }
    void add_inequality(PosynomialProduct lhs, std::string label = {}) { ineq.push_back({std::move(lhs), std::move(label)}); }
    void add_equality(Monomial lhs, std::string label = {}) { eq.push_back({std::move(lhs), std::move(label)}); }

    std::size_t num_variables() const noexcept { return variables.size(); }
    std::size_t num_constraints() const noexcept { return ineq.size() + eq.size(); }

    /// Throws std::invalid_argument if the problem is not in standard form.
    void validate() const {
        auto check_mono = [&](const Monomial& m, const char* where) {
            if (!(m.coefficient > 0.0) || !std::isfinite(m.coefficient)) {
                throw std::invalid_argument(std::string("GP ") + where + ": monomial coefficient must be positive and finite");
            }
            for (const auto& [v, a] : m.exponents) {
                if (v >= variables.size()) throw std::invalid_argument(std::string("GP ") + where + ": undeclared variable");
                if (!std::isfinite(a)) throw std::invalid_argument(std::string("GP ") + where + ": non-finite exponent");
            }
        };
        auto check_prod = [&](const PosynomialProduct& p, const char* where) {
            if (p.factors.empty()) throw std::invalid_argument(std::string("GP ") + where + ": empty product");
            for (const auto& f : p.factors) {
                if (f.terms.empty()) throw std::invalid_argument(std::string("GP ") + where + ": empty posynomial");
                for (const auto& t : f.terms) check_mono(t, where);
            }
        };
        check_prod(objective, "objective");
        for (const auto& c : ineq) check_prod(c.lhs, "inequality");
        for (const auto& c : eq) check_mono(c.lhs, "equality");
    }
};

enum class GpStatus { optimal, infeasible, max_iter };

inline const char* to_string(GpStatus s) {
    switch (s) {
        case GpStatus::optimal: return "optimal";
        case GpStatus::infeasible: return "infeasible";
        case GpStatus::max_iter: return "max_iter";
    }
    return "?";
}

struct GpSolution {
    std::vector<double> x;
    double objective_value = std::numeric_limits<double>::quiet_NaN();
    GpStatus status = GpStatus::infeasible;
    double kkt_residual = std::numeric_limits<double>::infinity();
    std::size_t iterations = 0;
    std::string diagnostic;
};

// ---------------------------------------------------------------------------
// Direct evaluation

inline void require_positive(const std::vector<double>& x) {
    for (double v : x) {
        if (!(v > 0.0)) throw std::invalid_argument("GP evaluation needs a strictly positive point");
    }
}

inline double evaluate(const Monomial& m, const std::vector<double>& x) {
    require_positive(x);
    double v = m.coefficient;
    for (const auto& [id, a] : m.exponents) {
        if (id >= x.size()) throw std::out_of_range("monomial references a variable outside the point");
        v *= std::pow(x[id], a);
    }
    return v;
}

inline double evaluate(const Posynomial& f, const std::vector<double>& x) {
    double s = 0.0;
    for (const auto& t : f.terms) s += evaluate(t, x);
    return s;
}

inline double evaluate(const PosynomialProduct& f, const std::vector<double>& x) {
    double p = 1.0;
    for (const auto& fac : f.factors) p *= evaluate(fac, x);
    return p;
}

// ---------------------------------------------------------------------------
// Log-domain representation

/// a . z + b with sparse a.
struct AffineForm {
    std::vector<std::pair<std::size_t, double>> a;
    double b = 0.0;

    double value(const Eigen::VectorXd& z) const {
        double v = b;
        for (const auto& [j, c] : a) v += c * z[static_cast<Eigen::Index>(j)];
        return v;
    }
    /// a . dz
    double value_dir(const Eigen::VectorXd& dz) const {
        double v = 0.0;
        for (const auto& [j, c] : a) v += c * dz[static_cast<Eigen::Index>(j)];
        return v;
    }
};

/// log sum_t exp(a_t . z + b_t)
struct LseBlock {
    std::vector<AffineForm> terms;
};

/// Sum of log-sum-exp blocks; convex in z.
class LogFunction {
public:
    LogFunction() = default;
    explicit LogFunction(std::vector<LseBlock> blocks) : blocks_(std::move(blocks)) { index(); }

    const std::vector<LseBlock>& blocks() const noexcept { return blocks_; }
    const std::vector<std::size_t>& support() const noexcept { return support_; }
    bool is_affine() const noexcept {
        return std::all_of(blocks_.begin(), blocks_.end(), [](const LseBlock& b) { return b.terms.size() == 1; });
    }

    /// The affine form when every block has a single term.
    AffineForm as_affine() const {
        std::map<std::size_t, double> acc;
        AffineForm out;
        for (const auto& blk : blocks_) {
            out.b += blk.terms.front().b;
            for (const auto& [j, c] : blk.terms.front().a) acc[j] += c;
        }
        for (const auto& [j, c] : acc) {
            if (c != 0.0) out.a.emplace_back(j, c);
        }
        return out;
    }

    double value(const Eigen::VectorXd& z) const {
        double v = 0.0;
        for (const auto& blk : blocks_) v += lse(blk, z);
        return v;
    }

    /// F(z + s*dz) - F(z) without cancellation.
    double delta(const Eigen::VectorXd& z, const Eigen::VectorXd& dz, double s) const {
        double acc = 0.0;
        std::vector<double> shift;
        for (const auto& blk : blocks_) {
            if (blk.terms.size() == 1) {
                acc += s * blk.terms.front().value_dir(dz);
                continue;
            }
            // softmax weights at z, then log sum_k p_k exp(s a_k . dz)
            const std::size_t T = blk.terms.size();
            shift.assign(T, 0.0);
            double vmax = -std::numeric_limits<double>::infinity();
            for (std::size_t t = 0; t < T; ++t) {
                shift[t] = blk.terms[t].value(z);
                vmax = std::max(vmax, shift[t]);
            }
            double norm = 0.0;
            std::vector<double> p(T), d(T);
            double dmax = 0.0;
            for (std::size_t t = 0; t < T; ++t) {
                p[t] = std::exp(shift[t] - vmax);
                norm += p[t];
                d[t] = s * blk.terms[t].value_dir(dz);
                dmax = std::max(dmax, std::abs(d[t]));
            }
            if (dmax < 0.5) {
                double sum = 0.0;
                for (std::size_t t = 0; t < T; ++t) sum += p[t] / norm * std::expm1(d[t]);
                acc += std::log1p(sum);
            } else {
                double dm = -std::numeric_limits<double>::infinity();
                for (double v : d) dm = std::max(dm, v);
                double sum = 0.0;
                for (std::size_t t = 0; t < T; ++t) sum += p[t] / norm * std::exp(d[t] - dm);
                acc += dm + std::log(sum);
            }
        }
        return acc;
    }

    /// Value, gradient and (optionally) Hessian restricted to support().
    struct Local {
        double value = 0.0;
        Eigen::VectorXd grad;
        Eigen::MatrixXd hess;
    };

    void evaluate_local(const Eigen::VectorXd& z, bool want_hess, Local& out) const {
        const std::size_t S = support_.size();
        out.value = 0.0;
        out.grad.setZero(static_cast<Eigen::Index>(S));
        if (want_hess) out.hess.setZero(static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(S));
        std::vector<double> v;
        Eigen::VectorXd gb(static_cast<Eigen::Index>(S));
        for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
            const auto& blk = blocks_[bi];
            const auto& loc = local_[bi];
            if (blk.terms.size() == 1) {
                out.value += blk.terms.front().value(z);
                for (const auto& [j, c] : loc.front()) out.grad[static_cast<Eigen::Index>(j)] += c;
                continue;
            }
            const std::size_t T = blk.terms.size();
            v.resize(T);
            double vmax = -std::numeric_limits<double>::infinity();
            for (std::size_t t = 0; t < T; ++t) {
                v[t] = blk.terms[t].value(z);
                vmax = std::max(vmax, v[t]);
            }
            double norm = 0.0;
            for (std::size_t t = 0; t < T; ++t) {
                v[t] = std::exp(v[t] - vmax);
                norm += v[t];
            }
            out.value += vmax + std::log(norm);
            gb.setZero();
            for (std::size_t t = 0; t < T; ++t) {
                const double p = v[t] / norm;
                for (const auto& [j, c] : loc[t]) gb[static_cast<Eigen::Index>(j)] += p * c;
                if (want_hess) {
                    for (const auto& [i, ci] : loc[t]) {
                        for (const auto& [j, cj] : loc[t]) out.hess(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += p * ci * cj;
                    }
                }
            }
            out.grad += gb;
            if (want_hess) {
                for (const std::size_t i : block_support_[bi]) {
                    for (const std::size_t j : block_support_[bi]) {
                        out.hess(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) -= gb[static_cast<Eigen::Index>(i)] * gb[static_cast<Eigen::Index>(j)];
                    }
                }
            }
        }
    }

private:
    static double lse(const LseBlock& blk, const Eigen::VectorXd& z) {
        if (blk.terms.size() == 1) return blk.terms.front().value(z);
        double vmax = -std::numeric_limits<double>::infinity();
        std::vector<double> v(blk.terms.size());
        for (std::size_t t = 0; t < blk.terms.size(); ++t) {
            v[t] = blk.terms[t].value(z);
            vmax = std::max(vmax, v[t]);
        }
        double s = 0.0;
        for (double x : v) s += std::exp(x - vmax);
        return vmax + std::log(s);
    }

    void index() {
        std::vector<std::size_t> all;
        for (const auto& blk : blocks_) {
            for (const auto& t : blk.terms) {
                for (const auto& [j, c] : t.a) all.push_back(j);
            }
        }
        std::sort(all.begin(), all.end());
        all.erase(std::unique(all.begin(), all.end()), all.end());
        support_ = all;
        auto local_of = [&](std::size_t j) {
            return static_cast<std::size_t>(std::lower_bound(support_.begin(), support_.end(), j) - support_.begin());
        };
        local_.clear();
        block_support_.clear();
        for (const auto& blk : blocks_) {
            std::vector<std::vector<std::pair<std::size_t, double>>> terms;
            std::vector<std::size_t> bs;
            for (const auto& t : blk.terms) {
                std::vector<std::pair<std::size_t, double>> l;
                for (const auto& [j, c] : t.a) {
                    l.emplace_back(local_of(j), c);
                    bs.push_back(local_of(j));
                }
                terms.push_back(std::move(l));
            }
            std::sort(bs.begin(), bs.end());
            bs.erase(std::unique(bs.begin(), bs.end()), bs.end());
            local_.push_back(std::move(terms));
            block_support_.push_back(std::move(bs));
        }
    }

    std::vector<LseBlock> blocks_;
    std::vector<std::size_t> support_;
    std::vector<std::vector<std::vector<std::pair<std::size_t, double>>>> local_;
    std::vector<std::vector<std::size_t>> block_support_;
};

/// Convex program over z = log x:
///   minimize F0(z)  s.t.  Fi(z) <= 0,  E z = d,  lower <= z <= upper.
struct ConvexProgram {
    std::size_t n = 0;
    LogFunction objective;
    std::vector<LogFunction> ineq;
    std::vector<AffineForm> eq;
    std::vector<double> lower;  ///< -inf when absent
    std::vector<double> upper;  ///< +inf when absent
};

namespace detail {

inline AffineForm affine_of(const Monomial& m) {
    AffineForm f;
    f.b = std::log(m.coefficient);
    for (const auto& [v, a] : m.exponents) f.a.emplace_back(v, a);
    return f;
}

inline LogFunction log_of(const PosynomialProduct& p) {
    std::vector<LseBlock> blocks;
    for (const auto& fac : p.factors) {
        LseBlock b;
        for (const auto& t : fac.terms) b.terms.push_back(affine_of(t));
        blocks.push_back(std::move(b));
    }
    return LogFunction(std::move(blocks));
}

}  // namespace detail

/// Logarithmic change of variables x = exp(z). Posynomials become sums of
/// log-sum-exp of affine forms, monomial equalities become affine equalities.
inline ConvexProgram log_transform(const GpProblem& p) {
    p.validate();
    ConvexProgram cp;
    cp.n = p.num_variables();
    cp.objective = detail::log_of(p.objective);
    for (const auto& c : p.ineq) cp.ineq.push_back(detail::log_of(c.lhs));
    for (const auto& c : p.eq) cp.eq.push_back(detail::affine_of(c.lhs));
    cp.lower.assign(cp.n, -std::numeric_limits<double>::infinity());
    cp.upper.assign(cp.n, std::numeric_limits<double>::infinity());
    for (std::size_t j = 0; j < cp.n; ++j) {
        if (p.variables[j].lower) cp.lower[j] = std::log(*p.variables[j].lower);
        if (p.variables[j].upper) cp.upper[j] = std::log(*p.variables[j].upper);
    }
    return cp;
}

// ---------------------------------------------------------------------------
// Solver

struct SolverOptions {
    double tol = 1e-8;            ///< duality gap / KKT residual in the log domain
    std::size_t max_iter = 200;   ///< Newton steps, per phase
    double mu = 10.0;             ///< barrier parameter growth
    double newton_tol = 1e-10;    ///< half squared Newton decrement ending a centering step
    double armijo = 0.01;
    double backtrack = 0.5;
    double interior_margin = 1e-2;  ///< log-domain slack a start point needs to skip phase I
    std::optional<std::vector<double>> initial_point;  ///< x-space warm start
};

namespace detail {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kStepFloor = 1e-13;       ///< relative step below which a centering step is done
constexpr double kPhaseOneRadius = 60.0;  ///< log-domain half-width of the phase-I box on free variables

/// Barrier-method engine over a ConvexProgram. The objective may be scaled by
/// `objective_scale` internally; constants never enter the line search.
class BarrierEngine {
public:
    BarrierEngine(const ConvexProgram& cp, const SolverOptions& opt) : cp_(cp), opt_(opt) {
        n_ = cp.n;
        p_ = cp.eq.size();
        E_.setZero(static_cast<Eigen::Index>(p_), static_cast<Eigen::Index>(n_));
        d_.setZero(static_cast<Eigen::Index>(p_));
        for (std::size_t i = 0; i < p_; ++i) {
            for (const auto& [j, c] : cp.eq[i].a) E_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += c;
            d_[static_cast<Eigen::Index>(i)] = -cp.eq[i].b;
        }
        m_ = cp.ineq.size();
        for (std::size_t j = 0; j < n_; ++j) {
            if (std::isfinite(cp.lower[j])) ++m_;
            if (std::isfinite(cp.upper[j])) ++m_;
        }
    }

    std::size_t constraint_count() const noexcept { return m_; }

    /// Project z onto {E z = d} in the least-squares sense.
    Eigen::VectorXd project(const Eigen::VectorXd& z) const {
        if (p_ == 0) return z;
        const Eigen::VectorXd r = E_ * z - d_;
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(E_);
        return z - cod.solve(r);
    }

    double equality_residual(const Eigen::VectorXd& z) const {
        return p_ == 0 ? 0.0 : (E_ * z - d_).lpNorm<Eigen::Infinity>();
    }

    /// Constraint values (ineq then boxes); all must be < 0 for strict feasibility.
    void constraint_values(const Eigen::VectorXd& z, std::vector<double>& out) const {
        out.clear();
        for (const auto& f : cp_.ineq) out.push_back(f.value(z));
        for (std::size_t j = 0; j < n_; ++j) {
            if (std::isfinite(cp_.lower[j])) out.push_back(cp_.lower[j] - z[static_cast<Eigen::Index>(j)]);
            if (std::isfinite(cp_.upper[j])) out.push_back(z[static_cast<Eigen::Index>(j)] - cp_.upper[j]);
        }
    }

    struct Result {
        Eigen::VectorXd z;
        bool converged = false;
        std::size_t newton_steps = 0;
        double gap = kInf;
        double stationarity = kInf;
        std::vector<double> duals;  ///< one per inequality/box, same order as constraint_values
    };

    /// Minimize scale * F0 from a strictly feasible z within `budget` Newton
    /// steps. `stop(z, gap, centered)` is polled after every step and after
    /// every centering, and may end the run early.
    template <class Stop>
    Result run(Eigen::VectorXd z, double scale, double t0, std::size_t budget, Stop stop) const {
        Result res;
        if (n_ == 0) {
            res.z = z;
            res.converged = true;
            res.gap = 0.0;
            res.stationarity = 0.0;
            return res;
        }
        double t = t0;
        std::vector<double> cv;
        LogFunction::Local loc;
        const auto N = static_cast<Eigen::Index>(n_);
        Eigen::MatrixXd H(N, N);
        Eigen::VectorXd g(N);
        Eigen::VectorXd dz(N);
        for (;;) {
            // centering
            for (;;) {
                if (res.newton_steps >= budget) {
                    res.z = z;
                    res.gap = m_ / t;
                    return res;
                }
                H.setZero();
                g.setZero();
                accumulate(cp_.objective, z, t * scale, H, g, loc);
                for (const auto& f : cp_.ineq) {
                    f.evaluate_local(z, true, loc);
                    const double F = loc.value;
                    const double inv = -1.0 / F;
                    const auto& sup = f.support();
                    for (std::size_t a = 0; a < sup.size(); ++a) {
                        const auto ia = static_cast<Eigen::Index>(sup[a]);
                        g[ia] += inv * loc.grad[static_cast<Eigen::Index>(a)];
                        for (std::size_t b = 0; b < sup.size(); ++b) {
                            const auto ib = static_cast<Eigen::Index>(sup[b]);
                            H(ia, ib) += inv * inv * loc.grad[static_cast<Eigen::Index>(a)] * loc.grad[static_cast<Eigen::Index>(b)] +
                                         inv * loc.hess(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
                        }
                    }
                }
                for (std::size_t j = 0; j < n_; ++j) {
                    const auto jj = static_cast<Eigen::Index>(j);
                    if (std::isfinite(cp_.lower[j])) {
                        const double s = z[jj] - cp_.lower[j];
                        g[jj] -= 1.0 / s;
                        H(jj, jj) += 1.0 / (s * s);
                    }
                    if (std::isfinite(cp_.upper[j])) {
                        const double s = cp_.upper[j] - z[jj];
                        g[jj] += 1.0 / s;
                        H(jj, jj) += 1.0 / (s * s);
                    }
                }
                Eigen::VectorXd w;
                const Eigen::VectorXd r = p_ == 0 ? Eigen::VectorXd() : Eigen::VectorXd(E_ * z - d_);
                if (!newton_direction(H, g, r, dz, w)) {
                    res.z = z;
                    res.gap = m_ / t;
                    return res;
                }
                const double lambda2 = -g.dot(dz);
                ++res.newton_steps;
                if (lambda2 / 2.0 <= opt_.newton_tol) {
                    res.stationarity = std::sqrt(std::max(lambda2, 0.0)) / t;
                    break;
                }
                // backtracking line search on the barrier function
                constraint_values(z, cv);
                double s = 1.0;
                const double slope = g.dot(dz);
                bool moved = false;
                while (s > 1e-16) {
                    double dphi = 0.0;
                    bool feasible = true;
                    std::size_t k = 0;
                    for (const auto& f : cp_.ineq) {
                        const double nv = cv[k] + f.delta(z, dz, s);
                        if (!(nv < 0.0)) {
                            feasible = false;
                            break;
                        }
                        dphi -= std::log1p((nv - cv[k]) / cv[k]);
                        ++k;
                    }
                    if (feasible) {
                        for (std::size_t j = 0; j < n_ && feasible; ++j) {
                            const auto jj = static_cast<Eigen::Index>(j);
                            if (std::isfinite(cp_.lower[j])) {
                                const double sl = z[jj] - cp_.lower[j];
                                const double ns = sl + s * dz[jj];
                                if (!(ns > 0.0)) feasible = false;
                                else dphi -= std::log1p(s * dz[jj] / sl);
                            }
                            if (feasible && std::isfinite(cp_.upper[j])) {
                                const double sl = cp_.upper[j] - z[jj];
                                const double ns = sl - s * dz[jj];
                                if (!(ns > 0.0)) feasible = false;
                                else dphi -= std::log1p(-s * dz[jj] / sl);
                            }
                        }
                    }
                    if (feasible) {
                        dphi += t * scale * cp_.objective.delta(z, dz, s);
                        if (dphi <= opt_.armijo * s * slope) {
                            moved = true;
                            break;
                        }
                    }
                    s *= opt_.backtrack;
                }
                if (!moved) {
                    // numerical floor of the centering step
                    res.stationarity = std::sqrt(std::max(lambda2, 0.0)) / t;
                    break;
                }
                z += s * dz;
                if (s * dz.lpNorm<Eigen::Infinity>() <= kStepFloor * (1.0 + z.lpNorm<Eigen::Infinity>())) {
                    // rounding floor of the centering step
                    res.stationarity = std::sqrt(std::max(lambda2, 0.0)) / t;
                    break;
                }
                if (stop(z, m_ / t, false)) {
                    res.z = z;
                    res.gap = m_ / t;
                    return res;
                }
            }
            res.gap = m_ / t;
            if (stop(z, res.gap, true)) {
                res.z = z;
                return res;
            }
            if (m_ == 0 || res.gap <= opt_.tol) {
                res.converged = true;
                res.z = z;
                res.duals.clear();
                constraint_values(z, cv);
                for (double c : cv) res.duals.push_back(-1.0 / (t * c));
                return res;
            }
            t *= opt_.mu;
        }
    }

    /// Heuristic initial barrier weight balancing objective and barrier gradients.
    double initial_t(const Eigen::VectorXd& z, double scale) const {
        const auto N = static_cast<Eigen::Index>(n_);
        Eigen::VectorXd gf = Eigen::VectorXd::Zero(N), gb = Eigen::VectorXd::Zero(N);
        LogFunction::Local loc;
        cp_.objective.evaluate_local(z, false, loc);
        for (std::size_t a = 0; a < cp_.objective.support().size(); ++a) {
            gf[static_cast<Eigen::Index>(cp_.objective.support()[a])] += scale * loc.grad[static_cast<Eigen::Index>(a)];
        }
        for (const auto& f : cp_.ineq) {
            f.evaluate_local(z, false, loc);
            for (std::size_t a = 0; a < f.support().size(); ++a) {
                gb[static_cast<Eigen::Index>(f.support()[a])] += -1.0 / loc.value * loc.grad[static_cast<Eigen::Index>(a)];
            }
        }
        for (std::size_t j = 0; j < n_; ++j) {
            const auto jj = static_cast<Eigen::Index>(j);
            if (std::isfinite(cp_.lower[j])) gb[jj] -= 1.0 / (z[jj] - cp_.lower[j]);
            if (std::isfinite(cp_.upper[j])) gb[jj] += 1.0 / (cp_.upper[j] - z[jj]);
        }
        const double nf = gf.squaredNorm();
        if (nf <= 0.0) return 1.0;
        const double t = -gf.dot(gb) / nf;
        return std::clamp(t, 1.0, 1e6);
    }

private:
    /// Adds weight * (gradient, Hessian) of f to (g, H).
    void accumulate(const LogFunction& f, const Eigen::VectorXd& z, double weight, Eigen::MatrixXd& H, Eigen::VectorXd& g,
                    LogFunction::Local& loc) const {
        const bool affine = f.is_affine();
        f.evaluate_local(z, !affine, loc);
        const auto& sup = f.support();
        for (std::size_t a = 0; a < sup.size(); ++a) {
            g[static_cast<Eigen::Index>(sup[a])] += weight * loc.grad[static_cast<Eigen::Index>(a)];
            if (!affine) {
                for (std::size_t b = 0; b < sup.size(); ++b) {
                    H(static_cast<Eigen::Index>(sup[a]), static_cast<Eigen::Index>(sup[b])) +=
                        weight * loc.hess(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
                }
            }
        }
    }

    /// Solve [H E'; E 0][dz; w] = [-g; -r] via Cholesky of H and the Schur
    /// complement E H^-1 E'. The equality residual r = E z - d is fed back so
    /// that rounding drift in the Schur solve does not accumulate. Regularizes H
    /// if it is not numerically positive definite.
    bool newton_direction(Eigen::MatrixXd& H, const Eigen::VectorXd& g, const Eigen::VectorXd& r, Eigen::VectorXd& dz,
                          Eigen::VectorXd& w) const {
        // symmetric diagonal scaling; barrier curvature near a bound can exceed
        // the rest of H by many orders of magnitude
        const Eigen::VectorXd d = H.diagonal().unaryExpr([](double h) { return h > 0.0 ? 1.0 / std::sqrt(h) : 1.0; });
        H = d.asDiagonal() * H * d.asDiagonal();
        const Eigen::VectorXd gs = d.cwiseProduct(g);
        const auto n = static_cast<Eigen::Index>(n_);
        if (p_ > 0) {
            // H need only be positive definite on the null space of E, so the
            // full KKT matrix is factored rather than the Schur complement
            const auto p = static_cast<Eigen::Index>(p_);
            const Eigen::MatrixXd Es = E_ * d.asDiagonal();
            Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + p, n + p);
            kkt.topLeftCorner(n, n) = H;
            kkt.topRightCorner(n, p) = Es.transpose();
            kkt.bottomLeftCorner(p, n) = Es;
            Eigen::VectorXd rhs(n + p);
            rhs << -gs, -r;
            const Eigen::PartialPivLU<Eigen::MatrixXd> lu(kkt);
            const Eigen::VectorXd sol = lu.solve(rhs);
            if (sol.allFinite() && (kkt * sol - rhs).lpNorm<Eigen::Infinity>() <= 1e-8 * (1.0 + rhs.lpNorm<Eigen::Infinity>())) {
                dz = d.cwiseProduct(sol.head(n));
                w = sol.tail(p);
                return true;
            }
        }
        double reg = 0.0;
        for (int attempt = 0; attempt < 12; ++attempt) {
            Eigen::LLT<Eigen::MatrixXd> llt;
            if (reg > 0.0) {
                Eigen::MatrixXd Hr = H;
                Hr.diagonal().array() += reg;
                llt.compute(Hr);
            } else {
                llt.compute(H);
            }
            if (llt.info() == Eigen::Success) {
                if (p_ == 0) {
                    dz = d.cwiseProduct(llt.solve(-gs));
                    w.resize(0);
                } else {
                    // H^-1 = D Hs^-1 D
                    const Eigen::MatrixXd DEt = d.asDiagonal() * E_.transpose();
                    const Eigen::MatrixXd HiEt = d.asDiagonal() * llt.solve(DEt);
                    const Eigen::VectorXd Hig = d.cwiseProduct(llt.solve(gs));
                    const Eigen::MatrixXd S = E_ * HiEt;
                    // E dz = -r  =>  S w = r - E H^-1 g
                    w = S.completeOrthogonalDecomposition().solve(r - E_ * Hig);
                    dz = -Hig - HiEt * w;
                }
                return dz.allFinite();
            }
            reg = reg == 0.0 ? 1e-12 : reg * 100.0;
        }
        return false;
    }

    const ConvexProgram& cp_;
    const SolverOptions& opt_;
    std::size_t n_ = 0, p_ = 0, m_ = 0;
    Eigen::MatrixXd E_;
    Eigen::VectorXd d_;
};

/// Removes variables that only serve as the objective's epigraph: the
/// objective is affine with positive weight on v, and v appears in exactly one
/// other place, an affine inequality with negative weight. That inequality is
/// tight at every optimum, so v is substituted out.
struct Elimination {
    std::size_t var;           ///< original index
    AffineForm constraint;     ///< the defining affine constraint, original indices
    double coef;               ///< weight of var in the constraint
};

inline std::vector<Elimination> eliminate_epigraph(ConvexProgram& cp) {
    std::vector<Elimination> out;
    for (;;) {
        if (!cp.objective.is_affine()) return out;
        AffineForm obj = cp.objective.as_affine();
        std::vector<int> uses(cp.n, 0);
        std::vector<int> where(cp.n, -1);
        for (std::size_t i = 0; i < cp.ineq.size(); ++i) {
            for (std::size_t j : cp.ineq[i].support()) {
                ++uses[j];
                where[j] = static_cast<int>(i);
            }
        }
        for (const auto& e : cp.eq) {
            for (const auto& [j, c] : e.a) uses[j] += 1000;
        }
        bool done = false;
        for (const auto& [v, w0] : obj.a) {
            if (!(w0 > 0.0) || uses[v] != 1 || std::isfinite(cp.lower[v]) || std::isfinite(cp.upper[v])) continue;
            const auto& con = cp.ineq[static_cast<std::size_t>(where[v])];
            if (!con.is_affine()) continue;
            AffineForm af = con.as_affine();
            double e = 0.0;
            for (const auto& [j, c] : af.a) {
                if (j == v) e = c;
            }
            if (!(e < 0.0)) continue;
            // z_v = -(rest . z + b)/e  ;  objective += (-w0/e) * (rest . z + b)
            const double f = -w0 / e;
            std::map<std::size_t, double> acc;
            for (const auto& [j, c] : obj.a) {
                if (j != v) acc[j] += c;
            }
            for (const auto& [j, c] : af.a) {
                if (j != v) acc[j] += f * c;
            }
            AffineForm nobj;
            nobj.b = obj.b + f * af.b;
            for (const auto& [j, c] : acc) {
                if (c != 0.0) nobj.a.emplace_back(j, c);
            }
            out.push_back({v, af, e});
            cp.ineq.erase(cp.ineq.begin() + where[v]);
            cp.objective = LogFunction({LseBlock{{nobj}}});
            done = true;
            break;
        }
        if (!done) return out;
    }
}

/// Replaces z_v by its solution of `eq` (coefficient `coef` on v) in f.
inline void substitute(AffineForm& f, std::size_t v, const AffineForm& eq, double coef) {
    double cv = 0.0;
    for (const auto& [j, c] : f.a) {
        if (j == v) cv += c;
    }
    if (cv == 0.0) return;
    const double k = -cv / coef;
    std::map<std::size_t, double> acc;
    for (const auto& [j, c] : f.a) {
        if (j != v) acc[j] += c;
    }
    for (const auto& [j, c] : eq.a) {
        if (j != v) acc[j] += k * c;
    }
    f.a.clear();
    for (const auto& [j, c] : acc) {
        if (c != 0.0) f.a.emplace_back(j, c);
    }
    f.b += k * eq.b;
}

inline LogFunction substitute(const LogFunction& f, std::size_t v, const AffineForm& eq, double coef) {
    std::vector<LseBlock> blocks = f.blocks();
    for (auto& b : blocks) {
        for (auto& t : b.terms) substitute(t, v, eq, coef);
    }
    return LogFunction(std::move(blocks));
}

/// Removes equality constraints by solving each for an unbounded variable
/// and substituting it everywhere. Substitution keeps every term affine in
/// the log domain, so the problem stays a sum of log-sum-exp blocks.
inline std::vector<Elimination> eliminate_equalities(ConvexProgram& cp) {
    std::vector<Elimination> out;
    std::size_t i = 0;
    while (i < cp.eq.size()) {
        const AffineForm eq = cp.eq[i];
        std::size_t v = cp.n;
        double coef = 0.0;
        for (const auto& [j, c] : eq.a) {
            if (std::isfinite(cp.lower[j]) || std::isfinite(cp.upper[j])) continue;
            if (std::abs(c) > std::abs(coef)) {
                v = j;
                coef = c;
            }
        }
        if (v == cp.n) {
            ++i;
            continue;
        }
        cp.objective = substitute(cp.objective, v, eq, coef);
        for (auto& f : cp.ineq) f = substitute(f, v, eq, coef);
        cp.eq.erase(cp.eq.begin() + static_cast<std::ptrdiff_t>(i));
        for (auto& e : cp.eq) substitute(e, v, eq, coef);
        out.push_back({v, eq, coef});
    }
    return out;
}

}  // namespace detail

/// Solve a GP by the log-barrier method (Newton centering, backtracking line
/// search, barrier growth mu) after a phase-I feasibility search.
inline GpSolution solve(const GpProblem& problem, const SolverOptions& opt = {}) {
    using detail::kInf;
    GpSolution sol;
    ConvexProgram full = log_transform(problem);
    ConvexProgram cp = full;
    auto elims = detail::eliminate_epigraph(cp);
    for (auto& e : detail::eliminate_equalities(cp)) elims.push_back(std::move(e));

    // compact away eliminated variables
    std::vector<long> map(cp.n, 0);
    for (const auto& e : elims) map[e.var] = -1;
    std::size_t nn = 0;
    for (auto& v : map) {
        if (v == 0) v = static_cast<long>(nn++);
    }
    auto remap_affine = [&](AffineForm f) {
        for (auto& [j, c] : f.a) j = static_cast<std::size_t>(map[j]);
        return f;
    };
    auto remap = [&](const LogFunction& f) {
        std::vector<LseBlock> blocks;
        for (const auto& b : f.blocks()) {
            LseBlock nb;
            for (const auto& t : b.terms) nb.terms.push_back(remap_affine(t));
            blocks.push_back(std::move(nb));
        }
        return LogFunction(std::move(blocks));
    };
    ConvexProgram red;
    red.n = nn;
    red.objective = remap(cp.objective);
    for (const auto& f : cp.ineq) red.ineq.push_back(remap(f));
    for (const auto& e : cp.eq) red.eq.push_back(remap_affine(e));
    for (std::size_t j = 0; j < cp.n; ++j) {
        if (map[j] >= 0) {
            red.lower.push_back(cp.lower[j]);
            red.upper.push_back(cp.upper[j]);
        }
    }

    // affine objectives are rescaled to a unit gradient
    double scale = 1.0;
    if (red.objective.is_affine()) {
        const AffineForm af = red.objective.as_affine();
        double nrm = 0.0;
        for (const auto& [j, c] : af.a) nrm += c * c;
        nrm = std::sqrt(nrm);
        if (nrm > 0.0) scale = 1.0 / nrm;
    }

    // starting point
    const auto N = static_cast<Eigen::Index>(red.n);
    Eigen::VectorXd z0(N);
    for (std::size_t j = 0; j < cp.n; ++j) {
        if (map[j] < 0) continue;
        const auto jj = static_cast<Eigen::Index>(map[j]);
        const double lo = cp.lower[j], hi = cp.upper[j];
        double v = 0.0;
        if (opt.initial_point && j < opt.initial_point->size() && (*opt.initial_point)[j] > 0.0) {
            v = std::log((*opt.initial_point)[j]);
        } else if (std::isfinite(lo) && std::isfinite(hi)) {
            v = 0.5 * (lo + hi);
        } else if (std::isfinite(lo)) {
            v = std::max(0.0, lo + 1.0);
        } else if (std::isfinite(hi)) {
            v = std::min(0.0, hi - 1.0);
        }
        z0[jj] = v;
    }

    detail::BarrierEngine engine(red, opt);
    z0 = engine.project(z0);

    std::vector<double> cv;
    engine.constraint_values(z0, cv);
    double worst = -kInf;
    for (double c : cv) worst = std::max(worst, c);

    Eigen::VectorXd z = z0;
    std::size_t steps = 0;
    if (!(worst < -opt.interior_margin)) {
        // Phase I: minimize s subject to every constraint <= s, s >= -1.
        ConvexProgram ph;
        ph.n = red.n + 1;
        const std::size_t sidx = red.n;
        AffineForm sobj;
        sobj.a.emplace_back(sidx, 1.0);
        ph.objective = LogFunction({LseBlock{{sobj}}});
        AffineForm minus_s;
        minus_s.a.emplace_back(sidx, -1.0);
        for (const auto& f : red.ineq) {
            auto blocks = f.blocks();
            blocks.push_back(LseBlock{{minus_s}});
            ph.ineq.emplace_back(std::move(blocks));
        }
        ph.lower.assign(ph.n, -kInf);
        ph.upper.assign(ph.n, kInf);
        for (std::size_t j = 0; j < red.n; ++j) {
            if (std::isfinite(red.lower[j])) {
                AffineForm a;
                a.a = {{j, -1.0}, {sidx, -1.0}};
                a.b = red.lower[j];
                ph.ineq.emplace_back(std::vector<LseBlock>{LseBlock{{a}}});
            } else {
                // keeps the search bounded when constraints leave directions free
                ph.lower[j] = z0[static_cast<Eigen::Index>(j)] - detail::kPhaseOneRadius;
            }
            if (std::isfinite(red.upper[j])) {
                AffineForm a;
                a.a = {{j, 1.0}, {sidx, -1.0}};
                a.b = -red.upper[j];
                ph.ineq.emplace_back(std::vector<LseBlock>{LseBlock{{a}}});
            } else {
                ph.upper[j] = z0[static_cast<Eigen::Index>(j)] + detail::kPhaseOneRadius;
            }
        }
        ph.eq = red.eq;
        ph.lower[sidx] = -1.0;
        Eigen::VectorXd zs(static_cast<Eigen::Index>(ph.n));
        zs.head(N) = z0;
        zs[static_cast<Eigen::Index>(sidx)] = std::max(worst, -0.5) + 1.0;
        SolverOptions popt = opt;
        popt.tol = std::min(opt.tol, 1e-9);
        detail::BarrierEngine pe(ph, popt);
        // a comfortable margin, or half the best margin the gap still allows
        auto found = [&](const Eigen::VectorXd& v, double gap, bool centered) {
            const double sv = v[static_cast<Eigen::Index>(sidx)];
            return sv < -0.25 || (centered && sv < 0.0 && gap <= -sv);
        };
        auto pr = pe.run(zs, 1.0, pe.initial_t(zs, 1.0), opt.max_iter, found);
        steps += pr.newton_steps;
        const double sfinal = pr.z[static_cast<Eigen::Index>(sidx)];
        Eigen::VectorXd cand = pr.z.head(N);
        engine.constraint_values(cand, cv);
        worst = -kInf;
        for (double c : cv) worst = std::max(worst, c);
        if (!(worst < 0.0)) {
            sol.status = pr.converged || sfinal >= 0.0 ? GpStatus::infeasible : GpStatus::max_iter;
            sol.iterations = steps;
            std::ostringstream os;
            os << "phase I ended with max constraint violation " << worst << " (s = " << sfinal << ")";
            sol.diagnostic = os.str();
            return sol;
        }
        z = cand;
    }

    const double t0 = engine.initial_t(z, scale);
    auto never = [](const Eigen::VectorXd&, double, bool) { return false; };
    auto res = engine.run(z, scale, t0, opt.max_iter > steps ? opt.max_iter - steps : 0, never);
    steps += res.newton_steps;

    // recover x, including eliminated epigraph variables
    std::vector<double> zfull(full.n, 0.0);
    for (std::size_t j = 0; j < full.n; ++j) {
        if (map[j] >= 0) zfull[j] = res.z[static_cast<Eigen::Index>(map[j])];
    }
    for (auto it = elims.rbegin(); it != elims.rend(); ++it) {
        double rest = it->constraint.b;
        for (const auto& [j, c] : it->constraint.a) {
            if (j != it->var) rest += c * zfull[j];
        }
        zfull[it->var] = -rest / it->coef;
    }
    sol.x.resize(full.n);
    for (std::size_t j = 0; j < full.n; ++j) sol.x[j] = std::exp(zfull[j]);
    sol.iterations = steps;
    sol.objective_value = evaluate(problem.objective, sol.x);
    const double eqres = engine.equality_residual(res.z);
    sol.kkt_residual = std::max({res.gap, std::isfinite(res.stationarity) ? res.stationarity : res.gap, eqres});
    if (res.converged && sol.kkt_residual <= opt.tol) {
        sol.status = GpStatus::optimal;
    } else if (res.converged) {
        sol.status = GpStatus::max_iter;
        sol.diagnostic = "centering stalled at the rounding floor above tolerance";
    } else {
        sol.status = GpStatus::max_iter;
        sol.diagnostic = "Newton budget exhausted before the duality gap reached tolerance";
    }
    return sol;
}

// ---------------------------------------------------------------------------
// Text dump: one term per line, "coefficient var:exponent ...".

inline std::string to_text(const GpProblem& p) {
    std::ostringstream os;
    os << std::setprecision(17);
    auto term = [&](const Monomial& m) {
        os << "    " << m.coefficient;
        for (const auto& [v, a] : m.exponents) os << ' ' << p.variables[v].name << ':' << a;
        os << '\n';
    };
    auto product = [&](const PosynomialProduct& pp) {
        for (const auto& f : pp.factors) {
            os << "  factor\n";
            for (const auto& t : f.terms) term(t);
        }
    };
    os << "variables " << p.variables.size() << '\n';
    for (const auto& v : p.variables) {
        os << "  " << v.name << ' ';
        if (v.lower) os << *v.lower; else os << '-';
        os << ' ';
        if (v.upper) os << *v.upper; else os << '-';
        os << '\n';
    }
    os << "objective\n";
    product(p.objective);
    for (const auto& c : p.ineq) {
        os << "le1 " << c.label << '\n';
        product(c.lhs);
    }
    for (const auto& c : p.eq) {
        os << "eq1 " << c.label << '\n';
        os << "  factor\n";
        term(c.lhs);
    }
    return os.str();
}

}  // namespace vwn::gp
