#pragma once
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>
#include <l0bnb/duality.hpp>
#include <l0bnb/problem_model.hpp>
#include <l0bnb/screening.hpp>

namespace l0bnb {

/// Which interval relaxation the coordinate descent engine minimizes.
enum class Formulation {
    perspective, ///< psi / psi_tilde penalties (the solver's relaxation)
    big_m        ///< (lambda0/M)|b| + lambda2 b^2, used only to compare relaxation strength
};

/// What a screened optimality check looked at; handed to RelaxSettings::screen_probe.
struct ScreenProbe
{
    const SparseCoefs& beta;
    const vec_t& residual;
    const NodeState& node;
    const IndexSet& candidates;
    const IndexSet& violations;
};

struct RelaxSettings
{
    double cd_tolerance = 1e-6;   // relative objective change
    double coef_tolerance = 0;    // if positive, also require max |coordinate change| below this
    int max_cycles = 500;         // per restricted solve
    double int_tol = 1e-4;
    double pd_tol = 1e-5;
    bool screening = false;
    double eps_gs = default_eps_gs;
    int max_outer = 1000;
    double min_tolerance = 1e-15;
    Formulation formulation = Formulation::perspective;
    std::function<void(const ScreenProbe&)> screen_probe; // test hook, called after every screened check
};

/**
 * Coordinate descent state: coefficients stored densely over the active set
 * (kept sorted so the cyclic order is the index order), plus the residual
 * y - X beta maintained incrementally.
 */
struct CdWorkspace
{
    IndexSet active_set;
    std::vector<double> beta;        // parallel to active_set
    std::vector<std::uint8_t> one;   // parallel to active_set, 1 if fixed to one
    vec_t residual;
    std::vector<double> objective_history;
    double tolerance = 1e-6;
    long cycles = 0;
    double max_change = 0; // largest coordinate move in the last cycle

    CdWorkspace() = default;

    CdWorkspace(const Dataset& data, const NodeState& node, const SparseCoefs& start, IndexSet active,
                double tol)
        : tolerance(tol)
    {
        active = set_union(active, node.fixed_one);
        for (const auto& [i, v] : start) {
            if (v != 0) insert_sorted(active, i);
        }
        active_set = set_difference(active, node.fixed_zero);
        beta.assign(active_set.size(), 0.0);
        one.assign(active_set.size(), 0);
        for (std::size_t k = 0; k < active_set.size(); ++k) {
            const index_t i = active_set[k];
            auto it = start.find(i);
            if (it != start.end()) beta[k] = it->second;
            one[k] = node.is_fixed_one(i) ? 1 : 0;
        }
        residual = data.y;
        for (std::size_t k = 0; k < active_set.size(); ++k) {
            if (beta[k] != 0) residual.noalias() -= beta[k] * data.x.col(active_set[k]);
        }
    }

    SparseCoefs coefficients() const
    {
        SparseCoefs out;
        for (std::size_t k = 0; k < active_set.size(); ++k) {
            if (beta[k] != 0) out.emplace_hint(out.end(), active_set[k], beta[k]);
        }
        return out;
    }

    /// Adds indices (sorted, disjoint from the active set) at zero.
    void extend(const IndexSet& added, const NodeState& node)
    {
        if (added.empty()) return;
        IndexSet merged = set_union(active_set, added);
        std::vector<double> b(merged.size(), 0.0);
        std::vector<std::uint8_t> o(merged.size(), 0);
        std::size_t k = 0;
        for (std::size_t m = 0; m < merged.size(); ++m) {
            if (k < active_set.size() && active_set[k] == merged[m]) {
                b[m] = beta[k];
                o[m] = one[k];
                ++k;
            } else {
                o[m] = node.is_fixed_one(merged[m]) ? 1 : 0;
            }
        }
        active_set = std::move(merged);
        beta = std::move(b);
        one = std::move(o);
    }

    void refresh_residual(const Dataset& data)
    {
        residual = data.y;
        for (std::size_t k = 0; k < active_set.size(); ++k) {
            if (beta[k] != 0) residual.noalias() -= beta[k] * data.x.col(active_set[k]);
        }
    }
};

/// Cycles between full recomputations of the residual.
inline constexpr long residual_refresh_cycles = 100;

namespace detail {

inline double coordinate_penalty(double b, bool one, const PenaltyParams& params, Formulation f)
{
    if (f == Formulation::big_m) return penalty_big_m(b, params);
    return one ? penalty_psi_tilde(b, params) : penalty_psi(b, params);
}

inline double coordinate_prox(double bt, bool one, const PenaltyParams& params, Formulation f)
{
    if (f == Formulation::big_m) return prox_big_m(bt, params);
    return one ? prox_psi_tilde(bt, params) : prox_psi(bt, params);
}

inline double violation_threshold(const PenaltyParams& params, Formulation f)
{
    return f == Formulation::big_m ? params.lambda0 / params.big_m : params.violation_threshold();
}

} // namespace detail

/// Objective of the restricted problem. Coordinates outside the active set are zero.
inline double workspace_objective(const CdWorkspace& ws, const PenaltyParams& params,
                                  Formulation f = Formulation::perspective)
{
    double pen = 0;
    for (std::size_t k = 0; k < ws.active_set.size(); ++k) {
        pen += detail::coordinate_penalty(ws.beta[k], ws.one[k], params, f);
    }
    return 0.5 * ws.residual.squaredNorm() + pen;
}

/**
 * One cyclic pass over the active set. Each coordinate is set to the prox of
 * beta_tilde = <r, X_i> + beta_i (unit-norm columns). Returns the decrease of
 * the objective over the pass.
 */
inline double cd_cycle(CdWorkspace& ws, const Dataset& data, const PenaltyParams& params,
                       Formulation f = Formulation::perspective)
{
    ws.max_change = 0;
    if (ws.active_set.empty()) return 0;
    if (ws.objective_history.empty()) ws.objective_history.push_back(workspace_objective(ws, params, f));
    for (std::size_t k = 0; k < ws.active_set.size(); ++k) {
        const auto col = data.x.col(ws.active_set[k]);
        const double old = ws.beta[k];
        const double bt = col.dot(ws.residual) + old;
        const double nb = detail::coordinate_prox(bt, ws.one[k], params, f);
        if (nb != old) {
            ws.residual.noalias() -= (nb - old) * col;
            ws.beta[k] = nb;
            ws.max_change = std::max(ws.max_change, std::abs(nb - old));
        }
    }
    ++ws.cycles;
    if (ws.cycles % residual_refresh_cycles == 0) ws.refresh_residual(data);
    const double obj = workspace_objective(ws, params, f);
    const double delta = ws.objective_history.back() - obj;
    ws.objective_history.push_back(obj);
    return delta;
}

/**
 * Cyclic CD on the active set until the relative objective change drops below
 * ws.tolerance (and, when settings.coef_tolerance > 0, no coordinate moved by
 * more than that). Returns false if the cycle cap was hit first.
 */
inline bool solve_restricted(CdWorkspace& ws, const Dataset& data, const PenaltyParams& params,
                             const RelaxSettings& settings = {})
{
    if (ws.active_set.empty()) return true;
    for (int t = 0; t < settings.max_cycles; ++t) {
        const double delta = cd_cycle(ws, data, params, settings.formulation);
        const double now = ws.objective_history.back();
        const bool coef_ok = settings.coef_tolerance <= 0 || ws.max_change < settings.coef_tolerance;
        if (std::abs(delta) / std::max(std::abs(now), 1e-12) < ws.tolerance && coef_ok) return true;
    }
    return false;
}

/**
 * Free coordinates outside the support of beta whose zero value is not
 * optimal: |<r, X_i>| > c. Features fixed by the node are skipped (fixed-to-one
 * features live in the active set permanently).
 */
inline IndexSet check_violations(const SparseCoefs& beta, const vec_t& residual, const Dataset& data,
                                 const PenaltyParams& params, const NodeState& node,
                                 Formulation f = Formulation::perspective)
{
    const double c = detail::violation_threshold(params, f);
    IndexSet out;
    for (index_t i = 0; i < data.p(); ++i) {
        auto it = beta.find(i);
        if (it != beta.end() && it->second != 0) continue;
        if (node.is_fixed_zero(i) || node.is_fixed_one(i)) continue;
        if (std::abs(column_dot(data, i, residual)) > c) out.push_back(i);
    }
    return out;
}

/// Violation check restricted to a screening candidate set.
inline IndexSet check_violations(const SparseCoefs& beta, const vec_t& residual, const Dataset& data,
                                 const PenaltyParams& params, const NodeState& node,
                                 const ScreenCache& screen)
{
    return screened_violations(screen, beta, residual, data, params, node).violations;
}

inline bool z_is_integral(double z, double int_tol)
{
    return z <= int_tol || z >= 1 - int_tol;
}

namespace detail {

struct ActiveSetRun
{
    bool converged = true;
    bool verified = false; // no off-support violations at the returned point
    std::shared_ptr<const ScreenCache> screen;
};

/**
 * Active-set outer loop: solve on the active set, then grow it by the
 * off-support violators until there are none. If every violator is already
 * active (an inexact restricted solve), the CD tolerance is tightened instead.
 */
inline ActiveSetRun run_active_set(CdWorkspace& ws, const Dataset& data, const PenaltyParams& params,
                                   const NodeState& node, const RelaxSettings& settings,
                                   std::shared_ptr<const ScreenCache> screen)
{
    ActiveSetRun run;
    const bool screening = settings.screening && settings.formulation == Formulation::perspective;
    for (int outer = 0; outer < settings.max_outer; ++outer) {
        run.converged = solve_restricted(ws, data, params, settings) && run.converged;
        const SparseCoefs beta = ws.coefficients();
        IndexSet violations;
        if (screening && !screen) {
            // first check at the root: centre the cache on the current solution
            screen = build_screen_cache(beta, ws.residual, data, settings.eps_gs);
            const double c = params.violation_threshold();
            for (const auto& [corr, i] : screen->corr_abs_sorted) {
                if (!(corr > c)) break;
                auto it = beta.find(i);
                if (it != beta.end() && it->second != 0) continue;
                if (node.is_fixed_zero(i) || node.is_fixed_one(i)) continue;
                violations.push_back(i);
            }
            std::sort(violations.begin(), violations.end());
            if (settings.screen_probe) settings.screen_probe({beta, ws.residual, node, violations, violations});
        } else if (screening) {
            auto checked = screened_violations(*screen, beta, ws.residual, data, params, node);
            if (settings.screen_probe) {
                settings.screen_probe({beta, ws.residual, node, checked.candidates, checked.violations});
            }
            violations = std::move(checked.violations);
            screen = maybe_refresh(screen, checked.candidates.size(), beta, ws.residual, data);
        } else {
            violations = check_violations(beta, ws.residual, data, params, node, settings.formulation);
        }
        if (violations.empty()) {
            run.verified = true;
            run.screen = std::move(screen);
            return run;
        }
        const IndexSet added = set_difference(violations, ws.active_set);
        if (added.empty()) {
            ws.tolerance = std::max(ws.tolerance * 0.1, settings.min_tolerance);
        } else {
            ws.extend(added, node);
        }
    }
    run.converged = false;
    run.screen = std::move(screen);
    return run;
}

} // namespace detail

inline void fill_relax_result(RelaxResult& out, const CdWorkspace& ws, const Dataset& data,
                              const PenaltyParams& params, const NodeState& node, const RelaxSettings& settings,
                              bool off_support_verified)
{
    out.beta = ws.coefficients();
    out.residual = ws.residual;
    out.primal_objective = workspace_objective(ws, params);
    const DualPoint dp = build_dual(out.beta, ws.residual, data, params, node, off_support_verified);
    out.dual_bound = dual_objective(dp, out.beta, data, params, node);
    auto [z, s] = recover_zs(out.beta, params, node);
    out.is_integral = std::all_of(z.begin(), z.end(), [&](const auto& e) {
        return z_is_integral(e.second, settings.int_tol);
    });
    out.z_relaxed = std::move(z);
    out.s_values = std::move(s);
    out.active_set = ws.active_set;
    out.cd_cycles = ws.cycles;
}

inline double relative_pd_gap(double primal, double dual)
{
    return (primal - dual) / std::max(std::abs(primal), 1e-12);
}

/**
 * Solves the perspective relaxation at a node with the active-set method,
 * warm-started from node.warm_start on node.active_set, and certifies it with
 * a dual bound. When the recovered z is integral the solve is continued with a
 * tighter tolerance until the primal-dual gap is within settings.pd_tol.
 */
inline RelaxResult solve_node(const NodeState& node, const Dataset& data, const PenaltyParams& params,
                              const RelaxSettings& settings = {})
{
    RelaxResult out;
    // warm start clipped to the box; fixed-to-zero coordinates dropped
    SparseCoefs start;
    for (const auto& [i, v] : node.warm_start) {
        if (v == 0 || node.is_fixed_zero(i)) continue;
        start[i] = std::clamp(v, -params.big_m, params.big_m);
    }
    CdWorkspace ws(data, node, start, node.active_set, settings.cd_tolerance);
    auto screen = node.screen_ref;
    bool converged = true;
    for (;;) {
        auto run = detail::run_active_set(ws, data, params, node, settings, screen);
        converged = converged && run.converged;
        screen = run.screen;
        fill_relax_result(out, ws, data, params, node, settings, run.verified);
        if (!out.is_integral || relative_pd_gap(out.primal_objective, out.dual_bound) <= settings.pd_tol
            || ws.tolerance <= settings.min_tolerance) {
            break;
        }
        ws.tolerance = std::max(ws.tolerance * 0.01, settings.min_tolerance);
    }
    out.screen = std::move(screen);
    out.converged = converged;
    return out;
}

/// Interval relaxation of the Big-M model, min H(beta) over the box. Reference only.
inline std::pair<SparseCoefs, double> solve_big_m_relaxation(const Dataset& data, const PenaltyParams& params,
                                                             RelaxSettings settings = {})
{
    settings.formulation = Formulation::big_m;
    settings.screening = false;
    NodeState root;
    CdWorkspace ws(data, root, {}, {}, settings.cd_tolerance);
    detail::run_active_set(ws, data, params, root, settings, nullptr);
    return {ws.coefficients(), workspace_objective(ws, params, Formulation::big_m)};
}

} // namespace l0bnb
