#pragma once
#include <algorithm>
#include <atomic>
#include <chrono>
#include <climits>
#include <condition_variable>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <thread>
#include <vector>
#include <l0bnb/problem_model.hpp>
#include <l0bnb/relaxation.hpp>
#include <l0bnb/ridge.hpp>

namespace l0bnb {

enum class ScreeningMode { automatic, on, off };
enum class BranchingRule { strong, max_fractional };

/// One record per processed node.
struct NodeTrace
{
    long node_id = 0;
    int depth = 0;
    double lower_bound = 0;   // node bound after solving its relaxation
    double primal = 0;        // relaxation primal objective
    long branch_variable = -1;
    double upper_bound = 0;
    double global_lower_bound = 0;
    double gap = 0;
    std::string status;       // "branched", "pruned", "integral"
};

struct SolverSettings
{
    double rel_gap_target = 0.01;
    double int_tol = 1e-4;        // epsilon_if
    double pd_tol = 1e-5;         // epsilon_pd
    double time_limit = infinity; // seconds
    long node_limit = LONG_MAX;
    double cd_tolerance = 1e-6;
    int max_cd_cycles = 500;
    ScreeningMode screening = ScreeningMode::automatic;
    double eps_gs = default_eps_gs;
    BranchingRule branching = BranchingRule::strong;
    int strong_candidates = 10;
    double strong_tolerance_factor = 10;
    int workers = 1;
    std::uint64_t seed = 0;
    std::function<void(const NodeTrace&)> trace;
    std::function<void(const ScreenProbe&)> screen_probe; // forwarded to every node relaxation

    void validate() const
    {
        if (!(rel_gap_target > 0 && rel_gap_target < 1)) throw config_error("relative gap target must lie in (0, 1)");
        if (!(int_tol > 0 && int_tol < 0.5)) throw config_error("integer tolerance must lie in (0, 0.5)");
        if (!(pd_tol > 0)) throw config_error("primal-dual tolerance must be positive");
        if (!(cd_tolerance > 0)) throw config_error("CD tolerance must be positive");
        if (!(time_limit > 0)) throw config_error("time limit must be positive");
        if (node_limit < 1) throw config_error("node limit must be at least 1");
        if (max_cd_cycles < 1) throw config_error("max CD cycles must be at least 1");
        if (!(eps_gs > 0 && eps_gs < 1)) throw config_error("eps_gs must lie in (0, 1)");
        if (workers < 1) throw config_error("workers must be at least 1");
        if (strong_candidates < 1) throw config_error("strong branching pool must be at least 1");
    }

    bool screening_enabled(index_t p) const
    {
        if (screening == ScreeningMode::on) return true;
        if (screening == ScreeningMode::off) return false;
        return p >= 10000;
    }

    RelaxSettings relax_settings(index_t p) const
    {
        RelaxSettings r;
        r.cd_tolerance = cd_tolerance;
        r.max_cycles = max_cd_cycles;
        r.int_tol = int_tol;
        r.pd_tol = pd_tol;
        r.screening = screening_enabled(p);
        r.eps_gs = eps_gs;
        r.screen_probe = screen_probe;
        return r;
    }
};

enum class Termination { gap_met, node_limit, time_limit };

inline const char* to_string(Termination t)
{
    switch (t) {
        case Termination::gap_met: return "gap_met";
        case Termination::node_limit: return "node_limit";
        case Termination::time_limit: return "time_limit";
    }
    return "unknown";
}

struct BoundSnapshot
{
    double lower = 0;
    double upper = 0;
};

struct BnBOutcome
{
    SparseCoefs beta;
    double objective = 0;
    double lower_bound = 0;
    double rel_gap = 0;
    long nodes_explored = 0;
    int max_depth = 0;
    long open_nodes = 0;
    long incumbent_updates = 0;
    Termination status = Termination::gap_met;
    double wall_time_s = 0;
    std::vector<BoundSnapshot> history; // global bounds after every processed node
};

struct Incumbent
{
    SparseCoefs beta;
    double objective = infinity;
    bool clamped = false; // the unboxed ridge fit left the box and was re-solved with it
};

/**
 * Best solution on a fixed support: min 0.5 ||y - X_S b||^2 + lambda2 ||b||^2,
 * solved through an |S| x |S| factorization. If the fit leaves the box it is
 * re-solved with the box by projected CD.
 */
inline Incumbent polish_incumbent(const IndexSet& support, const Dataset& data, const PenaltyParams& params)
{
    Incumbent inc;
    vec_t b = ridge_on_support(data, support, params.lambda2);
    if (b.size() > 0 && b.cwiseAbs().maxCoeff() > params.big_m) {
        b = box_ridge_on_support(data, support, params.lambda2, params.big_m, b);
        inc.clamped = true;
    }
    for (std::size_t j = 0; j < support.size(); ++j) set_coef(inc.beta, support[j], b[j]);
    inc.objective = objective_full(inc.beta, data, params);
    return inc;
}

namespace detail {

/**
 * Coordinate descent on the l0 + l2 objective itself: a coordinate is kept
 * nonzero at its ridge-shrunk, box-clipped value only when that beats paying
 * nothing for zero by more than lambda0.
 */
inline SparseCoefs l0_coordinate_descent(const Dataset& data, const PenaltyParams& params, SparseCoefs beta,
                                         int max_cycles = 200)
{
    vec_t r = residual_of(beta, data);
    for (int t = 0; t < max_cycles; ++t) {
        bool changed = false;
        for (index_t i = 0; i < data.p(); ++i) {
            const auto col = data.x.col(i);
            auto it = beta.find(i);
            const double old = it == beta.end() ? 0.0 : it->second;
            const double a = col.dot(r) + old;
            const double b = std::clamp(a / (1 + 2 * params.lambda2), -params.big_m, params.big_m);
            const double gain = 0.5 * a * a - (0.5 * (b - a) * (b - a) + params.lambda2 * b * b);
            const double nb = gain > params.lambda0 ? b : 0.0;
            if (nb != old) {
                r.noalias() -= (nb - old) * col;
                set_coef(beta, i, nb);
                if (std::abs(nb - old) > 1e-12 * (1 + std::abs(old))) changed = true;
            }
        }
        if (!changed) break;
    }
    return beta;
}

inline IndexSet top_correlated(const Dataset& data, const vec_t& residual, index_t count)
{
    count = std::min<index_t>(count, data.p());
    std::vector<std::pair<double, index_t>> corr(data.p());
    for (index_t i = 0; i < data.p(); ++i) corr[i] = {std::abs(column_dot(data, i, residual)), i};
    std::partial_sort(corr.begin(), corr.begin() + count, corr.end(), [](const auto& a, const auto& b) {
        return a.first > b.first || (a.first == b.first && a.second < b.second);
    });
    IndexSet out;
    for (index_t k = 0; k < count; ++k) out.push_back(corr[k].second);
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace detail

/**
 * Upper bound from local search on the l0 + l2 objective: coordinate descent
 * started from zero and from a ridge fit on the most correlated features, each
 * polished on its support. Returns the better of the two.
 */
inline Incumbent initial_incumbent(const Dataset& data, const PenaltyParams& params,
                                   const SolverSettings& = {})
{
    Incumbent best;
    best.objective = objective_full({}, data, params);
    auto consider = [&](const SparseCoefs& start) {
        const SparseCoefs cd = detail::l0_coordinate_descent(data, params, start);
        Incumbent inc = polish_incumbent(support_of(cd), data, params);
        if (inc.objective < best.objective) best = std::move(inc);
    };
    consider({});
    const index_t k = std::min<index_t>({10, data.p(), std::max<index_t>(data.n() - 1, 1)});
    const Incumbent seeded = polish_incumbent(detail::top_correlated(data, data.y, k), data, params);
    consider(seeded.beta);
    return best;
}

struct Branching
{
    index_t variable = -1;
    NodeState child_zero;
    NodeState child_one;
};

namespace detail {

inline std::vector<index_t> fractional_by_distance(const RelaxResult& relax, const NodeState& node, double lo,
                                                   double hi)
{
    std::vector<std::pair<double, index_t>> frac;
    for (const auto& [i, z] : relax.z_relaxed) {
        if (node.is_fixed_one(i) || node.is_fixed_zero(i)) continue;
        if (z > lo && z < hi) frac.push_back({std::abs(z - 0.5), i});
    }
    std::sort(frac.begin(), frac.end());
    std::vector<index_t> out;
    for (const auto& f : frac) out.push_back(f.second);
    return out;
}

// Objective of a temporary child restricted to the parent's active set.
inline double restricted_child_objective(const NodeState& child, const RelaxResult& relax, const Dataset& data,
                                         const PenaltyParams& params, const RelaxSettings& rs)
{
    SparseCoefs start = relax.beta;
    for (index_t i : child.fixed_zero) start.erase(i);
    CdWorkspace ws(data, child, start, set_difference(relax.active_set, child.fixed_zero), rs.cd_tolerance);
    solve_restricted(ws, data, params, rs);
    return workspace_objective(ws, params);
}

} // namespace detail

inline std::pair<NodeState, NodeState> make_children(const NodeState& node, const RelaxResult& relax, index_t j,
                                                     double node_bound)
{
    NodeState zero, one;
    for (NodeState* c : {&zero, &one}) {
        c->fixed_zero = node.fixed_zero;
        c->fixed_one = node.fixed_one;
        c->warm_start = relax.beta;
        c->active_set = relax.active_set;
        c->screen_ref = relax.screen;
        c->parent_lower_bound = node_bound;
        c->depth = node.depth + 1;
    }
    insert_sorted(zero.fixed_zero, j);
    zero.warm_start.erase(j);
    zero.active_set = set_difference(zero.active_set, IndexSet{j});
    insert_sorted(one.fixed_one, j);
    insert_sorted(one.active_set, j);
    return {std::move(zero), std::move(one)};
}

/**
 * Picks the branching variable among the fractional z's. Strong branching
 * trial-solves both children of up to `strong_candidates` of the most
 * fractional variables on the current active set with a looser tolerance and
 * keeps the one whose weaker child improves the most; ties go to the more
 * fractional variable.
 */
inline Branching branch(const NodeState& node, const RelaxResult& relax, const Dataset& data,
                        const PenaltyParams& params, const SolverSettings& settings, double node_bound = -infinity)
{
    const auto frac = detail::fractional_by_distance(relax, node, settings.int_tol, 1 - settings.int_tol);
    if (frac.empty()) throw domain_error("branch: relaxation has no fractional z");
    index_t chosen = frac.front();
    if (settings.branching == BranchingRule::strong && frac.size() > 1) {
        RelaxSettings rs = settings.relax_settings(data.p());
        rs.cd_tolerance *= settings.strong_tolerance_factor;
        const std::size_t pool = std::min<std::size_t>(frac.size(), settings.strong_candidates);
        double best_score = -infinity;
        for (std::size_t c = 0; c < pool; ++c) {
            const index_t j = frac[c];
            auto [zero, one] = make_children(node, relax, j, node_bound);
            const double up0 = detail::restricted_child_objective(zero, relax, data, params, rs);
            const double up1 = detail::restricted_child_objective(one, relax, data, params, rs);
            const double score = std::min(up0, up1) - relax.primal_objective;
            if (score > best_score) {
                best_score = score;
                chosen = j;
            }
        }
    }
    Branching out;
    out.variable = chosen;
    std::tie(out.child_zero, out.child_one) = make_children(node, relax, chosen, node_bound);
    return out;
}

namespace detail {

struct NodeOrder
{
    // best-first on parent bound, then deeper first, then creation order
    bool operator()(const NodeState& a, const NodeState& b) const
    {
        if (a.parent_lower_bound != b.parent_lower_bound) return a.parent_lower_bound > b.parent_lower_bound;
        if (a.depth != b.depth) return a.depth < b.depth;
        return a.id > b.id;
    }
};

inline double rel_gap(double ub, double lb)
{
    if (!(ub > 0)) return lb >= ub ? 0.0 : infinity;
    return std::max(0.0, (ub - lb) / ub);
}

} // namespace detail

/**
 * Branch-and-bound over the z's of the conic Big-M model. Nodes are explored
 * best-first; each node relaxation is solved by active-set CD and bounded by
 * its dual. A node is pruned when its bound reaches UB (1 - slack), slack =
 * min(pd_tol, rel_gap_target), or when its relaxation solution is exactly
 * integral. Stops when (UB - LB)/UB <= rel_gap_target or a limit is hit.
 */
inline BnBOutcome solve(const Dataset& data, const PenaltyParams& params, const SolverSettings& settings = {},
                        const std::optional<SparseCoefs>& warm_start = std::nullopt)
{
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    params.validate();
    settings.validate();
    data.validate();

    const RelaxSettings rs = settings.relax_settings(data.p());
    const double slack = std::min(settings.pd_tol, settings.rel_gap_target);

    Incumbent inc = initial_incumbent(data, params, settings);
    if (warm_start) {
        SparseCoefs clipped;
        for (const auto& [i, v] : *warm_start) {
            if (i >= 0 && i < data.p()) set_coef(clipped, i, std::clamp(v, -params.big_m, params.big_m));
        }
        Incumbent w = polish_incumbent(support_of(clipped), data, params);
        if (w.objective < inc.objective) inc = std::move(w);
    }

    BnBOutcome out;
    std::mutex mu;
    std::condition_variable cv;
    std::priority_queue<NodeState, std::vector<NodeState>, detail::NodeOrder> open;
    std::multiset<double> in_flight;
    double pruned_floor = infinity;
    long next_id = 0;
    bool stop = false;
    Termination status = Termination::gap_met;

    {
        NodeState root;
        const index_t kappa = std::min<index_t>(2 * static_cast<index_t>(inc.beta.size()) + 10, data.p());
        root.active_set = set_union(detail::top_correlated(data, data.y, kappa), support_of(inc.beta));
        root.id = next_id++;
        open.push(std::move(root));
    }

    // caller holds mu
    auto global_lb = [&]() {
        double lb = std::min(inc.objective, pruned_floor);
        if (!open.empty()) lb = std::min(lb, open.top().parent_lower_bound);
        if (!in_flight.empty()) lb = std::min(lb, *in_flight.begin());
        return lb;
    };
    auto prunable = [&](double bound) { return bound >= inc.objective * (1 - slack); };
    auto offer = [&](Incumbent&& cand) {
        if (cand.objective < inc.objective) {
            inc = std::move(cand);
            ++out.incumbent_updates;
        }
    };

    auto worker = [&]() {
        std::unique_lock<std::mutex> lock(mu);
        for (;;) {
            cv.wait(lock, [&] { return stop || !open.empty() || in_flight.empty(); });
            if (stop) return;
            if (open.empty() && in_flight.empty()) {
                stop = true;
                cv.notify_all();
                return;
            }
            if (detail::rel_gap(inc.objective, global_lb()) <= settings.rel_gap_target) {
                status = Termination::gap_met;
                stop = true;
                cv.notify_all();
                return;
            }
            if (out.nodes_explored >= settings.node_limit) {
                status = Termination::node_limit;
                stop = true;
                cv.notify_all();
                return;
            }
            if (std::chrono::duration<double>(clock::now() - t0).count() > settings.time_limit) {
                status = Termination::time_limit;
                stop = true;
                cv.notify_all();
                return;
            }
            NodeState node = open.top();
            open.pop();
            if (prunable(node.parent_lower_bound)) {
                pruned_floor = std::min(pruned_floor, node.parent_lower_bound);
                continue;
            }
            ++out.nodes_explored;
            out.max_depth = std::max(out.max_depth, node.depth);
            auto flight = in_flight.insert(node.parent_lower_bound);
            lock.unlock();

            RelaxResult relax = solve_node(node, data, params, rs);
            const double bound = std::max(relax.dual_bound, node.parent_lower_bound);
            Incumbent polished = polish_incumbent(support_of(relax.beta), data, params);
            std::optional<Incumbent> rounded;
            bool exact_integral = false;
            if (relax.is_integral) {
                IndexSet ones;
                exact_integral = true;
                for (const auto& [i, z] : relax.z_relaxed) {
                    if (z >= 1 - settings.int_tol) ones.push_back(i);
                    if (z != 0 && z != 1 && !node.is_fixed_one(i)) exact_integral = false;
                }
                rounded = polish_incumbent(ones, data, params);
            }

            lock.lock();
            offer(std::move(polished));
            if (rounded) offer(std::move(*rounded));

            NodeTrace tr;
            tr.node_id = node.id;
            tr.depth = node.depth;
            tr.lower_bound = bound;
            tr.primal = relax.primal_objective;

            if (prunable(bound) || (relax.is_integral && exact_integral)) {
                pruned_floor = std::min(pruned_floor, bound);
                tr.status = relax.is_integral ? "integral" : "pruned";
            } else {
                std::optional<Branching> br;
                if (relax.is_integral) {
                    // within the integrality tolerance but not exactly integral: split the
                    // least settled coordinate so the node is resolved exactly
                    const auto near = detail::fractional_by_distance(relax, node, 0.0, 1.0);
                    br.emplace();
                    br->variable = near.front();
                    std::tie(br->child_zero, br->child_one) = make_children(node, relax, near.front(), bound);
                } else {
                    lock.unlock();
                    br = branch(node, relax, data, params, settings, bound);
                    lock.lock();
                }
                br->child_zero.id = next_id++;
                br->child_one.id = next_id++;
                tr.branch_variable = br->variable;
                tr.status = "branched";
                open.push(std::move(br->child_zero));
                open.push(std::move(br->child_one));
            }
            in_flight.erase(flight);
            const double lb = global_lb();
            out.history.push_back({lb, inc.objective});
            tr.upper_bound = inc.objective;
            tr.global_lower_bound = lb;
            tr.gap = detail::rel_gap(inc.objective, lb);
            if (settings.trace) settings.trace(tr);
            cv.notify_all();
        }
    };

    if (settings.workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < settings.workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    out.beta = inc.beta;
    out.objective = inc.objective;
    out.lower_bound = std::min(global_lb(), inc.objective);
    out.rel_gap = detail::rel_gap(inc.objective, out.lower_bound);
    out.open_nodes = static_cast<long>(open.size());
    out.status = status;
    out.wall_time_s = std::chrono::duration<double>(clock::now() - t0).count();
    return out;
}

} // namespace l0bnb
