#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "gt/common.hpp"

namespace gt {

struct EconomicsConfig {
    double cooler_cost = 974.0;
    double margin_per_hl = 0.0;  // required user input, no defensible default
    int budget_coolers = 0;

    void validate() const {
        if (cooler_cost <= 0 || margin_per_hl <= 0 || budget_coolers <= 0)
            throw std::invalid_argument("economics values must be positive");
    }
};

/// Realized per-client outcome: holdout labels or generator ground truth.
struct ClientOutcome {
    std::string client_id;
    double v_pre = 0.0;
    double v_post = 0.0;
    double score = 0.0;  // model probability, used by the model policy

    double growth() const { return v_pre > 0 ? (v_post - v_pre) / v_pre : 0.0; }
};

struct AllocationPlan {
    std::string policy_name;
    std::vector<std::string> selected_clients;
    std::string realized_growth_source;
    double roi = 0.0;
    double incremental_margin = 0.0;
    double cost_savings = 0.0;
    double total_investment = 0.0;
};

/// Top-budget client ids under the given ranking key; ties break by client_id.
/// Budget beyond the population clamps (flagged via *clamped).
inline std::vector<std::string> allocate(const std::vector<ClientOutcome>& clients,
                                         std::size_t budget, bool by_score,
                                         bool* clamped = nullptr) {
    if (budget < 1) throw std::invalid_argument("allocate: budget must be >= 1");
    if (clamped) *clamped = budget > clients.size();
    budget = std::min(budget, clients.size());
    std::vector<std::size_t> idx(clients.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        double ka = by_score ? clients[a].score : clients[a].v_pre;
        double kb = by_score ? clients[b].score : clients[b].v_pre;
        if (ka != kb) return ka > kb;
        return clients[a].client_id < clients[b].client_id;
    });
    std::vector<std::string> out;
    out.reserve(budget);
    for (std::size_t i = 0; i < budget; ++i) out.push_back(clients[idx[i]].client_id);
    return out;
}

/// ROI = (incremental margin + cost savings) / total investment.
/// Incremental margin floors negative growth at zero. Cost savings count the
/// baseline policy's picks this plan avoided and that failed to reach tau.
inline AllocationPlan evaluate_plan(const std::vector<std::string>& selected,
                                    const std::vector<std::string>& baseline_selected,
                                    const std::vector<ClientOutcome>& outcomes,
                                    const EconomicsConfig& econ, double tau,
                                    const std::string& policy_name,
                                    const std::string& source = "generator ground truth") {
    econ.validate();
    if (selected.empty()) throw std::invalid_argument("evaluate_plan: empty selection");

    std::map<std::string, const ClientOutcome*> byId;
    for (const auto& o : outcomes) byId[o.client_id] = &o;
    for (const auto& id : selected)
        if (!byId.count(id)) throw std::invalid_argument("unknown client in selection: " + id);

    AllocationPlan plan;
    plan.policy_name = policy_name;
    plan.selected_clients = selected;
    plan.realized_growth_source = source;
    plan.total_investment = econ.cooler_cost * static_cast<double>(selected.size());

    // accumulate in id order so the sum does not depend on selection order
    std::set<std::string> sel(selected.begin(), selected.end());
    for (const auto& id : sel) {
        const auto* o = byId.at(id);
        plan.incremental_margin += econ.margin_per_hl * std::max(o->v_post - o->v_pre, 0.0);
    }
    // B_fail: baseline picks not in this plan whose realized growth < tau
    int avoided_failures = 0;
    for (const auto& id : baseline_selected) {
        if (sel.count(id)) continue;
        auto it = byId.find(id);
        if (it != byId.end() && it->second->growth() < tau) ++avoided_failures;
    }
    plan.cost_savings = econ.cooler_cost * avoided_failures;
    plan.roi = (plan.incremental_margin + plan.cost_savings) / plan.total_investment;
    return plan;
}

inline constexpr const char* kAssociationalCaveat =
    "Realized growth is associational, not causal: allocation was not randomized and no "
    "control group exists, so growth cannot be attributed to the cooler alone.";

inline nlohmann::json to_json(const AllocationPlan& p) {
    return {{"policy_name", p.policy_name},
            {"selected_clients", p.selected_clients},
            {"realized_growth_source", p.realized_growth_source},
            {"roi", p.roi},
            {"incremental_margin", p.incremental_margin},
            {"cost_savings", p.cost_savings},
            {"total_investment", p.total_investment},
            {"caveat", kAssociationalCaveat}};
}

}  // namespace gt
