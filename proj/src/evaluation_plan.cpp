#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "silicon/experiments.hpp"

namespace silicon {

namespace {

std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

bool feasible(std::size_t lists, std::size_t raters, std::size_t per_rater, std::size_t per_list) {
    if (raters == 0 || per_rater > lists) return false;
    std::size_t slots = raters * per_rater;
    std::size_t lo = lists * (per_list > 0 ? per_list - 1 : 0), hi = lists * (per_list + 1);
    if (slots < lo || slots > hi) return false;
    std::size_t top = slots / lists + (slots % lists ? 1 : 0);
    return top <= raters;
}

}  // namespace

EvaluationPlan build_evaluation_plan(const std::vector<std::string>& list_ids, std::size_t n_raters,
                                     std::size_t per_rater, std::size_t per_list, std::uint64_t seed) {
    const std::size_t L = list_ids.size();
    if (L == 0) throw ValidationError("no lists to assign");
    if (per_rater == 0 || per_list == 0) throw ValidationError("per_rater and per_list must be positive");
    if (per_rater > L)
        throw ValidationError("each rater needs " + std::to_string(per_rater) + " distinct lists but only " +
                              std::to_string(L) + " exist");
    if (std::set<std::string>(list_ids.begin(), list_ids.end()).size() != L)
        throw ValidationError("list ids must be unique");

    if (!feasible(L, n_raters, per_rater, per_list)) {
        std::size_t slots = n_raters * per_rater;
        std::size_t suggestion = 0;
        if (slots > L * (per_list + 1)) {
            for (std::size_t r = n_raters; r > 0; --r)
                if (feasible(L, r, per_rater, per_list)) {
                    suggestion = r;
                    break;
                }
        } else {
            std::size_t r = std::max<std::size_t>(1, n_raters);
            while (!feasible(L, r, per_rater, per_list)) ++r;
            suggestion = r;
        }
        throw InfeasibleError(std::to_string(n_raters) + " raters x " + std::to_string(per_rater) +
                                  " lists cannot cover " + std::to_string(L) + " lists about " +
                                  std::to_string(per_list) + " times each; nearest feasible rater count is " +
                                  std::to_string(suggestion),
                              suggestion);
    }

    EvaluationPlan plan;
    plan.list_ids = list_ids;
    plan.per_rater = per_rater;
    plan.per_list = per_list;
    const std::size_t slots = n_raters * per_rater;
    const std::size_t base = slots / L, extra = slots % L;

    // Which lists get the extra rating is a seeded draw.
    std::vector<std::size_t> order(L);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::size_t> demand(L, base);
    for (std::size_t k = 0; k < extra; ++k) ++demand[order[k]];
    plan.coverage = demand;

    // Each rater takes the lists with the largest remaining demand; random keys
    // break ties. With uniform rater load and max demand <= raters this never
    // strands a list.
    std::vector<std::size_t> idx;
    idx.reserve(L);
    plan.raters.resize(n_raters);
    for (std::size_t r = 0; r < n_raters; ++r) {
        std::uint64_t salt = mix(seed ^ mix(r + 1));
        idx.clear();
        for (std::size_t i = 0; i < L; ++i)
            if (demand[i] > 0) idx.push_back(i);
        if (idx.size() < per_rater) throw InfeasibleError("assignment ran out of lists", n_raters);
        auto better = [&](std::size_t a, std::size_t b) {
            if (demand[a] != demand[b]) return demand[a] > demand[b];
            std::uint64_t ka = mix(salt ^ a), kb = mix(salt ^ b);
            return ka != kb ? ka < kb : a < b;
        };
        std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(per_rater - 1), idx.end(), better);
        std::vector<std::size_t> pick(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(per_rater));
        std::sort(pick.begin(), pick.end(), better);
        for (std::size_t i : pick) --demand[i];
        plan.raters[r] = std::move(pick);
    }
    for (std::size_t c : plan.coverage) {
        if (c < per_list) ++plan.below;
        if (c > per_list) ++plan.above;
    }
    check_evaluation_plan(plan);
    return plan;
}

void check_evaluation_plan(const EvaluationPlan& plan) {
    const std::size_t L = plan.list_ids.size();
    std::vector<std::size_t> seen(L, 0);
    for (std::size_t r = 0; r < plan.raters.size(); ++r) {
        const auto& lists = plan.raters[r];
        if (lists.size() != plan.per_rater)
            throw ValidationError("rater " + std::to_string(r) + " has " + std::to_string(lists.size()) + " lists");
        std::set<std::size_t> uniq(lists.begin(), lists.end());
        if (uniq.size() != lists.size()) throw ValidationError("rater " + std::to_string(r) + " sees a list twice");
        for (std::size_t i : lists) {
            if (i >= L) throw ValidationError("rater " + std::to_string(r) + " has an unknown list");
            ++seen[i];
        }
    }
    std::size_t lo = plan.per_list > 0 ? plan.per_list - 1 : 0;
    for (std::size_t i = 0; i < L; ++i) {
        if (plan.coverage.size() == L && plan.coverage[i] != seen[i])
            throw ValidationError("coverage of list " + plan.list_ids[i] + " does not match the assignment");
        if (seen[i] < lo || seen[i] > plan.per_list + 1)
            throw ValidationError("list " + plan.list_ids[i] + " has " + std::to_string(seen[i]) + " raters");
    }
}

}  // namespace silicon
