#include "hyperpredict/selection.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>

#include "hyperpredict/errors.hpp"

namespace hyperpredict {

namespace {

// True when candidate (a) should replace incumbent (b) at equal objective.
bool prefer_on_tie(const HyperparamPoint& a, const HyperparamPoint& b) {
    const double sa = regularization_strength(a);
    const double sb = regularization_strength(b);
    if (sa != sb) return sa > sb;
    return a > b;
}

}  // namespace

void SelectionCriterion::validate() const {
    if (!(nfv_ceiling >= 0.0)) throw ConfigError("selection: nfv ceiling must be >= 0");
    if (objective != ObjectiveKind::mean_dice_all && labels.empty()) {
        throw ConfigError("selection: objective needs at least one label");
    }
    if (objective == ObjectiveKind::single_label && labels.size() != 1) {
        throw ConfigError("selection: single_label objective takes exactly one label");
    }
    for (const auto l : labels) {
        if (l < 1) throw ConfigError("selection: labels are 1-based");
    }
}

double SelectionCriterion::objective_value(const MetricVector& m) const {
    switch (objective) {
        case ObjectiveKind::mean_dice_all: return m.mean_dice();
        case ObjectiveKind::mean_dice_subset: {
            double acc = 0.0;
            for (const auto l : labels) acc += m.dice.at(l - 1);
            return acc / static_cast<double>(labels.size());
        }
        case ObjectiveKind::single_label: return m.dice.at(labels.front() - 1);
    }
    return 0.0;
}

const char* objective_name(ObjectiveKind kind) {
    switch (kind) {
        case ObjectiveKind::mean_dice_all: return "mean_dice_all";
        case ObjectiveKind::mean_dice_subset: return "mean_dice_subset";
        case ObjectiveKind::single_label: return "single_label";
    }
    return "?";
}

ObjectiveKind parse_objective(const std::string& name) {
    if (name == "mean_dice_all") return ObjectiveKind::mean_dice_all;
    if (name == "mean_dice_subset") return ObjectiveKind::mean_dice_subset;
    if (name == "single_label") return ObjectiveKind::single_label;
    throw ConfigError("unknown objective '" + name + "'");
}

InfeasiblePolicy parse_policy(const std::string& name) {
    if (name == "error") return InfeasiblePolicy::error;
    if (name == "min_nfv_fallback") return InfeasiblePolicy::min_nfv_fallback;
    throw ConfigError("unknown infeasible policy '" + name + "'");
}

double regularization_strength(const HyperparamPoint& hp) {
    double s = 0.0;
    for (const auto& [name, v] : hp.values()) {
        if (is_regularization_weight(name)) s += std::log(v);
    }
    return s;
}

Selection select_optimal(const SweepTable& table, const SelectionCriterion& crit) {
    crit.validate();
    if (table.empty()) throw ConfigError("select_optimal: empty table");
    std::optional<std::size_t> best;
    double best_obj = 0.0;
    for (std::size_t i = 0; i < table.size(); ++i) {
        if (!crit.feasible(table[i].metrics)) continue;
        const double obj = crit.objective_value(table[i].metrics);
        if (!best || obj > best_obj || (obj == best_obj && prefer_on_tie(table[i].hp, table[*best].hp))) {
            best = i;
            best_obj = obj;
        }
    }
    bool feasible = true;
    if (!best) {
        if (crit.policy == InfeasiblePolicy::error) {
            throw InfeasibleSelection("no row has predicted %nfv below " +
                                      std::to_string(crit.nfv_ceiling));
        }
        feasible = false;
        double best_nfv = 0.0;
        for (std::size_t i = 0; i < table.size(); ++i) {
            const double nfv = table[i].metrics.nfv_percent;
            const double obj = crit.objective_value(table[i].metrics);
            bool take = !best || nfv < best_nfv;
            if (best && nfv == best_nfv) {
                take = obj > best_obj || (obj == best_obj && prefer_on_tie(table[i].hp, table[*best].hp));
            }
            if (take) {
                best = i;
                best_nfv = nfv;
                best_obj = obj;
            }
        }
    }
    const SweepRow& row = table[*best];
    return {*best, row.hp, row.metrics, best_obj, feasible};
}

std::vector<double> make_grid(double lo_exp, double hi_exp, int n) {
    if (n < 2) throw ConfigError("make_grid: n must be >= 2");
    if (!(lo_exp < hi_exp)) throw ConfigError("make_grid: lo must be < hi");
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double t = i == n - 1 ? hi_exp : lo_exp + (hi_exp - lo_exp) * i / (n - 1);
        out[static_cast<std::size_t>(i)] = std::exp(t);
    }
    return out;
}

std::vector<HyperparamPoint> grid_points(const std::string& name, const std::vector<double>& values,
                                         const HyperparamPoint& fixed) {
    std::vector<HyperparamPoint> out;
    out.reserve(values.size());
    for (const double v : values) {
        HyperparamPoint hp = fixed;
        hp.set(name, v);
        out.push_back(std::move(hp));
    }
    return out;
}

SweepTable sweep_pair(const Predictor& p, const Encoding& e, const std::vector<HyperparamPoint>& grid) {
    if (grid.empty()) throw ConfigError("sweep_pair: empty grid");
    const auto preds = p.forward_many(e, grid);
    SweepTable table;
    table.reserve(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) table.push_back({grid[i], preds[i].clamped()});
    return table;
}

SweepTable sweep_2d(const Predictor& p, const Encoding& e, const std::vector<double>& grid_be,
                    const std::vector<double>& grid_le, const HyperparamPoint& fixed) {
    if (grid_be.empty() || grid_le.empty()) throw ConfigError("sweep_2d: empty grid");
    std::vector<HyperparamPoint> points;
    points.reserve(grid_be.size() * grid_le.size());
    for (const double be : grid_be) {
        for (const double le : grid_le) {
            HyperparamPoint hp = fixed;
            hp.set("be", be);
            hp.set("le", le);
            points.push_back(std::move(hp));
        }
    }
    return sweep_pair(p, e, points);
}

std::vector<Selection> select_per_label(const std::vector<SweepTable>& tables, std::uint32_t label,
                                        SelectionCriterion crit) {
    crit.objective = ObjectiveKind::single_label;
    crit.labels = {label};
    std::vector<Selection> out;
    out.reserve(tables.size());
    for (const auto& t : tables) out.push_back(select_optimal(t, crit));
    return out;
}

HyperparamPoint cross_validation_select(const std::vector<RegistrationRecord>& val_records,
                                        const std::vector<HyperparamPoint>& candidates,
                                        const SelectionCriterion& crit) {
    crit.validate();
    if (candidates.empty()) throw ConfigError("cross_validation_select: no candidates");
    std::set<std::string> pairs;
    for (const auto& r : val_records) pairs.insert(r.pair_id);
    if (pairs.empty()) throw ConfigError("cross_validation_select: no validation records");

    std::optional<std::size_t> best;
    double best_obj = 0.0;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        // Per-pair averages first so repeated rows do not reweight pairs.
        std::map<std::string, std::pair<MetricVector, int>> per_pair;
        for (const auto& r : val_records) {
            if (r.hp != candidates[c]) continue;
            auto& [acc, count] = per_pair[r.pair_id];
            if (count == 0) {
                acc = r.target;
            } else {
                for (std::size_t l = 0; l < acc.dice.size(); ++l) acc.dice[l] += r.target.dice[l];
                acc.nfv_percent += r.target.nfv_percent;
            }
            ++count;
        }
        if (per_pair.size() != pairs.size()) {
            throw ConfigError("cross_validation_select: candidate " + candidates[c].key() +
                              " lacks records for some validation pairs");
        }
        double obj = 0.0;
        double nfv = 0.0;
        for (auto& [id, entry] : per_pair) {
            auto& [acc, count] = entry;
            for (double& d : acc.dice) d /= count;
            acc.nfv_percent /= count;
            obj += crit.objective_value(acc);
            nfv += acc.nfv_percent;
        }
        obj /= static_cast<double>(per_pair.size());
        nfv /= static_cast<double>(per_pair.size());
        if (!(nfv < crit.nfv_ceiling)) continue;
        if (!best || obj > best_obj || (obj == best_obj && prefer_on_tie(candidates[c], candidates[*best]))) {
            best = c;
            best_obj = obj;
        }
    }
    if (!best) {
        throw InfeasibleSelection("cross-validation: no candidate has mean %nfv below " +
                                  std::to_string(crit.nfv_ceiling));
    }
    return candidates[*best];
}

}  // namespace hyperpredict
