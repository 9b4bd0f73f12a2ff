#pragma once

#include <iomanip>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "krds/trainer.hpp"

namespace krds {

struct AblationVariant {
    std::string name;
    Variant variant;
    RelationInit relation_init;
};

/// The five component-ablation rows, basic DQN first and the full model last.
inline std::vector<AblationVariant> ablation_variants() {
    return {{"Basic DQN", Variant::basic, RelationInit::prior},
            {"DQN + relation branch*", Variant::relation, RelationInit::random},
            {"DQN + relation branch", Variant::relation, RelationInit::prior},
            {"DQN + knowledge branch", Variant::knowledge, RelationInit::prior},
            {"KR-DQN", Variant::full, RelationInit::prior}};
}

struct AblationRow {
    AblationVariant variant;
    std::vector<std::uint64_t> seeds;
    std::vector<MetricsReport> runs; // best snapshot evaluated on the held-out goals, one per seed

    double mean_accuracy() const {
        double s = 0.0;
        for (const auto& r : runs) s += r.accuracy;
        return runs.empty() ? 0.0 : s / static_cast<double>(runs.size());
    }
    double mean_match_rate() const {
        double s = 0.0;
        for (const auto& r : runs) s += r.match_rate;
        return runs.empty() ? 0.0 : s / static_cast<double>(runs.size());
    }
    double mean_turns() const {
        double s = 0.0;
        for (const auto& r : runs) s += r.avg_turns;
        return runs.empty() ? 0.0 : s / static_cast<double>(runs.size());
    }
};

/// Trains every variant once per seed and scores its best snapshot on the
/// test split (the training split when no test goals exist).
inline std::vector<AblationRow> run_ablation(const TrainerConfig& base, const Dataset& ds,
                                             std::span<const std::uint64_t> seeds,
                                             const std::function<void(const std::string&)>& progress = {}) {
    std::vector<AblationRow> rows;
    const std::span<const UserGoal> held_out = ds.test.empty() ? std::span<const UserGoal>(ds.train) : ds.test;
    for (const auto& v : ablation_variants()) {
        AblationRow row{v, {}, {}};
        for (auto seed : seeds) {
            TrainerConfig c = base;
            c.seed = seed;
            c.flags.variant = v.variant;
            c.relation_init = v.relation_init;
            KrDqn policy = make_policy(c, ds);
            const auto report = train(c, ds, policy);
            const KrDqn& best = report.best ? *report.best : policy;
            Rng rng(c.eval_seed + seed);
            row.seeds.push_back(seed);
            row.runs.push_back(evaluate(best, held_out, held_out.size(), make_environment(c, ds.ontology), rng,
                                        report.fingerprint));
            if (progress)
                progress(v.name + " seed " + std::to_string(seed) + ": accuracy " +
                         std::to_string(row.runs.back().accuracy));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

inline json ablation_to_json(const AblationRow& row) {
    json runs = json::array();
    for (std::size_t i = 0; i < row.runs.size(); ++i) {
        auto r = metrics_to_json(row.runs[i]);
        r["seed"] = row.seeds[i];
        runs.push_back(std::move(r));
    }
    return json{{"variant", row.variant.name},
                {"branches", to_string(row.variant.variant)},
                {"relation_init", row.variant.relation_init == RelationInit::prior ? "prior" : "random"},
                {"accuracy", row.mean_accuracy()},
                {"match_rate", row.mean_match_rate()},
                {"avg_turns", row.mean_turns()},
                {"runs", runs}};
}

/// Fixed-width comparison table: one row per variant, per-disease accuracy
/// columns followed by the overall mean.
inline void write_ablation_table(std::ostream& os, std::span<const AblationRow> rows, const Ontology& o) {
    os << std::left << std::setw(26) << "variant";
    for (const auto& d : o.diseases()) os << std::setw(18) << d;
    os << std::setw(10) << "overall" << std::setw(10) << "match" << "turns\n";
    os << std::fixed << std::setprecision(3);
    for (const auto& row : rows) {
        os << std::setw(26) << row.variant.name;
        for (const auto& d : o.diseases()) {
            double s = 0.0;
            int n = 0;
            for (const auto& r : row.runs)
                if (auto it = r.per_disease_accuracy.find(d); it != r.per_disease_accuracy.end()) {
                    s += it->second;
                    ++n;
                }
            os << std::setw(18) << (n ? s / n : 0.0);
        }
        os << std::setw(10) << row.mean_accuracy() << std::setw(10) << row.mean_match_rate() << row.mean_turns()
           << '\n';
    }
    os.unsetf(std::ios::floatfield);
}

} // namespace krds
