#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "krds/simulator.hpp"

namespace krds {

struct EpisodeSummary {
    std::size_t disease = 0;
    Outcome outcome = Outcome::fail_max_turns;
    int turns = 0;
    int requests = 0;
    int hits = 0;
    double total_reward = 0.0;
};

struct MetricsReport {
    double accuracy = 0.0;
    double match_rate = 0.0;
    double avg_turns = 0.0;
    std::map<std::string, double> per_disease_accuracy;
    std::map<std::string, std::size_t> per_disease_episodes;
    std::size_t episodes = 0;
    std::string config_fingerprint;
};

/// Accuracy = successes / episodes; match rate = hits / requests pooled over
/// all episodes (0 when no request was made); average turns per episode.
inline MetricsReport compute_metrics(std::span<const EpisodeSummary> episodes, const Ontology& o,
                                     std::string fingerprint = {}) {
    if (episodes.empty()) throw Error("compute_metrics: no episodes");
    MetricsReport m;
    m.episodes = episodes.size();
    m.config_fingerprint = std::move(fingerprint);
    long successes = 0, requests = 0, hits = 0, turns = 0;
    std::map<std::size_t, std::pair<long, long>> by_disease;
    for (const auto& e : episodes) {
        const bool ok = e.outcome == Outcome::success;
        successes += ok;
        requests += e.requests;
        hits += e.hits;
        turns += e.turns;
        auto& [wins, total] = by_disease[e.disease];
        wins += ok;
        ++total;
    }
    const double n = static_cast<double>(episodes.size());
    m.accuracy = static_cast<double>(successes) / n;
    m.match_rate = requests > 0 ? static_cast<double>(hits) / static_cast<double>(requests) : 0.0;
    m.avg_turns = static_cast<double>(turns) / n;
    for (const auto& [d, counts] : by_disease) {
        const auto& name = o.diseases().at(d);
        m.per_disease_accuracy[name] = static_cast<double>(counts.first) / static_cast<double>(counts.second);
        m.per_disease_episodes[name] = static_cast<std::size_t>(counts.second);
    }
    return m;
}

inline json metrics_to_json(const MetricsReport& m) {
    return json{{"accuracy", m.accuracy},
                {"match_rate", m.match_rate},
                {"avg_turns", m.avg_turns},
                {"per_disease_accuracy", m.per_disease_accuracy},
                {"per_disease_episodes", m.per_disease_episodes},
                {"episodes", m.episodes},
                {"config_fingerprint", m.config_fingerprint}};
}

} // namespace krds
