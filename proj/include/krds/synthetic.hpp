#pragma once

#include <random>
#include <string>
#include <vector>

#include "krds/ontology.hpp"

namespace krds {

struct SyntheticSpec {
    std::size_t diseases = 4;
    std::size_t symptoms_per_disease = 3;
    std::size_t train = 200;
    std::size_t test = 200;
    std::uint64_t seed = 2024;
    // Chance that each of the disease's own symptoms is present (at least one always is).
    double presence = 0.7;
    // Chance that one present symptom is disclosed in the self-report.
    double disclose = 0.5;
    // Chance of one extra denied symptom owned by another disease.
    double distractor = 0.3;
};

/// Ontology whose diseases own disjoint symptom groups: disease k owns
/// symptoms [k*g, (k+1)*g). Every goal's true symptoms come from its own group.
inline Ontology synthetic_ontology(std::size_t diseases, std::size_t per_disease) {
    static const std::vector<std::string> disease_names = {"common_cold", "gastroenteritis", "dermatitis",
                                                           "migraine"};
    static const std::vector<std::string> symptom_names = {
        "fever",    "cough", "runny_nose", "diarrhea",  "vomiting", "abdominal_pain",
        "rash",     "itching", "skin_redness", "headache", "dizziness", "light_sensitivity"};
    std::vector<std::string> ds, ss;
    for (std::size_t i = 0; i < diseases; ++i)
        ds.push_back(diseases <= disease_names.size() ? disease_names[i] : "disease_" + std::to_string(i));
    const bool named = diseases <= disease_names.size() && per_disease == 3;
    for (std::size_t i = 0; i < diseases * per_disease; ++i)
        ss.push_back(named ? symptom_names[i] : "symptom_" + std::to_string(i));
    return Ontology(ds, ss);
}

inline Dataset make_synthetic_dataset(const SyntheticSpec& spec = {}) {
    Dataset ds;
    ds.ontology = synthetic_ontology(spec.diseases, spec.symptoms_per_disease);
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> pick_disease(0, spec.diseases - 1);
    const auto g = spec.symptoms_per_disease;

    auto make_goal = [&] {
        UserGoal goal;
        goal.disease = pick_disease(rng);
        std::vector<std::size_t> present;
        for (std::size_t k = 0; k < g; ++k)
            if (u(rng) < spec.presence) present.push_back(goal.disease * g + k);
        if (present.empty()) present.push_back(goal.disease * g + std::uniform_int_distribution<std::size_t>(0, g - 1)(rng));
        for (auto s : present) goal.implicit_symptoms[s] = true;
        if (u(rng) < spec.disclose) {
            const auto s = present[std::uniform_int_distribution<std::size_t>(0, present.size() - 1)(rng)];
            goal.implicit_symptoms.erase(s);
            goal.explicit_symptoms[s] = true;
        }
        if (spec.diseases > 1 && u(rng) < spec.distractor) {
            auto other = pick_disease(rng);
            if (other == goal.disease) other = (other + 1) % spec.diseases;
            goal.implicit_symptoms[other * g + std::uniform_int_distribution<std::size_t>(0, g - 1)(rng)] = false;
        }
        return goal;
    };
    for (std::size_t i = 0; i < spec.train; ++i) ds.train.push_back(make_goal());
    for (std::size_t i = 0; i < spec.test; ++i) ds.test.push_back(make_goal());
    return ds;
}

} // namespace krds
