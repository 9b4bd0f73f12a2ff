#pragma once

#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "krds/dialogue.hpp"

namespace krds {

struct RewardScheme {
    std::string name;
    double success = 44.0;
    double failure = -22.0;
    double miss_penalty = -1.0;

    friend bool operator==(const RewardScheme&, const RewardScheme&) = default;
};

/// Built from the turn limit L = 22: 2L for a correct diagnosis, -L for a
/// failed one, -1 per request that misses the patient's symptoms.
inline RewardScheme main_reward_scheme() { return {"main", 44.0, -22.0, -1.0}; }

/// The main scheme divided by L: (+2, -1, -1/22). Its targets stay inside
/// the range the sigmoid-fused Q-values can represent.
inline RewardScheme unit_reward_scheme() { return {"unit", 2.0, -1.0, -1.0 / 22.0}; }

/// Named presets: "main", "unit" and the four magnitude variants R1, R2, R1*, R2*.
inline RewardScheme reward_scheme(const std::string& name) {
    if (name == "main") return main_reward_scheme();
    if (name == "unit") return unit_reward_scheme();
    if (name == "R1") return {"R1", 22.0, -11.0, -1.0};
    if (name == "R2") return {"R2", 11.0, -6.0, -1.0};
    if (name == "R1*") return {"R1*", 22.0, -11.0, -0.5};
    if (name == "R2*") return {"R2*", 11.0, -6.0, -0.25};
    throw Error("unknown reward scheme '" + name + "'");
}

/// Parses "success,failure,penalty".
inline RewardScheme parse_reward_triple(const std::string& text) {
    std::stringstream ss(text);
    std::string part;
    std::vector<double> values;
    while (std::getline(ss, part, ',')) {
        try {
            std::size_t used = 0;
            values.push_back(std::stod(part, &used));
            if (used != part.size()) throw std::invalid_argument(part);
        } catch (const std::exception&) {
            throw Error("reward triple: cannot parse '" + part + "'");
        }
    }
    if (values.size() != 3) throw Error("reward triple must be success,failure,penalty");
    RewardScheme r{"custom", values[0], values[1], values[2]};
    if (!(r.success > 0.0 && r.failure < 0.0)) throw Error("reward triple needs success > 0 > failure");
    return r;
}

enum class Outcome { success, fail_wrong_disease, fail_max_turns };

inline const char* to_string(Outcome o) {
    switch (o) {
    case Outcome::success: return "success";
    case Outcome::fail_wrong_disease: return "fail_wrong_disease";
    case Outcome::fail_max_turns: return "fail_max_turns";
    }
    return "?";
}

struct SimSession {
    UserGoal goal;
    int turn = 0;
    bool done = false;
    std::optional<Outcome> outcome;
};

struct SimulatorOptions {
    int max_turns = 22;
    // Also charge the miss penalty when the requested symptom is present but false.
    bool penalize_denied = false;
};

struct UserResponse {
    std::optional<SemanticFrame> frame; // absent once the agent has informed or closed
    double reward = 0.0;
    bool terminal = false;
    bool requested = false;
    bool hit = false; // requested symptom is among the goal's implicit symptoms
};

template <class Rng>
const UserGoal& sample_goal(std::span<const UserGoal> split, Rng& rng) {
    if (split.empty()) throw Error("sample_goal: empty split");
    std::uniform_int_distribution<std::size_t> pick(0, split.size() - 1);
    return split[pick(rng)];
}

/// Opening user turn: request the diagnosis and disclose every explicit symptom.
inline SemanticFrame initial_frame(const UserGoal& goal) {
    SemanticFrame f;
    f.intent = UserIntent::request_disease;
    for (const auto& [s, v] : goal.explicit_symptoms) f.slots[s] = status_of(v);
    return f;
}

/// Truthful answer about one symptom.
inline SemanticFrame answer_for(const UserGoal& goal, std::size_t symptom) {
    SlotStatus status = SlotStatus::not_sure;
    if (auto it = goal.implicit_symptoms.find(symptom); it != goal.implicit_symptoms.end())
        status = status_of(it->second);
    else if (auto ex = goal.explicit_symptoms.find(symptom); ex != goal.explicit_symptoms.end())
        status = status_of(ex->second);
    SemanticFrame f;
    f.intent = intent_for(status);
    f.slots[symptom] = status;
    return f;
}

/// Plays the patient for one agent turn.
inline UserResponse respond(SimSession& session, const AgentAction& action, const RewardScheme& scheme,
                            const SimulatorOptions& opts = {}) {
    if (session.done) throw Error("respond: session already finished");
    ++session.turn;
    UserResponse out;
    auto finish = [&](Outcome o, double reward) {
        session.done = true;
        session.outcome = o;
        out.terminal = true;
        out.reward += reward;
    };
    switch (action.kind) {
    case ActionKind::inform_disease:
        if (action.target == session.goal.disease)
            finish(Outcome::success, scheme.success);
        else
            finish(Outcome::fail_wrong_disease, scheme.failure);
        return out;
    case ActionKind::closing:
        finish(Outcome::fail_wrong_disease, scheme.failure);
        return out;
    case ActionKind::request_symptom: {
        out.requested = true;
        out.hit = session.goal.implicit_contains(action.target);
        const bool denied = out.hit && !session.goal.implicit_symptoms.at(action.target);
        if (!out.hit || (opts.penalize_denied && denied)) out.reward += scheme.miss_penalty;
        out.frame = answer_for(session.goal, action.target);
        break;
    }
    case ActionKind::thanks:
        out.frame = SemanticFrame{UserIntent::request_disease, {}, std::nullopt};
        break;
    }
    if (session.turn >= opts.max_turns) finish(Outcome::fail_max_turns, scheme.failure);
    return out;
}

} // namespace krds
