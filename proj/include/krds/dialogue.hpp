#pragma once

#include <algorithm>
#include <array>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "krds/knowledge.hpp"
#include "krds/ontology.hpp"

namespace krds {

enum class ActionKind { thanks, closing, inform_disease, request_symptom };

/// Agent action. `target` is the disease index for inform_disease and the
/// symptom index for request_symptom; unused otherwise.
struct AgentAction {
    ActionKind kind = ActionKind::thanks;
    std::size_t target = 0;

    static AgentAction inform(std::size_t disease) { return {ActionKind::inform_disease, disease}; }
    static AgentAction request(std::size_t symptom) { return {ActionKind::request_symptom, symptom}; }

    friend bool operator==(const AgentAction&, const AgentAction&) = default;
};

inline const char* to_string(ActionKind k) {
    switch (k) {
    case ActionKind::thanks: return "thanks";
    case ActionKind::closing: return "closing";
    case ActionKind::inform_disease: return "inform_disease";
    case ActionKind::request_symptom: return "request_symptom";
    }
    return "?";
}

inline std::size_t action_index(const AgentAction& a, const Ontology& o) {
    switch (a.kind) {
    case ActionKind::inform_disease: return o.disease_offset() + a.target;
    case ActionKind::request_symptom: return o.symptom_offset() + a.target;
    case ActionKind::thanks:
    case ActionKind::closing: {
        const auto name = to_string(a.kind);
        const auto& g = o.greetings();
        auto it = std::find(g.begin(), g.end(), name);
        if (it == g.end()) throw Error(std::string("greeting '") + name + "' is not in the ontology");
        return static_cast<std::size_t>(it - g.begin());
    }
    }
    return 0;
}

inline AgentAction action_at(std::size_t index, const Ontology& o) {
    if (index < o.disease_offset())
        return {o.greetings()[index] == "thanks" ? ActionKind::thanks : ActionKind::closing, 0};
    if (index < o.symptom_offset()) return AgentAction::inform(index - o.disease_offset());
    if (index < o.num_actions()) return AgentAction::request(index - o.symptom_offset());
    throw Error("action index " + std::to_string(index) + " out of range");
}

inline std::string action_identifier(const AgentAction& a, const Ontology& o) {
    switch (a.kind) {
    case ActionKind::inform_disease: return o.diseases()[a.target];
    case ActionKind::request_symptom: return o.symptoms()[a.target];
    default: return to_string(a.kind);
    }
}

/// TSV table "index, kind, identifier" over the whole action space.
inline void write_action_table(std::ostream& os, const Ontology& o) {
    os << "index\tkind\tidentifier\n";
    for (std::size_t i = 0; i < o.num_actions(); ++i) {
        const auto a = action_at(i, o);
        os << i << '\t' << to_string(a.kind) << '\t' << action_identifier(a, o) << '\n';
    }
}

enum class UserIntent { request_disease, confirm_symptom, deny_symptom, not_sure_symptom, closing };
inline constexpr std::size_t kNumUserIntents = 5;

inline const char* to_string(UserIntent i) {
    switch (i) {
    case UserIntent::request_disease: return "request_disease";
    case UserIntent::confirm_symptom: return "confirm_symptom";
    case UserIntent::deny_symptom: return "deny_symptom";
    case UserIntent::not_sure_symptom: return "not_sure_symptom";
    case UserIntent::closing: return "closing";
    }
    return "?";
}

enum class SlotStatus { yes, no, not_sure };

inline const char* to_string(SlotStatus s) {
    switch (s) {
    case SlotStatus::yes: return "true";
    case SlotStatus::no: return "false";
    case SlotStatus::not_sure: return "not_sure";
    }
    return "?";
}

inline SlotStatus status_of(bool truth) { return truth ? SlotStatus::yes : SlotStatus::no; }

inline UserIntent intent_for(SlotStatus s) {
    switch (s) {
    case SlotStatus::yes: return UserIntent::confirm_symptom;
    case SlotStatus::no: return UserIntent::deny_symptom;
    case SlotStatus::not_sure: return UserIntent::not_sure_symptom;
    }
    return UserIntent::not_sure_symptom;
}

/// User-side semantic frame: one intent plus symptom slots keyed by index.
struct SemanticFrame {
    UserIntent intent = UserIntent::request_disease;
    std::map<std::size_t, SlotStatus> slots;
    std::optional<std::size_t> disease;

    friend bool operator==(const SemanticFrame&, const SemanticFrame&) = default;
};

inline json frame_to_json(const SemanticFrame& f, const Ontology& o) {
    json slots = json::object();
    for (const auto& [s, v] : f.slots) slots[o.symptoms()[s]] = to_string(v);
    json j{{"intent", to_string(f.intent)}, {"slots", slots}};
    if (f.disease) j["disease"] = o.diseases()[*f.disease];
    return j;
}

/// Symptom status vector entries.
inline constexpr double kPositive = 1.0;
inline constexpr double kNegative = -1.0;
inline constexpr double kNotSure = -2.0;
inline constexpr double kUnknown = 0.0;

inline double status_value(SlotStatus s) {
    switch (s) {
    case SlotStatus::yes: return kPositive;
    case SlotStatus::no: return kNegative;
    case SlotStatus::not_sure: return kNotSure;
    }
    return kUnknown;
}

using SymptomVector = std::vector<double>;

struct DialogueState {
    SymptomVector symptoms;
    std::optional<AgentAction> prev_agent;
    std::optional<UserIntent> prev_user;
    int turn = 0;
    std::optional<std::size_t> last_request;

    static DialogueState initial(const Ontology& o) {
        DialogueState s;
        s.symptoms.assign(o.num_symptoms(), kUnknown);
        return s;
    }

    friend bool operator==(const DialogueState&, const DialogueState&) = default;
};

/// Rule-based tracker step. Slots overwrite prior entries; a pending request
/// whose symptom the frame does not mention becomes not-sure.
inline SymptomVector update_symptoms(const DialogueState& state, const SemanticFrame& frame) {
    SymptomVector out = state.symptoms;
    for (const auto& [s, status] : frame.slots) out.at(s) = status_value(status);
    if (state.last_request && !frame.slots.count(*state.last_request)) out.at(*state.last_request) = kNotSure;
    return out;
}

/// Records the agent's action: advances the turn and arms last_request.
inline DialogueState after_agent(DialogueState state, const AgentAction& a) {
    state.prev_agent = a;
    state.last_request = a.kind == ActionKind::request_symptom ? std::optional<std::size_t>(a.target) : std::nullopt;
    ++state.turn;
    return state;
}

/// Folds a user frame into the state and clears the pending request.
inline DialogueState after_user(DialogueState state, const SemanticFrame& frame) {
    state.symptoms = update_symptoms(state, frame);
    state.prev_user = frame.intent;
    state.last_request.reset();
    return state;
}

inline std::size_t state_dim(const Ontology& o, int max_turns) {
    return o.num_symptoms() + o.num_actions() + kNumUserIntents + static_cast<std::size_t>(max_turns) + 1;
}

/// Layout: [symptoms (N, raw) | prev agent one-hot (D) | prev user one-hot (5) | turn one-hot (T+1)].
inline Vector encode_state(const DialogueState& state, const Ontology& o, int max_turns) {
    if (state.turn < 0 || state.turn > max_turns)
        throw Error("encode_state: turn " + std::to_string(state.turn) + " outside [0, " +
                    std::to_string(max_turns) + "]");
    const auto n = o.num_symptoms();
    const auto d = o.num_actions();
    Vector v = Vector::Zero(static_cast<Eigen::Index>(state_dim(o, max_turns)));
    for (std::size_t i = 0; i < n; ++i) v(i) = state.symptoms.at(i);
    if (state.prev_agent) v(n + action_index(*state.prev_agent, o)) = 1.0;
    if (state.prev_user) v(n + d + static_cast<std::size_t>(*state.prev_user)) = 1.0;
    v(n + d + kNumUserIntents + static_cast<std::size_t>(state.turn)) = 1.0;
    return v;
}

/// true = action allowed. Requests for symptoms with a known status are blocked.
inline std::vector<bool> allowed_actions(std::span<const double> symptoms, const Ontology& o) {
    std::vector<bool> allowed(o.num_actions(), true);
    for (std::size_t s = 0; s < symptoms.size(); ++s)
        if (symptoms[s] != kUnknown) allowed[o.symptom_offset() + s] = false;
    return allowed;
}

inline Vector mask_actions(const Vector& q, std::span<const double> symptoms, const Ontology& o) {
    if (static_cast<std::size_t>(q.size()) != o.num_actions()) throw Error("mask_actions: q has wrong length");
    Vector out = q;
    for (std::size_t s = 0; s < symptoms.size(); ++s)
        if (symptoms[s] != kUnknown) out(o.symptom_offset() + s) = -std::numeric_limits<double>::infinity();
    return out;
}

inline Vector mask_actions(const Vector& q, const DialogueState& state, const Ontology& o) {
    return mask_actions(q, std::span<const double>(state.symptoms), o);
}

} // namespace krds
