#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "krds/language.hpp"
#include "krds/metrics.hpp"
#include "krds/policy.hpp"
#include "krds/simulator.hpp"

namespace krds {

using Rng = std::mt19937_64;

struct Transition {
    Vector s;
    std::size_t a = 0;
    double r = 0.0;
    Vector s_next;
    bool done = false;
    std::vector<bool> mask_next; // true = selectable in s_next
};

/// Fixed-capacity ring of transitions; the oldest entry is overwritten
/// once full.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity = 10000) : capacity_(capacity) {
        if (capacity_ == 0) throw Error("replay buffer capacity must be positive");
        items_.reserve(std::min<std::size_t>(capacity_, 1 << 16));
    }

    void push(Transition t) {
        if (items_.size() < capacity_) {
            items_.push_back(std::move(t));
        } else {
            items_[head_] = std::move(t);
            head_ = (head_ + 1) % capacity_;
        }
    }

    void clear() {
        items_.clear();
        head_ = 0;
    }

    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }
    const Transition& operator[](std::size_t i) const { return items_.at(i); }

    /// Indices of `count` distinct transitions, uniformly chosen (Floyd's algorithm).
    template <class R>
    std::vector<std::size_t> sample_indices(std::size_t count, R& rng) const {
        if (count > items_.size()) throw Error("replay buffer holds fewer transitions than the batch size");
        std::unordered_set<std::size_t> chosen;
        std::vector<std::size_t> out;
        out.reserve(count);
        for (std::size_t j = items_.size() - count; j < items_.size(); ++j) {
            std::uniform_int_distribution<std::size_t> u(0, j);
            const auto t = u(rng);
            const auto pick = chosen.count(t) ? j : t;
            chosen.insert(pick);
            out.push_back(pick);
        }
        return out;
    }

private:
    std::size_t capacity_;
    std::size_t head_ = 0;
    std::vector<Transition> items_;
};

struct ErrorModel {
    double slot_error_rate = 0.05;
    double intent_error_rate = 0.05;
};

/// Replaces the intent with a different one with probability
/// intent_error_rate and, independently per slot, the status with a different
/// one with probability slot_error_rate.
template <class R>
SemanticFrame corrupt_frame(SemanticFrame frame, const ErrorModel& em, R& rng) {
    if (em.intent_error_rate < 0.0 || em.intent_error_rate > 1.0 || em.slot_error_rate < 0.0 ||
        em.slot_error_rate > 1.0)
        throw Error("error model rates must lie in [0, 1]");
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (em.intent_error_rate > 0.0 && u(rng) < em.intent_error_rate) {
        std::uniform_int_distribution<int> other(1, static_cast<int>(kNumUserIntents) - 1);
        const int shifted = (static_cast<int>(frame.intent) + other(rng)) % static_cast<int>(kNumUserIntents);
        frame.intent = static_cast<UserIntent>(shifted);
    }
    if (em.slot_error_rate > 0.0) {
        std::uniform_int_distribution<int> other(1, 2);
        for (auto& [_, status] : frame.slots)
            if (u(rng) < em.slot_error_rate) status = static_cast<SlotStatus>((static_cast<int>(status) + other(rng)) % 3);
    }
    return frame;
}

/// r if done, else r + gamma * max over selectable a' of Q_target(s', a').
inline double bellman_target(const Transition& t, const KrDqn& target_policy, double gamma) {
    if (t.done) return t.r;
    const Vector q = target_policy.q_values(t.s_next);
    return t.r + gamma * q(static_cast<Eigen::Index>(masked_argmax(q, t.mask_next)));
}

enum class DialogueMode { frame, language };

inline DialogueMode mode_from_string(const std::string& s) {
    if (s == "frame") return DialogueMode::frame;
    if (s == "language") return DialogueMode::language;
    throw Error("unknown dialogue mode '" + s + "'");
}

/// Everything an episode needs besides the policy and the goal.
struct Environment {
    Ontology ontology;
    RewardScheme scheme = main_reward_scheme();
    SimulatorOptions sim;
    ErrorModel errors;
    DialogueMode mode = DialogueMode::frame;
    Lexicon lexicon;
    TemplateSet templates = TemplateSet::english();

    explicit Environment(Ontology o) : ontology(std::move(o)), lexicon(Lexicon::from_ontology(ontology)) {}
};

struct EpisodeResult {
    std::vector<Transition> transitions;
    EpisodeSummary summary;
    std::vector<std::size_t> requested; // symptom indices in request order
    std::vector<std::string> transcript; // filled in language mode
};

/// One simulated dialogue between the policy and a patient holding `goal`.
template <class R>
EpisodeResult run_episode(const KrDqn& policy, const UserGoal& goal, const Environment& env, double epsilon, R& rng) {
    const auto& o = env.ontology;
    const int T = env.sim.max_turns;
    if (policy.actions() != o.num_actions() || policy.state_dim() != state_dim(o, T))
        throw Error("run_episode: policy shape does not match the ontology and turn limit");
    const bool language = env.mode == DialogueMode::language;

    EpisodeResult out;
    out.summary.disease = goal.disease;
    SimSession session{goal};
    DialogueState state = DialogueState::initial(o);

    auto hear = [&](SemanticFrame frame, std::optional<std::size_t> context) {
        frame = corrupt_frame(std::move(frame), env.errors, rng);
        if (!language) return frame;
        const auto text = nlg_realize(frame, env.templates, env.lexicon, rng);
        out.transcript.push_back("user: " + text);
        auto parsed = nlu_parse(text, env.lexicon, context);
        return parsed ? *parsed : SemanticFrame{UserIntent::request_disease, {}, std::nullopt};
    };

    state = after_user(state, hear(initial_frame(goal), std::nullopt));
    while (!session.done) {
        const Vector s = encode_state(state, o, T);
        const auto a = policy.act(s, epsilon, rng);
        const AgentAction action = action_at(a, o);
        AgentAction delivered = action;
        if (language) {
            const auto text = nlg_realize(action, env.templates, env.lexicon, rng);
            out.transcript.push_back("agent: " + text);
            auto parsed = parse_agent_utterance(text, env.lexicon);
            if (!parsed) throw Error("run_episode: agent utterance did not parse: " + text);
            delivered = *parsed;
        }
        DialogueState next = after_agent(state, action);
        const auto response = respond(session, delivered, env.scheme, env.sim);
        if (response.requested) {
            ++out.summary.requests;
            out.summary.hits += response.hit;
            out.requested.push_back(delivered.target);
        }
        if (response.frame) next = after_user(next, hear(*response.frame, next.last_request));
        Transition t;
        t.s = s;
        t.a = a;
        t.r = response.reward;
        t.s_next = encode_state(next, o, T);
        t.done = response.terminal;
        t.mask_next = policy.allowed(t.s_next);
        out.summary.total_reward += t.r;
        out.transitions.push_back(std::move(t));
        state = std::move(next);
    }
    out.summary.turns = session.turn;
    out.summary.outcome = *session.outcome;
    return out;
}

/// Greedy rollouts over `episodes` goals, cycling through `goals` in order.
template <class R>
MetricsReport evaluate(const KrDqn& policy, std::span<const UserGoal> goals, std::size_t episodes,
                       const Environment& env, R& rng, std::string fingerprint = {}) {
    if (episodes == 0) throw Error("evaluate: episodes must be positive");
    if (goals.empty()) throw Error("evaluate: no goals");
    std::vector<EpisodeSummary> summaries;
    summaries.reserve(episodes);
    for (std::size_t i = 0; i < episodes; ++i)
        summaries.push_back(run_episode(policy, goals[i % goals.size()], env, 0.0, rng).summary);
    return compute_metrics(summaries, env.ontology, std::move(fingerprint));
}

enum class RelationInit { prior, random };

struct TrainerConfig {
    double gamma = 0.9;
    double epsilon = 0.1;
    std::size_t batch = 32;
    double lr = 0.01;
    std::size_t buffer_capacity = 10000;
    std::size_t sims_per_epoch = 100;
    int epochs = 300;
    std::size_t eval_episodes = 500;
    std::size_t steps_per_epoch = 0; // 0: ceil(new transitions / batch)
    std::size_t hidden = 512;
    int max_turns = 22;
    std::uint64_t seed = 1;
    std::uint64_t eval_seed = 7;
    RewardScheme scheme = unit_reward_scheme();
    DialogueMode mode = DialogueMode::frame;
    PolicyFlags flags;
    RelationInit relation_init = RelationInit::prior;
    ErrorModel errors;
    bool penalize_denied = false;

    void validate() const {
        if (!(gamma >= 0.0 && gamma < 1.0)) throw Error("config: gamma must lie in [0, 1)");
        if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw Error("config: epsilon must lie in [0, 1]");
        if (batch == 0 || batch > buffer_capacity) throw Error("config: batch must be in [1, buffer capacity]");
        if (!(lr > 0.0)) throw Error("config: learning rate must be positive");
        if (epochs < 0) throw Error("config: epochs must be non-negative");
        if (max_turns <= 0) throw Error("config: max_turns must be positive");
        if (hidden == 0) throw Error("config: hidden size must be positive");
    }
};

inline json config_to_json(const TrainerConfig& c) {
    return json{{"gamma", c.gamma},
                {"epsilon", c.epsilon},
                {"batch", c.batch},
                {"lr", c.lr},
                {"buffer_capacity", c.buffer_capacity},
                {"sims_per_epoch", c.sims_per_epoch},
                {"epochs", c.epochs},
                {"eval_episodes", c.eval_episodes},
                {"steps_per_epoch", c.steps_per_epoch},
                {"hidden", c.hidden},
                {"max_turns", c.max_turns},
                {"seed", c.seed},
                {"eval_seed", c.eval_seed},
                {"reward", {c.scheme.name, c.scheme.success, c.scheme.failure, c.scheme.miss_penalty}},
                {"mode", c.mode == DialogueMode::frame ? "frame" : "language"},
                {"variant", to_string(c.flags.variant)},
                {"symptom_filter", c.flags.symptom_filter},
                {"renormalize_relation", c.flags.renormalize_relation},
                {"relation_init", c.relation_init == RelationInit::prior ? "prior" : "random"},
                {"slot_error_rate", c.errors.slot_error_rate},
                {"intent_error_rate", c.errors.intent_error_rate},
                {"penalize_denied", c.penalize_denied}};
}

/// Stable hex digest of the full configuration.
inline std::string config_fingerprint(const TrainerConfig& c) {
    const auto text = config_to_json(c).dump();
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << h;
    return os.str();
}

inline Environment make_environment(const TrainerConfig& c, const Ontology& o) {
    Environment env(o);
    env.scheme = c.scheme;
    env.sim.max_turns = c.max_turns;
    env.sim.penalize_denied = c.penalize_denied;
    env.errors = c.errors;
    env.mode = c.mode;
    return env;
}

/// Fresh network for a dataset: knowledge from the training split, relation
/// matrix from co-occurrence statistics or random.
inline KrDqn make_policy(const TrainerConfig& c, const Dataset& ds) {
    c.validate();
    if (ds.train.empty()) throw Error("training split is empty");
    Rng rng(c.seed ^ 0x9e3779b97f4a7c15ull);
    const auto stats = compute_knowledge_stats(ds.train, ds.ontology);
    const Matrix relation = c.relation_init == RelationInit::prior
                                ? build_relation_init(ds.train, ds.ontology)
                                : random_relation_init(ds.ontology.num_actions(), rng);
    return make_policy(ds.ontology, stats, relation, c.max_turns, c.hidden, c.flags, rng);
}

struct EpochRecord {
    int epoch = 0;
    double eval_success = 0.0;
    double avg_turns = 0.0;
    double match_rate = 0.0;
    double loss_mean = 0.0;
    std::size_t buffer_size = 0;
    bool flushed = false;

    friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

inline json epoch_to_json(const EpochRecord& e) {
    return json{{"epoch", e.epoch},         {"eval_success", e.eval_success}, {"avg_turns", e.avg_turns},
                {"match_rate", e.match_rate}, {"loss_mean", e.loss_mean},       {"buffer_size", e.buffer_size},
                {"flushed", e.flushed}};
}

struct TrainingReport {
    std::vector<EpochRecord> epochs;
    std::optional<KrDqn> best;
    double best_success = 0.0;
    int best_epoch = 0;
    std::string fingerprint;
};

/// Called after the target refresh with the online network and the 1-based
/// epoch; returns the evaluation used for best-model tracking.
using Evaluator = std::function<MetricsReport(const KrDqn&, int)>;
using EpochCallback = std::function<void(const EpochRecord&)>;

/// Default evaluator: greedy success over a fixed set of `eval_episodes`
/// training goals drawn once with eval_seed; the same noise stream is
/// replayed every epoch.
inline Evaluator default_evaluator(const TrainerConfig& c, const Dataset& ds, const Environment& env) {
    Rng pick(c.eval_seed);
    auto goals = std::make_shared<std::vector<UserGoal>>();
    for (std::size_t i = 0; i < c.eval_episodes; ++i) goals->push_back(sample_goal<Rng>(ds.train, pick));
    const auto fp = config_fingerprint(c);
    return [goals, env, seed = c.eval_seed, fp](const KrDqn& p, int) {
        Rng rng(seed + 1);
        return evaluate(p, *goals, goals->size(), env, rng, fp);
    };
}

/// Deep Q-learning with experience replay and a target network.
///
/// Per epoch: simulate sims_per_epoch epsilon-greedy dialogues into the
/// buffer, take SGD steps on sampled batches against target-network Bellman
/// targets, refresh the target network, evaluate. A strictly better
/// evaluation than every earlier epoch snapshots the policy and flushes the
/// buffer.
inline TrainingReport train(const TrainerConfig& config, const Dataset& dataset, KrDqn& policy,
                            Evaluator evaluator = {}, const EpochCallback& on_epoch = {}) {
    config.validate();
    if (dataset.train.empty()) throw Error("train: training split is empty");
    const Environment env = make_environment(config, dataset.ontology);
    if (!evaluator && config.epochs > 0) evaluator = default_evaluator(config, dataset, env);

    TrainingReport report;
    report.fingerprint = config_fingerprint(config);
    Rng rng(config.seed);
    ReplayBuffer buffer(config.buffer_capacity);
    KrDqn target = policy;
    std::optional<double> best;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::size_t fresh = 0;
        for (std::size_t i = 0; i < config.sims_per_epoch; ++i) {
            auto episode = run_episode(policy, sample_goal<Rng>(dataset.train, rng), env, config.epsilon, rng);
            fresh += episode.transitions.size();
            for (auto& t : episode.transitions) buffer.push(std::move(t));
        }

        const std::size_t steps =
            config.steps_per_epoch > 0 ? config.steps_per_epoch : (fresh + config.batch - 1) / config.batch;
        double loss_total = 0.0;
        std::size_t taken = 0;
        std::vector<TrainingSample> batch(config.batch);
        for (std::size_t step = 0; step < steps && buffer.size() >= config.batch; ++step) {
            const auto idx = buffer.sample_indices(config.batch, rng);
            for (std::size_t k = 0; k < idx.size(); ++k) {
                const auto& t = buffer[idx[k]];
                batch[k] = TrainingSample{t.s, t.a, bellman_target(t, target, config.gamma)};
            }
            try {
                loss_total += policy.backward_and_step(batch, config.lr);
            } catch (const NonFiniteLoss& e) {
                throw Error("train: divergence at epoch " + std::to_string(epoch) + ": " + e.what() +
                            " (buffer index " + std::to_string(idx.at(e.sample)) + ")");
            }
            ++taken;
        }
        if (!policy.params().finite() || !policy.relation().allFinite())
            throw Error("train: parameters became non-finite at epoch " + std::to_string(epoch));
        target = policy;

        const MetricsReport metrics = evaluator(policy, epoch);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.eval_success = metrics.accuracy;
        rec.avg_turns = metrics.avg_turns;
        rec.match_rate = metrics.match_rate;
        rec.loss_mean = taken > 0 ? loss_total / static_cast<double>(taken) : 0.0;
        if (!best || metrics.accuracy > *best) {
            best = metrics.accuracy;
            report.best = policy;
            report.best_success = metrics.accuracy;
            report.best_epoch = epoch;
            buffer.clear();
            rec.flushed = true;
        }
        rec.buffer_size = buffer.size();
        report.epochs.push_back(rec);
        if (on_epoch) on_epoch(rec);
    }
    return report;
}

} // namespace krds
