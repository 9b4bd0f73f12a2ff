#pragma once

#include <random>
#include <vector>

#include "krds/krds.hpp"

namespace krds::fixtures {

// d1, d2 over s1..s3; goals {(d1,{s1,s2}), (d1,{s1}), (d2,{s2,s3})}.
inline Dataset toy_dataset() {
    Dataset ds;
    ds.ontology = Ontology({"d1", "d2"}, {"s1", "s2", "s3"});
    UserGoal a, b, c;
    a.disease = 0;
    a.explicit_symptoms[0] = true;
    a.implicit_symptoms[1] = true;
    b.disease = 0;
    b.implicit_symptoms[0] = true;
    c.disease = 1;
    c.explicit_symptoms[1] = true;
    c.implicit_symptoms[2] = true;
    ds.train = {a, b, c};
    return ds;
}

inline KrDqn random_network(std::size_t s, std::size_t h, std::size_t greetings, std::size_t m, std::size_t n,
                            Variant variant, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0), p(0.0, 1.0);
    const std::size_t d = greetings + m + n;
    QNetworkParams params = QNetworkParams::zeros(s, h, d);
    for (auto* mat : {&params.w1, &params.w2})
        for (Eigen::Index i = 0; i < mat->size(); ++i) mat->data()[i] = u(rng);
    for (auto* vec : {&params.b1, &params.b2})
        for (Eigen::Index i = 0; i < vec->size(); ++i) (*vec)(i) = u(rng);
    Matrix r(d, d);
    for (Eigen::Index i = 0; i < r.size(); ++i) r.data()[i] = p(rng);
    KnowledgeBranch kb{greetings, Matrix(m, n), Matrix(n, m), Vector(n)};
    for (Eigen::Index i = 0; i < kb.p_dis_given_sym.size(); ++i) kb.p_dis_given_sym.data()[i] = p(rng);
    for (Eigen::Index i = 0; i < kb.p_sym_given_dis.size(); ++i) kb.p_sym_given_dis.data()[i] = p(rng);
    for (Eigen::Index i = 0; i < kb.p_sym_prior.size(); ++i) kb.p_sym_prior(i) = p(rng);
    PolicyFlags flags;
    flags.variant = variant;
    return KrDqn(params, r, kb, flags);
}

// Features whose first n entries are drawn from the status alphabet.
inline Vector random_features(std::size_t s, std::size_t n, std::mt19937_64& rng) {
    static const double alphabet[] = {1.0, -1.0, -2.0, 0.0};
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_int_distribution<int> pick(0, 3);
    Vector x(s);
    for (std::size_t i = 0; i < s; ++i) x(i) = i < n ? alphabet[pick(rng)] : u(rng);
    return x;
}

// Naive reference for the knowledge branch.
inline Vector knowledge_loop(const std::vector<double>& status, const KnowledgeBranch& kb) {
    const std::size_t m = kb.diseases(), n = kb.symptoms();
    std::vector<double> prior(n), dis(m, 0.0), sym(n, 0.0);
    for (std::size_t s = 0; s < n; ++s)
        prior[s] = status[s] == 1.0 ? 1.0 : status[s] == -1.0 ? -1.0 : kb.p_sym_prior(s);
    for (std::size_t d = 0; d < m; ++d)
        for (std::size_t s = 0; s < n; ++s) dis[d] += kb.p_dis_given_sym(d, s) * prior[s];
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t d = 0; d < m; ++d) sym[s] += kb.p_sym_given_dis(s, d) * dis[d];
    Vector out = Vector::Zero(kb.greetings + m + n);
    for (std::size_t d = 0; d < m; ++d) out(kb.greetings + d) = dis[d];
    for (std::size_t s = 0; s < n; ++s) out(kb.greetings + m + s) = sym[s];
    return out;
}

// Central-difference check of KrDqn::gradients against KrDqn::loss.
inline double max_gradient_error(KrDqn net, const std::vector<TrainingSample>& batch, double h = 1e-5) {
    const Gradients g = net.gradients(batch);
    double worst = 0.0;
    auto probe = [&](auto& param, const auto& analytic) {
        for (Eigen::Index i = 0; i < param.size(); ++i) {
            const double keep = param.data()[i];
            param.data()[i] = keep + h;
            const double up = net.loss(batch);
            param.data()[i] = keep - h;
            const double down = net.loss(batch);
            param.data()[i] = keep;
            const double numeric = (up - down) / (2.0 * h);
            const double a = analytic.data()[i];
            const double scale = std::max({std::abs(a), std::abs(numeric), 1e-6});
            worst = std::max(worst, std::abs(a - numeric) / scale);
        }
    };
    probe(net.mutable_params().w1, g.w1);
    probe(net.mutable_params().b1, g.b1);
    probe(net.mutable_params().w2, g.w2);
    probe(net.mutable_params().b2, g.b2);
    probe(net.mutable_relation(), g.r);
    return worst;
}

struct RoundTrip {
    std::size_t cases = 0;
    std::vector<std::string> failures;
};

// parse(realize(f)) == f for every template of every agent and user action,
// each with `fillings` random slot fillings.
inline RoundTrip nlu_nlg_round_trip(const Ontology& o, const Lexicon& lex, const TemplateSet& templates,
                                    int fillings, std::mt19937_64& rng) {
    RoundTrip out;
    std::uniform_int_distribution<std::size_t> sym(0, o.num_symptoms() - 1), dis(0, o.num_diseases() - 1);
    std::uniform_int_distribution<int> status(0, 2), count(0, 3);
    for (const auto& [key, list] : templates.templates) {
        for (const auto& tmpl : list) {
            TemplateSet single;
            single.templates[key] = {tmpl};
            for (int k = 0; k < fillings; ++k) {
                ++out.cases;
                std::string text;
                bool ok = false;
                if (key.rfind("user_", 0) != 0) {
                    AgentAction a{ActionKind::thanks, 0};
                    if (key == "closing") a.kind = ActionKind::closing;
                    if (key == "inform_disease") a = AgentAction::inform(dis(rng));
                    if (key == "request_symptom") a = AgentAction::request(sym(rng));
                    text = nlg_realize(a, single, lex, rng);
                    const auto back = parse_agent_utterance(text, lex);
                    ok = back && *back == a;
                } else {
                    SemanticFrame f;
                    std::optional<std::size_t> context;
                    if (key == "user_request_disease") {
                        f.intent = UserIntent::request_disease;
                        for (int n = count(rng); n > 0; --n) f.slots[sym(rng)] = static_cast<SlotStatus>(status(rng));
                    } else if (key == "user_closing") {
                        f.intent = UserIntent::closing;
                    } else {
                        const auto st = key == "user_confirm_symptom" ? SlotStatus::yes
                                        : key == "user_deny_symptom"  ? SlotStatus::no
                                                                      : SlotStatus::not_sure;
                        context = sym(rng);
                        f.intent = intent_for(st);
                        f.slots[*context] = st;
                    }
                    text = nlg_realize(f, single, lex, rng);
                    const auto back = nlu_parse(text, lex, context);
                    ok = back && *back == f;
                }
                if (!ok) out.failures.push_back(key + ": \"" + text + "\"");
            }
        }
    }
    return out;
}

inline TrainerConfig small_config() {
    TrainerConfig c;
    c.hidden = 32;
    c.sims_per_epoch = 20;
    c.eval_episodes = 20;
    c.epochs = 3;
    return c;
}

} // namespace krds::fixtures
