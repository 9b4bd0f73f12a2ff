#pragma once

#include <cmath>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "krds/dialogue.hpp"
#include "krds/knowledge.hpp"

namespace krds {

/// Numerically stable logistic function.
inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline Vector sigmoid(const Vector& x) { return x.unaryExpr([](double v) { return sigmoid(v); }); }

/// Which branches contribute to the action values.
///
///   basic      a_t = a_r                          (unbounded Q-values)
///   relation   a_t = sigmoid(a_r) + sigmoid(a_f)
///   knowledge  a_t = sigmoid(a_r) + a_k
///   full       a_t = sigmoid(a_r) + sigmoid(a_f) + a_k
enum class Variant { basic, relation, knowledge, full };

inline const char* to_string(Variant v) {
    switch (v) {
    case Variant::basic: return "basic";
    case Variant::relation: return "relation";
    case Variant::knowledge: return "knowledge";
    case Variant::full: return "full";
    }
    return "?";
}

inline Variant variant_from_string(const std::string& s) {
    if (s == "basic") return Variant::basic;
    if (s == "relation") return Variant::relation;
    if (s == "knowledge") return Variant::knowledge;
    if (s == "full") return Variant::full;
    throw Error("unknown ablation variant '" + s + "'");
}

struct PolicyFlags {
    Variant variant = Variant::full;
    bool symptom_filter = true;
    // Rescale R's columns to sum to one after every update.
    bool renormalize_relation = false;

    bool uses_relation() const { return variant == Variant::relation || variant == Variant::full; }
    bool uses_knowledge() const { return variant == Variant::knowledge || variant == Variant::full; }

    friend bool operator==(const PolicyFlags&, const PolicyFlags&) = default;
};

struct QNetworkParams {
    Matrix w1; // H x S
    Vector b1; // H
    Matrix w2; // D x H
    Vector b2; // D

    std::size_t state_dim() const { return static_cast<std::size_t>(w1.cols()); }
    std::size_t hidden() const { return static_cast<std::size_t>(w1.rows()); }
    std::size_t actions() const { return static_cast<std::size_t>(w2.rows()); }

    static QNetworkParams zeros(std::size_t s, std::size_t h, std::size_t d) {
        return {Matrix::Zero(h, s), Vector::Zero(h), Matrix::Zero(d, h), Vector::Zero(d)};
    }

    /// Glorot-uniform weights, zero biases.
    template <class Rng>
    static QNetworkParams glorot(std::size_t s, std::size_t h, std::size_t d, Rng& rng) {
        auto p = zeros(s, h, d);
        auto fill = [&rng](Matrix& m) {
            const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
            std::uniform_real_distribution<double> u(-limit, limit);
            for (Eigen::Index j = 0; j < m.cols(); ++j)
                for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = u(rng);
        };
        fill(p.w1);
        fill(p.w2);
        return p;
    }

    bool finite() const { return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite(); }

    friend bool operator==(const QNetworkParams& a, const QNetworkParams& b) {
        return a.w1 == b.w1 && a.b1 == b.b1 && a.w2 == b.w2 && a.b2 == b.b2;
    }
};

/// Frozen symptom/disease graph weights. Never receives gradients.
struct KnowledgeBranch {
    std::size_t greetings = 0;
    Matrix p_dis_given_sym; // M x N
    Matrix p_sym_given_dis; // N x M
    Vector p_sym_prior;     // N

    static KnowledgeBranch from_stats(const KnowledgeStats& k, const Ontology& o) {
        return {o.num_greetings(), k.p_dis_given_sym, k.p_sym_given_dis, k.p_sym_prior};
    }

    std::size_t diseases() const { return static_cast<std::size_t>(p_dis_given_sym.rows()); }
    std::size_t symptoms() const { return static_cast<std::size_t>(p_dis_given_sym.cols()); }
    std::size_t actions() const { return greetings + diseases() + symptoms(); }

    friend bool operator==(const KnowledgeBranch& a, const KnowledgeBranch& b) {
        return a.greetings == b.greetings && a.p_dis_given_sym == b.p_dis_given_sym &&
               a.p_sym_given_dis == b.p_sym_given_dis && a.p_sym_prior == b.p_sym_prior;
    }
};

struct PolicyOutput {
    Vector a_r;
    Vector a_f;
    Vector a_k;
    Vector a_t;
};

inline Vector forward_basic(const Vector& s, const QNetworkParams& p) {
    if (static_cast<std::size_t>(s.size()) != p.state_dim()) throw Error("forward_basic: state has wrong dimension");
    const Vector hidden = (p.w1 * s + p.b1).cwiseMax(0.0);
    return p.w2 * hidden + p.b2;
}

/// a_f = a_r . R  (row vector times matrix).
inline Vector forward_relation(const Vector& a_r, const Matrix& r) {
    if (a_r.size() != r.rows()) throw Error("forward_relation: size mismatch");
    return r.transpose() * a_r;
}

/// Two-hop propagation symptoms -> diseases -> symptoms, padded with zeros
/// for the greeting actions.
inline Vector forward_knowledge(std::span<const double> symptoms, const KnowledgeBranch& kb) {
    const auto n = kb.symptoms();
    if (symptoms.size() < n) throw Error("forward_knowledge: symptom vector too short");
    Vector prior(static_cast<Eigen::Index>(n));
    for (std::size_t s = 0; s < n; ++s) {
        if (symptoms[s] == kPositive)
            prior(s) = 1.0;
        else if (symptoms[s] == kNegative)
            prior(s) = -1.0;
        else
            prior(s) = kb.p_sym_prior(s);
    }
    const Vector p_dis = kb.p_dis_given_sym * prior;
    const Vector p_sym = kb.p_sym_given_dis * p_dis;
    Vector a_k = Vector::Zero(static_cast<Eigen::Index>(kb.actions()));
    a_k.segment(kb.greetings, kb.diseases()) = p_dis;
    a_k.segment(kb.greetings + kb.diseases(), n) = p_sym;
    return a_k;
}

inline Vector combine(const Vector& a_r, const Vector& a_f, const Vector& a_k) {
    return sigmoid(a_r) + sigmoid(a_f) + a_k;
}

/// Index of the largest allowed entry; the lowest index wins ties.
inline std::size_t masked_argmax(const Vector& q, const std::vector<bool>& allowed) {
    std::size_t best = q.size();
    double best_value = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < static_cast<std::size_t>(q.size()); ++i) {
        if (!allowed[i]) continue;
        if (best == static_cast<std::size_t>(q.size()) || q(i) > best_value) {
            best = i;
            best_value = q(i);
        }
    }
    if (best == static_cast<std::size_t>(q.size())) throw Error("no selectable action");
    return best;
}

/// Epsilon-greedy choice over the allowed set.
template <class Rng>
std::size_t select_action(const Vector& q, const std::vector<bool>& allowed, double epsilon, Rng& rng) {
    if (epsilon < 0.0 || epsilon > 1.0) throw Error("select_action: epsilon outside [0, 1]");
    if (epsilon > 0.0) {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        if (u(rng) < epsilon) {
            std::vector<std::size_t> candidates;
            for (std::size_t i = 0; i < allowed.size(); ++i)
                if (allowed[i]) candidates.push_back(i);
            if (candidates.empty()) throw Error("no selectable action");
            std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
            return candidates[pick(rng)];
        }
    }
    return masked_argmax(q, allowed);
}

/// One regression item: move Q(features, action) toward target.
struct TrainingSample {
    Vector features;
    std::size_t action = 0;
    double target = 0.0;
};

struct Gradients {
    Matrix w1;
    Vector b1;
    Matrix w2;
    Vector b2;
    Matrix r;
    double loss = 0.0;
};

struct NonFiniteLoss : Error {
    NonFiniteLoss(std::size_t index, const std::string& what) : Error(what), sample(index) {}
    std::size_t sample;
};

/// Knowledge-routed relational Q-network: learned MLP and relation matrix
/// plus the frozen knowledge branch.
class KrDqn {
public:
    KrDqn() = default;

    KrDqn(QNetworkParams params, Matrix relation, KnowledgeBranch knowledge, PolicyFlags flags = {})
        : params_(std::move(params)), relation_(std::move(relation)), knowledge_(std::move(knowledge)),
          flags_(flags) {
        const auto d = params_.actions();
        if (static_cast<std::size_t>(relation_.rows()) != d || static_cast<std::size_t>(relation_.cols()) != d)
            throw Error("relation matrix must be D x D");
        if (knowledge_.actions() != d) throw Error("knowledge branch action count differs from the network's");
        if (knowledge_.symptoms() > params_.state_dim()) throw Error("state shorter than the symptom vector");
        if (params_.b1.size() != params_.w1.rows() || params_.w2.cols() != params_.w1.rows() ||
            params_.b2.size() != params_.w2.rows())
            throw Error("inconsistent Q-network parameter shapes");
    }

    const QNetworkParams& params() const { return params_; }
    const Matrix& relation() const { return relation_; }
    const KnowledgeBranch& knowledge() const { return knowledge_; }
    const PolicyFlags& flags() const { return flags_; }
    PolicyFlags& flags() { return flags_; }

    std::size_t state_dim() const { return params_.state_dim(); }
    std::size_t hidden() const { return params_.hidden(); }
    std::size_t actions() const { return params_.actions(); }

    /// All four branch vectors. a_t follows the configured variant.
    PolicyOutput forward(const Vector& features) const {
        PolicyOutput out;
        out.a_r = forward_basic(features, params_);
        out.a_f = forward_relation(out.a_r, relation_);
        out.a_k = forward_knowledge(symptom_part(features), knowledge_);
        out.a_t = fuse(out.a_r, out.a_f, out.a_k);
        return out;
    }

    Vector q_values(const Vector& features) const {
        const Vector a_r = forward_basic(features, params_);
        switch (flags_.variant) {
        case Variant::basic: return a_r;
        case Variant::relation: return sigmoid(a_r) + sigmoid(forward_relation(a_r, relation_));
        case Variant::knowledge: return sigmoid(a_r) + forward_knowledge(symptom_part(features), knowledge_);
        case Variant::full:
            return combine(a_r, forward_relation(a_r, relation_), forward_knowledge(symptom_part(features), knowledge_));
        }
        return a_r;
    }

    /// Actions the symptom filter leaves selectable for this state.
    std::vector<bool> allowed(const Vector& features) const {
        std::vector<bool> ok(actions(), true);
        if (!flags_.symptom_filter) return ok;
        const auto symptoms = symptom_part(features);
        const auto offset = knowledge_.greetings + knowledge_.diseases();
        for (std::size_t s = 0; s < symptoms.size(); ++s)
            if (symptoms[s] != kUnknown) ok[offset + s] = false;
        return ok;
    }

    template <class Rng>
    std::size_t act(const Vector& features, double epsilon, Rng& rng) const {
        return select_action(q_values(features), allowed(features), epsilon, rng);
    }

    std::size_t greedy(const Vector& features) const { return masked_argmax(q_values(features), allowed(features)); }

    /// max over allowed a' of Q(features, a').
    double max_q(const Vector& features) const {
        const Vector q = q_values(features);
        return q(static_cast<Eigen::Index>(masked_argmax(q, allowed(features))));
    }

    /// Mean squared error over the batch and its gradient with respect to
    /// W1, b1, W2, b2 and R. The knowledge term is constant.
    Gradients gradients(std::span<const TrainingSample> batch) const {
        Gradients g{Matrix::Zero(params_.w1.rows(), params_.w1.cols()), Vector::Zero(params_.b1.size()),
                    Matrix::Zero(params_.w2.rows(), params_.w2.cols()), Vector::Zero(params_.b2.size()),
                    Matrix::Zero(relation_.rows(), relation_.cols()), 0.0};
        if (batch.empty()) return g;
        const double scale = 1.0 / static_cast<double>(batch.size());
        const bool bounded = flags_.variant != Variant::basic;
        for (std::size_t b = 0; b < batch.size(); ++b) {
            const auto& item = batch[b];
            const auto a = static_cast<Eigen::Index>(item.action);
            const Vector pre = params_.w1 * item.features + params_.b1;
            const Vector hidden = pre.cwiseMax(0.0);
            const Vector a_r = params_.w2 * hidden + params_.b2;

            double q = 0.0;
            double a_f = 0.0;
            if (!bounded) {
                q = a_r(a);
            } else {
                q = sigmoid(a_r(a));
                if (flags_.uses_relation()) {
                    a_f = forward_relation(a_r, relation_)(a);
                    q += sigmoid(a_f);
                }
                if (flags_.uses_knowledge())
                    q += forward_knowledge(symptom_part(item.features), knowledge_)(a);
            }
            const double err = q - item.target;
            if (!std::isfinite(err) || !std::isfinite(item.target))
                throw NonFiniteLoss(b, "non-finite loss at batch item " + std::to_string(b) + " (action " +
                                           std::to_string(item.action) + ")");
            g.loss += scale * err * err;
            const double delta = 2.0 * scale * err;

            Vector g_ar = Vector::Zero(a_r.size());
            if (!bounded) {
                g_ar(a) = delta;
            } else {
                const double sr = sigmoid(a_r(a));
                g_ar(a) += delta * sr * (1.0 - sr);
                if (flags_.uses_relation()) {
                    const double sf = sigmoid(a_f);
                    const double c = delta * sf * (1.0 - sf);
                    g_ar += c * relation_.col(a);
                    g.r.col(a) += c * a_r;
                }
            }
            g.w2.noalias() += g_ar * hidden.transpose();
            g.b2 += g_ar;
            const Vector g_pre = (params_.w2.transpose() * g_ar).cwiseProduct(
                pre.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; }));
            g.w1.noalias() += g_pre * item.features.transpose();
            g.b1 += g_pre;
        }
        return g;
    }

    double loss(std::span<const TrainingSample> batch) const {
        if (batch.empty()) return 0.0;
        double total = 0.0;
        for (const auto& item : batch) {
            const double err = q_values(item.features)(static_cast<Eigen::Index>(item.action)) - item.target;
            total += err * err;
        }
        return total / static_cast<double>(batch.size());
    }

    /// Plain SGD step; returns the pre-step batch loss.
    double backward_and_step(std::span<const TrainingSample> batch, double learning_rate) {
        const Gradients g = gradients(batch);
        if (!std::isfinite(g.loss)) throw NonFiniteLoss(0, "non-finite batch loss");
        params_.w1 -= learning_rate * g.w1;
        params_.b1 -= learning_rate * g.b1;
        params_.w2 -= learning_rate * g.w2;
        params_.b2 -= learning_rate * g.b2;
        if (flags_.uses_relation()) {
            relation_ -= learning_rate * g.r;
            if (flags_.renormalize_relation) normalize_columns(relation_);
        }
        return g.loss;
    }

    // Direct parameter access for checkpoint loading and gradient checks.
    QNetworkParams& mutable_params() { return params_; }
    Matrix& mutable_relation() { return relation_; }

    friend bool operator==(const KrDqn& a, const KrDqn& b) {
        return a.params_ == b.params_ && a.relation_ == b.relation_ && a.knowledge_ == b.knowledge_ &&
               a.flags_ == b.flags_;
    }

private:
    std::span<const double> symptom_part(const Vector& features) const {
        return {features.data(), knowledge_.symptoms()};
    }

    Vector fuse(const Vector& a_r, const Vector& a_f, const Vector& a_k) const {
        switch (flags_.variant) {
        case Variant::basic: return a_r;
        case Variant::relation: return sigmoid(a_r) + sigmoid(a_f);
        case Variant::knowledge: return sigmoid(a_r) + a_k;
        case Variant::full: return combine(a_r, a_f, a_k);
        }
        return a_r;
    }

    QNetworkParams params_;
    Matrix relation_;
    KnowledgeBranch knowledge_;
    PolicyFlags flags_;
};

/// Freshly initialized network for an ontology and dataset statistics.
template <class Rng>
KrDqn make_policy(const Ontology& o, const KnowledgeStats& stats, const Matrix& relation_init, int max_turns,
                  std::size_t hidden, PolicyFlags flags, Rng& rng) {
    auto params = QNetworkParams::glorot(state_dim(o, max_turns), hidden, o.num_actions(), rng);
    return KrDqn(std::move(params), relation_init, KnowledgeBranch::from_stats(stats, o), flags);
}

} // namespace krds
