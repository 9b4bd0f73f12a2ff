#pragma once

#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "krds/ontology.hpp"

namespace krds {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Dataset-derived conditional probabilities.
///
///   p_dis_given_sym(d, s) = count(d, s) / count(s)   (M x N, 0 when count(s) = 0)
///   p_sym_given_dis(s, d) = count(d, s) / count(d)   (N x M, 0 when count(d) = 0)
///   p_sym_prior(s)        = count(s) / |goals|
///
/// A symptom counts for a goal only when it is true, explicit or implicit.
struct KnowledgeStats {
    Matrix p_dis_given_sym;
    Matrix p_sym_given_dis;
    Vector p_sym_prior;
};

namespace detail {

inline std::vector<std::size_t> true_symptoms(const UserGoal& g) {
    std::vector<std::size_t> out;
    for (const auto& [s, v] : g.explicit_symptoms)
        if (v) out.push_back(s);
    for (const auto& [s, v] : g.implicit_symptoms)
        if (v) out.push_back(s);
    return out;
}

} // namespace detail

/// Integer co-occurrence counts behind every probability in this header.
struct CooccurrenceCounts {
    std::vector<long> disease;                    // count(d)
    std::vector<long> symptom;                    // count(s)
    std::vector<std::vector<long>> disease_symptom;  // count(d, s)
    std::vector<std::vector<long>> symptom_symptom;  // count(s, s')
    long goals = 0;
};

inline CooccurrenceCounts count_cooccurrence(std::span<const UserGoal> goals, const Ontology& ontology) {
    const auto m = ontology.num_diseases();
    const auto n = ontology.num_symptoms();
    CooccurrenceCounts c;
    c.disease.assign(m, 0);
    c.symptom.assign(n, 0);
    c.disease_symptom.assign(m, std::vector<long>(n, 0));
    c.symptom_symptom.assign(n, std::vector<long>(n, 0));
    c.goals = static_cast<long>(goals.size());
    for (const auto& g : goals) {
        ++c.disease[g.disease];
        const auto present = detail::true_symptoms(g);
        for (auto s : present) {
            ++c.symptom[s];
            ++c.disease_symptom[g.disease][s];
            for (auto t : present) ++c.symptom_symptom[s][t];
        }
    }
    return c;
}

inline KnowledgeStats compute_knowledge_stats(std::span<const UserGoal> train, const Ontology& ontology) {
    if (train.empty()) throw ValidationError("knowledge statistics need a nonempty training split");
    const auto m = ontology.num_diseases();
    const auto n = ontology.num_symptoms();
    const auto c = count_cooccurrence(train, ontology);

    KnowledgeStats k;
    k.p_dis_given_sym = Matrix::Zero(m, n);
    k.p_sym_given_dis = Matrix::Zero(n, m);
    k.p_sym_prior = Vector::Zero(n);
    for (std::size_t s = 0; s < n; ++s) {
        k.p_sym_prior(s) = static_cast<double>(c.symptom[s]) / static_cast<double>(c.goals);
        for (std::size_t d = 0; d < m; ++d) {
            const double joint = static_cast<double>(c.disease_symptom[d][s]);
            if (c.symptom[s] > 0) k.p_dis_given_sym(d, s) = joint / static_cast<double>(c.symptom[s]);
            if (c.disease[d] > 0) k.p_sym_given_dis(s, d) = joint / static_cast<double>(c.disease[d]);
        }
    }
    return k;
}

/// Relation matrix entries before column normalization: entry (i, j) is
/// P(unit_j | unit_i) over the D action units. Greeting and disease-disease
/// blocks are identity.
inline Matrix relation_cooccurrence(std::span<const UserGoal> train, const Ontology& ontology) {
    const auto g = ontology.num_greetings();
    const auto m = ontology.num_diseases();
    const auto n = ontology.num_symptoms();
    const auto doff = ontology.disease_offset();
    const auto soff = ontology.symptom_offset();
    const auto c = count_cooccurrence(train, ontology);

    Matrix r = Matrix::Zero(ontology.num_actions(), ontology.num_actions());
    for (std::size_t i = 0; i < g; ++i) r(i, i) = 1.0;
    for (std::size_t d = 0; d < m; ++d) r(doff + d, doff + d) = 1.0;

    for (std::size_t s = 0; s < n; ++s) {
        if (c.symptom[s] == 0) continue;
        const double cs = static_cast<double>(c.symptom[s]);
        for (std::size_t t = 0; t < n; ++t) r(soff + s, soff + t) = static_cast<double>(c.symptom_symptom[s][t]) / cs;
        for (std::size_t d = 0; d < m; ++d) r(soff + s, doff + d) = static_cast<double>(c.disease_symptom[d][s]) / cs;
    }
    for (std::size_t d = 0; d < m; ++d) {
        if (c.disease[d] == 0) continue;
        const double cd = static_cast<double>(c.disease[d]);
        for (std::size_t s = 0; s < n; ++s) r(doff + d, soff + s) = static_cast<double>(c.disease_symptom[d][s]) / cd;
    }
    return r;
}

/// Rescales every column to sum to one; an all-zero column becomes uniform.
inline void normalize_columns(Matrix& r) {
    for (Eigen::Index j = 0; j < r.cols(); ++j) {
        const double sum = r.col(j).sum();
        if (sum > 0.0)
            r.col(j) /= sum;
        else
            r.col(j).setConstant(1.0 / static_cast<double>(r.rows()));
    }
}

inline Matrix build_relation_init(std::span<const UserGoal> train, const Ontology& ontology) {
    Matrix r = relation_cooccurrence(train, ontology);
    normalize_columns(r);
    return r;
}

/// Column-stochastic matrix with uniform random entries; the ablation
/// baseline for the prior-initialized relation matrix.
template <class Rng>
Matrix random_relation_init(std::size_t d, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix r(d, d);
    for (Eigen::Index j = 0; j < r.cols(); ++j)
        for (Eigen::Index i = 0; i < r.rows(); ++i) r(i, j) = u(rng);
    normalize_columns(r);
    return r;
}

} // namespace krds
