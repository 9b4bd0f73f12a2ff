#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "krds/dialogue.hpp"

namespace krds {

using Tokens = std::vector<std::string>;

/// Lowercased word tokens. Clause punctuation becomes the token ".".
inline Tokens tokenize(const std::string& text) {
    Tokens out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) out.push_back(std::move(cur));
        cur.clear();
    };
    for (unsigned char c : text) {
        if (std::isalnum(c) || c == '\'' || c >= 0x80) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (c == ',' || c == '.' || c == ';' || c == ':' || c == '!' || c == '?') {
            flush();
            out.emplace_back(".");
        } else {
            flush();
        }
    }
    flush();
    return out;
}

inline std::string join_tokens(const Tokens& t) {
    std::string s;
    for (const auto& w : t) {
        if (!s.empty()) s.push_back(' ');
        s += w;
    }
    return s;
}

/// Surface forms and cue phrases for the lexicon NLU. The first surface of
/// each symptom/disease is its canonical form used by generation.
struct Lexicon {
    std::map<std::size_t, std::vector<std::string>> symptoms;
    std::map<std::size_t, std::vector<std::string>> diseases;
    std::vector<std::string> negation;
    std::vector<std::string> uncertain;
    std::vector<std::string> conjunctions;
    // Trigger phrases keyed by "request_disease", "closing", "affirm", "thanks".
    std::map<std::string, std::vector<std::string>> intents;

    const std::string& symptom_surface(std::size_t s) const { return symptoms.at(s).front(); }
    const std::string& disease_surface(std::size_t d) const { return diseases.at(d).front(); }

    static Lexicon english_cues() {
        Lexicon l;
        l.negation = {"no", "not", "don't", "doesn't", "didn't", "hasn't", "haven't", "isn't",
                      "never", "nope", "without", "do not", "does not", "did not"};
        l.uncertain = {"not sure", "unsure", "don't know", "do not know", "no idea", "maybe", "can't tell",
                       "cannot tell", "not certain"};
        l.conjunctions = {"and", "but", "or"};
        l.intents = {{"request_disease", {"what disease", "what is wrong", "what's wrong", "what illness", "diagnosis"}},
                     {"closing", {"bye", "goodbye"}},
                     {"affirm", {"yes", "yeah", "yep", "right", "correct"}},
                     {"thanks", {"thank you", "thanks"}}};
        return l;
    }

    /// Cue set plus one surface per identifier (underscores become spaces).
    static Lexicon from_ontology(const Ontology& o) {
        Lexicon l = english_cues();
        auto surface = [](std::string id) {
            std::replace(id.begin(), id.end(), '_', ' ');
            return join_tokens(tokenize(id));
        };
        for (std::size_t i = 0; i < o.num_symptoms(); ++i) l.symptoms[i] = {surface(o.symptoms()[i])};
        for (std::size_t i = 0; i < o.num_diseases(); ++i) l.diseases[i] = {surface(o.diseases()[i])};
        return l;
    }

    /// Coverage and ambiguity checks against the ontology.
    void validate(const Ontology& o) const {
        std::set<std::string> cue_tokens;
        auto add_cues = [&](const std::vector<std::string>& phrases) {
            for (const auto& p : phrases)
                if (auto t = tokenize(p); t.size() == 1) cue_tokens.insert(t.front());
        };
        add_cues(negation);
        add_cues(uncertain);
        add_cues(conjunctions);
        for (const auto& [_, v] : intents) add_cues(v);

        std::map<std::string, std::string> owner;
        auto check = [&](const std::map<std::size_t, std::vector<std::string>>& table, std::size_t count,
                         const std::vector<std::string>& ids, const char* kind) {
            for (std::size_t i = 0; i < count; ++i) {
                auto it = table.find(i);
                if (it == table.end() || it->second.empty())
                    throw ValidationError(std::string("lexicon: no surface form for ") + kind + " '" + ids[i] + "'");
                for (const auto& surface : it->second) {
                    const auto toks = tokenize(surface);
                    if (toks.empty()) throw ValidationError("lexicon: empty surface for '" + ids[i] + "'");
                    for (const auto& t : toks)
                        if (t == "." || cue_tokens.count(t))
                            throw ValidationError("lexicon: surface '" + surface + "' of '" + ids[i] +
                                                  "' contains cue word '" + t + "'");
                    const auto key = join_tokens(toks);
                    auto [pos, fresh] = owner.emplace(key, ids[i]);
                    if (!fresh && pos->second != ids[i])
                        throw ValidationError("lexicon: surface '" + surface + "' maps to both '" + pos->second +
                                              "' and '" + ids[i] + "'");
                }
            }
            for (const auto& [i, _] : table)
                if (i >= count) throw ValidationError(std::string("lexicon: ") + kind + " index out of range");
        };
        check(symptoms, o.num_symptoms(), o.symptoms(), "symptom");
        check(diseases, o.num_diseases(), o.diseases(), "disease");
    }
};

inline Lexicon lexicon_from_json(const json& j, const Ontology& o) {
    Lexicon l = Lexicon::english_cues();
    auto read_surfaces = [&](const char* key, auto find, std::map<std::size_t, std::vector<std::string>>& out) {
        if (!j.contains(key)) return;
        for (const auto& [id, forms] : j.at(key).items()) {
            auto idx = find(id);
            if (!idx) throw ValidationError(std::string("lexicon: unknown ") + key + " id '" + id + "'");
            out[*idx] = forms.template get<std::vector<std::string>>();
        }
    };
    try {
        read_surfaces("symptoms", [&](const std::string& id) { return o.find_symptom(id); }, l.symptoms);
        read_surfaces("diseases", [&](const std::string& id) { return o.find_disease(id); }, l.diseases);
        if (j.contains("negation")) l.negation = j.at("negation").get<std::vector<std::string>>();
        if (j.contains("uncertain")) l.uncertain = j.at("uncertain").get<std::vector<std::string>>();
        if (j.contains("conjunctions")) l.conjunctions = j.at("conjunctions").get<std::vector<std::string>>();
        if (j.contains("intents"))
            for (const auto& [k, v] : j.at("intents").items()) l.intents[k] = v.get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("lexicon: ") + e.what());
    }
    l.validate(o);
    return l;
}

inline json lexicon_to_json(const Lexicon& l, const Ontology& o) {
    json sym = json::object();
    json dis = json::object();
    for (const auto& [i, v] : l.symptoms) sym[o.symptoms()[i]] = v;
    for (const auto& [i, v] : l.diseases) dis[o.diseases()[i]] = v;
    return json{{"symptoms", sym},         {"diseases", dis},
                {"negation", l.negation},  {"uncertain", l.uncertain},
                {"conjunctions", l.conjunctions}, {"intents", l.intents}};
}

inline Lexicon load_lexicon(const std::filesystem::path& path, const Ontology& o) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open lexicon " + path.string());
    try {
        return lexicon_from_json(json::parse(in), o);
    } catch (const json::parse_error& e) {
        throw ParseError("lexicon " + path.string() + ": " + e.what());
    }
}

/// Template keys: agent actions use their kind name, user intents are
/// prefixed with "user_".
struct TemplateSet {
    std::map<std::string, std::vector<std::string>> templates;

    static TemplateSet english() {
        TemplateSet t;
        t.templates = {
            {"request_symptom",
             {"Do you have {symptom}?", "Does the patient have {symptom}?", "Is there any {symptom}?",
              "Have you noticed {symptom}?", "Any {symptom} recently?"}},
            {"inform_disease",
             {"You may have {disease}.", "Based on what you told me, it is probably {disease}.",
              "My diagnosis is {disease}.", "I think this is {disease}.", "This looks like {disease}."}},
            {"thanks", {"Thank you.", "Thanks for the information.", "Thanks.", "Thank you for your answers."}},
            {"closing",
             {"Goodbye.", "Take care, goodbye.", "Bye, get well soon.", "Wish you a quick recovery, goodbye."}},
            {"user_request_disease",
             {"{report}What disease could this be?", "{report}Can you tell me what is wrong?",
              "{report}What illness do I have?", "{report}Could you give me a diagnosis?",
              "{report}Please tell me what disease this is."}},
            {"user_confirm_symptom",
             {"Yes, I have {symptom}.", "Yes, he does have {symptom}.", "Yes.", "Yeah, there is {symptom}.",
              "Right, {symptom} is there."}},
            {"user_deny_symptom",
             {"No.", "No, I don't have {symptom}.", "No {symptom}.", "There is no {symptom}.",
              "Nope, never had {symptom}."}},
            {"user_not_sure_symptom",
             {"Not sure.", "I'm not sure about {symptom}.", "I don't know.", "Maybe {symptom}, I can't tell.",
              "No idea about {symptom}."}},
            {"user_closing", {"Bye.", "Goodbye.", "OK, bye.", "That is all, goodbye."}},
        };
        return t;
    }

    static const std::vector<std::string>& required_keys() {
        static const std::vector<std::string> keys = {
            "request_symptom",      "inform_disease",       "thanks",         "closing",
            "user_request_disease", "user_confirm_symptom", "user_deny_symptom", "user_not_sure_symptom",
            "user_closing"};
        return keys;
    }

    void validate() const {
        for (const auto& key : required_keys()) {
            auto it = templates.find(key);
            if (it == templates.end() || it->second.size() < 4)
                throw ValidationError("templates: action '" + key + "' needs at least 4 templates");
        }
        auto require = [&](const std::string& key, const std::string& placeholder) {
            for (const auto& t : templates.at(key))
                if (t.find(placeholder) == std::string::npos)
                    throw ValidationError("templates: '" + t + "' for '" + key + "' lacks " + placeholder);
        };
        require("request_symptom", "{symptom}");
        require("inform_disease", "{disease}");
        require("user_request_disease", "{report}");
    }
};

inline TemplateSet templates_from_json(const json& j) {
    TemplateSet t;
    try {
        for (const auto& [k, v] : j.items()) t.templates[k] = v.get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("templates: ") + e.what());
    }
    t.validate();
    return t;
}

inline TemplateSet load_templates(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open templates " + path.string());
    try {
        return templates_from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw ParseError("templates " + path.string() + ": " + e.what());
    }
}

namespace detail {

enum class Cue { symptom, disease, negation, uncertain, conjunction, request_disease, closing, affirm, thanks };

struct Phrase {
    Tokens tokens;
    Cue cue;
    std::size_t id = 0;
};

// Lower value wins when two phrases of equal length match at one position.
inline int priority(Cue c) {
    switch (c) {
    case Cue::uncertain: return 0;
    case Cue::negation: return 1;
    case Cue::symptom: return 2;
    case Cue::disease: return 3;
    case Cue::request_disease: return 4;
    case Cue::closing: return 5;
    case Cue::thanks: return 6;
    case Cue::affirm: return 7;
    case Cue::conjunction: return 8;
    }
    return 9;
}

inline std::vector<Phrase> phrases(const Lexicon& l) {
    std::vector<Phrase> out;
    auto add = [&](const std::vector<std::string>& forms, Cue cue, std::size_t id = 0) {
        for (const auto& f : forms) {
            auto t = tokenize(f);
            if (!t.empty()) out.push_back({std::move(t), cue, id});
        }
    };
    for (const auto& [i, forms] : l.symptoms) add(forms, Cue::symptom, i);
    for (const auto& [i, forms] : l.diseases) add(forms, Cue::disease, i);
    add(l.negation, Cue::negation);
    add(l.uncertain, Cue::uncertain);
    add(l.conjunctions, Cue::conjunction);
    auto intent = [&](const char* key, Cue cue) {
        if (auto it = l.intents.find(key); it != l.intents.end()) add(it->second, cue);
    };
    intent("request_disease", Cue::request_disease);
    intent("closing", Cue::closing);
    intent("affirm", Cue::affirm);
    intent("thanks", Cue::thanks);
    return out;
}

struct Match {
    Cue cue;
    std::size_t id;
};

/// Longest-match scan; returns clauses of matched cues.
inline std::vector<std::vector<Match>> scan(const Tokens& tokens, const std::vector<Phrase>& table) {
    std::vector<std::vector<Match>> clauses(1);
    std::size_t i = 0;
    while (i < tokens.size()) {
        if (tokens[i] == ".") {
            if (!clauses.back().empty()) clauses.emplace_back();
            ++i;
            continue;
        }
        const Phrase* best = nullptr;
        for (const auto& p : table) {
            if (p.tokens.size() > tokens.size() - i) continue;
            if (!std::equal(p.tokens.begin(), p.tokens.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i))) continue;
            if (!best || p.tokens.size() > best->tokens.size() ||
                (p.tokens.size() == best->tokens.size() &&
                 (priority(p.cue) < priority(best->cue) ||
                  (priority(p.cue) == priority(best->cue) && p.id < best->id))))
                best = &p;
        }
        if (!best) {
            ++i;
            continue;
        }
        if (best->cue == Cue::conjunction) {
            if (!clauses.back().empty()) clauses.emplace_back();
        } else {
            clauses.back().push_back({best->cue, best->id});
        }
        i += best->tokens.size();
    }
    if (clauses.back().empty() && clauses.size() > 1) clauses.pop_back();
    return clauses;
}

} // namespace detail

/// Lexicon NLU for patient utterances.
///
/// Symptom mentions are positive unless their clause carries a negation cue
/// (false) or an uncertainty cue (not sure). A clause holding only a polarity
/// word answers the context symptom. Returns nullopt when no intent can be
/// resolved and there is no context symptom to fall back on.
inline std::optional<SemanticFrame> nlu_parse(const std::string& utterance, const Lexicon& lexicon,
                                              std::optional<std::size_t> context = std::nullopt) {
    if (utterance.empty()) throw Error("nlu_parse: empty utterance");
    using detail::Cue;
    const auto clauses = detail::scan(tokenize(utterance), detail::phrases(lexicon));

    SemanticFrame frame;
    std::vector<std::size_t> order;
    std::optional<SlotStatus> polarity;
    bool wants_disease = false;
    bool closing = false;
    for (const auto& clause : clauses) {
        bool neg = false, unc = false, affirm = false, mentions = false;
        for (const auto& m : clause) {
            neg |= m.cue == Cue::negation;
            unc |= m.cue == Cue::uncertain;
            affirm |= m.cue == Cue::affirm;
            wants_disease |= m.cue == Cue::request_disease;
            closing |= m.cue == Cue::closing;
            if (m.cue == Cue::disease) frame.disease = m.id;
        }
        const SlotStatus status = unc ? SlotStatus::not_sure : neg ? SlotStatus::no : SlotStatus::yes;
        for (const auto& m : clause) {
            if (m.cue != Cue::symptom) continue;
            mentions = true;
            if (!frame.slots.count(m.id)) order.push_back(m.id);
            frame.slots[m.id] = status;
        }
        if (!mentions && !polarity && (unc || neg || affirm)) polarity = status;
    }

    if (wants_disease) {
        frame.intent = UserIntent::request_disease;
        return frame;
    }
    if (closing) {
        frame.intent = UserIntent::closing;
        return frame;
    }
    if (context) {
        if (auto it = frame.slots.find(*context); it != frame.slots.end()) {
            frame.intent = intent_for(it->second);
        } else if (polarity) {
            frame.slots[*context] = *polarity;
            frame.intent = intent_for(*polarity);
        } else if (!order.empty()) {
            frame.intent = intent_for(frame.slots.at(order.front()));
        } else {
            frame.slots[*context] = SlotStatus::not_sure;
            frame.intent = UserIntent::not_sure_symptom;
        }
        return frame;
    }
    if (!order.empty()) {
        frame.intent = intent_for(frame.slots.at(order.front()));
        return frame;
    }
    return std::nullopt;
}

/// Recovers the agent action from an agent utterance: a disease mention is
/// an inform, a symptom mention a request, otherwise thanks/closing cues.
inline std::optional<AgentAction> parse_agent_utterance(const std::string& utterance, const Lexicon& lexicon) {
    using detail::Cue;
    const auto clauses = detail::scan(tokenize(utterance), detail::phrases(lexicon));
    std::optional<AgentAction> request, thanks, closing;
    for (const auto& clause : clauses)
        for (const auto& m : clause) {
            if (m.cue == Cue::disease) return AgentAction::inform(m.id);
            if (m.cue == Cue::symptom && !request) request = AgentAction::request(m.id);
            if (m.cue == Cue::thanks) thanks = AgentAction{ActionKind::thanks, 0};
            if (m.cue == Cue::closing) closing = AgentAction{ActionKind::closing, 0};
        }
    if (request) return request;
    if (closing) return closing;
    return thanks;
}

namespace detail {

inline std::string substitute(std::string text, const std::string& key, const std::string& value) {
    const std::string placeholder = "{" + key + "}";
    for (auto pos = text.find(placeholder); pos != std::string::npos; pos = text.find(placeholder, pos + value.size()))
        text.replace(pos, placeholder.size(), value);
    return text;
}

inline void check_resolved(const std::string& text) {
    const auto open = text.find('{');
    if (open != std::string::npos && text.find('}', open) != std::string::npos)
        throw Error("nlg: unresolvable placeholder in '" + text + "'");
}

template <class Rng>
const std::string& pick(const TemplateSet& t, const std::string& key, Rng& rng) {
    auto it = t.templates.find(key);
    if (it == t.templates.end() || it->second.empty()) throw Error("nlg: no templates for '" + key + "'");
    std::uniform_int_distribution<std::size_t> u(0, it->second.size() - 1);
    return it->second[u(rng)];
}

inline std::string capitalize(std::string s) {
    if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    return s;
}

// Self-report text: one sentence for the positives, one per negative or
// uncertain symptom so each keeps its own clause.
inline std::string render_report(const std::map<std::size_t, SlotStatus>& slots, const Lexicon& l) {
    std::vector<std::string> yes;
    std::string out;
    for (const auto& [s, v] : slots)
        if (v == SlotStatus::yes) yes.push_back(l.symptom_surface(s));
    if (!yes.empty()) {
        out += "I have ";
        for (std::size_t i = 0; i < yes.size(); ++i) {
            if (i > 0) out += i + 1 == yes.size() ? " and " : ", ";
            out += yes[i];
        }
        out += ". ";
    }
    for (const auto& [s, v] : slots) {
        if (v == SlotStatus::no) out += "No " + l.symptom_surface(s) + ". ";
        if (v == SlotStatus::not_sure) out += "Not sure about " + l.symptom_surface(s) + ". ";
    }
    return out;
}

} // namespace detail

/// Realizes an agent action with a uniformly chosen template.
template <class Rng>
std::string nlg_realize(const AgentAction& a, const TemplateSet& t, const Lexicon& l, Rng& rng) {
    std::string text = detail::pick(t, to_string(a.kind), rng);
    if (a.kind == ActionKind::request_symptom) text = detail::substitute(text, "symptom", l.symptom_surface(a.target));
    if (a.kind == ActionKind::inform_disease) text = detail::substitute(text, "disease", l.disease_surface(a.target));
    detail::check_resolved(text);
    return text;
}

/// Realizes a patient frame. Answer intents speak about their first slot;
/// any further slots are appended as report sentences.
template <class Rng>
std::string nlg_realize(const SemanticFrame& f, const TemplateSet& t, const Lexicon& l, Rng& rng) {
    const std::string key = std::string("user_") + to_string(f.intent);
    const bool bare = f.intent != UserIntent::request_disease && f.intent != UserIntent::closing && f.slots.empty();
    std::string text;
    if (bare) {
        // an answer with nothing to name, e.g. after a corrupted intent
        TemplateSet plain;
        for (const auto& tmpl : t.templates.count(key) ? t.templates.at(key) : std::vector<std::string>{})
            if (tmpl.find('{') == std::string::npos) plain.templates[key].push_back(tmpl);
        text = detail::pick(plain, key, rng);
    } else {
        text = detail::pick(t, key, rng);
    }
    if (f.intent == UserIntent::request_disease) {
        text = detail::substitute(text, "report", detail::render_report(f.slots, l));
    } else if (f.intent != UserIntent::closing && !f.slots.empty()) {
        auto rest = f.slots;
        const auto first = rest.begin()->first;
        rest.erase(rest.begin());
        text = detail::substitute(text, "symptom", l.symptom_surface(first));
        if (!rest.empty()) text += " " + detail::render_report(rest, l);
    }
    detail::check_resolved(text);
    return detail::capitalize(text);
}

} // namespace krds
