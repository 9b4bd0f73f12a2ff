#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace krds {

using json = nlohmann::json;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : Error {
    using Error::Error;
};

struct ValidationError : Error {
    using Error::Error;
};

inline constexpr int kGoalFormatVersion = 1;

/// The closed universe of diseases and symptoms plus the greeting actions.
///
/// The action layout is canonical: greetings first, then diseases, then
/// symptoms. Every index computed elsewhere (action ids, relation matrix,
/// knowledge vector padding) derives from this ordering.
class Ontology {
public:
    Ontology() = default;

    Ontology(std::vector<std::string> diseases, std::vector<std::string> symptoms,
             std::vector<std::string> greetings = {"thanks", "closing"})
        : greetings_(std::move(greetings)), diseases_(std::move(diseases)),
          symptoms_(std::move(symptoms)) {
        std::set<std::string> seen;
        auto add = [&](const std::vector<std::string>& ids, const char* list) {
            for (const auto& id : ids) {
                if (id.empty())
                    throw ValidationError(std::string("empty identifier in ontology ") + list);
                if (!seen.insert(id).second)
                    throw ValidationError("duplicate ontology identifier '" + id + "'");
            }
        };
        add(greetings_, "greetings");
        add(diseases_, "diseases");
        add(symptoms_, "symptoms");
        for (const auto& g : greetings_)
            if (g != "thanks" && g != "closing")
                throw ValidationError("unsupported greeting action '" + g + "'");
        for (std::size_t i = 0; i < diseases_.size(); ++i) disease_index_[diseases_[i]] = i;
        for (std::size_t i = 0; i < symptoms_.size(); ++i) symptom_index_[symptoms_[i]] = i;
    }

    const std::vector<std::string>& greetings() const { return greetings_; }
    const std::vector<std::string>& diseases() const { return diseases_; }
    const std::vector<std::string>& symptoms() const { return symptoms_; }

    std::size_t num_greetings() const { return greetings_.size(); }
    std::size_t num_diseases() const { return diseases_.size(); }
    std::size_t num_symptoms() const { return symptoms_.size(); }
    std::size_t num_actions() const { return greetings_.size() + diseases_.size() + symptoms_.size(); }

    std::size_t disease_offset() const { return greetings_.size(); }
    std::size_t symptom_offset() const { return greetings_.size() + diseases_.size(); }

    std::optional<std::size_t> find_disease(const std::string& id) const {
        auto it = disease_index_.find(id);
        if (it == disease_index_.end()) return std::nullopt;
        return it->second;
    }
    std::optional<std::size_t> find_symptom(const std::string& id) const {
        auto it = symptom_index_.find(id);
        if (it == symptom_index_.end()) return std::nullopt;
        return it->second;
    }

    /// FNV-1a over the canonical ordering; any rename, insertion or reorder
    /// changes the value.
    std::uint64_t hash() const {
        std::uint64_t h = 14695981039346656037ull;
        auto mix = [&h](const std::string& s) {
            for (unsigned char c : s) {
                h ^= c;
                h *= 1099511628211ull;
            }
            h ^= 0x1f;
            h *= 1099511628211ull;
        };
        mix("G");
        for (const auto& g : greetings_) mix(g);
        mix("D");
        for (const auto& d : diseases_) mix(d);
        mix("S");
        for (const auto& s : symptoms_) mix(s);
        return h;
    }

    std::string hash_hex() const {
        std::ostringstream os;
        os << std::hex;
        os.width(16);
        os.fill('0');
        os << hash();
        return os.str();
    }

    friend bool operator==(const Ontology& a, const Ontology& b) {
        return a.greetings_ == b.greetings_ && a.diseases_ == b.diseases_ && a.symptoms_ == b.symptoms_;
    }

private:
    std::vector<std::string> greetings_;
    std::vector<std::string> diseases_;
    std::vector<std::string> symptoms_;
    std::unordered_map<std::string, std::size_t> disease_index_;
    std::unordered_map<std::string, std::size_t> symptom_index_;
};

/// One patient case. Symptom maps are keyed by symptom index into the ontology.
struct UserGoal {
    std::size_t disease = 0;
    std::map<std::size_t, bool> explicit_symptoms;
    std::map<std::size_t, bool> implicit_symptoms;
    std::set<std::string> request_slots{"disease"};
    std::optional<std::string> self_report;

    bool implicit_contains(std::size_t s) const { return implicit_symptoms.count(s) != 0; }

    friend bool operator==(const UserGoal&, const UserGoal&) = default;
};

struct Dataset {
    Ontology ontology;
    std::vector<UserGoal> train;
    std::vector<UserGoal> test;
};

inline json ontology_to_json(const Ontology& o) {
    return json{{"diseases", o.diseases()}, {"symptoms", o.symptoms()}, {"greetings", o.greetings()}};
}

inline Ontology ontology_from_json(const json& j) {
    if (!j.is_object() || !j.contains("diseases") || !j.contains("symptoms"))
        throw ParseError("ontology must be an object with 'diseases' and 'symptoms'");
    try {
        auto diseases = j.at("diseases").get<std::vector<std::string>>();
        auto symptoms = j.at("symptoms").get<std::vector<std::string>>();
        if (j.contains("greetings"))
            return Ontology(std::move(diseases), std::move(symptoms),
                            j.at("greetings").get<std::vector<std::string>>());
        return Ontology(std::move(diseases), std::move(symptoms));
    } catch (const json::exception& e) {
        throw ParseError(std::string("ontology: ") + e.what());
    }
}

namespace detail {

inline std::map<std::size_t, bool> symptom_slots_from_json(const json& j, const Ontology& ontology,
                                                           const std::string& where) {
    std::map<std::size_t, bool> out;
    if (j.is_null()) return out;
    if (!j.is_object()) throw ValidationError(where + ": expected an object of symptom -> bool");
    for (const auto& [key, value] : j.items()) {
        auto idx = ontology.find_symptom(key);
        if (!idx) throw ValidationError(where + ": unknown symptom '" + key + "'");
        if (!value.is_boolean())
            throw ValidationError(where + ": symptom '" + key + "' must map to a boolean");
        out[*idx] = value.get<bool>();
    }
    return out;
}

} // namespace detail

inline UserGoal goal_from_json(const json& j, const Ontology& ontology, const std::string& where) {
    if (!j.is_object()) throw ValidationError(where + ": goal must be an object");
    UserGoal g;
    if (!j.contains("disease_tag") || !j.at("disease_tag").is_string())
        throw ValidationError(where + ": field 'disease_tag' missing or not a string");
    const auto tag = j.at("disease_tag").get<std::string>();
    auto d = ontology.find_disease(tag);
    if (!d) throw ValidationError(where + ": field 'disease_tag' names unknown disease '" + tag + "'");
    g.disease = *d;
    g.explicit_symptoms = detail::symptom_slots_from_json(j.value("explicit_inform_slots", json()), ontology,
                                                          where + ".explicit_inform_slots");
    g.implicit_symptoms = detail::symptom_slots_from_json(j.value("implicit_inform_slots", json()), ontology,
                                                          where + ".implicit_inform_slots");
    for (const auto& [s, _] : g.explicit_symptoms)
        if (g.implicit_symptoms.count(s))
            throw ValidationError(where + ": symptom '" + ontology.symptoms()[s] +
                                  "' is both explicit and implicit");
    if (j.contains("request_slots") && j.at("request_slots").is_object()) {
        g.request_slots.clear();
        for (const auto& [k, _] : j.at("request_slots").items()) g.request_slots.insert(k);
    }
    if (!g.request_slots.count("disease"))
        throw ValidationError(where + ": field 'request_slots' must contain 'disease'");
    if (j.contains("self_report") && j.at("self_report").is_string())
        g.self_report = j.at("self_report").get<std::string>();
    return g;
}

inline json goal_to_json(const UserGoal& g, const Ontology& ontology) {
    json explicit_slots = json::object();
    json implicit_slots = json::object();
    for (const auto& [s, v] : g.explicit_symptoms) explicit_slots[ontology.symptoms()[s]] = v;
    for (const auto& [s, v] : g.implicit_symptoms) implicit_slots[ontology.symptoms()[s]] = v;
    json request = json::object();
    for (const auto& r : g.request_slots) request[r] = true;
    return json{{"disease_tag", ontology.diseases()[g.disease]},
                {"explicit_inform_slots", explicit_slots},
                {"implicit_inform_slots", implicit_slots},
                {"request_slots", request},
                {"self_report", g.self_report ? json(*g.self_report) : json(nullptr)}};
}

inline json dataset_to_json(const Dataset& ds) {
    json train = json::array();
    json test = json::array();
    for (const auto& g : ds.train) train.push_back(goal_to_json(g, ds.ontology));
    for (const auto& g : ds.test) test.push_back(goal_to_json(g, ds.ontology));
    json onto = ontology_to_json(ds.ontology);
    return json{{"format_version", kGoalFormatVersion}, {"ontology", onto}, {"train", train}, {"test", test}};
}

/// Parses a goal file document. When `ontology` is given the file's own
/// ontology block must agree with it.
inline Dataset dataset_from_json(const json& doc, const std::optional<Ontology>& ontology = std::nullopt) {
    if (!doc.is_object()) throw ParseError("goal file: top level must be an object");
    if (doc.contains("format_version") && doc.at("format_version") != kGoalFormatVersion)
        throw ParseError("goal file: unsupported format_version " + doc.at("format_version").dump());
    Dataset ds;
    if (doc.contains("ontology")) {
        ds.ontology = ontology_from_json(doc.at("ontology"));
        if (ontology && !(*ontology == ds.ontology))
            throw ValidationError("goal file: ontology block differs from the supplied ontology");
    } else if (ontology) {
        ds.ontology = *ontology;
    } else {
        throw ParseError("goal file: missing 'ontology'");
    }
    auto read_split = [&](const char* name, std::vector<UserGoal>& out) {
        if (!doc.contains(name)) return;
        const auto& arr = doc.at(name);
        if (!arr.is_array()) throw ParseError(std::string("goal file: '") + name + "' must be an array");
        for (std::size_t i = 0; i < arr.size(); ++i)
            out.push_back(goal_from_json(arr[i], ds.ontology, std::string(name) + "[" + std::to_string(i) + "]"));
    };
    read_split("train", ds.train);
    read_split("test", ds.test);
    if (ds.train.empty() && ds.test.empty()) throw ValidationError("goal file: no goals");
    return ds;
}

inline Dataset load_dataset(const std::filesystem::path& path,
                            const std::optional<Ontology>& ontology = std::nullopt) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open goal file " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError("goal file " + path.string() + ": " + e.what());
    }
    return dataset_from_json(doc, ontology);
}

inline void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write goal file " + path.string());
    out << dataset_to_json(ds).dump(2) << '\n';
}

} // namespace krds
