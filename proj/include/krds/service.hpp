#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "krds/bundle.hpp"
#include "krds/language.hpp"
#include "krds/trainer.hpp"

namespace krds {

enum class SessionStatus { open, success, failed };

inline const char* to_string(SessionStatus s) {
    switch (s) {
    case SessionStatus::open: return "open";
    case SessionStatus::success: return "success";
    case SessionStatus::failed: return "failed";
    }
    return "?";
}

struct TranscriptEntry {
    std::string speaker; // "user" or "agent"
    std::string utterance;
    std::optional<SemanticFrame> frame;
    std::optional<std::size_t> action;
    std::string timestamp;
};

struct SessionRecord {
    std::string id;
    std::vector<TranscriptEntry> transcript;
    DialogueState state;
    SessionStatus status = SessionStatus::open;
    std::optional<std::size_t> diagnosis;
};

/// Service-level failure carrying the HTTP status it maps to.
struct ServiceError : Error {
    ServiceError(int code, const std::string& what) : Error(what), status(code) {}
    int status;
};

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const auto t = std::chrono::system_clock::to_time_t(now);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    char out[40];
    std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
    return out;
}

/// Live diagnosis sessions against a trained bundle.
///
/// The agent acts greedily under the symptom filter. A session closes when
/// the agent informs a disease (success), says goodbye, or uses its last
/// turn (failed). With a log path every create/message call is appended as a
/// JSON line and replayed on construction.
class DiagnosisService {
public:
    using Clock = std::function<std::string()>;

    struct Reply {
        std::string id;
        std::string agent_utterance;
        SessionStatus status = SessionStatus::open;
        std::optional<std::string> diagnosis;
    };

    DiagnosisService(std::shared_ptr<const PolicyBundle> bundle, Lexicon lexicon, TemplateSet templates,
                     std::uint64_t seed = 0, std::optional<std::filesystem::path> log = std::nullopt,
                     Clock clock = utc_timestamp)
        : bundle_(std::move(bundle)), lexicon_(std::move(lexicon)), templates_(std::move(templates)), seed_(seed),
          clock_(std::move(clock)) {
        lexicon_.validate(bundle_->ontology);
        templates_.validate();
        if (log) {
            replay(*log);
            log_.open(*log, std::ios::app);
            if (!log_) throw Error("cannot open session log " + log->string());
        }
    }

    const PolicyBundle& bundle() const { return *bundle_; }

    Reply create(const std::string& self_report) {
        if (self_report.empty()) throw ServiceError(400, "self_report must be nonempty");
        std::shared_ptr<Entry> entry;
        std::string id;
        {
            std::lock_guard lock(map_mutex_);
            id = next_id();
            entry = std::make_shared<Entry>();
            sessions_[id] = entry;
        }
        const auto ts = clock_();
        std::lock_guard lock(entry->mutex);
        entry->rng.seed(seed_ ^ std::hash<std::string>{}(id));
        entry->record.id = id;
        entry->record.state = DialogueState::initial(bundle_->ontology);
        append_log({{"op", "create"}, {"id", id}, {"text", self_report}, {"timestamp", ts}});
        open_session(*entry, self_report, ts);
        return reply_of(entry->record);
    }

    Reply post_message(const std::string& id, const std::string& text) {
        auto entry = find(id);
        if (text.empty()) throw ServiceError(400, "text must be nonempty");
        std::lock_guard lock(entry->mutex);
        if (entry->record.status != SessionStatus::open) throw ServiceError(409, "session " + id + " is closed");
        const auto ts = clock_();
        append_log({{"op", "message"}, {"id", id}, {"text", text}, {"timestamp", ts}});
        user_turn(*entry, text, ts);
        return reply_of(entry->record);
    }

    SessionRecord get(const std::string& id) const {
        auto entry = find(id);
        std::lock_guard lock(entry->mutex);
        return entry->record;
    }

    json get_json(const std::string& id) const { return record_to_json(get(id)); }

    json record_to_json(const SessionRecord& r) const {
        const auto& o = bundle_->ontology;
        json transcript = json::array();
        for (const auto& e : r.transcript) {
            json item{{"speaker", e.speaker}, {"utterance", e.utterance}, {"timestamp", e.timestamp}};
            item["frame"] = e.frame ? frame_to_json(*e.frame, o) : json(nullptr);
            item["action"] = e.action ? json(*e.action) : json(nullptr);
            transcript.push_back(std::move(item));
        }
        json symptoms = json::object();
        for (std::size_t s = 0; s < r.state.symptoms.size(); ++s)
            if (r.state.symptoms[s] != kUnknown) symptoms[o.symptoms()[s]] = r.state.symptoms[s];
        json out{{"id", r.id},
                 {"status", to_string(r.status)},
                 {"turn", r.state.turn},
                 {"symptoms", symptoms},
                 {"transcript", transcript}};
        out["diagnosis"] = r.diagnosis ? json(o.diseases()[*r.diagnosis]) : json(nullptr);
        return out;
    }

    json reply_to_json(const Reply& r) const {
        json out{{"id", r.id}, {"agent_utterance", r.agent_utterance}, {"status", to_string(r.status)}};
        if (r.diagnosis) out["diagnosis"] = *r.diagnosis;
        return out;
    }

private:
    struct Entry {
        std::mutex mutex;
        SessionRecord record;
        Rng rng;
    };

    std::shared_ptr<Entry> find(const std::string& id) const {
        std::lock_guard lock(map_mutex_);
        auto it = sessions_.find(id);
        if (it == sessions_.end()) throw ServiceError(404, "unknown session " + id);
        return it->second;
    }

    std::string next_id() {
        char buf[16];
        std::snprintf(buf, sizeof buf, "s%06zu", ++counter_);
        return buf;
    }

    void open_session(Entry& e, const std::string& self_report, const std::string& ts) {
        auto frame = nlu_parse(self_report, lexicon_).value_or(SemanticFrame{});
        frame.intent = UserIntent::request_disease;
        e.record.transcript.push_back({"user", self_report, frame, std::nullopt, ts});
        e.record.state = after_user(e.record.state, frame);
        agent_turn(e, ts);
    }

    void user_turn(Entry& e, const std::string& text, const std::string& ts) {
        auto frame = nlu_parse(text, lexicon_, e.record.state.last_request)
                         .value_or(SemanticFrame{UserIntent::request_disease, {}, std::nullopt});
        e.record.transcript.push_back({"user", text, frame, std::nullopt, ts});
        e.record.state = after_user(e.record.state, frame);
        agent_turn(e, ts);
    }

    void agent_turn(Entry& e, const std::string& ts) {
        const auto& b = *bundle_;
        const Vector s = encode_state(e.record.state, b.ontology, b.max_turns);
        const auto index = b.policy.greedy(s);
        const auto action = action_at(index, b.ontology);
        const auto text = nlg_realize(action, templates_, lexicon_, e.rng);
        e.record.transcript.push_back({"agent", text, std::nullopt, index, ts});
        e.record.state = after_agent(e.record.state, action);
        if (action.kind == ActionKind::inform_disease) {
            e.record.status = SessionStatus::success;
            e.record.diagnosis = action.target;
        } else if (action.kind == ActionKind::closing || e.record.state.turn >= b.max_turns) {
            e.record.status = SessionStatus::failed;
        }
    }

    Reply reply_of(const SessionRecord& r) const {
        Reply out{r.id, r.transcript.back().utterance, r.status, std::nullopt};
        if (r.diagnosis) out.diagnosis = bundle_->ontology.diseases()[*r.diagnosis];
        return out;
    }

    void append_log(const json& event) {
        std::lock_guard lock(log_mutex_);
        if (!log_.is_open()) return;
        log_ << event.dump() << '\n';
        log_.flush();
    }

    void replay(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) return;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto ev = json::parse(line);
            const auto id = ev.at("id").get<std::string>();
            const auto text = ev.at("text").get<std::string>();
            const auto ts = ev.at("timestamp").get<std::string>();
            if (ev.at("op") == "create") {
                auto entry = std::make_shared<Entry>();
                entry->rng.seed(seed_ ^ std::hash<std::string>{}(id));
                entry->record.id = id;
                entry->record.state = DialogueState::initial(bundle_->ontology);
                sessions_[id] = entry;
                ++counter_;
                open_session(*entry, text, ts);
            } else {
                auto entry = find(id);
                if (entry->record.status == SessionStatus::open) user_turn(*entry, text, ts);
            }
        }
    }

    std::shared_ptr<const PolicyBundle> bundle_;
    Lexicon lexicon_;
    TemplateSet templates_;
    std::uint64_t seed_;
    Clock clock_;
    mutable std::mutex map_mutex_;
    std::map<std::string, std::shared_ptr<Entry>> sessions_;
    std::size_t counter_ = 0;
    std::mutex log_mutex_;
    std::ofstream log_;
};

} // namespace krds
