#include <chrono>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "krds/ablation.hpp"
#include "krds/bundle.hpp"
#include "krds/http.hpp"
#include "krds/krds.hpp"
#include "krds/service.hpp"

namespace {

using namespace krds;

struct DataOptions {
    std::string path;
    bool synthetic = false;
    std::uint64_t synthetic_seed = 2024;

    void add(CLI::App* cmd) {
        cmd->add_option("--data", path, "goal file (JSON)");
        cmd->add_flag("--synthetic", synthetic, "use the generated 4-disease corpus instead of --data");
        cmd->add_option("--synthetic-seed", synthetic_seed, "seed of the generated corpus");
    }

    Dataset load() const {
        if (synthetic) {
            SyntheticSpec spec;
            spec.seed = synthetic_seed;
            return make_synthetic_dataset(spec);
        }
        if (path.empty()) throw Error("one of --data or --synthetic is required");
        return load_dataset(path);
    }
};

struct TrainOptions {
    std::string reward_scheme = "unit";
    std::string reward_triple;
    std::string mode = "frame";
    std::string ablation = "full";
    std::string relation_init = "prior";
    TrainerConfig config;
    bool no_filter = false;

    void add(CLI::App* cmd) {
        cmd->add_option("--reward-scheme", reward_scheme, "main, unit, R1, R2, R1* or R2*");
        cmd->add_option("--reward", reward_triple, "custom success,failure,penalty (overrides --reward-scheme)");
        cmd->add_option("--mode", mode, "frame or language")->check(CLI::IsMember({"frame", "language"}));
        cmd->add_option("--ablation", ablation, "basic, relation, knowledge or full")
            ->check(CLI::IsMember({"basic", "relation", "knowledge", "full"}));
        cmd->add_option("--relation-init", relation_init, "prior or random")->check(CLI::IsMember({"prior", "random"}));
        cmd->add_option("--seed", config.seed, "training seed");
        cmd->add_option("--eval-seed", config.eval_seed, "seed of the evaluation goal sample");
        cmd->add_option("--epochs", config.epochs, "training epochs");
        cmd->add_option("--sims", config.sims_per_epoch, "simulated dialogues per epoch");
        cmd->add_option("--eval-episodes", config.eval_episodes, "episodes per epoch evaluation");
        cmd->add_option("--hidden", config.hidden, "hidden layer width");
        cmd->add_option("--lr", config.lr, "learning rate");
        cmd->add_option("--gamma", config.gamma, "discount");
        cmd->add_option("--epsilon", config.epsilon, "exploration rate");
        cmd->add_option("--batch", config.batch, "batch size");
        cmd->add_option("--buffer", config.buffer_capacity, "replay buffer capacity");
        cmd->add_option("--steps", config.steps_per_epoch, "gradient steps per epoch (0 = one pass)");
        cmd->add_option("--max-turns", config.max_turns, "turn limit T");
        cmd->add_option("--slot-error", config.errors.slot_error_rate, "slot corruption rate");
        cmd->add_option("--intent-error", config.errors.intent_error_rate, "intent corruption rate");
        cmd->add_flag("--penalize-denied", config.penalize_denied, "charge the miss penalty for denied symptoms");
        cmd->add_flag("--renormalize-relation", config.flags.renormalize_relation,
                      "rescale relation columns to sum to one after each step");
        cmd->add_flag("--no-symptom-filter", no_filter, "allow repeated symptom requests");
    }

    TrainerConfig resolve() const {
        TrainerConfig c = config;
        c.scheme = reward_triple.empty() ? krds::reward_scheme(reward_scheme) : parse_reward_triple(reward_triple);
        c.mode = mode_from_string(mode);
        c.flags.variant = variant_from_string(ablation);
        c.flags.symptom_filter = !no_filter;
        c.relation_init = relation_init == "prior" ? RelationInit::prior : RelationInit::random;
        c.validate();
        return c;
    }
};

struct LanguageOptions {
    std::string lexicon;
    std::string templates;

    void add(CLI::App* cmd) {
        cmd->add_option("--lexicon", lexicon, "lexicon JSON (default: surfaces derived from the ontology)");
        cmd->add_option("--templates", templates, "template JSON (default: built-in English templates)");
    }

    Lexicon load_lexicon(const Ontology& o) const {
        return lexicon.empty() ? Lexicon::from_ontology(o) : krds::load_lexicon(lexicon, o);
    }
    TemplateSet load_templates() const {
        return templates.empty() ? TemplateSet::english() : krds::load_templates(templates);
    }
};

int run_train(const DataOptions& data, const TrainOptions& opts, const std::string& out, const std::string& report_path) {
    const auto ds = data.load();
    const auto config = opts.resolve();
    KrDqn policy = make_policy(config, ds);
    std::ofstream report_file;
    if (!report_path.empty()) {
        report_file.open(report_path);
        if (!report_file) throw Error("cannot write report " + report_path);
    }
    std::ostream& report = report_path.empty() ? std::cout : report_file;

    const auto result = train(config, ds, policy, {},
                              [&report](const EpochRecord& e) { report << epoch_to_json(e).dump() << '\n' << std::flush; });
    PolicyBundle bundle{ds.ontology, config.max_turns, result.best ? *result.best : policy};
    save_bundle(bundle, out);
    std::cerr << "best epoch " << result.best_epoch << " eval success " << result.best_success << "; bundle written to "
              << out << '\n';
    return 0;
}

int run_evaluate(const DataOptions& data, const TrainOptions& opts, const LanguageOptions& lang,
                 const std::string& bundle_path, const std::string& split, std::size_t episodes) {
    if (episodes == 0) throw CLI::ValidationError("--episodes", "must be positive");
    const auto ds = data.load();
    const auto bundle = load_bundle(bundle_path, ds.ontology);
    auto config = opts.resolve();
    config.max_turns = bundle.max_turns;
    auto env = make_environment(config, ds.ontology);
    env.lexicon = lang.load_lexicon(ds.ontology);
    env.templates = lang.load_templates();
    const auto& goals = split == "train" ? ds.train : ds.test;
    if (goals.empty()) throw Error("split '" + split + "' has no goals");
    Rng rng(config.seed);
    const auto report = evaluate(bundle.policy, goals, episodes, env, rng, config_fingerprint(config));
    std::cout << metrics_to_json(report).dump(2) << '\n';
    return 0;
}

int run_ablate(const DataOptions& data, const TrainOptions& opts, int seeds, const std::string& out) {
    const auto ds = data.load();
    const auto config = opts.resolve();
    std::vector<std::uint64_t> seed_list;
    for (int i = 0; i < seeds; ++i) seed_list.push_back(config.seed + static_cast<std::uint64_t>(i));
    const auto rows = run_ablation(config, ds, seed_list, [](const std::string& msg) { std::cerr << msg << '\n'; });
    write_ablation_table(std::cout, rows, ds.ontology);
    if (!out.empty()) {
        std::ofstream f(out);
        if (!f) throw Error("cannot write " + out);
        for (const auto& r : rows) f << ablation_to_json(r).dump() << '\n';
    }
    return 0;
}

int run_chat(const LanguageOptions& lang, const std::string& bundle_path) {
    auto bundle = std::make_shared<const PolicyBundle>(load_bundle(bundle_path));
    DiagnosisService service(bundle, lang.load_lexicon(bundle->ontology), lang.load_templates());
    std::cout << "Describe the symptoms (empty line quits).\n> " << std::flush;
    std::string line;
    std::optional<std::string> id;
    while (std::getline(std::cin, line)) {
        if (line.empty()) break;
        const auto reply = id ? service.post_message(*id, line) : service.create(line);
        id = reply.id;
        std::cout << "agent: " << reply.agent_utterance << '\n';
        if (reply.status != SessionStatus::open) {
            std::cout << "[session " << to_string(reply.status);
            if (reply.diagnosis) std::cout << ", diagnosis: " << *reply.diagnosis;
            std::cout << "]\n";
            return 0;
        }
        std::cout << "> " << std::flush;
    }
    return 0;
}

int run_serve(const LanguageOptions& lang, const std::string& bundle_path, const std::string& host, int port,
              const std::string& sessions_log) {
    auto bundle = std::make_shared<const PolicyBundle>(load_bundle(bundle_path));
    std::optional<std::filesystem::path> log;
    if (!sessions_log.empty()) log = sessions_log;
    DiagnosisService service(bundle, lang.load_lexicon(bundle->ontology), lang.load_templates(), 0, log);
    httplib::Server server;
    register_routes(server, service);
    std::cerr << "listening on " << host << ':' << port << '\n';
    if (!server.listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
    return 0;
}

int run_inspect(const DataOptions& data, const std::string& bundle_path, bool actions, bool stats) {
    std::optional<Dataset> ds;
    if (bundle_path.empty()) ds = data.load();
    const Ontology ontology = ds ? ds->ontology : load_bundle(bundle_path).ontology;
    if (actions) write_action_table(std::cout, ontology);
    if (stats) {
        if (!ds) throw Error("--stats needs --data or --synthetic");
        const auto k = compute_knowledge_stats(ds->train, ds->ontology);
        json out{{"ontology_hash", ontology.hash_hex()}, {"train", ds->train.size()}, {"test", ds->test.size()}};
        for (std::size_t s = 0; s < ontology.num_symptoms(); ++s) {
            json row = json::object();
            for (std::size_t d = 0; d < ontology.num_diseases(); ++d)
                if (k.p_dis_given_sym(d, s) > 0) row[ontology.diseases()[d]] = k.p_dis_given_sym(d, s);
            out["p_dis_given_sym"][ontology.symptoms()[s]] = row;
            out["p_sym_prior"][ontology.symptoms()[s]] = k.p_sym_prior(s);
        }
        std::cout << out.dump(2) << '\n';
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Knowledge-routed relational dialogue agent for symptom checking"};
    app.require_subcommand(1);

    DataOptions data;
    TrainOptions train_opts;
    LanguageOptions lang;
    std::string out, report, bundle_path, split = "test", host = "127.0.0.1", sessions_log;
    std::size_t episodes = 0;
    bool episodes_given = false;
    int seeds = 3, port = 8080;
    bool actions = false, stats = false;
    std::uint64_t synth_seed = 2024;
    std::size_t synth_train = 200, synth_test = 200;

    auto* train = app.add_subcommand("train", "train a policy and write a bundle");
    data.add(train);
    train_opts.add(train);
    train->add_option("--out", out, "bundle path (.json or .bin)")->required();
    train->add_option("--report", report, "per-epoch JSON lines (default stdout)");

    auto* eval = app.add_subcommand("evaluate", "greedy evaluation of a bundle");
    data.add(eval);
    train_opts.add(eval);
    lang.add(eval);
    eval->add_option("--bundle", bundle_path, "bundle path")->required();
    eval->add_option("--split", split, "train or test")->check(CLI::IsMember({"train", "test"}));
    auto* episodes_opt = eval->add_option("--episodes", episodes, "episodes (default: split size)");

    auto* ablate = app.add_subcommand("ablate", "train every component variant and compare");
    data.add(ablate);
    train_opts.add(ablate);
    ablate->add_option("--seeds", seeds, "number of consecutive seeds starting at --seed");
    ablate->add_option("--out", out, "JSON lines with one row per variant");

    auto* chat = app.add_subcommand("chat", "talk to a bundle in the terminal");
    lang.add(chat);
    chat->add_option("--bundle", bundle_path, "bundle path")->required();

    auto* serve = app.add_subcommand("serve", "run the HTTP session service");
    lang.add(serve);
    serve->add_option("--bundle", bundle_path, "bundle path")->required();
    serve->add_option("--host", host, "bind address");
    serve->add_option("--port", port, "port");
    serve->add_option("--sessions-log", sessions_log, "append-only session log (JSON lines)");

    auto* inspect = app.add_subcommand("inspect", "print the action table or dataset statistics");
    data.add(inspect);
    inspect->add_option("--bundle", bundle_path, "read the ontology from a bundle");
    inspect->add_flag("--actions", actions, "TSV of index, kind, identifier");
    inspect->add_flag("--stats", stats, "knowledge statistics as JSON");

    auto* synth = app.add_subcommand("synth", "write the generated corpus as a goal file");
    synth->add_option("--out", out, "goal file path")->required();
    synth->add_option("--seed", synth_seed, "generator seed");
    synth->add_option("--train", synth_train, "training goals");
    synth->add_option("--test", synth_test, "test goals");

    CLI11_PARSE(app, argc, argv);
    episodes_given = episodes_opt->count() > 0;

    try {
        if (*train) return run_train(data, train_opts, out, report);
        if (*eval) {
            if (!episodes_given) {
                const auto ds = data.load();
                episodes = split == "train" ? ds.train.size() : ds.test.size();
            }
            return run_evaluate(data, train_opts, lang, bundle_path, split, episodes);
        }
        if (*ablate) return run_ablate(data, train_opts, seeds, out);
        if (*chat) return run_chat(lang, bundle_path);
        if (*serve) return run_serve(lang, bundle_path, host, port, sessions_log);
        if (*inspect) {
            if (!actions && !stats) actions = true;
            return run_inspect(data, bundle_path, actions, stats);
        }
        if (*synth) {
            SyntheticSpec spec;
            spec.seed = synth_seed;
            spec.train = synth_train;
            spec.test = synth_test;
            save_dataset(make_synthetic_dataset(spec), out);
            return 0;
        }
    } catch (const CLI::Error& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
