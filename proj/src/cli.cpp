// Copyright (C) 2026 The mmdg Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmdg/cli.hpp"

#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <httplib.h>

#include "mmdg/dataset_io.hpp"
#include "mmdg/eval_metrics.hpp"
#include "mmdg/eval_service.hpp"
#include "mmdg/mock_backends.hpp"
#include "mmdg/orchestrator.hpp"

namespace mmdg {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Pipeline flags shared by augment and ablate; only flags actually given
// override the file and environment.
struct PipelineFlags {
    std::string config;
    std::string strategy;
    bool no_qa = false;
    std::uint64_t seed = 0;
    int parallelism = 1;
    std::string mock_fixture;

    CLI::Option* seed_opt = nullptr;
    CLI::Option* parallelism_opt = nullptr;

    void add(CLI::App& app, bool with_strategy) {
        app.add_option("--config", config, "JSON config file")->check(CLI::ExistingFile);
        if (with_strategy) {
            app.add_option("--strategy", strategy, "scanner prompt: zs, fs or cot (default cot)")
                ->check(CLI::IsMember({"zs", "fs", "cot"}));
            app.add_flag("--no-qa", no_qa, "accept the first generated image without the quality gate");
        }
        seed_opt = app.add_option("--seed", seed, "run seed");
        parallelism_opt = app.add_option("--parallelism", parallelism, "concurrent dialogues")
                              ->check(CLI::PositiveNumber);
        app.add_option("--mock-fixture", mock_fixture, "mock backend fixture (mock mode)")
            ->check(CLI::ExistingFile);
    }

    PipelineConfig resolve(const EnvLookup& env) const {
        auto cfg = load_config(config.empty() ? std::nullopt : std::optional<fs::path>(config), env);
        if (!strategy.empty()) cfg.prompt_strategy = parse_strategy(strategy);
        if (no_qa) cfg.qa_enabled = false;
        if (seed_opt != nullptr && seed_opt->count() > 0) cfg.seed = seed;
        if (parallelism_opt != nullptr && parallelism_opt->count() > 0) cfg.parallelism = parallelism;
        if (!mock_fixture.empty()) cfg.backends.mock_fixture = mock_fixture;
        cfg.validate();
        return cfg;
    }
};

void print_run_summary(std::ostream& out, const RunReport& r) {
    out << "dialogues: " << r.dialogues_in_input << " read, " << r.dialogues_processed << " augmented, "
        << r.dialogues_skipped << " already done, " << r.failures.size() << " failed\n"
        << "images: " << r.images_accepted << " accepted, " << r.dropped_qa << " dropped by QA, "
        << r.dropped_parse << " dropped after feedback parse\n"
        << "generation calls: " << r.generation_calls << ", backend errors: " << r.backend_errors << '\n';
}

int cmd_augment(const PipelineFlags& flags, const std::string& input, const std::string& out_dir,
                std::ostream& out, std::ostream& err, const EnvLookup& env) {
    const auto cfg = flags.resolve(env);
    auto deps = load_pipeline_deps(cfg);
    const auto report = run_corpus(input, out_dir, cfg, deps);
    print_run_summary(out, report);
    for (const auto& f : report.failures) {
        err << "line " << f.line << (f.dialogue_id.empty() ? "" : " '" + f.dialogue_id + "'") << ": " << f.error
            << '\n';
    }
    return report.partial_failure() ? kExitPartial : kExitOk;
}

fs::path parent_dir(const fs::path& file) {
    auto p = fs::absolute(file).parent_path();
    return p.empty() ? fs::path(".") : p;
}

EvalReport evaluate_files(const fs::path& pred, const fs::path& gold, EmbedClient* embed, std::ostream& err) {
    const auto p = read_corpus(pred);
    const auto g = read_corpus(gold);
    for (const auto& d : p.diagnostics) err << pred.string() << ":" << d.line << ": " << d.message << '\n';
    for (const auto& d : g.diagnostics) err << gold.string() << ":" << d.line << ": " << d.message << '\n';
    return evaluate(p, g, parent_dir(pred), parent_dir(gold), embed);
}

int cmd_evaluate(const PipelineFlags& flags, const std::string& pred, const std::string& gold,
                 const std::string& report_path, const std::string& label, std::ostream& out, std::ostream& err,
                 const EnvLookup& env) {
    const auto cfg = flags.resolve(env);
    auto backends = make_backends(cfg);
    const auto report = evaluate_files(pred, gold, backends.embed.get(), err);
    const std::vector<std::pair<std::string, EvalReport>> rows = {{label, report}};
    out << render_table("Model", rows, TableShape::Results);
    for (const auto& d : report.diagnostics) err << d << '\n';
    if (!report_path.empty()) {
        json j = eval_json(report);
        j["label"] = label;
        write_file_atomic(report_path, j.dump(2) + "\n");
    }
    return kExitOk;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

int cmd_ablate(const PipelineFlags& flags, const std::string& input_arg, const std::string& gold,
               const std::string& out_dir, const std::string& strategies_arg, const std::string& qa_arg,
               std::ostream& out, std::ostream& err, const EnvLookup& env) {
    const auto base = flags.resolve(env);
    const auto strategies = split_list(strategies_arg);
    const auto qa_modes = split_list(qa_arg);
    if (strategies.empty() || qa_modes.empty()) {
        throw Error(ErrorCode::ConfigError, "--strategies and --qa need at least one value");
    }
    const fs::path input = input_arg.empty() ? fs::path(gold) : fs::path(input_arg);

    std::vector<std::pair<std::string, EvalReport>> rows;
    json runs = json::array();
    bool partial = false;
    for (const auto& s : strategies) {
        for (const auto& q : qa_modes) {
            if (q != "on" && q != "off") throw Error(ErrorCode::ConfigError, "--qa values must be on or off");
            auto cfg = base;
            cfg.prompt_strategy = parse_strategy(s);
            cfg.qa_enabled = q == "on";
            const std::string name = std::string(short_name(cfg.prompt_strategy)) + "-qa-" + q;
            const fs::path run_dir = fs::path(out_dir) / name;
            auto deps = load_pipeline_deps(cfg);
            const auto run = run_corpus(input, run_dir, cfg, deps);
            partial = partial || run.partial_failure();
            auto report = evaluate_files(run_dir / "dataset.jsonl", gold, deps.backends.embed.get(), err);

            std::string label;
            if (strategies.size() > 1) {
                label = short_name(cfg.prompt_strategy);
                for (auto& c : label) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
                if (label == "COT") label = "CoT";
            }
            if (qa_modes.size() > 1) label += std::string(label.empty() ? "" : " ") + "QA " + q;
            if (label.empty()) label = name;
            runs.push_back(json{{"label", label}, {"dir", run_dir.string()}, {"run", report_json(run)},
                                {"eval", eval_json(report)}});
            rows.emplace_back(label, std::move(report));
        }
    }
    const bool prompt_table = qa_modes.size() == 1 && strategies.size() > 1;
    const auto shape = prompt_table ? TableShape::Prompt : TableShape::Results;
    const std::string text = render_table(prompt_table ? "Prompt" : "Run", rows, shape);
    out << text;
    write_file_atomic(fs::path(out_dir) / "ablation.txt", text);
    write_file_atomic(fs::path(out_dir) / "ablation.json",
                      json{{"table", table_json(rows, shape)}, {"runs", runs}}.dump(2) + "\n");
    return partial ? kExitPartial : kExitOk;
}

int cmd_stats(const std::string& input, bool as_json, std::ostream& out) {
    const auto s = corpus_stats(input);
    out << (as_json ? stats_json(s) + "\n" : render_stats(s));
    return kExitOk;
}

int listen(httplib::Server& server, const std::string& host, int port, const std::string& what, std::ostream& out) {
    const int bound = port == 0 ? server.bind_to_any_port(host) : (server.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error(ErrorCode::IOError, "cannot bind " + host + ":" + std::to_string(port));
    out << what << " listening on http://" << host << ":" << bound << std::endl;
    server.listen_after_bind();
    return kExitOk;
}

int cmd_serve_eval(const std::string& pairs, const std::string& log, const std::string& host, int port,
                   std::uint64_t seed, const std::string& ui, std::ostream& out) {
    EvalService service({pairs, log, seed});
    httplib::Server server;
    service.mount(server, ui.empty() ? std::nullopt : std::optional<fs::path>(ui));
    out << service.pairs().size() << " pairs loaded\n";
    if (service.skipped_log_lines() > 0) {
        out << "skipped " << service.skipped_log_lines() << " unreadable line(s) in " << log << "\n";
    }
    return listen(server, host, port, "eval service", out);
}

int cmd_mock_backends(const std::string& fixture, std::size_t dim, const std::string& host, int port,
                      std::ostream& out) {
    auto fx = fixture.empty() ? MockFixture{} : MockFixture::load(fixture);
    if (dim > 0) fx.dim = dim;
    auto mocks = std::make_shared<MockBackends>(std::move(fx));
    httplib::Server server;
    mount_mock_routes(server, mocks);
    return listen(server, host, port, "mock backends", out);
}

const CLI::App* deepest_parsed(const CLI::App& app) {
    for (const auto* sub : app.get_subcommands()) {
        if (sub->parsed()) return deepest_parsed(*sub);
    }
    return &app;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const EnvLookup& env) {
    CLI::App app{"Turns text-only dialogue corpora into image-augmented multimodal datasets.", "mmdg"};
    app.require_subcommand(1);
    app.get_formatter()->column_width(34);

    PipelineFlags augment_flags, evaluate_flags, ablate_flags;
    std::string input, out_dir, pred, gold, report_path, label = "mmdg", strategies = "zs,fs,cot", qa = "on";
    std::string pairs, log = "annotations.jsonl", host = "127.0.0.1", ui, fixture;
    int port = 8080;
    std::uint64_t eval_seed = 0;
    std::size_t dim = 0;
    bool stats_json_flag = false;

    auto* augment = app.add_subcommand("augment", "augment a JSON-lines dialogue corpus with generated images");
    augment->add_option("--input", input, "input corpus (JSON lines)")->required()->check(CLI::ExistingFile);
    augment->add_option("--out", out_dir, "output dataset directory")->required();
    augment_flags.add(*augment, true);

    auto* evaluate = app.add_subcommand("evaluate", "score an augmented dataset against a gold corpus");
    evaluate->add_option("--pred", pred, "augmented dataset.jsonl")->required()->check(CLI::ExistingFile);
    evaluate->add_option("--gold", gold, "gold corpus with gold_image fields")->required()->check(CLI::ExistingFile);
    evaluate->add_option("--out", report_path, "write the report as JSON");
    evaluate->add_option("--label", label, "row label")->capture_default_str();
    evaluate_flags.add(*evaluate, false);

    auto* ablate = app.add_subcommand("ablate", "run prompt-strategy and QA ablations and tabulate them");
    ablate->add_option("--gold", gold, "gold corpus with gold_image fields")->required()->check(CLI::ExistingFile);
    ablate->add_option("--input", input, "corpus to augment (default: the gold corpus)")->check(CLI::ExistingFile);
    ablate->add_option("--out", out_dir, "directory for per-run datasets and the report")->required();
    ablate->add_option("--strategies", strategies, "comma-separated subset of zs,fs,cot")->capture_default_str();
    ablate->add_option("--qa", qa, "comma-separated subset of on,off")->capture_default_str();
    ablate_flags.add(*ablate, false);

    auto* stats = app.add_subcommand("stats", "dialogue and image counts of a corpus or dataset");
    stats->add_option("--input", input, "corpus or dataset.jsonl")->required()->check(CLI::ExistingFile);
    stats->add_flag("--json", stats_json_flag, "print JSON instead of a table");

    auto* serve = app.add_subcommand("serve-eval", "serve blinded pairs for human evaluation");
    serve->add_option("--pairs", pairs, "directory holding pairs.jsonl and images")
        ->required()
        ->check(CLI::ExistingDirectory);
    serve->add_option("--log", log, "append-only annotation log")->capture_default_str();
    serve->add_option("--host", host, "bind address")->capture_default_str();
    serve->add_option("--port", port, "port, 0 picks a free one")->capture_default_str();
    serve->add_option("--seed", eval_seed, "seed for left/right placement")->capture_default_str();
    serve->add_option("--ui", ui, "static annotation UI directory")->check(CLI::ExistingDirectory);

    auto* mock = app.add_subcommand("mock-backends", "serve the deterministic mock chat, image and embedding APIs");
    mock->add_option("--fixture", fixture, "mock fixture JSON")->check(CLI::ExistingFile);
    mock->add_option("--dim", dim, "embedding dimension (default: fixture or 512)");
    mock->add_option("--host", host, "bind address")->capture_default_str();
    mock->add_option("--port", port, "port, 0 picks a free one")->capture_default_str();

    std::vector<std::string> storage;
    storage.reserve(args.size() + 1);
    storage.emplace_back("mmdg");
    storage.insert(storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : storage) argv.push_back(s.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        const auto* target = deepest_parsed(app);
        out << (target == &app ? app.help("", CLI::AppFormatMode::All) : target->help());
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << deepest_parsed(app)->help();
        return kExitFatal;
    }

    try {
        if (augment->parsed()) return cmd_augment(augment_flags, input, out_dir, out, err, env);
        if (evaluate->parsed()) {
            return cmd_evaluate(evaluate_flags, pred, gold, report_path, label, out, err, env);
        }
        if (ablate->parsed()) return cmd_ablate(ablate_flags, input, gold, out_dir, strategies, qa, out, err, env);
        if (stats->parsed()) return cmd_stats(input, stats_json_flag, out);
        if (serve->parsed()) return cmd_serve_eval(pairs, log, host, port, eval_seed, ui, out);
        if (mock->parsed()) return cmd_mock_backends(fixture, dim, host, port, out);
    } catch (const Error& e) {
        err << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
        return kExitFatal;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFatal;
    }
    return kExitFatal;
}

}  // namespace mmdg
