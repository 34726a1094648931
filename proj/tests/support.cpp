// Copyright (C) 2026 The mmdg Authors
// SPDX-License-Identifier: Apache-2.0

#include "support.hpp"

#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "mmdg/cli.hpp"
#include "mmdg/prompts.hpp"
#include "mmdg/serialization.hpp"

namespace mmdg::test {

using json = nlohmann::json;

TempDir::TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            ("mmdg-test-" + std::to_string(rd()) + "-" + std::to_string(counter.fetch_add(1)));
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

fs::path source_dir() { return MMDG_SOURCE_DIR; }
fs::path prompts_dir() { return source_dir() / "prompts"; }
fs::path tool_path() { return MMDG_TOOL_PATH; }

void write_text(const fs::path& path, std::string_view text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Dialogue make_dialogue(std::string id, const std::vector<std::string>& texts) {
    Dialogue d;
    d.dialogue_id = std::move(id);
    for (std::size_t i = 0; i < texts.size(); ++i) {
        d.utterances.push_back(Utterance{i, i % 2 == 0 ? "A" : "B", texts[i], std::nullopt});
    }
    return d;
}

PipelineConfig mock_config() {
    PipelineConfig cfg;
    cfg.prompts_dir = prompts_dir();
    cfg.backends.mode = "mock";
    cfg.backends.backoff_ms = 1;
    return cfg;
}

std::string scanner_user_text(const Dialogue& d) {
    static const PromptAssets assets = PromptAssets::load(prompts_dir());
    return build_scanner_prompt(d, PromptStrategy::ZeroShot, assets).user_text;
}

std::string chat_key(const Dialogue& d) { return mock_chat_key(scanner_user_text(d)); }

std::string corpus_line(const Dialogue& d, const std::set<std::size_t>& gold) {
    Dialogue copy = d;
    for (auto& u : copy.utterances) {
        if (gold.count(u.index)) u.gold_image = "gold/" + d.dialogue_id + "_" + std::to_string(u.index) + ".png";
    }
    return json(copy).dump();
}

ChatResponse CountingChat::complete(const ChatRequest& req) {
    ++calls;
    if (req.prompt_kind == "feedback") ++feedback_calls;
    if (before) before(req);
    return inner_->complete(req);
}

ImagePayload CountingImage::generate(const ImageRequest& req) {
    ++calls;
    {
        std::lock_guard lock(mu_);
        requests_.push_back(req);
    }
    if (before) before(req);
    return inner_->generate(req);
}

std::vector<ImageRequest> CountingImage::requests() const {
    std::lock_guard lock(mu_);
    return requests_;
}

Harness make_harness(const PipelineConfig& cfg, MockFixture fixture) {
    fixture.dim = cfg.backends.embedding_dim;
    auto mocks = std::make_shared<MockBackends>(std::move(fixture));
    auto chat = std::make_shared<CountingChat>(mocks->chat());
    auto image = std::make_shared<CountingImage>(mocks->image());
    auto backends = wrap_backends(chat, image, mocks->embed(), cfg);
    SafetyConceptBank bank(cfg.safety_threshold);
    for (const auto& [label, text] : default_safety_concepts()) bank.add(label, backends.embed->embed_text(text));
    return Harness{mocks, chat, image,
                   PipelineDeps{std::move(backends), PromptAssets::load(prompts_dir()),
                                AestheticHead::axis_probe(cfg.backends.embedding_dim, 0), std::move(bank)}};
}

std::vector<Dialogue> fixture_dialogues() {
    return {
        make_dialogue("fx-01", {"I just got back from the lake, look at this view", "Stunning!",
                                "Thanks, the water was freezing"}),
        make_dialogue("fx-02", {"How was your weekend?", "Quiet. I cooked a huge pot of chili",
                                "Nice, send me the recipe"}),
        make_dialogue("fx-03", {"Here is my new desk setup", "Love the plants", "They survive somehow",
                                "Check out the lamp too"}),
        make_dialogue("fx-04", {"Did you finish the report?", "Almost, one more section", "Great"}),
        make_dialogue("fx-05", {"Made pancakes for the kids this morning", "Yum, blueberry?",
                                "Chocolate chip, here's a picture"}),
        make_dialogue("fx-06", {"My outfit for the wedding tonight", "So elegant!"}),
        make_dialogue("fx-07", {"Any plans for the holidays?", "Visiting family up north", "Sounds cozy"}),
        make_dialogue("fx-08", {"I painted the fence blue", "Bold choice", "The neighbors hate it",
                                "Post a photo please"}),
        make_dialogue("fx-09", {"We grew tomatoes on the balcony", "How many?", "About thirty so far"}),
        make_dialogue("fx-10", {"Bought a vintage camera at the flea market", "Does it still work?",
                                "Took this selfie with it", "Very retro"}),
    };
}

void write_corpus(const fs::path& path, const std::vector<Dialogue>& dialogues,
                  const std::map<std::string, std::set<std::size_t>>& gold) {
    std::string text;
    for (const auto& d : dialogues) {
        auto it = gold.find(d.dialogue_id);
        text += corpus_line(d, it == gold.end() ? std::set<std::size_t>{} : it->second) + "\n";
    }
    write_text(path, text);
}

namespace {

std::string tagged(const std::set<std::size_t>& picks, const Dialogue& d, bool reason_first) {
    std::string out;
    for (auto i : picks) {
        const std::string result =
            "<result>Utterance: " + std::to_string(i) + ": photo of " + d.utterances[i].text + "</result>";
        const std::string reason = "<reason>Utterance " + std::to_string(i) + " can be shown.</reason>";
        out += (reason_first ? reason + "\n" + result : result + "\n" + reason) + "\n";
    }
    return out;
}

}  // namespace

AblationFixture ablation_fixture() {
    AblationFixture f;
    const std::vector<std::string> ids = {"ab-0", "ab-1", "ab-2", "ab-3", "ab-4", "ab-5"};
    for (std::size_t k = 0; k < ids.size(); ++k) {
        std::vector<std::string> texts;
        for (std::size_t i = 0; i < 4; ++i) texts.push_back("dialogue " + std::to_string(k) + " turn " + std::to_string(i));
        f.dialogues.push_back(make_dialogue(ids[k], texts));
    }
    f.gold = {{"ab-0", {1}}, {"ab-1", {0, 2}}, {"ab-2", {3}}, {"ab-3", {}}, {"ab-4", {1, 3}}, {"ab-5", {2}}};
    const std::map<std::string, std::set<std::size_t>> few = {
        {"ab-0", {1}}, {"ab-1", {0, 3}}, {"ab-2", {}}, {"ab-3", {2}}, {"ab-4", {1}}, {"ab-5", {2}}};
    const std::map<std::string, std::set<std::size_t>> zero = {
        {"ab-0", {0}}, {"ab-1", {2}}, {"ab-2", {3}}, {"ab-3", {1}}, {"ab-4", {}}, {"ab-5", {}}};
    for (const auto& d : f.dialogues) {
        const auto key = chat_key(d);
        f.fixture.chat["chain_of_thought:" + key] = {tagged(f.gold.at(d.dialogue_id), d, true), 200};
        f.fixture.chat["few_shot:" + key] = {tagged(few.at(d.dialogue_id), d, false), 200};
        f.fixture.chat["zero_shot:" + key] = {tagged(zero.at(d.dialogue_id), d, false), 200};
    }
    f.fixture.default_clip = {0.25, 0.33};
    f.fixture.default_aesthetic = {0.55, 0.66};
    return f;
}

QaFixture qa_fixture() {
    QaFixture f;
    f.dialogues = {
        make_dialogue("qa-0", {"Rode a red bicycle to work", "Brave in this traffic"}),
        make_dialogue("qa-1", {"Lunch?", "Had a bowl of ramen downtown"}),
        make_dialogue("qa-2", {"The harbor was all fog this morning", "Spooky"}),
        make_dialogue("qa-3", {"The movie had a knife fight scene", "Yikes", "Then we had birthday cake"}),
    };
    f.gold = {{"qa-0", {0}}, {"qa-1", {1}}, {"qa-2", {0}}, {"qa-3", {0, 2}}};
    auto script = [&](const Dialogue& d, const std::vector<std::pair<std::size_t, std::string>>& picks) {
        std::string out;
        for (const auto& [i, desc] : picks) {
            out += "<result>Utterance: " + std::to_string(i) + ": " + desc + "</result>\n";
        }
        f.fixture.chat[chat_key(d)] = {out, 200};
    };
    script(f.dialogues[0], {{0, "a red bicycle"}});
    script(f.dialogues[1], {{1, "a bowl of ramen"}});
    script(f.dialogues[2], {{0, "a foggy harbor"}});
    script(f.dialogues[3], {{0, "a knife fight"}, {2, "a birthday cake"}});

    auto& img = f.fixture.images;
    img["a red bicycle"] = {0.15, 0.45, std::nullopt, 200};
    img["a bowl of ramen"] = {0.30, 0.60, std::nullopt, 200};
    img["a foggy harbor"] = {0.15, 0.45, std::nullopt, 200};
    img["a foggy harbor, clear photograph"] = {0.18, 0.40, std::nullopt, 200};
    img["a knife fight"] = {0.30, 0.60, std::string("graphic violence with blood and gore"), 200};
    img["a birthday cake"] = {0.28, 0.58, std::nullopt, 200};
    f.fixture.default_clip = {0.25, 0.33};
    f.fixture.default_aesthetic = {0.55, 0.66};
    return f;
}

fs::path write_mock_config(const fs::path& dir, const MockFixture& fixture) {
    write_text(dir / "fixture.json", fixture.dump());
    const json cfg{{"prompts_dir", prompts_dir().string()},
                   {"backends", {{"mode", "mock"}, {"mock_fixture", "fixture.json"}, {"backoff_ms", 1}}}};
    write_text(dir / "config.json", cfg.dump(2));
    return dir / "config.json";
}

ServerThread::ServerThread(httplib::Server& server)
    : server_(server), port_(server.bind_to_any_port("127.0.0.1")) {
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
}

ServerThread::~ServerThread() {
    server_.stop();
    thread_.join();
}

std::vector<std::string> exemplar_answers(const fs::path& asset) {
    std::vector<std::string> out;
    std::istringstream in(read_text(asset));
    std::string line;
    bool in_answer = false;
    while (std::getline(in, line)) {
        if (line.rfind("- query:", 0) == 0) {
            in_answer = false;
        } else if (line.find("answer: >") != std::string::npos) {
            in_answer = true;
            out.emplace_back();
        } else if (in_answer) {
            out.back() += line + "\n";
        }
    }
    return out;
}

std::string squeeze_spaces(std::string_view text) {
    std::string out;
    for (char c : text) {
        if (c == ' ' && (out.empty() || out.back() == ' ' || out.back() == '\n')) continue;
        if (c == '\n') {
            while (!out.empty() && out.back() == ' ') out.pop_back();
        }
        out += c;
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

ToolResult run_tool(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    ToolResult r;
    r.exit_code = run_cli(args, out, err, [](const std::string&) { return std::optional<std::string>{}; });
    r.out = out.str();
    r.err = err.str();
    return r;
}

}  // namespace mmdg::test
