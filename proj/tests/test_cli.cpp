// Copyright (C) 2026 The mmdg Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <map>
#include <sstream>

#include <json.hpp>

#include "mmdg/cli.hpp"
#include "mmdg/dataset_io.hpp"
#include "support.hpp"

using namespace mmdg;
namespace fs = std::filesystem;
using json = nlohmann::json;

TEST_CASE("top-level help matches the golden file") {
    const auto r = test::run_tool({"--help"});
    CHECK(r.exit_code == kExitOk);
    CHECK(r.out == test::read_text(test::source_dir() / "tests/golden/help.txt"));
}

TEST_CASE("usage errors exit with 2 and print subcommand help") {
    auto r = test::run_tool({"augment", "--input", test::source_dir().string() + "/CMakeLists.txt", "--out", "/tmp/x", "--bogus"});
    CHECK(r.exit_code == kExitFatal);
    CHECK(r.err.find("--bogus") != std::string::npos);
    CHECK(r.err.find("--input") != std::string::npos);
    CHECK(test::run_tool({}).exit_code == kExitFatal);
    CHECK(test::run_tool({"stats", "--input", "/nonexistent.jsonl"}).exit_code == kExitFatal);
    CHECK(test::run_tool({"ablate", "--gold", test::source_dir().string() + "/CMakeLists.txt", "--out", "/tmp/x",
                          "--strategies", "tot"})
              .exit_code == kExitFatal);
}

TEST_CASE("augment then stats on the written dataset") {
    test::TempDir dir;
    const auto fx = test::qa_fixture();
    test::write_corpus(dir / "in.jsonl", fx.dialogues);
    const auto cfg = test::write_mock_config(dir.path(), fx.fixture);

    auto r = test::run_tool({"augment", "--input", (dir / "in.jsonl").string(), "--out", (dir / "out").string(),
                             "--config", cfg.string()});
    INFO(r.err);
    CHECK(r.exit_code == kExitOk);
    CHECK(r.out.find("dialogues: 4 read, 4 augmented") != std::string::npos);
    CHECK(fs::exists(dir / "out/dataset.jsonl"));

    r = test::run_tool({"stats", "--input", (dir / "out/dataset.jsonl").string(), "--json"});
    CHECK(r.exit_code == kExitOk);
    const auto j = json::parse(r.out);
    CHECK(j["Total dialogues"] == 4);
    CHECK(j["Total images"] == 4);

    r = test::run_tool({"augment", "--input", (dir / "in.jsonl").string(), "--out", (dir / "out").string(),
                        "--config", cfg.string()});
    CHECK(r.out.find("4 already done") != std::string::npos);
}

TEST_CASE("augment reports partial failure with exit 1") {
    test::TempDir dir;
    const auto fx = test::qa_fixture();
    test::write_text(dir / "in.jsonl", test::corpus_line(fx.dialogues[0]) + "\n{broken\n");
    const auto cfg = test::write_mock_config(dir.path(), fx.fixture);
    const auto r = test::run_tool({"augment", "--input", (dir / "in.jsonl").string(), "--out",
                                   (dir / "out").string(), "--config", cfg.string()});
    CHECK(r.exit_code == kExitPartial);
    CHECK(r.err.find("line 2") != std::string::npos);
}

TEST_CASE("ablate writes a prompt table ordered as requested") {
    test::TempDir dir;
    const auto fx = test::ablation_fixture();
    test::write_corpus(dir / "gold.jsonl", fx.dialogues, fx.gold);
    const auto cfg = test::write_mock_config(dir.path(), fx.fixture);
    const auto r = test::run_tool({"ablate", "--gold", (dir / "gold.jsonl").string(), "--out",
                                   (dir / "abl").string(), "--config", cfg.string()});
    INFO(r.err);
    CHECK(r.exit_code == kExitOk);
    const auto zs = r.out.find("\nZS ");
    const auto fs_ = r.out.find("\nFS ");
    const auto cot = r.out.find("\nCoT ");
    REQUIRE(zs != std::string::npos);
    REQUIRE(fs_ != std::string::npos);
    REQUIRE(cot != std::string::npos);
    CHECK(zs < fs_);
    CHECK(fs_ < cot);
    CHECK(test::read_text(dir / "abl/ablation.txt") == r.out);
    const auto j = json::parse(test::read_text(dir / "abl/ablation.json"));
    CHECK(j["runs"].size() == 3);
    CHECK(fs::exists(dir / "abl/cot-qa-on/dataset.jsonl"));
}

TEST_CASE("evaluate prints a results row and writes JSON") {
    test::TempDir dir;
    const auto fx = test::ablation_fixture();
    test::write_corpus(dir / "gold.jsonl", fx.dialogues, fx.gold);
    const auto cfg = test::write_mock_config(dir.path(), fx.fixture);
    REQUIRE(test::run_tool({"augment", "--input", (dir / "gold.jsonl").string(), "--out", (dir / "out").string(),
                            "--config", cfg.string()})
                .exit_code == kExitOk);
    const auto r = test::run_tool({"evaluate", "--pred", (dir / "out/dataset.jsonl").string(), "--gold",
                                   (dir / "gold.jsonl").string(), "--config", cfg.string(), "--label", "mine",
                                   "--out", (dir / "report.json").string()});
    INFO(r.err);
    CHECK(r.exit_code == kExitOk);
    CHECK(r.out.find("\nmine ") != std::string::npos);
    const auto j = json::parse(test::read_text(dir / "report.json"));
    CHECK(j["label"] == "mine");
    CHECK(j["confusion"]["fn"] == 0);
    CHECK(j["confusion"]["fp"] == 0);
}

TEST_CASE("command-line flags override the environment") {
    test::TempDir dir;
    const auto fx = test::qa_fixture();
    test::write_corpus(dir / "in.jsonl", fx.dialogues);
    const auto cfg = test::write_mock_config(dir.path(), fx.fixture);
    const std::map<std::string, std::string> vars = {{"MMDG_QA", "on"}, {"MMDG_STRATEGY", "zs"}};
    const EnvLookup env = [&](const std::string& k) -> std::optional<std::string> {
        auto it = vars.find(k);
        if (it == vars.end()) return std::nullopt;
        return it->second;
    };
    std::ostringstream out, err;
    const int rc = run_cli({"augment", "--input", (dir / "in.jsonl").string(), "--out", (dir / "out").string(),
                            "--config", cfg.string(), "--no-qa", "--strategy", "cot"},
                           out, err, env);
    INFO(err.str());
    CHECK(rc == kExitOk);
    // Without the gate every scripted description is accepted on the first call.
    CHECK(out.str().find("images: 5 accepted, 0 dropped by QA") != std::string::npos);
    CHECK(out.str().find("generation calls: 5") != std::string::npos);
}

TEST_CASE("the shipped example runs offline") {
    test::TempDir dir;
    const auto example = test::source_dir() / "data/example";
    const auto r = test::run_tool({"augment", "--input", (example / "corpus.jsonl").string(), "--out",
                                   (dir / "out").string(), "--config", (example / "config.json").string()});
    INFO(r.err);
    CHECK(r.exit_code == kExitOk);
    CHECK(r.out.find("images: 3 accepted") != std::string::npos);
    const auto rows = read_corpus(dir / "out/dataset.jsonl").records;
    REQUIRE(rows.size() == 3);
    REQUIRE(rows[2].dialogue.attachments().size() == 2);
    CHECK(rows[2].dialogue.attachments()[0].attempts == 3);
    CHECK(rows[2].dialogue.attachments()[0].description == "I made my first sourdough loaf, clear photograph");
}
