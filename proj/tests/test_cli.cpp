#include "support.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include <sys/wait.h>

using json = nlohmann::json;
using testsupport::TempDir;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& f) {
    std::ifstream in(f, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Runs the CLI from `dir` with the given argument string.
Run cli(const TempDir& dir, const std::string& args) {
    const auto o = dir / "stdout.txt", e = dir / "stderr.txt";
    const std::string cmd = "cd '" + dir.path().string() + "' && '" SITSGRAPH_CLI_PATH "' " + args + " > '" +
                            o.string() + "' 2> '" + e.string() + "'";
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(o);
    r.err = slurp(e);
    return r;
}

json read_json(const fs::path& f) { return json::parse(slurp(f)); }

}  // namespace

TEST_CASE("version and usage errors") {
    TempDir d("cli");
    const auto v = cli(d, "--version");
    CHECK(v.code == 0);
    CHECK(v.out.find("0.1.0") != std::string::npos);
    CHECK(cli(d, "").code == 2);
    CHECK(cli(d, "frobnicate").code == 2);
    CHECK(cli(d, "segment --cube x").code == 2);  // --out missing
    CHECK(cli(d, "synth --out c --seed notanumber").code == 2);
    CHECK(cli(d, "synth --out c --kind lunar").code == 2);
}

TEST_CASE("synth is deterministic per seed") {
    TempDir d("cli");
    REQUIRE(cli(d, "synth --seed 3 --H 16 --W 16 --out a").code == 0);
    REQUIRE(cli(d, "synth --seed 3 --H 16 --W 16 --out b").code == 0);
    REQUIRE(cli(d, "synth --seed 4 --H 16 --W 16 --out c").code == 0);
    CHECK(slurp(d / "a/cube.bin") == slurp(d / "b/cube.bin"));
    CHECK(slurp(d / "a/labels_t0.bin") == slurp(d / "b/labels_t0.bin"));
    CHECK(slurp(d / "a/cube.bin") != slurp(d / "c/cube.bin"));
    const auto meta = read_json(d / "a/meta.json");
    CHECK(meta["H"] == 16);
    CHECK(meta["T"] == 12);
}

TEST_CASE("data errors exit 1") {
    TempDir d("cli");
    const auto r = cli(d, "segment --cube nowhere --out s");
    CHECK(r.code == 1);
    CHECK(r.err.find("MissingFile") != std::string::npos);

    REQUIRE(cli(d, "synth --kind context --seed 1 --out cube").code == 0);
    CHECK(cli(d, "segment --cube cube --bands NIR --out s").code == 1);  // unknown band
    CHECK(cli(d, "segment --cube cube --algo slic --segments 0 --out s").code == 1);
}

TEST_CASE("edge spec validation") {
    TempDir d("cli");
    REQUIRE(cli(d, "synth --kind context --seed 1 --out cube").code == 0);
    REQUIRE(cli(d, "segment --cube cube --scale 1 --min-size 4 --out seg").code == 0);
    REQUIRE(cli(d, "features --cube cube --seg seg --out feat").code == 0);
    const std::string base = "build-graph --cube cube --seg seg --features feat/features.csv --out g ";
    for (const char* bad : {"--st periodic:0", "--st periodic:1", "--st periodic", "--st sim:0", "--st sim:x",
                            "--st warp", "--spatial knn:0", "--spatial eps:-1", "--spatial adjacency:2"}) {
        INFO(bad);
        CHECK(cli(d, base + bad).code == 2);
        CHECK_FALSE(fs::exists(d / "g/graph.json"));
    }
    // a lag as long as the series links nothing
    REQUIRE(cli(d, base + "--st periodic:2").code == 0);
    for (const auto& e : read_json(d / "g/graph.json")["edges"]) CHECK(e["kind"] != "ST");
    fs::remove(d / "g/graph.json");
    CHECK(cli(d, base + "--st overlap --st sim:2 --spatial knn:3").code == 0);
    CHECK(fs::exists(d / "g/graph.json"));
}

TEST_CASE("graph tools and run_config replay") {
    TempDir d("cli");
    REQUIRE(cli(d, "synth --kind context --seed 2 --T 3 --out cube").code == 0);
    REQUIRE(cli(d, "segment --cube cube --scale 1 --min-size 4 --out seg").code == 0);
    REQUIRE(cli(d, "features --cube cube --seg seg --out feat").code == 0);
    REQUIRE(cli(d, "build-graph --cube cube --seg seg --features feat/features.csv --st overlap --out g").code == 0);

    const auto stats = cli(d, "stats --graph g/graph.json --seg seg --out st");
    REQUIRE(stats.code == 0);
    CHECK(stats.out.find("compression ratio") != std::string::npos);
    CHECK(stats.out.find("events continuation") != std::string::npos);
    const auto sj = read_json(d / "st/stats.json");
    CHECK(sj["n_nodes"] == 192);
    CHECK(sj["events"]["continuation"] == 64);  // the middle date
    CHECK(sj.contains("measured_ratio"));

    REQUIRE(cli(d, "events --graph g/graph.json --out ev").code == 0);
    CHECK(slurp(d / "ev/events.csv").rfind("node,event,t\n", 0) == 0);
    REQUIRE(cli(d, "mine --graph g/graph.json --feature 0 --bins 2 --minsup 2 --maxlen 2 --out mine").code == 0);
    CHECK(slurp(d / "mine/patterns.csv").rfind("pattern,support\n", 0) == 0);
    for (const char* f : {"json", "graphml", "dot"}) {
        REQUIRE(cli(d, std::string("export --graph g/graph.json --format ") + f + " --out ex").code == 0);
        CHECK(fs::exists(d / (std::string("ex/graph.") + f)));
    }
    CHECK(cli(d, "export --graph g/graph.json --format svg --out ex").code == 2);

    const auto rc = read_json(d / "g/run_config.json");
    CHECK(rc["command"] == json::array({"build-graph"}));
    CHECK(rc["args"]["st"] == json::array({"overlap"}));
    CHECK(rc["args"]["spatial"] == "adjacency");
    const auto first = slurp(d / "g/graph.json");
    fs::remove(d / "g/graph.json");
    REQUIRE(cli(d, "replay g/run_config.json").code == 0);
    CHECK(slurp(d / "g/graph.json") == first);

    std::ofstream(d / "bad.json") << R"({"command": ["stats"], "args": {}, "extra": 1})";
    CHECK(cli(d, "replay bad.json").code == 2);
}

TEST_CASE("classifier pipeline") {
    TempDir d("cli");
    for (int s : {1, 2}) {
        const std::string c = "c" + std::to_string(s);
        REQUIRE(cli(d, "synth --kind context --seed " + std::to_string(s) + " --out " + c).code == 0);
        REQUIRE(cli(d, "segment --cube " + c + " --scale 1 --min-size 4 --out " + c + "/seg").code == 0);
        REQUIRE(cli(d, "features --cube " + c + " --seg " + c + "/seg --out " + c + "/feat").code == 0);
        REQUIRE(cli(d, "build-graph --cube " + c + " --seg " + c + "/seg --features " + c +
                           "/feat/features.csv --st overlap --out " + c + "/g")
                    .code == 0);
    }
    const std::string train = "train --graph c1/g/graph.json --hidden 8 --layers 2 --epochs 3 --lr 1e-3 --seed 4 ";
    REQUIRE(cli(d, "--threads 1 " + train + "--out m1").code == 0);
    REQUIRE(cli(d, "--threads 1 " + train + "--out m2").code == 0);
    CHECK(slurp(d / "m1/model.ckpt") == slurp(d / "m2/model.ckpt"));
    CHECK(cli(d, "train --graph c1/g/graph.json --conv gatv2 --out m3").code == 2);

    REQUIRE(cli(d, "eval --model m1/model.ckpt --graph c2/g/graph.json --seg c2/seg --cube c2 --out ev").code == 0);
    const auto ev = read_json(d / "ev/eval.json");
    CHECK(ev.contains("miou"));
    CHECK(ev.contains("oa"));
    CHECK(slurp(d / "ev/iou.csv").find("mIoU") != std::string::npos);

    REQUIRE(cli(d, "predict --model m1/model.ckpt --graph c2/g/graph.json --seg c2/seg --out pr").code == 0);
    CHECK(fs::file_size(d / "pr/pred_t0.bin") == 32 * 32 * 4);
}

TEST_CASE("forecast train and predict") {
    TempDir d("cli");
    std::string cubes;
    for (int s : {1, 2, 3}) {
        const std::string c = "s" + std::to_string(s);
        REQUIRE(cli(d, "synth --seed " + std::to_string(s) + " --T 8 --H 12 --W 12 --out " + c).code == 0);
        cubes += " --cube " + c;
    }
    const auto r = cli(d, "forecast train" + cubes +
                              " --input-len 3 --segments 9 --hidden 8 --rounds 1 --epochs 2 --lr 1e-3 --out fm");
    REQUIRE(r.code == 0);
    CHECK(fs::exists(d / "fm/model.ckpt"));
    CHECK(cli(d, "forecast train --cube s1 --input-len 3 --epochs 1 --out one").code == 1);  // one site

    REQUIRE(cli(d, "forecast predict --checkpoint fm/model.ckpt --cube s1 --target-index 5 --out p/x.bin").code == 0);
    CHECK(fs::file_size(d / "p/x.bin") == 12 * 12 * 4);
    const auto m = read_json(d / "p/x.json");
    for (const char* k : {"model", "persistence", "average"}) {
        INFO(k);
        CHECK(m[k].contains("rmse"));
    }
    REQUIRE(cli(d, "forecast predict --checkpoint fm/model.ckpt --cube s2 --out q/x.bin").code == 0);
    CHECK(fs::file_size(d / "q/x.bin") == 12 * 12 * 4);
    CHECK(cli(d, "forecast predict --checkpoint fm/model.ckpt --cube s1 --target-index 2 --out p/y.bin").code != 0);
}
