#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out;
};

fs::path scratch() {
    const fs::path dir = fs::temp_directory_path() / "lanemap_cli_test";
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Run run(const std::string& args) {
    const fs::path out = scratch() / "stdout.txt";
    const std::string cmd = std::string("\"") + LANEMAP_CLI + "\" " + args + " > \"" + out.string() + "\" 2> \"" +
                            (scratch() / "stderr.txt").string() + "\"";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out)};
}

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("help lists the subcommands and flags") {
    const Run r = run("--help");
    CHECK(r.code == 0);
    for (const std::string name : {"stats", "rasterize", "split", "encode", "decode", "match", "build", "eval",
                                   "synth", "train-scorer", "ablate-k", "e2e-oracle"}) {
        CHECK_MESSAGE(r.out.find(name) != std::string::npos, name);
    }
    const Run sub = run("e2e-oracle --help");
    CHECK(sub.code == 0);
    for (const std::string flag : {"--threads", "--scenes", "--scorer", "--config", "--set"}) {
        CHECK_MESSAGE(sub.out.find(flag) != std::string::npos, flag);
    }
}

TEST_CASE("exit codes") {
    CHECK(run("stats /nonexistent/lanemap").code == 2);
    CHECK(run("stats --bogus x").code == 1);
    CHECK(run("e2e-oracle --scenes 1 --set match.nope=1").code == 1);
    CHECK(run("e2e-oracle --scenes 1 --set match.k=0").code == 1);
    CHECK(run("e2e-oracle --scenes 1 --config /nonexistent/x.ini").code == 2);
}

TEST_CASE("stats on an empty directory prints the header") {
    const fs::path empty = scratch() / "empty";
    fs::remove_all(empty);
    fs::create_directories(empty);
    const Run r = run("stats \"" + empty.string() + "\"");
    CHECK(r.code == 0);
    CHECK(lines(r.out) == 1);
    CHECK(r.out.find("lanes") != std::string::npos);
}

TEST_CASE("stats on the sample annotation") {
    const Run r = run("stats --csv \"" LANEMAP_TEST_DATA "/sample_annotation.json\"");
    CHECK(r.code == 0);
    CHECK(r.out.find(",2,7,") != std::string::npos);
}

TEST_CASE("synth, match, build and eval round trip") {
    const fs::path dir = scratch() / "scenes";
    fs::remove_all(dir);
    REQUIRE(run("synth --count 3 --seed 4 --out \"" + dir.string() + "\"").code == 0);
    CHECK(fs::exists(dir / "split.tsv"));
    const fs::path scene = dir / "synth_4_0.json";
    REQUIRE(fs::exists(scene));
    const fs::path csv = scratch() / "match.csv";
    REQUIRE(run("match --scene \"" + scene.string() + "\" --scorer oracle --out \"" + csv.string() + "\"").code == 0);
    const fs::path pred = scratch() / "pred.json";
    REQUIRE(run("build \"" + csv.string() + "\" --reference \"" + scene.string() + "\" --out \"" + pred.string() +
                "\"")
                .code == 0);
    const Run e = run("eval --csv --pred \"" + pred.string() + "\" --gt \"" + scene.string() + "\"");
    CHECK(e.code == 0);
    CHECK(e.out == "threshold,precision,recall,f1\n2,1,1,1\n5,1,1,1\n10,1,1,1\n");
}

TEST_CASE("synth output is byte identical across runs") {
    const fs::path a = scratch() / "det_a", b = scratch() / "det_b";
    fs::remove_all(a);
    fs::remove_all(b);
    REQUIRE(run("synth --count 2 --seed 9 --out \"" + a.string() + "\"").code == 0);
    REQUIRE(run("synth --count 2 --seed 9 --out \"" + b.string() + "\"").code == 0);
    std::size_t files = 0;
    for (const auto& entry : fs::directory_iterator(a)) {
        CHECK(slurp(entry.path()) == slurp(b / entry.path().filename()));
        ++files;
    }
    CHECK(files == 7);
}

TEST_CASE("e2e report is deterministic across thread counts") {
    const Run one = run("e2e-oracle --scenes 6 --scorer geometric --threads 1 --set match.crop_size=16");
    const Run many = run("e2e-oracle --scenes 6 --scorer geometric --threads 3 --set match.crop_size=16");
    CHECK(one.code == 0);
    CHECK(one.out == many.out);
    CHECK(one.out.find("exact_scenes") != std::string::npos);
}

TEST_CASE("ablation prints one row per K") {
    const Run r = run("ablate-k --k 5,10,20,40 --scorer geometric --scenes 4 --set match.crop_size=16");
    CHECK(r.code == 0);
    CHECK(lines(r.out) == 5);
    CHECK(r.out.find("F1-Score_class") != std::string::npos);
}

}
