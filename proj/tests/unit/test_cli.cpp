#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "support/synthetic.hpp"
#include "treenhance/image.hpp"
#include "treenhance/ops.hpp"

#ifndef TRENH_BIN
#error "TRENH_BIN must point at the trenh executable"
#endif

using namespace trenh;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out;
    std::string err;
};

const fs::path& workdir() {
    static const fs::path dir = [] {
        const fs::path d = fs::temp_directory_path() / "trenh_cli_tests";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Run run_trenh(const std::string& args, const std::string& env = "") {
    const fs::path out = workdir() / "stdout.txt";
    const fs::path err = workdir() / "stderr.txt";
    const std::string cmd = "cd '" + workdir().string() + "' && " + env + " '" + TRENH_BIN + "' " + args + " >'" +
                            out.string() + "' 2>'" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

void make_dataset(const fs::path& dir, std::size_t pairs) {
    fs::create_directories(dir / "low");
    fs::create_directories(dir / "high");
    for (std::size_t i = 0; i < pairs; ++i) {
        const auto p = testing::lowlight_pair(200 + i, 24);
        const std::string name = "img" + std::to_string(i) + ".png";
        save_image(p.input, dir / "low" / name);
        save_image(p.target, dir / "high" / name);
    }
}

void write_text(const fs::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    out << s;
}

const char* kTinyConfig = R"({
  "search": {"iterations": 40, "max_depth": 4, "c": 4},
  "train": {"steps_per_round": 4, "batch_size": 4},
  "rounds": {"rounds": 1, "images_per_round": 3, "triplets_per_tree": 3, "parallel_trees": 2},
  "augmentation": {"target_resolution": 24},
  "network": {"input_size": 24, "widths": [4, 8], "hidden": 16},
  "inference": {"working_resolution": 24}
})";

}  // namespace

TEST_CASE("ops list prints the catalogs") {
    const Run r = run_trenh("ops list --catalog fivek");
    CHECK(r.code == 0);
    CHECK(nlohmann::json::parse(r.out).size() == 29);
    CHECK(nlohmann::json::parse(run_trenh("ops list").out).size() == 37);
    const Run bad = run_trenh("ops list --catalog raw");
    CHECK(bad.code == 2);
    CHECK(bad.err.rfind("trenh ops list: error:", 0) == 0);
}

TEST_CASE("usage errors exit with 2") {
    CHECK(run_trenh("").code == 2);
    CHECK(run_trenh("enhance in.png").code == 2);
    const Run r = run_trenh("frobnicate");
    CHECK(r.code == 2);
    CHECK(r.err.rfind("trenh: usage error:", 0) == 0);
}

TEST_CASE("train diagnostics") {
    fs::create_directories(workdir() / "empty" / "low");
    fs::create_directories(workdir() / "empty" / "high");
    const Run empty = run_trenh("train --data empty --out m.trnh --seed 1");
    CHECK(empty.code == 3);
    CHECK(empty.err.rfind("trenh train: error:", 0) == 0);
    CHECK(empty.err.find("no pairs found") != std::string::npos);

    make_dataset(workdir() / "mismatch", 1);
    save_image(Image(5, 5), workdir() / "mismatch" / "high" / "img0.png");
    CHECK(run_trenh("train --data mismatch --out m.trnh --seed 1").code == 3);

    make_dataset(workdir() / "data", 3);
    write_text(workdir() / "bad.json", R"({"search": {"iterations": 10, "typo": 1}})");
    const Run bad = run_trenh("train --data data --config bad.json --out m.trnh --seed 1");
    CHECK(bad.code == 2);
    CHECK(bad.err.find("typo") != std::string::npos);
    CHECK(run_trenh("train --data data --preset raw --out m.trnh").code == 2);
    CHECK(run_trenh("train --data data --out m.trnh", "TRENH_SEED=abc").code == 2);
}

TEST_CASE("train, enhance, replay and guided end to end") {
    make_dataset(workdir() / "data", 3);
    write_text(workdir() / "tiny.json", kTinyConfig);

    const Run t1 = run_trenh("train --data data --config tiny.json --out a.trnh --seed 5 --jobs 2");
    REQUIRE(t1.code == 0);
    CHECK(fs::exists(workdir() / "a.trnh.log.jsonl"));
    const auto log = nlohmann::json::parse(slurp(workdir() / "a.trnh.log.jsonl"));
    CHECK(log["round"] == 1);
    REQUIRE(run_trenh("train --data data --config tiny.json --out b.trnh", "TRENH_SEED=5").code == 0);
    CHECK(slurp(workdir() / "a.trnh") == slurp(workdir() / "b.trnh"));

    const std::string in = "data/low/img0.png";
    REQUIRE(run_trenh("enhance --model a.trnh --mode policy --steps 0 " + in + " p0.png").code == 0);
    CHECK(load_image(workdir() / "p0.png") == load_image(workdir() / in));

    const Run e = run_trenh("enhance --model a.trnh --mode tree --steps 60 --max-depth 3 --config tiny.json "
                        "--emit-sequence seq.json " + in + " tree.png");
    REQUIRE(e.code == 0);
    const auto seq = nlohmann::json::parse(slurp(workdir() / "seq.json"));
    CHECK(seq["catalog"] == "lol");
    CHECK(seq["operations"].size() <= 3);
    REQUIRE(run_trenh("ops apply --sequence seq.json " + in + " replay.png").code == 0);
    CHECK(slurp(workdir() / "tree.png") == slurp(workdir() / "replay.png"));

    REQUIRE(run_trenh("enhance --model a.trnh --mode tree --steps 60 --config tiny.json --seed 3 " + in + " t2.png").code == 0);
    REQUIRE(run_trenh("enhance --model a.trnh --mode tree --steps 60 --config tiny.json --seed 3 " + in + " t3.png").code == 0);
    CHECK(slurp(workdir() / "t2.png") == slurp(workdir() / "t3.png"));

    const Run g = run_trenh("guided --model a.trnh --target data/high/img0.png --steps 300 --emit-sequence g.json " + in +
                        " g.png");
    REQUIRE(g.code == 0);
    const auto gj = nlohmann::json::parse(g.out);
    CHECK(gj["return"].get<double>() >= 0.0);
    CHECK(gj.contains("psnr"));
    REQUIRE(run_trenh("ops apply --sequence g.json " + in + " g2.png").code == 0);
    CHECK(slurp(workdir() / "g.png") == slurp(workdir() / "g2.png"));

    write_text(workdir() / "fivek.json", catalog_to_json(catalog("fivek")).dump());
    const Run wrong = run_trenh("enhance --model a.trnh --catalog-file fivek.json " + in + " x.png");
    CHECK(wrong.code == 1);
    CHECK(wrong.err.find("catalog") != std::string::npos);
    CHECK(run_trenh("enhance --model a.trnh missing.png x.png").code == 1);
}

TEST_CASE("guided without a model") {
    const Image img = testing::synthetic_image(9, 20, 20);
    save_image(img, workdir() / "g_in.png");
    const Run same = run_trenh("guided --target g_in.png --steps 100 g_in.png same.png");
    REQUIRE(same.code == 0);
    const auto j = nlohmann::json::parse(same.out);
    CHECK(j["sequence"].empty());
    CHECK(j["return"] == 1.0);

    const Catalog cat = catalog("fivek");
    save_image(apply(cat[5], img), workdir() / "g_gt.png");
    const Run r = run_trenh("guided --catalog fivek --target g_gt.png --steps 600 g_in.png rec.png");
    REQUIRE(r.code == 0);
    CHECK(nlohmann::json::parse(r.out)["psnr"].get<double>() > 40.0);

    save_image(Image(8, 8), workdir() / "small.png");
    const Run mismatch = run_trenh("guided --target small.png g_in.png x.png");
    CHECK(mismatch.code == 3);
    CHECK(mismatch.err.rfind("trenh guided: error:", 0) == 0);
}

TEST_CASE("ops apply") {
    const Image img = testing::synthetic_image(10, 6, 6);
    save_image(img, workdir() / "o_in.png");
    write_text(workdir() / "empty_seq.json", R"({"catalog": "lol", "operations": []})");
    REQUIRE(run_trenh("ops apply --sequence empty_seq.json o_in.png o_out.png").code == 0);
    CHECK(load_image(workdir() / "o_out.png") == load_image(workdir() / "o_in.png"));
    write_text(workdir() / "bad_seq.json", R"({"catalog": "lol", "operations": [{"id": 90}]})");
    const Run bad = run_trenh("ops apply --sequence bad_seq.json o_in.png o_out.png");
    CHECK(bad.code == 1);
    CHECK(bad.err.find("90") != std::string::npos);
}

TEST_CASE("eval writes one row per pair plus a mean row") {
    const fs::path dir = workdir() / "evalset";
    fs::create_directories(dir / "output");
    fs::create_directories(dir / "target");
    for (int i = 0; i < 3; ++i) {
        const Image img = testing::synthetic_image(static_cast<std::uint64_t>(i), 12, 12);
        save_image(img, dir / "output" / ("p" + std::to_string(i) + ".png"));
        save_image(img, dir / "target" / ("p" + std::to_string(i) + ".png"));
    }
    const Run all = run_trenh("eval --pairs evalset");
    REQUIRE(all.code == 0);
    std::istringstream lines(all.out);
    std::string header, line, last;
    std::getline(lines, header);
    CHECK(header == "file,psnr,ssim,delta_e,mse");
    int rows = 0;
    while (std::getline(lines, line)) {
        ++rows;
        last = line;
        CHECK(line.find(",100,1,0,0") != std::string::npos);
    }
    CHECK(rows == 4);
    CHECK(last.rfind("mean,", 0) == 0);

    const Run psnr_only = run_trenh("eval --pairs evalset --metrics psnr");
    CHECK(psnr_only.out.rfind("file,psnr\n", 0) == 0);
    CHECK(run_trenh("eval --pairs evalset --metrics lpips").code == 2);
    CHECK(run_trenh("eval --pairs nowhere").code == 3);
}

TEST_CASE("stats aggregates sequence files") {
    write_text(workdir() / "s1.json", R"({"operations": [{"id": 5}, {"id": 5}]})");
    write_text(workdir() / "s2.json", R"({"operations": [{"id": 29}]})");
    const Run r = run_trenh("stats s1.json s2.json");
    REQUIRE(r.code == 0);
    CHECK(r.out.find("5,brightness,ALL,0.1,2,0.666667") != std::string::npos);
}
