#include <sys/wait.h>

#include <fstream>
#include <iterator>
#include <sstream>

#include <doctest.h>
#include <json.hpp>

#include "radfuse/rff.hpp"
#include "synthetic.hpp"
#include "test_util.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string quote(const std::string& s) { return "'" + s + "'"; }

Run run(const testutil::TempDir& dir, const std::string& args, const std::string& env = "") {
  const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = "cd " + quote(dir.path().string()) + " && " + env + " " + quote(RADFUSE_CLI_PATH) + " " +
                          args + " > " + quote(out.string()) + " 2> " + quote(err.string());
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

// 3 classes x 3 images plus a stand-in deep feature file and a training config.
struct Workspace {
  testutil::TempDir dir{"cli"};
  radfuse::LabeledDataset ds;

  explicit Workspace(std::size_t per_class = 3) {
    radfuse::synth::DatasetOptions opts;
    opts.per_class = per_class;
    opts.size = 64;
    ds = radfuse::synth::write_texture_dataset(dir / "data", opts);
    radfuse::synth::write_standin_deep_features(ds, dir / "deep.rff", 5);
  }

  void write_config(const std::string& name, bool deep, int k = 1000) const {
    json cfg = {{"name", name},
                {"kpca", {{"k", k}}},
                {"split", {{"train_fraction", 0.5}, {"seed", 1}}},
                {"paths",
                 {{"manifest", "data/manifest.csv"},
                  {"model_out", "out/" + name + ".model"},
                  {"report_out", "out/" + name + ".report.json"}}}};
    cfg["features"] = {{"groups", "all"}};
    if (deep) cfg["features"]["deep"] = {{"backend", "precomputed"}, {"feature_path", "deep.rff"}, {"width", 4096}};
    std::ofstream(dir / (name + ".json")) << cfg.dump(2);
  }
};

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("extract feature files") {
    Workspace ws;
    auto r = run(ws.dir, "extract --manifest data --out all.rff --quiet");
    REQUIRE(r.code == 0);
    CHECK(r.out.empty());
    const auto all = radfuse::read_rff(ws.dir / "all.rff");
    CHECK(all.rows() == 9);
    CHECK(all.cols() == 308);
    CHECK(all.header().group_layout.size() == 6);

    r = run(ws.dir, "extract --manifest data/manifest.csv --out wav.rff --groups wavelet --quiet");
    REQUIRE(r.code == 0);
    CHECK(radfuse::read_rff(ws.dir / "wav.rff").cols() == 112);

    r = run(ws.dir, "extract --manifest data --out par.rff --quiet", "RADFUSE_JOBS=3");
    REQUIRE(r.code == 0);
    CHECK(slurp(ws.dir / "par.rff") == slurp(ws.dir / "all.rff"));

    r = run(ws.dir, "extract --manifest data --out hd.rff --groups texture --deep-backend precomputed "
                    "--deep-features deep.rff --deep-width 4096 --deep-out dd.rff --quiet");
    REQUIRE(r.code == 0);
    const auto deep = radfuse::read_rff(ws.dir / "dd.rff");
    CHECK(deep.cols() == 4096);
    CHECK(deep.header().ids == all.header().ids);
  }

  TEST_CASE("extract errors") {
    Workspace ws;
    auto r = run(ws.dir, "extract --manifest nowhere.csv --out x.rff");
    CHECK(r.code == 2);
    CHECK_FALSE(fs::exists(ws.dir / "x.rff"));
    CHECK(r.err.find("manifest") != std::string::npos);

    r = run(ws.dir, "extract --manifest data --out x.rff --groups gabor");
    CHECK(r.code == 2);
    r = run(ws.dir, "extract --out x.rff");
    CHECK(r.code == 2);

    fs::copy_file(ws.dir / "data/manifest.csv", ws.dir / "bad.csv");
    std::ofstream(ws.dir / "bad.csv", std::ios::app) << "extra,data/nothing.png,covid\n";
    r = run(ws.dir, "extract --manifest bad.csv --out x.rff --quiet");
    CHECK(r.code == 3);
    CHECK_FALSE(fs::exists(ws.dir / "x.rff"));
  }

  TEST_CASE("train, eval, predict") {
    Workspace ws(6);
    ws.write_config("fused", true);
    ws.write_config("hand", false);

    auto r = run(ws.dir, "train --config fused.json --quiet");
    REQUIRE(r.code == 0);
    CHECK(r.err.find("warning") != std::string::npos);
    const auto report = json::parse(r.out);
    CHECK(report.at("kpca").at("effective_k") == 8);
    CHECK(report.at("n_train") == 9);
    CHECK(fs::exists(ws.dir / "out/fused.report.json"));
    const std::string model_bytes = slurp(ws.dir / "out/fused.model");

    r = run(ws.dir, "train --config fused.json --quiet");
    REQUIRE(r.code == 0);
    CHECK(slurp(ws.dir / "out/fused.model") == model_bytes);

    r = run(ws.dir, "train --config hand.json --quiet");
    REQUIRE(r.code == 0);

    r = run(ws.dir, "eval --model out/fused.model --model out/hand.model --split test --quiet "
                    "--cm-csv out/cm.csv --cm-png out/cm.png");
    REQUIRE(r.code == 0);
    const auto reports = json::parse(r.out);
    REQUIRE(reports.size() == 2);
    CHECK(reports[0].at("name") == "fused");
    CHECK(reports[1].at("name") == "hand");
    CHECK(reports[0].at("n_test") == 9);
    CHECK(reports[0].contains("covid_false_negative_rate"));
    CHECK(r.err.find("fused") != std::string::npos);
    CHECK(r.err.find("hand") != std::string::npos);
    CHECK(fs::exists(ws.dir / "out/cm_fused.csv"));
    CHECK(fs::exists(ws.dir / "out/cm_hand.png"));

    r = run(ws.dir, "eval --model out/fused.model --manifest data/manifest.csv --quiet");
    REQUIRE(r.code == 0);
    CHECK(json::parse(r.out)[0].at("n_test") == 18);

    const std::string good = "data/covid/covid_0000.png";
    r = run(ws.dir, "predict --model out/fused.model " + good);
    REQUIRE(r.code == 0);
    auto out = lines(r.out);
    REQUIRE(out.size() == 1);
    const auto line = json::parse(out[0]);
    CHECK(line.at("scores").size() == 3);
    CHECK(line.at("label") == "covid");

    std::ofstream(ws.dir / "broken.png") << "not an image";
    r = run(ws.dir, "predict --model out/fused.model " + good + " broken.png data/normal/normal_0001.png");
    CHECK(r.code == 3);
    out = lines(r.out);
    REQUIRE(out.size() == 3);
    CHECK(json::parse(out[0]).contains("label"));
    CHECK(json::parse(out[1]).contains("error"));
    CHECK(json::parse(out[2]).at("label") == "normal");

    r = run(ws.dir, "predict --model out/hand.model --format csv " + good + " data/pneumonia/pneumonia_0002.png");
    REQUIRE(r.code == 0);
    out = lines(r.out);
    REQUIRE(out.size() == 3);
    CHECK(out[0] == "image,label,score_covid,score_normal,score_pneumonia,error");
    CHECK(out[2].rfind("data/pneumonia/pneumonia_0002.png,pneumonia,", 0) == 0);
  }

  TEST_CASE("eval refuses a different dataset under --split test") {
    Workspace ws(4);
    ws.write_config("hand", false);
    REQUIRE(run(ws.dir, "train --config hand.json --quiet").code == 0);
    std::ofstream(ws.dir / "data/manifest.csv", std::ios::app) << "zz,covid/covid_0000.png,covid\n";
    const auto r = run(ws.dir, "eval --model out/hand.model --split test --quiet");
    CHECK(r.code == 3);
  }

  TEST_CASE("config errors and overrides") {
    Workspace ws;
    std::ofstream(ws.dir / "typo.json") << R"({"svm": {"c": 1.0}, "paths": {"manifest": "data/manifest.csv"}})";
    auto r = run(ws.dir, "train --config typo.json");
    CHECK(r.code == 2);
    CHECK(r.err.find("'c'") != std::string::npos);

    ws.write_config("hand", false);
    r = run(ws.dir, "train --config hand.json --quiet --set svm.C=5 --set name=h5 --set paths.model_out=out/h5.model");
    REQUIRE(r.code == 0);
    CHECK(fs::exists(ws.dir / "out/h5.model"));
    CHECK(json::parse(slurp(ws.dir / "out/h5.model")).at("payload").at("svm").at("C") == 5.0);

    r = run(ws.dir, "train --config missing.json");
    CHECK(r.code == 2);
    r = run(ws.dir, "eval --model nothing.model --split test");
    CHECK(r.code == 2);
    r = run(ws.dir, "bogus");
    CHECK(r.code == 2);
  }
}
