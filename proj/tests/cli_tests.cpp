// End-to-end checks of the command-line tool: pipelines, exit codes,
// reproducible artifacts. Each command runs through std::system on the
// binary CMake points at via BUMP_CLI_PATH.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct RunResult {
    int code = -1;
    std::string out;
    std::string err;
};

const fs::path& work_dir() {
    static const fs::path dir = [] {
        const auto d = fs::temp_directory_path() / "bump_cli_work";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

RunResult run(const std::string& args) {
    const auto out_path = work_dir() / "stdout.txt";
    const auto err_path = work_dir() / "stderr.txt";
    const std::string cmd = std::string(BUMP_CLI_PATH) + " " + args + " > " +
                            out_path.string() + " 2> " + err_path.string();
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.code = WEXITSTATUS(status);
    r.out = slurp(out_path);
    r.err = slurp(err_path);
    return r;
}

fs::path p(const char* rel) { return work_dir() / rel; }

std::string q(const fs::path& path) { return path.string(); }

// one record of the generated manifest, for fit inputs
json manifest_record(const fs::path& manifest, bool bump) {
    std::ifstream in(manifest);
    std::string line;
    while (std::getline(in, line)) {
        const auto rec = json::parse(line);
        if ((rec.at("label").get<std::string>() == "bump") == bump) return rec;
    }
    REQUIRE(false);
    return {};
}

}  // namespace

TEST_CASE("version reports the tool and format versions") {
    const auto r = run("--version");
    CHECK(r.code == 0);
    CHECK(r.out.find("bump 0.1.0") != std::string::npos);
    CHECK(r.out.find("manifest-format 1") != std::string::npos);
    CHECK(r.out.find("batch-format 1") != std::string::npos);
    CHECK(r.out.find("model-format 1") != std::string::npos);
}

TEST_CASE("usage errors exit with the configuration code") {
    CHECK(run("--bogus-flag").code == 2);
    CHECK(run("transform --manifest x.jsonl").code == 2);  // missing required opts
    CHECK(run("generate --config " + q(p("missing.conf"))).code == 2);
    CHECK(run("").code == 2);  // a subcommand is required
}

TEST_CASE("generate writes a balanced split dataset reproducibly") {
    {
        std::ofstream conf(p("gen.conf"));
        conf << "count = 60\nseed = 11\nsplit = 0.8\nsnr.lo = 15\nsnr.hi = 40\n";
    }
    const auto r = run("generate --config " + q(p("gen.conf")) + " --out " +
                       q(p("data")));
    CHECK(r.code == 0);
    CHECK(r.out.find("30 bump") != std::string::npos);
    CHECK(r.out.find("30 no-bump") != std::string::npos);
    CHECK(fs::exists(p("data/manifest.jsonl")));
    CHECK(fs::exists(p("data/manifest.header.json")));
    CHECK(fs::exists(p("data/train_manifest.jsonl")));
    CHECK(fs::exists(p("data/test_manifest.jsonl")));

    std::ifstream in(p("data/manifest.jsonl"));
    std::string line;
    std::size_t lines = 0, spectra_present = 0;
    while (std::getline(in, line)) {
        ++lines;
        const auto rec = json::parse(line);
        if (fs::exists(p("data") / rec.at("path").get<std::string>()))
            ++spectra_present;
    }
    CHECK(lines == 60);
    CHECK(spectra_present == 60);

    // same config, second directory: identical manifest bytes
    const auto r2 = run("generate --config " + q(p("gen.conf")) + " --out " +
                        q(p("data_again")));
    CHECK(r2.code == 0);
    CHECK(slurp(p("data/manifest.jsonl")) == slurp(p("data_again/manifest.jsonl")));

    // flag overrides beat the config file
    const auto r3 = run("generate --config " + q(p("gen.conf")) + " --out " +
                        q(p("data_small")) + " --count 10");
    CHECK(r3.code == 0);
    CHECK(r3.out.find("generated 10 samples") != std::string::npos);

    // unknown config keys are configuration errors
    {
        std::ofstream conf(p("bad.conf"));
        conf << "countt = 60\n";
    }
    CHECK(run("generate --config " + q(p("bad.conf")) + " --out " +
              q(p("data_bad"))).code == 2);
}

TEST_CASE("transform encodes manifests and is byte-stable") {
    auto r = run("transform --manifest " + q(p("data/train_manifest.jsonl")) +
                 " --encoding vector --out " + q(p("train.benc")));
    CHECK(r.code == 0);
    CHECK(r.out.find("48 samples") != std::string::npos);
    CHECK(r.out.find("(48,4761)") != std::string::npos);

    r = run("transform --manifest " + q(p("data/test_manifest.jsonl")) +
            " --encoding vector --out " + q(p("test.benc")));
    CHECK(r.code == 0);

    r = run("transform --manifest " + q(p("data/train_manifest.jsonl")) +
            " --encoding vector --out " + q(p("train2.benc")));
    CHECK(r.code == 0);
    CHECK(slurp(p("train.benc")) == slurp(p("train2.benc")));
    fs::remove(p("train2.benc"));

    r = run("transform --manifest " + q(p("data/test_manifest.jsonl")) +
            " --encoding image --out " + q(p("test_img.benc")));
    CHECK(r.code == 0);
    CHECK(r.out.find("(12,256,256)") != std::string::npos);

    CHECK(run("transform --manifest " + q(p("nope.jsonl")) +
              " --encoding vector --out " + q(p("x.benc"))).code == 3);
    CHECK(run("transform --manifest " + q(p("data/train_manifest.jsonl")) +
              " --encoding volume --out " + q(p("x.benc"))).code == 2);
}

TEST_CASE("train writes a model and a history and is reproducible") {
    const std::string cmd = "train --data " + q(p("train.benc")) +
                            " --spec FC1-8 --epochs 2 --seed 3 --out ";
    auto r = run(cmd + q(p("fc.bmpk")));
    CHECK(r.code == 0);
    CHECK(r.out.find("epoch 1/2") != std::string::npos);
    CHECK(r.out.find("epoch 2/2") != std::string::npos);
    CHECK(fs::exists(p("fc.bmpk")));
    CHECK(fs::exists(p("fc.bmpk.history.csv")));

    std::ifstream hist(p("fc.bmpk.history.csv"));
    std::string line;
    std::getline(hist, line);
    CHECK(line == "epoch,lr,train_loss,train_acc,val_acc");

    r = run(cmd + q(p("fc_again.bmpk")));
    CHECK(r.code == 0);
    CHECK(slurp(p("fc.bmpk")) == slurp(p("fc_again.bmpk")));
    CHECK(slurp(p("fc.bmpk.history.csv")) == slurp(p("fc_again.bmpk.history.csv")));

    // warm start re-heads an existing model
    r = run("train --data " + q(p("train.benc")) + " --warm-start " +
            q(p("fc.bmpk")) + " --epochs 1 --seed 4 --quiet --out " +
            q(p("fc_tuned.bmpk")));
    CHECK(r.code == 0);
    CHECK(fs::exists(p("fc_tuned.bmpk")));

    CHECK(run("train --data " + q(p("missing.benc")) + " --out " +
              q(p("x.bmpk"))).code == 3);
    CHECK(run("train --data " + q(p("train.benc")) + " --spec NO-SUCH --out " +
              q(p("x.bmpk"))).code == 2);

    // a wildly divergent learning rate is a numeric failure
    CHECK(run("train --data " + q(p("train.benc")) +
              " --spec FC1-8 --epochs 2 --lr 1e200 --quiet --out " +
              q(p("diverged.bmpk"))).code == 4);
}

TEST_CASE("predict emits one JSON line per sample") {
    auto r = run("predict --model " + q(p("fc.bmpk")) + " --data " +
                 q(p("test.benc")));
    CHECK(r.code == 0);

    std::istringstream lines(r.out);
    std::string line;
    std::size_t n = 0;
    while (std::getline(lines, line)) {
        const auto rec = json::parse(line);
        CHECK(rec.at("id").get<int>() == static_cast<int>(n));
        const double score = rec.at("score").get<double>();
        CHECK(score >= 0.0);
        CHECK(score <= 1.0);
        const auto cls = rec.at("class").get<std::string>();
        CHECK((cls == "bump" || cls == "no_bump"));
        CHECK((cls == "bump") == (score >= 0.5));
        ++n;
    }
    CHECK(n == 12);

    // --out writes the same content to a file
    auto r2 = run("predict --model " + q(p("fc.bmpk")) + " --data " +
                  q(p("test.benc")) + " --out " + q(p("preds.jsonl")));
    CHECK(r2.code == 0);
    CHECK(slurp(p("preds.jsonl")) == r.out);

    // single spectrum path
    const auto rec = manifest_record(p("data/manifest.jsonl"), true);
    const auto spath = p("data") / rec.at("path").get<std::string>();
    auto r3 = run("predict --model " + q(p("fc.bmpk")) + " --spectrum " + q(spath));
    CHECK(r3.code == 0);
    CHECK(json::parse(r3.out).contains("score"));

    // encoding mismatch is a usage error
    CHECK(run("predict --model " + q(p("fc.bmpk")) + " --data " +
              q(p("test_img.benc"))).code == 2);
    // predict needs an input
    CHECK(run("predict --model " + q(p("fc.bmpk"))).code == 2);
}

TEST_CASE("eval reports metrics and writes ROC artifacts") {
    const auto r = run("eval --model " + q(p("fc.bmpk")) + " --data " +
                       q(p("test.benc")) + " --roc " + q(p("roc.svg")) +
                       " --csv " + q(p("roc.csv")) + " --auc-csv " +
                       q(p("auc.csv")));
    CHECK(r.code == 0);
    CHECK(r.out.find("samples 12") != std::string::npos);
    CHECK(r.out.find("accuracy ") != std::string::npos);
    CHECK(r.out.find("auc ") != std::string::npos);

    const auto svg = slurp(p("roc.svg"));
    CHECK(svg.rfind("<?xml", 0) == 0);
    CHECK(svg.find("polyline") != std::string::npos);

    std::ifstream csv(p("roc.csv"));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "threshold,fpr,tpr");

    std::ifstream auc(p("auc.csv"));
    std::getline(auc, line);
    CHECK(line == "model,auc");
    std::getline(auc, line);
    CHECK(line.rfind("fc,", 0) == 0);
}

TEST_CASE("fit emits a verdict JSON and an optional plot") {
    const auto rec = manifest_record(p("data/manifest.jsonl"), true);
    const auto spath = p("data") / rec.at("path").get<std::string>();
    const double z_em = rec.at("z_em").get<double>();
    const double z_abs = rec.at("z_abs").get<double>();

    std::ostringstream cmd;
    cmd << "fit --spectrum " << q(spath) << " --z-em " << z_em << " --z-abs "
        << z_abs << " --significance 100 --snr 25 --seed 1 --plot "
        << q(p("fit.svg"));
    const auto r = run(cmd.str());
    CHECK(r.code == 0);

    std::istringstream lines(r.out);
    std::string first;
    std::getline(lines, first);
    const auto fit = json::parse(first);
    CHECK(fit.at("a_bump").get<double>() > 0.5);
    CHECK(fit.at("x0").get<double>() >= 4.0);
    CHECK(fit.at("significance").get<double>() > 0.9);
    CHECK(fit.at("accepted").get<bool>());
    CHECK(fit.at("reason").is_null());
    CHECK(fit.contains("c1"));
    CHECK(fit.contains("sse"));
    CHECK(fit.at("n_points").get<int>() > 1000);
    CHECK(slurp(p("fit.svg")).rfind("<?xml", 0) == 0);

    // a bump-free sample should fail the strength rule without significance
    const auto rec0 = manifest_record(p("data/manifest.jsonl"), false);
    const auto spath0 = p("data") / rec0.at("path").get<std::string>();
    std::ostringstream cmd0;
    cmd0 << "fit --spectrum " << q(spath0) << " --z-em "
         << rec0.at("z_em").get<double>() << " --z-abs "
         << rec0.at("z_abs").get<double>();
    const auto r0 = run(cmd0.str());
    CHECK(r0.code == 0);
    const auto fit0 = json::parse(r0.out);
    CHECK(!fit0.at("accepted").get<bool>());
    CHECK(fit0.at("reason").is_string());

    // significance without the noise level is a usage error
    std::ostringstream cmd1;
    cmd1 << "fit --spectrum " << q(spath) << " --z-em " << z_em << " --z-abs "
         << z_abs << " --significance 100";
    CHECK(run(cmd1.str()).code == 2);

    CHECK(run("fit --spectrum " + q(p("gone.txt")) + " --z-em 2 --z-abs 1").code == 3);
}

TEST_CASE("viz subcommands render PNG and SVG artifacts") {
    // a tiny conv net over the matrix encoding
    auto r = run("transform --manifest " + q(p("data/train_manifest.jsonl")) +
                 " --encoding matrix --out " + q(p("train_m.benc")));
    REQUIRE(r.code == 0);
    {
        std::ofstream spec(p("tiny.json"));
        spec << R"({"input":[1,69,69],"layers":[)"
             << R"({"type":"conv","filters":4,"kh":3,"kw":3},{"type":"relu"},)"
             << R"({"type":"maxpool"},{"type":"flatten"},)"
             << R"({"type":"dense","out":2},{"type":"softmax"}]})";
    }
    r = run("train --data " + q(p("train_m.benc")) + " --spec " +
            q(p("tiny.json")) + " --epochs 1 --quiet --out " + q(p("cnn.bmpk")));
    REQUIRE(r.code == 0);

    const std::string png_magic = "\x89PNG";
    r = run("viz filters --model " + q(p("cnn.bmpk")) + " --out " +
            q(p("filters.png")));
    CHECK(r.code == 0);
    CHECK(slurp(p("filters.png")).rfind(png_magic, 0) == 0);

    const auto rec = manifest_record(p("data/manifest.jsonl"), true);
    const auto spath = p("data") / rec.at("path").get<std::string>();
    r = run("viz maps --model " + q(p("cnn.bmpk")) + " --spectrum " + q(spath) +
            " --out " + q(p("maps.png")));
    CHECK(r.code == 0);
    CHECK(slurp(p("maps.png")).rfind(png_magic, 0) == 0);

    r = run("viz reconstruct --model " + q(p("cnn.bmpk")) +
            " --steps 5 --out " + q(p("rec.png")) + " --trajectory " +
            q(p("traj.csv")));
    CHECK(r.code == 0);
    CHECK(slurp(p("rec.png")).rfind(png_magic, 0) == 0);
    std::ifstream traj(p("traj.csv"));
    std::string line;
    std::getline(traj, line);
    CHECK(line == "step,logit");

    r = run("viz plot --spectrum " + q(spath) + " --out " + q(p("plot.svg")));
    CHECK(r.code == 0);
    CHECK(slurp(p("plot.svg")).rfind("<?xml", 0) == 0);

    // feature maps make no sense for a dense-only model
    CHECK(run("viz filters --model " + q(p("fc.bmpk")) + " --out " +
              q(p("no.png"))).code == 2);
}
