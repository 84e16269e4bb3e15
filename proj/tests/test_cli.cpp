#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "hidcode/image_io.hpp"
#include "hidcode/manifest.hpp"
#include "hidcode/metrics.hpp"
#include "support/synthetic.hpp"

// End-to-end tests that drive the installed binary exactly like a user would.
// The binary path is injected by the build; every step writes into a scratch
// tree that is torn down with the process.

using namespace hidcode;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* kBin = TEST_HIDCODE_BIN;

int run(const std::string& args, const std::string& log) {
    std::string cmd = std::string(kBin) + " " + args + " > " + log + " 2>&1";
    int rc = std::system(cmd.c_str());
    if (rc == -1) return -1;
    return WEXITSTATUS(static_cast<unsigned>(rc));
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

json read_json(const std::string& path) { return json::parse(read_text(path)); }

bool same_bytes(const std::string& a, const std::string& b) {
    return read_text(a) == read_text(b);
}

// One shared pipeline tree, built lazily on first use so the expensive steps
// (training, protecting) run exactly once for the whole binary.
struct Rig {
    fs::path root;
    testsupport::CorpusSpec spec;
    std::string corpus_manifest;
    bool ok = false;
    std::string failure;

    std::string dir(const std::string& name) const { return (root / name).string(); }
    std::string log(const std::string& name) const { return (root / (name + ".log")).string(); }

    Rig() {
        root = fs::temp_directory_path() / ("hidcode_cli_" + std::to_string(::getpid()));
        fs::create_directories(root / "corpus");
        spec.images = 12;
        spec.families = 4;

        DatasetManifest m;
        m.corpus_id = "cli-test-corpus";
        m.seed = spec.seed;
        for (int i = 0; i < spec.images; ++i) {
            const std::string name = testsupport::synth_id(i) + ".png";
            save_image(testsupport::synth_image(spec, i), (root / "corpus" / name).string());
            m.entries.push_back({name, testsupport::synth_label(spec, i), ""});
        }
        corpus_manifest = (root / "corpus" / "corpus.jsonl").string();
        save_manifest(m, corpus_manifest);

        ok = build();
        if (!ok && failure.empty()) failure = "pipeline step failed";
    }

    bool step(const std::string& name, const std::string& args) {
        int rc = run(args, log(name));
        if (rc != 0) {
            failure = name + " exited " + std::to_string(rc) + ": " + read_text(log(name));
            return false;
        }
        return true;
    }

    bool build() {
        if (!step("train", "train-codebook --manifest " + corpus_manifest +
                               " --V 64 --iterations 1 --seed 3 --out " + dir("cb")))
            return false;
        const std::string cb = dir("cb") + "/codebook.bin";
        if (!step("protect", "protect --manifest " + corpus_manifest + " --codebook " + cb +
                                 " --channel qim --seed 5 --out " + dir("prot")))
            return false;
        if (!step("protect_again", "protect --manifest " + corpus_manifest + " --codebook " + cb +
                                       " --channel qim --seed 5 --out " + dir("prot2")))
            return false;
        if (!step("protect_side", "protect --manifest " + corpus_manifest + " --codebook " + cb +
                                      " --channel sidecar --seed 5 --out " + dir("side")))
            return false;
        if (!step("tamper", "tamper --manifest " + dir("prot") + "/protected.jsonl" +
                                " --mode noise --shape rect --coverage 0.25 --seed 9 --out " +
                                dir("tam")))
            return false;
        if (!step("recover", "recover --manifest " + dir("tam") + "/tampered.jsonl" +
                                 " --codebook " + cb + " --channel qim --seed 5 --out " +
                                 dir("rec")))
            return false;
        return true;
    }

    ~Rig() {
        std::error_code ec;
        fs::remove_all(root, ec);
    }
};

Rig& rig() {
    static Rig r;
    return r;
}

}  // namespace

TEST_CASE("the full command pipeline runs clean") {
    REQUIRE_MESSAGE(rig().ok, rig().failure);
    // Every output directory documents its run.
    for (const char* d : {"cb", "prot", "side", "tam", "rec"})
        CHECK(fs::exists(fs::path(rig().dir(d)) / "run_manifest.json"));
}

TEST_CASE("training writes a loadable codebook and records its settings") {
    REQUIRE(rig().ok);
    Codebook cb = load_codebook(rig().dir("cb") + "/codebook.bin");
    CHECK(cb.V == 64);
    CHECK(cb.C == 48);
    CHECK(cb.schedule.scales.size() == 10);

    json rm = read_json(rig().dir("cb") + "/run_manifest.json");
    CHECK(rm["V"] == 64);
    CHECK(rm["codebook_hash"] == cb.id_hex());
    CHECK(rm["train"]["iterations"] == 1);
    CHECK(rm["train"]["images"] == 12);
    CHECK(rm["train"]["corpus_id"] == "cli-test-corpus");
}

TEST_CASE("protect emits one image per entry plus a derived manifest") {
    REQUIRE(rig().ok);
    DatasetManifest m = load_manifest(rig().dir("prot") + "/protected.jsonl");
    CHECK(m.corpus_id == "cli-test-corpus-protected");
    REQUIRE(m.entries.size() == 12);
    for (const auto& e : m.entries) CHECK(fs::exists(e.image));

    json rm = read_json(rig().dir("prot") + "/run_manifest.json");
    CHECK(rm["channel"]["kind"] == "qim");
    CHECK(rm["k"] == 7);  // 6-bit tokens, 155 of them fit in 1024 bits
    CHECK(rm["m_bits"] == 1024);
    CHECK(rm["seed"] == 5);

    // Watermarking is invisible-grade.
    RasterImage orig = load_image((fs::path(rig().corpus_manifest).parent_path() /
                                   "img000.png").string());
    RasterImage prot = load_image((fs::path(rig().dir("prot")) / "img000.png").string());
    CHECK(psnr(orig, prot) >= 38.0);
}

TEST_CASE("protect output is byte-reproducible for the same seed") {
    REQUIRE(rig().ok);
    for (int i : {0, 5, 11}) {
        std::string name = testsupport::synth_id(i) + ".png";
        CHECK(same_bytes((fs::path(rig().dir("prot")) / name).string(),
                         (fs::path(rig().dir("prot2")) / name).string()));
    }
}

TEST_CASE("sidecar protection copies pixels exactly and stores payload files") {
    REQUIRE(rig().ok);
    for (int i : {0, 7}) {
        std::string name = testsupport::synth_id(i) + ".png";
        RasterImage orig = load_image((fs::path(rig().corpus_manifest).parent_path() /
                                       name).string());
        RasterImage prot = load_image((fs::path(rig().dir("side")) / name).string());
        CHECK(prot == orig);
        CHECK(fs::exists(fs::path(rig().dir("side")) / (testsupport::synth_id(i) + ".wm")));
    }
}

TEST_CASE("tamper produces masks at the requested coverage and lists them") {
    REQUIRE(rig().ok);
    DatasetManifest m = load_manifest(rig().dir("tam") + "/tampered.jsonl");
    CHECK(m.corpus_id == "cli-test-corpus-protected-tampered");
    REQUIRE(m.entries.size() == 12);
    for (const auto& e : m.entries) {
        REQUIRE_FALSE(e.mask.empty());
        PixelMask mask = load_mask(e.mask);
        CHECK(mask.is_binary());
        CHECK(mask.coverage() >= 0.23);
        CHECK(mask.coverage() <= 0.27);
        // The image differs from its protected source exactly where masked.
        RasterImage tam = load_image(e.image);
        RasterImage prot = load_image((fs::path(rig().dir("prot")) /
                                       fs::path(e.image).filename()).string());
        for (int y = 0; y < 40; ++y)
            for (int x = 0; x < 40; ++x)
                if (mask.at(y, x) == 0.0f)
                    for (int c = 0; c < 3; ++c) CHECK(tam.at(y, x, c) == prot.at(y, x, c));
    }
    json rm = read_json(rig().dir("tam") + "/run_manifest.json");
    CHECK(rm["degradations"][0]["tamper"]["mode"] == "noise");
    CHECK(rm["degradations"][0]["tamper"]["coverage"] == 0.25);
}

TEST_CASE("recover writes localization masks and per-image reports") {
    REQUIRE(rig().ok);
    DatasetManifest m = load_manifest(rig().dir("rec") + "/recovered.jsonl");
    REQUIRE(m.entries.size() == 12);
    for (int i : {0, 3}) {
        std::string stem = testsupport::synth_id(i);
        CHECK(fs::exists(fs::path(rig().dir("rec")) / (stem + ".png")));
        CHECK(fs::exists(fs::path(rig().dir("rec")) / (stem + "_loc.png")));
        json rep = read_json((fs::path(rig().dir("rec")) / (stem + "_report.json")).string());
        CHECK(rep["k"] == 7);
        CHECK(rep["mask_coverage"].get<double>() > 0.1);
        CHECK(rep["repaired_bits"].get<int>() >= 0);
        CHECK(rep["predicted_per_scale"].size() == 3);  // the scales past the embedded prefix
    }
}

TEST_CASE("eval scores the watermarked corpus as an exact match for itself") {
    REQUIRE(rig().ok);
    std::string out = rig().dir("eval_prot");
    int rc = run("eval " + rig().dir("prot") + "/protected.jsonl --manifest " +
                     rig().corpus_manifest + " --codebook " + rig().dir("cb") +
                     "/codebook.bin --metrics acc,ba,psnr,ssim --k 1 --out " + out,
                 rig().log("eval_prot"));
    REQUIRE_MESSAGE(rc == 0, read_text(rig().log("eval_prot")));
    json summary = read_json(out + "/summary.json");
    CHECK(summary["acc@1_image"] == 1.0);
    CHECK(summary["acc@1_label"] == 1.0);
    CHECK(summary["mean_ba"] == 1.0);
    CHECK(summary["mean_psnr"].get<double>() >= 38.0);
    CHECK(summary["mean_ssim"].get<double>() >= 0.95);

    std::string csv = read_text(out + "/results.csv");
    CHECK(csv.rfind("id,metric,value\n", 0) == 0);
    CHECK(csv.find("img000,ba,1") != std::string::npos);
}

TEST_CASE("recovery improves fidelity against the originals") {
    REQUIRE(rig().ok);
    auto mean_psnr = [&](const std::string& queries, const std::string& out) {
        int rc = run("eval " + queries + " --manifest " + rig().corpus_manifest +
                         " --metrics acc,psnr --k 1 --out " + out,
                     out + ".log");
        REQUIRE_MESSAGE(rc == 0, read_text(out + ".log"));
        return read_json(out + "/summary.json");
    };
    json tam = mean_psnr(rig().dir("tam") + "/tampered.jsonl", rig().dir("eval_tam"));
    json rec = mean_psnr(rig().dir("rec") + "/recovered.jsonl", rig().dir("eval_rec"));
    CHECK(rec["mean_psnr"].get<double>() > tam["mean_psnr"].get<double>());
    CHECK(rec["acc@1_image"].get<double>() >= tam["acc@1_image"].get<double>());
}

TEST_CASE("usage errors exit with the validation code") {
    Rig& r = rig();
    CHECK(run("", r.log("noargs")) == 1);
    CHECK(run("--help", r.log("help")) == 0);
    CHECK(run("protect --manifest x.jsonl", r.log("missing_required")) == 1);  // no codebook/seed/out
    CHECK(run("tamper --manifest " + r.corpus_manifest + " --mode melt --seed 1 --out " +
                  r.dir("bad_mode"),
              r.log("bad_mode")) == 1);
    CHECK(run("eval " + r.corpus_manifest + " --manifest " + r.corpus_manifest +
                  " --metrics ba --out " + r.dir("bad_eval"),
              r.log("bad_eval")) == 1);  // ba requires --codebook
}

TEST_CASE("missing input files exit with the I/O code") {
    Rig& r = rig();
    CHECK(run("protect --manifest " + r.dir("absent") + "/nope.jsonl --codebook " + r.dir("cb") +
                  "/codebook.bin --seed 1 --out " + r.dir("io_out"),
              r.log("io_manifest")) == 2);
    CHECK(run("recover --manifest " + r.dir("tam") + "/tampered.jsonl --codebook " +
                  r.dir("absent") + "/codebook.bin --seed 5 --out " + r.dir("io_out2"),
              r.log("io_codebook")) == 2);
}
