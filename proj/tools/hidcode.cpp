// Command-line driver: train a codebook, protect a corpus, tamper with it,
// recover, and evaluate. Every output directory receives a run_manifest.json
// that pins the configuration needed to reproduce its contents.
#include <atomic>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hidcode/bitstream.hpp"
#include "hidcode/channel.hpp"
#include "hidcode/codec.hpp"
#include "hidcode/degrade.hpp"
#include "hidcode/errors.hpp"
#include "hidcode/eval.hpp"
#include "hidcode/image_io.hpp"
#include "hidcode/manifest.hpp"
#include "hidcode/metrics.hpp"
#include "hidcode/pipeline.hpp"
#include "hidcode/recovery.hpp"
#include "hidcode/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hidcode;

namespace {

// HIDCODE_LOG: error|warn|info|debug (or 0..3). Default warn.
int log_level() {
    static const int lvl = [] {
        const char* e = std::getenv("HIDCODE_LOG");
        if (!e) return 1;
        const std::string s(e);
        if (s == "debug" || s == "3") return 3;
        if (s == "info" || s == "2") return 2;
        if (s == "error" || s == "0") return 0;
        return 1;
    }();
    return lvl;
}

void logf(int lvl, const char* fmt, ...) {
    if (lvl > log_level()) return;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    static const char* tag[] = {"error", "warn", "info", "debug"};
    std::fprintf(stderr, "hidcode [%s] ", tag[lvl]);
    va_list ap;
    va_start(ap, fmt);
    std::vfprintf(stderr, fmt, ap);
    va_end(ap);
    std::fputc('\n', stderr);
}

// Runs fn(0..n) on `jobs` threads; rethrows the first exception after join.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
    if (jobs <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex err_mu;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mu);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    const int count = std::min<std::size_t>(jobs, n);
    for (int t = 0; t < count; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

void require_unique_stems(const DatasetManifest& m) {
    std::set<std::string> seen;
    for (std::size_t i = 0; i < m.entries.size(); ++i)
        if (!seen.insert(stem_of(m.entries[i].image)).second)
            throw ValidationError("manifest entry " + std::to_string(i) +
                                  ": duplicate image stem '" + stem_of(m.entries[i].image) + "'");
}

void save_image_atomic(const RasterImage& image, const std::string& path) {
    atomic_write(path, [&](const std::string& tmp) { save_image(image, tmp); });
}

void save_mask_atomic(const PixelMask& mask, const std::string& path) {
    atomic_write(path, [&](const std::string& tmp) { save_mask(mask, tmp); });
}

void ensure_out_dir(const std::string& out) {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw IoError("cannot create output directory " + out);
}

std::string sidecar_path(const std::string& image_path) {
    return (fs::path(image_path).parent_path() / (stem_of(image_path) + ".wm")).string();
}

// ---- shared flag bundles -------------------------------------------------

struct ChannelFlags {
    std::string channel = "qim";
    double delta = 24.0;
    std::size_t capacity = 1024;
    std::uint64_t seed = 0;

    ChannelConfig config() const {
        ChannelConfig cfg;
        cfg.kind = channel_kind_from_string(channel);
        cfg.delta = static_cast<float>(delta);
        cfg.key = seed;
        cfg.m_bits = capacity;
        cfg.validate();
        return cfg;
    }

    void add(CLI::App* cmd) {
        cmd->add_option("--channel", channel, "watermark channel: sidecar or qim")
            ->check(CLI::IsMember({"sidecar", "qim"}))
            ->capture_default_str();
        cmd->add_option("--delta", delta, "QIM step size")->capture_default_str();
        cmd->add_option("--capacity", capacity, "payload capacity |m| in bits")
            ->capture_default_str();
    }
};

RunManifest base_run_manifest(const Codebook& cb, const PipelineConfig& cfg, std::uint64_t seed) {
    RunManifest rm;
    rm.codebook_hash = cb.id_hex();
    rm.schedule = cb.schedule;
    rm.V = cb.V;
    rm.k = select_prefix_scales(cb.schedule, cb.V, cfg.capacity);
    rm.m_bits = cfg.capacity.m_bits;
    rm.channel = cfg.channel;
    rm.predictor = to_string(cfg.predictor);
    rm.tau = cfg.tau;
    rm.seed = seed;
    return rm;
}

// ---- train-codebook ------------------------------------------------------

struct TrainArgs {
    std::string manifest, out;
    std::uint32_t V = 1024;
    int iterations = 2;
    double dropout = 0.1;
    std::uint64_t seed = 0;
    int jobs = 1;
};

void cmd_train_codebook(const TrainArgs& a) {
    DatasetManifest m = load_manifest(a.manifest);
    if (m.entries.empty()) throw ValidationError(a.manifest + ": no entries");
    ensure_out_dir(a.out);

    std::vector<FeatureGrid> grids(m.entries.size());
    parallel_for(m.entries.size(), a.jobs, [&](std::size_t i) {
        grids[i] = to_feature_grid(load_image(m.entries[i].image), 16, 4);
        logf(3, "featurized %s", m.entries[i].image.c_str());
    });

    ScaleSchedule sched = default_schedule();
    TrainStats stats{};
    Codebook cb = train_codebook(grids, a.V, sched, a.iterations, a.dropout, a.seed, &stats);
    const std::string cb_path = (fs::path(a.out) / "codebook.bin").string();
    atomic_write(cb_path, [&](const std::string& tmp) { save_codebook(cb, tmp); });
    logf(2, "trained V=%u on %zu images (%zu vectors, %zu dropped); %s", a.V, grids.size(),
         stats.vectors_collected, stats.images_dropped, cb_path.c_str());

    RunManifest rm;
    rm.codebook_hash = cb.id_hex();
    rm.schedule = sched;
    rm.V = a.V;
    rm.seed = a.seed;
    json j = rm.to_json();
    j["train"] = {{"iterations", a.iterations},
                  {"dropout", a.dropout},
                  {"corpus_id", m.corpus_id},
                  {"images", m.entries.size()}};
    atomic_write_text((fs::path(a.out) / "run_manifest.json").string(), j.dump(2) + "\n");
}

// ---- protect -------------------------------------------------------------

struct ProtectArgs {
    std::string manifest, codebook, out;
    ChannelFlags channel;
    std::uint64_t seed = 0;
    int jobs = 1;
};

void cmd_protect(const ProtectArgs& a) {
    DatasetManifest m = load_manifest(a.manifest);
    require_unique_stems(m);
    Codebook cb = load_codebook(a.codebook);
    ensure_out_dir(a.out);

    PipelineConfig cfg;
    cfg.capacity.m_bits = a.channel.capacity;
    cfg.channel = a.channel.config();

    DatasetManifest out_manifest;
    out_manifest.corpus_id = m.corpus_id + "-protected";
    out_manifest.seed = a.seed;
    out_manifest.entries.resize(m.entries.size());

    parallel_for(m.entries.size(), a.jobs, [&](std::size_t i) {
        const ManifestEntry& e = m.entries[i];
        const std::string stem = stem_of(e.image);
        ProtectResult pr = protect_image(load_image(e.image), cb, cfg);
        const std::string out_image = (fs::path(a.out) / (stem + ".png")).string();
        save_image_atomic(pr.image, out_image);
        if (cfg.channel.kind == ChannelKind::sidecar)
            atomic_write(sidecar_path(out_image),
                         [&](const std::string& tmp) { save_bits(pr.sideband.bits, tmp); });
        out_manifest.entries[i] = {stem + ".png", e.label, ""};
        logf(3, "protected %s (k=%d)", e.image.c_str(), pr.k);
    });

    save_manifest(out_manifest, (fs::path(a.out) / "protected.jsonl").string());
    save_run_manifest(base_run_manifest(cb, cfg, a.seed),
                      (fs::path(a.out) / "run_manifest.json").string());
    logf(2, "protected %zu images into %s", m.entries.size(), a.out.c_str());
}

// ---- tamper --------------------------------------------------------------

struct TamperArgs {
    std::string manifest, out;
    std::string mode = "noise";
    std::string shape = "rect";
    double coverage = 0.25;
    std::uint64_t seed = 0;
    int jobs = 1;
};

void cmd_tamper(const TamperArgs& a) {
    DatasetManifest m = load_manifest(a.manifest);
    require_unique_stems(m);
    ensure_out_dir(a.out);
    const TamperMode mode = tamper_mode_from_string(a.mode);
    const MaskShape shape = mask_shape_from_string(a.shape);

    DatasetManifest out_manifest;
    out_manifest.corpus_id = m.corpus_id + "-tampered";
    out_manifest.seed = a.seed;
    out_manifest.entries.resize(m.entries.size());

    parallel_for(m.entries.size(), a.jobs, [&](std::size_t i) {
        const ManifestEntry& e = m.entries[i];
        const std::string stem = stem_of(e.image);
        RasterImage img = load_image(e.image);
        PixelMask mask = generate_mask(img.height, img.width, a.coverage, shape,
                                       mix64(a.seed ^ (0x11B0 + i)));
        RasterImage donor;
        if (mode == TamperMode::donor)
            donor = load_image(m.entries[(i + 1) % m.entries.size()].image);
        RasterImage tampered = tamper(img, mask, mode, mix64(a.seed ^ (0x7A3F00 + i)),
                                      mode == TamperMode::donor ? &donor : nullptr);
        const std::string out_image = (fs::path(a.out) / (stem + ".png")).string();
        const std::string out_mask = (fs::path(a.out) / (stem + "_mask.png")).string();
        save_image_atomic(tampered, out_image);
        save_mask_atomic(mask, out_mask);
        out_manifest.entries[i] = {stem + ".png", e.label, stem + "_mask.png"};
        logf(3, "tampered %s (%.0f%% %s %s)", e.image.c_str(), a.coverage * 100, a.shape.c_str(),
             a.mode.c_str());
    });

    save_manifest(out_manifest, (fs::path(a.out) / "tampered.jsonl").string());
    RunManifest rm;
    rm.seed = a.seed;
    rm.degradations = json::array({{{"tamper",
                                     {{"mode", a.mode},
                                      {"shape", a.shape},
                                      {"coverage", a.coverage},
                                      {"seed", a.seed}}}}});
    save_run_manifest(rm, (fs::path(a.out) / "run_manifest.json").string());
    logf(2, "tampered %zu images into %s", m.entries.size(), a.out.c_str());
}

// ---- recover -------------------------------------------------------------

struct RecoverArgs {
    std::string manifest, codebook, out;
    ChannelFlags channel;
    std::string predictor = "neighbor";
    double tau = 0.05;
    std::uint64_t seed = 0;
    int jobs = 1;
};

void cmd_recover(const RecoverArgs& a) {
    DatasetManifest m = load_manifest(a.manifest);
    require_unique_stems(m);
    Codebook cb = load_codebook(a.codebook);
    ensure_out_dir(a.out);

    PipelineConfig cfg;
    cfg.capacity.m_bits = a.channel.capacity;
    cfg.channel = a.channel.config();
    cfg.tau = a.tau;
    cfg.predictor = predictor_from_string(a.predictor);

    DatasetManifest out_manifest;
    out_manifest.corpus_id = m.corpus_id + "-recovered";
    out_manifest.seed = a.seed;
    out_manifest.entries.resize(m.entries.size());

    parallel_for(m.entries.size(), a.jobs, [&](std::size_t i) {
        const ManifestEntry& e = m.entries[i];
        const std::string stem = stem_of(e.image);
        RasterImage img = load_image(e.image);
        WatermarkPayload sideband;
        const WatermarkPayload* sideband_ptr = nullptr;
        if (cfg.channel.kind == ChannelKind::sidecar) {
            const std::string wm = sidecar_path(e.image);
            if (!fs::exists(wm))
                throw ValidationError("entry " + std::to_string(i) + ": missing sidecar " + wm);
            sideband.bits = load_bits(wm);
            sideband_ptr = &sideband;
        }
        RecoverResult rr = recover_image(img, cb, cfg, sideband_ptr);
        const std::string out_image = (fs::path(a.out) / (stem + ".png")).string();
        save_image_atomic(rr.image, out_image);
        if (cfg.channel.kind == ChannelKind::qim)
            save_mask_atomic(rr.localization, (fs::path(a.out) / (stem + "_loc.png")).string());
        json report{{"k", rr.report.k},
                    {"mask_coverage", rr.report.mask_coverage},
                    {"predicted_per_scale", rr.report.predicted_per_scale},
                    {"repaired_bits", rr.repaired_bits}};
        atomic_write_text((fs::path(a.out) / (stem + "_report.json")).string(),
                          report.dump(2) + "\n");
        out_manifest.entries[i] = {stem + ".png", e.label, ""};
        logf(3, "recovered %s (mask %.3f)", e.image.c_str(), rr.report.mask_coverage);
    });

    save_manifest(out_manifest, (fs::path(a.out) / "recovered.jsonl").string());
    save_run_manifest(base_run_manifest(cb, cfg, a.seed),
                      (fs::path(a.out) / "run_manifest.json").string());
    logf(2, "recovered %zu images into %s", m.entries.size(), a.out.c_str());
}

// ---- eval ----------------------------------------------------------------

struct EvalArgs {
    std::string queries, manifest, codebook, out;
    ChannelFlags channel;
    std::string metrics = "acc,psnr,ssim";
    std::vector<int> k_list{1, 5};
    std::string mode = "same";
    std::uint64_t seed = 0;
    int jobs = 1;
};

void cmd_eval(const EvalArgs& a) {
    DatasetManifest ref = load_manifest(a.manifest);
    DatasetManifest qs = load_manifest(a.queries);
    require_unique_stems(ref);
    ensure_out_dir(a.out);

    std::set<std::string> want;
    for (auto part : CLI::detail::split(a.metrics, ','))
        if (!part.empty()) want.insert(part);
    for (const std::string& w : want)
        if (w != "acc" && w != "ba" && w != "psnr" && w != "ssim")
            throw ValidationError("unknown metric '" + w + "'");
    const bool need_ba = want.count("ba") > 0;
    if (need_ba && a.codebook.empty())
        throw ValidationError("metric 'ba' requires --codebook");

    Codebook cb;
    PipelineConfig cfg;
    if (!a.codebook.empty()) {
        cb = load_codebook(a.codebook);
        cfg.capacity.m_bits = a.channel.capacity;
        cfg.channel = a.channel.config();
    }

    // Reference images indexed by stem; loaded once, reused across queries.
    std::vector<RasterImage> ref_images(ref.entries.size());
    RetrievalIndex index;
    index.mode = retrieval_mode_from_string(a.mode);
    index.entries.resize(ref.entries.size());
    parallel_for(ref.entries.size(), a.jobs, [&](std::size_t i) {
        ref_images[i] = load_image(ref.entries[i].image);
        index.entries[i] = {stem_of(ref.entries[i].image), ref.entries[i].label,
                            color_layout_embedding(ref_images[i])};
    });
    std::map<std::string, std::size_t> ref_by_stem;
    for (std::size_t i = 0; i < index.entries.size(); ++i)
        ref_by_stem[index.entries[i].id] = i;

    std::vector<RetrievalQuery> queries(qs.entries.size());
    std::vector<std::vector<ResultRow>> rows_per_query(qs.entries.size());
    parallel_for(qs.entries.size(), a.jobs, [&](std::size_t i) {
        const ManifestEntry& e = qs.entries[i];
        const std::string id = stem_of(e.image);
        const auto it = ref_by_stem.find(id);
        if (it == ref_by_stem.end())
            throw ValidationError("query entry " + std::to_string(i) + ": id '" + id +
                                  "' not present in the reference manifest");
        RasterImage img = load_image(e.image);
        queries[i] = {id, e.label, color_layout_embedding(img)};
        std::vector<ResultRow>& rows = rows_per_query[i];
        if (want.count("psnr")) rows.push_back({id, "psnr", psnr(img, ref_images[it->second])});
        if (want.count("ssim")) rows.push_back({id, "ssim", ssim(img, ref_images[it->second])});
        if (need_ba) {
            ScaleSchedule sched = cb.schedule;
            TokenPyramid pyr = encode(to_feature_grid(ref_images[it->second], 16, 4), cb, sched);
            const int k = select_prefix_scales(sched, cb.V, cfg.capacity);
            HiddenCode code = pack(pyr, cb.V, k);
            WatermarkPayload sideband;
            const WatermarkPayload* sideband_ptr = nullptr;
            if (cfg.channel.kind == ChannelKind::sidecar) {
                const std::string wm = sidecar_path(e.image);
                if (!fs::exists(wm))
                    throw ValidationError("entry " + std::to_string(i) + ": missing sidecar " + wm);
                sideband.bits = load_bits(wm);
                sideband_ptr = &sideband;
            }
            WatermarkPayload got = extract(img, cfg.channel, sideband_ptr);
            Bits head(got.bits.begin(), got.bits.begin() + code.bits.size());
            rows.push_back({id, "ba", bit_accuracy(head, code.bits)});
        }
    });

    std::vector<ResultRow> rows;
    json summary;
    if (want.count("acc")) {
        for (int k : a.k_list) {
            const double img_acc = acc_at_k(index, queries, k);
            const double lbl_acc = label_acc_at_k(index, queries, k);
            summary["acc@" + std::to_string(k) + "_image"] = img_acc;
            summary["acc@" + std::to_string(k) + "_label"] = lbl_acc;
            for (const RetrievalQuery& q : queries) {
                const auto ids = topk(index, q.embedding, k, q.gt_id);
                const bool img_hit = std::find(ids.begin(), ids.end(), q.gt_id) != ids.end();
                bool lbl_hit = false;
                for (const std::string& rid : ids)
                    lbl_hit |= index.entries[ref_by_stem[rid]].label == q.gt_label;
                rows.push_back({q.gt_id, "hit@" + std::to_string(k) + "_image", img_hit ? 1.0 : 0.0});
                rows.push_back({q.gt_id, "hit@" + std::to_string(k) + "_label", lbl_hit ? 1.0 : 0.0});
            }
        }
    }
    std::map<std::string, std::pair<double, int>> means;
    for (const auto& per_query : rows_per_query)
        for (const ResultRow& r : per_query) {
            rows.push_back(r);
            auto& [sum, count] = means[r.metric];
            sum += r.value;
            ++count;
        }
    for (const auto& [metric, acc] : means) summary["mean_" + metric] = acc.first / acc.second;

    write_results_csv(rows, (fs::path(a.out) / "results.csv").string());
    atomic_write_text((fs::path(a.out) / "summary.json").string(), summary.dump(2) + "\n");
    RunManifest rm;
    if (!a.codebook.empty()) rm = base_run_manifest(cb, cfg, a.seed);
    rm.seed = a.seed;
    save_run_manifest(rm, (fs::path(a.out) / "run_manifest.json").string());
    logf(2, "evaluated %zu queries against %zu references", qs.entries.size(),
         ref.entries.size());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"self-recovery watermarking codec and evaluation toolkit"};
    app.require_subcommand(1);

    TrainArgs train;
    CLI::App* t = app.add_subcommand("train-codebook", "fit a codebook to a corpus manifest");
    t->add_option("--manifest", train.manifest, "dataset manifest (JSON lines)")->required();
    t->add_option("--V", train.V, "codebook size (power of two)")->capture_default_str();
    t->add_option("--iterations", train.iterations, "training rounds")->capture_default_str();
    t->add_option("--dropout", train.dropout, "scale-dropout rate")->capture_default_str();
    t->add_option("--seed", train.seed, "training seed")->required();
    t->add_option("--out", train.out, "output directory")->required();
    t->add_option("--jobs", train.jobs, "worker threads")->capture_default_str();

    ProtectArgs protect;
    CLI::App* p = app.add_subcommand("protect", "embed each image's own recovery code");
    p->add_option("--manifest", protect.manifest, "dataset manifest")->required();
    p->add_option("--codebook", protect.codebook, "codebook file")->required();
    protect.channel.add(p);
    p->add_option("--seed", protect.seed, "fragile-overlay key")->required();
    p->add_option("--out", protect.out, "output directory")->required();
    p->add_option("--jobs", protect.jobs, "worker threads")->capture_default_str();

    TamperArgs tam;
    CLI::App* d = app.add_subcommand("tamper", "damage images and emit ground-truth masks");
    d->add_option("--manifest", tam.manifest, "dataset manifest")->required();
    d->add_option("--mode", tam.mode, "noise, constant, donor or shuffle")
        ->check(CLI::IsMember({"noise", "constant", "donor", "shuffle"}))
        ->capture_default_str();
    d->add_option("--shape", tam.shape, "mask shape: rect or blob")
        ->check(CLI::IsMember({"rect", "blob"}))
        ->capture_default_str();
    d->add_option("--coverage", tam.coverage, "tampered fraction of pixels")
        ->capture_default_str();
    d->add_option("--seed", tam.seed, "mask/content seed")->required();
    d->add_option("--out", tam.out, "output directory")->required();
    d->add_option("--jobs", tam.jobs, "worker threads")->capture_default_str();

    RecoverArgs rec;
    CLI::App* r = app.add_subcommand("recover", "extract the code and rebuild tampered regions");
    r->add_option("--manifest", rec.manifest, "dataset manifest of images to recover")->required();
    r->add_option("--codebook", rec.codebook, "codebook file")->required();
    rec.channel.add(r);
    r->add_option("--tau", rec.tau, "patch-flagging threshold")->capture_default_str();
    r->add_option("--predictor", rec.predictor, "masked-token predictor: zero or neighbor")
        ->check(CLI::IsMember({"zero", "neighbor"}))
        ->capture_default_str();
    r->add_option("--seed", rec.seed, "fragile-overlay key used at protect time")->required();
    r->add_option("--out", rec.out, "output directory")->required();
    r->add_option("--jobs", rec.jobs, "worker threads")->capture_default_str();

    EvalArgs ev;
    CLI::App* e = app.add_subcommand("eval", "score a query set against a reference corpus");
    e->add_option("queries", ev.queries, "manifest of query images")->required();
    e->add_option("--manifest", ev.manifest, "reference corpus manifest")->required();
    e->add_option("--codebook", ev.codebook, "codebook file (required for the ba metric)");
    ev.channel.add(e);
    e->add_option("--metrics", ev.metrics, "comma list from acc,ba,psnr,ssim")
        ->capture_default_str();
    e->add_option("--k", ev.k_list, "retrieval depths")->capture_default_str();
    e->add_option("--mode", ev.mode, "retrieval mode: same or different")
        ->check(CLI::IsMember({"same", "different"}))
        ->capture_default_str();
    e->add_option("--seed", ev.seed, "recorded in the run manifest")->capture_default_str();
    e->add_option("--out", ev.out, "output directory")->required();
    e->add_option("--jobs", ev.jobs, "worker threads")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : 1;
    }

    try {
        if (t->parsed()) cmd_train_codebook(train);
        if (p->parsed()) {
            protect.channel.seed = protect.seed;
            cmd_protect(protect);
        }
        if (d->parsed()) cmd_tamper(tam);
        if (r->parsed()) {
            rec.channel.seed = rec.seed;
            cmd_recover(rec);
        }
        if (e->parsed()) {
            ev.channel.seed = ev.seed;
            cmd_eval(ev);
        }
    } catch (const ValidationError& err) {
        logf(0, "%s", err.what());
        return 1;
    } catch (const IoError& err) {
        logf(0, "%s", err.what());
        return 2;
    } catch (const std::exception& err) {
        logf(0, "internal: %s", err.what());
        return 3;
    }
    return 0;
}
