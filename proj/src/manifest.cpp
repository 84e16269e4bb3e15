#include "hidcode/manifest.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hidcode/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace hidcode {

namespace {

json parse_line(const std::string& line, const std::string& where) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw ValidationError(where + ": not a JSON object");
    return j;
}

std::string resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    if (path.is_absolute()) return path.string();
    return (base / path).string();
}

}  // namespace

DatasetManifest load_manifest(const std::string& path, bool check_paths) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    const fs::path base = fs::path(path).parent_path();

    DatasetManifest m;
    std::string line;
    if (!std::getline(in, line)) throw ValidationError(path + ": empty manifest");
    json header = parse_line(line, path + " header");
    if (!header.contains("corpus_id") || !header["corpus_id"].is_string())
        throw ValidationError(path + " header: missing corpus_id");
    m.corpus_id = header["corpus_id"].get<std::string>();
    m.seed = header.value("seed", std::uint64_t{0});

    std::size_t idx = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::string where = path + " entry " + std::to_string(idx);
        json j = parse_line(line, where);
        ManifestEntry e;
        if (!j.contains("image") || !j["image"].is_string())
            throw ValidationError(where + ": missing image path");
        e.image = resolve(base, j["image"].get<std::string>());
        if (!j.contains("label") || !j["label"].is_string() ||
            j["label"].get<std::string>().empty())
            throw ValidationError(where + ": missing or empty label");
        e.label = j["label"].get<std::string>();
        if (j.contains("mask")) {
            if (!j["mask"].is_string()) throw ValidationError(where + ": mask must be a string");
            e.mask = resolve(base, j["mask"].get<std::string>());
        }
        if (check_paths) {
            if (!fs::exists(e.image))
                throw ValidationError(where + ": image path does not exist: " + e.image);
            if (!e.mask.empty() && !fs::exists(e.mask))
                throw ValidationError(where + ": mask path does not exist: " + e.mask);
        }
        m.entries.push_back(std::move(e));
        ++idx;
    }
    return m;
}

void save_manifest(const DatasetManifest& manifest, const std::string& path) {
    std::ostringstream out;
    out << json{{"corpus_id", manifest.corpus_id}, {"seed", manifest.seed}}.dump() << "\n";
    for (const ManifestEntry& e : manifest.entries) {
        json j{{"image", e.image}, {"label", e.label}};
        if (!e.mask.empty()) j["mask"] = e.mask;
        out << j.dump() << "\n";
    }
    atomic_write_text(path, out.str());
}

json RunManifest::to_json() const {
    json sched = json::array();
    for (auto [h, w] : schedule.scales) sched.push_back(json::array({h, w}));
    return json{{"tool_version", tool_version},
                {"codebook_hash", codebook_hash},
                {"schedule", sched},
                {"V", V},
                {"k", k},
                {"m_bits", m_bits},
                {"channel",
                 {{"kind", to_string(channel.kind)},
                  {"delta", channel.delta},
                  {"coeff_u", channel.coeff_u},
                  {"coeff_v", channel.coeff_v},
                  {"key", channel.key},
                  {"m_bits", channel.m_bits}}},
                {"predictor", predictor},
                {"tau", tau},
                {"degradations", degradations},
                {"seed", seed}};
}

RunManifest RunManifest::from_json(const json& j) {
    RunManifest m;
    try {
        m.tool_version = j.at("tool_version").get<std::string>();
        m.codebook_hash = j.at("codebook_hash").get<std::string>();
        for (const json& s : j.at("schedule"))
            m.schedule.scales.emplace_back(s.at(0).get<int>(), s.at(1).get<int>());
        m.V = j.at("V").get<std::uint32_t>();
        m.k = j.at("k").get<int>();
        m.m_bits = j.at("m_bits").get<std::size_t>();
        const json& c = j.at("channel");
        m.channel.kind = channel_kind_from_string(c.at("kind").get<std::string>());
        m.channel.delta = c.at("delta").get<float>();
        m.channel.coeff_u = c.at("coeff_u").get<int>();
        m.channel.coeff_v = c.at("coeff_v").get<int>();
        m.channel.key = c.at("key").get<std::uint64_t>();
        m.channel.m_bits = c.at("m_bits").get<std::size_t>();
        m.predictor = j.value("predictor", std::string{});
        m.tau = j.value("tau", 0.05);
        m.degradations = j.value("degradations", json::array());
        m.seed = j.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("run manifest: ") + e.what());
    }
    return m;
}

void save_run_manifest(const RunManifest& manifest, const std::string& path) {
    atomic_write_text(path, manifest.to_json().dump(2) + "\n");
}

RunManifest load_run_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ValidationError(path + ": invalid JSON");
    return RunManifest::from_json(j);
}

void write_results_csv(const std::vector<ResultRow>& rows, const std::string& path) {
    std::ostringstream out;
    out << "id,metric,value\n";
    for (const ResultRow& r : rows) out << r.id << "," << r.metric << "," << r.value << "\n";
    atomic_write_text(path, out.str());
}

void atomic_write(const std::string& path, const std::function<void(const std::string&)>& writer) {
    const std::string tmp = path + ".tmp";
    try {
        writer(tmp);
    } catch (...) {
        std::error_code ec;
        fs::remove(tmp, ec);
        throw;
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw IoError("cannot move temporary file into place for " + path);
    }
}

void atomic_write_text(const std::string& path, const std::string& content) {
    atomic_write(path, [&](const std::string& tmp) {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("cannot create " + tmp);
        out << content;
        if (!out) throw IoError("failed to write " + tmp);
    });
}

}  // namespace hidcode
