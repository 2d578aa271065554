#include "spectlv/volume.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace spectlv {

using nlohmann::json;

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::runtime_error(msg);
}

json read_sidecar(const std::filesystem::path& payload_path) {
    std::filesystem::path side = payload_path;
    side += ".json";
    std::ifstream in(side);
    require(in.good(), "missing sidecar: " + side.string());
    json j;
    in >> j;
    return j;
}

Dims dims_from_json(const json& j) {
    require(j.contains("dims") && j["dims"].is_array() && j["dims"].size() == 3,
            "sidecar: dims must be a 3-element array");
    Dims d{j["dims"][0].get<int>(), j["dims"][1].get<int>(), j["dims"][2].get<int>()};
    require(d.l > 0 && d.w > 0 && d.h > 0, "sidecar: dims must be positive");
    return d;
}

template <typename T>
std::vector<T> read_payload(const std::filesystem::path& path, std::int64_t count) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open: " + path.string());
    in.seekg(0, std::ios::end);
    std::int64_t bytes = in.tellg();
    in.seekg(0, std::ios::beg);
    require(bytes == count * static_cast<std::int64_t>(sizeof(T)),
            "payload length mismatch for " + path.string() + ": declared dims need " +
                std::to_string(count * sizeof(T)) + " bytes, file has " + std::to_string(bytes));
    std::vector<T> data(static_cast<std::size_t>(count));
    in.read(reinterpret_cast<char*>(data.data()), bytes);
    require(in.good(), "short read: " + path.string());
    return data;
}

template <typename T>
void write_payload(const std::filesystem::path& path, const std::vector<T>& data) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "cannot write: " + path.string());
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(T)));
    require(out.good(), "short write: " + path.string());
}

}  // namespace

float Volume3D::max_value() const {
    float m = 0.0f;
    for (float v : data) m = std::max(m, v);
    return m;
}

void Volume3D::validate() const {
    require(dims.l > 0 && dims.w > 0 && dims.h > 0, "Volume3D: dims must be positive");
    require(voxel_mm > 0.0, "Volume3D: voxel_mm must be positive");
    require(static_cast<std::int64_t>(data.size()) == dims.count(),
            "Volume3D: data length does not match dims");
    for (float v : data)
        require(std::isfinite(v), "Volume3D: non-finite intensity");
}

const char* structure_name(Structure s) {
    switch (s) {
        case Structure::endocardium: return "endo";
        case Structure::myocardium: return "myo";
        case Structure::epicardium: return "epi";
    }
    return "?";
}

Structure structure_from_name(const std::string& name) {
    if (name == "endo" || name == "endocardium") return Structure::endocardium;
    if (name == "myo" || name == "myocardium") return Structure::myocardium;
    if (name == "epi" || name == "epicardium") return Structure::epicardium;
    throw std::runtime_error("unknown structure: " + name);
}

const char* state_name(State s) { return s == State::stress ? "stress" : "rest"; }

State state_from_name(const std::string& name) {
    if (name == "stress") return State::stress;
    if (name == "rest") return State::rest;
    throw std::runtime_error("unknown state: " + name);
}

const char* severity_name(Severity s) {
    switch (s) {
        case Severity::normal_or_mild: return "normal_or_mild";
        case Severity::moderate: return "moderate";
        case Severity::severe: return "severe";
    }
    return "?";
}

Severity severity_from_name(const std::string& name) {
    if (name == "normal_or_mild") return Severity::normal_or_mild;
    if (name == "moderate") return Severity::moderate;
    if (name == "severe") return Severity::severe;
    throw std::runtime_error("unknown severity: " + name);
}

std::int64_t Mask3D::foreground_count() const {
    std::int64_t n = 0;
    for (std::uint8_t v : data) n += v;
    return n;
}

void Mask3D::validate() const {
    require(dims.l > 0 && dims.w > 0 && dims.h > 0, "Mask3D: dims must be positive");
    require(voxel_mm > 0.0, "Mask3D: voxel_mm must be positive");
    require(static_cast<std::int64_t>(data.size()) == dims.count(),
            "Mask3D: data length does not match dims");
    for (std::uint8_t v : data)
        require(v <= 1, "Mask3D: values must be 0 or 1");
}

void GatedStudy::validate() const {
    for (const auto& g : gates) {
        g.validate();
        require(g.dims == gates[0].dims, "GatedStudy: gates must share dims");
        require(g.voxel_mm == gates[0].voxel_mm, "GatedStudy: gates must share voxel_mm");
    }
}

std::array<int, 3> DatasetManifest::severity_counts() const {
    std::array<int, 3> counts{0, 0, 0};
    for (const auto& e : entries) counts[static_cast<int>(e.severity)]++;
    return counts;
}

void DatasetManifest::validate(bool check_files) const {
    for (const auto& e : entries) {
        require(!e.patient_id.empty(), "manifest: empty patient_id");
        require(static_cast<int>(e.gate_files.size()) == kGateCount,
                "manifest: study " + e.patient_id + " must list exactly 8 gates");
        for (const auto& masks : e.mask_files)
            require(masks.empty() || static_cast<int>(masks.size()) == kGateCount,
                    "manifest: mask list for " + e.patient_id + " must cover all 8 gates");
        if (check_files) {
            auto must_exist = [&](const std::string& rel) {
                require(std::filesystem::exists(resolve(rel)),
                        "manifest: missing file " + resolve(rel).string());
            };
            for (const auto& f : e.gate_files) must_exist(f);
            for (const auto& masks : e.mask_files)
                for (const auto& f : masks) must_exist(f);
            for (const auto& priors : e.prior_files)
                for (const auto& f : priors) must_exist(f);
            if (!e.truth_file.empty()) must_exist(e.truth_file);
        }
    }
}

Volume3D load_volume(const std::filesystem::path& path) {
    json side = read_sidecar(path);
    Volume3D vol;
    vol.dims = dims_from_json(side);
    vol.voxel_mm = side.value("voxel_mm", 6.4);
    require(side.value("dtype", "f32") == "f32", "volume sidecar: dtype must be f32");
    vol.data = read_payload<float>(path, vol.dims.count());
    vol.validate();
    return vol;
}

void save_volume(const Volume3D& vol, const std::filesystem::path& path) {
    vol.validate();
    write_payload(path, vol.data);
    json side{{"dims", {vol.dims.l, vol.dims.w, vol.dims.h}},
              {"voxel_mm", vol.voxel_mm},
              {"dtype", "f32"}};
    std::ofstream out(path.string() + ".json");
    out << side.dump(2) << "\n";
    require(out.good(), "cannot write sidecar for " + path.string());
}

Mask3D load_mask(const std::filesystem::path& path) {
    json side = read_sidecar(path);
    Mask3D mask;
    mask.dims = dims_from_json(side);
    mask.voxel_mm = side.value("voxel_mm", 6.4);
    require(side.value("dtype", "u8") == "u8", "mask sidecar: dtype must be u8");
    mask.structure = structure_from_name(side.value("structure", "myo"));
    mask.data = read_payload<std::uint8_t>(path, mask.dims.count());
    mask.validate();
    return mask;
}

void save_mask(const Mask3D& mask, const std::filesystem::path& path) {
    mask.validate();
    write_payload(path, mask.data);
    json side{{"dims", {mask.dims.l, mask.dims.w, mask.dims.h}},
              {"voxel_mm", mask.voxel_mm},
              {"dtype", "u8"},
              {"structure", structure_name(mask.structure)}};
    std::ofstream out(path.string() + ".json");
    out << side.dump(2) << "\n";
    require(out.good(), "cannot write sidecar for " + path.string());
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open manifest: " + path.string());
    json j;
    in >> j;
    DatasetManifest m;
    m.root = path.parent_path();
    for (const auto& js : j.at("studies")) {
        StudyEntry e;
        e.patient_id = js.at("patient_id").get<std::string>();
        e.state = state_from_name(js.value("state", "stress"));
        e.severity = severity_from_name(js.value("severity", "normal_or_mild"));
        e.gate_files = js.at("gates").get<std::vector<std::string>>();
        if (js.contains("masks"))
            for (const auto& [name, files] : js["masks"].items())
                e.mask_files[static_cast<int>(structure_from_name(name))] =
                    files.get<std::vector<std::string>>();
        if (js.contains("priors"))
            for (const auto& [name, files] : js["priors"].items())
                e.prior_files[static_cast<int>(structure_from_name(name))] =
                    files.get<std::vector<std::string>>();
        e.truth_file = js.value("truth", "");
        m.entries.push_back(std::move(e));
    }
    m.validate();
    return m;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
    json studies = json::array();
    for (const auto& e : manifest.entries) {
        json js{{"patient_id", e.patient_id},
                {"state", state_name(e.state)},
                {"severity", severity_name(e.severity)},
                {"gates", e.gate_files}};
        json masks, priors;
        for (int s = 0; s < 3; ++s) {
            if (!e.mask_files[s].empty())
                masks[structure_name(static_cast<Structure>(s))] = e.mask_files[s];
            if (!e.prior_files[s].empty())
                priors[structure_name(static_cast<Structure>(s))] = e.prior_files[s];
        }
        if (!masks.is_null()) js["masks"] = masks;
        if (!priors.is_null()) js["priors"] = priors;
        if (!e.truth_file.empty()) js["truth"] = e.truth_file;
        studies.push_back(std::move(js));
    }
    std::ofstream out(path);
    require(out.good(), "cannot write manifest: " + path.string());
    out << json{{"studies", studies}}.dump(2) << "\n";
}

GatedStudy load_study(const DatasetManifest& manifest, const StudyEntry& entry) {
    GatedStudy study;
    study.patient_id = entry.patient_id;
    study.state = entry.state;
    study.severity = entry.severity;
    require(static_cast<int>(entry.gate_files.size()) == kGateCount,
            "study " + entry.patient_id + ": expected 8 gates");
    for (int g = 0; g < kGateCount; ++g)
        study.gates[g] = load_volume(manifest.resolve(entry.gate_files[g]));
    study.validate();
    return study;
}

}  // namespace spectlv
