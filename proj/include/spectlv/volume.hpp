#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace spectlv {

struct Dims {
    int l = 0, w = 0, h = 0;
    bool operator==(const Dims&) const = default;
    std::int64_t count() const { return static_cast<std::int64_t>(l) * w * h; }
};

// 3D scalar field with isotropic physical voxel size. Stored x-major with z
// (the long axis) fastest: index = (x*W + y)*H + z.
struct Volume3D {
    Dims dims;
    double voxel_mm = 6.4;
    std::vector<float> data;

    Volume3D() = default;
    Volume3D(Dims d, double vmm, float fill = 0.0f)
        : dims(d), voxel_mm(vmm), data(static_cast<std::size_t>(d.count()), fill) {}

    float& at(int x, int y, int z) {
        return data[(static_cast<std::size_t>(x) * dims.w + y) * dims.h + z];
    }
    float at(int x, int y, int z) const {
        return data[(static_cast<std::size_t>(x) * dims.w + y) * dims.h + z];
    }
    float max_value() const;
    void validate() const;  // throws on dim/payload mismatch or non-finite values
};

enum class Structure { endocardium, myocardium, epicardium };

const char* structure_name(Structure s);
Structure structure_from_name(const std::string& name);

// Binary mask over the same grid as a companion Volume3D.
struct Mask3D {
    Dims dims;
    double voxel_mm = 6.4;
    Structure structure = Structure::myocardium;
    std::vector<std::uint8_t> data;

    Mask3D() = default;
    Mask3D(Dims d, double vmm, Structure s)
        : dims(d), voxel_mm(vmm), structure(s), data(static_cast<std::size_t>(d.count()), 0) {}

    std::uint8_t& at(int x, int y, int z) {
        return data[(static_cast<std::size_t>(x) * dims.w + y) * dims.h + z];
    }
    std::uint8_t at(int x, int y, int z) const {
        return data[(static_cast<std::size_t>(x) * dims.w + y) * dims.h + z];
    }
    std::int64_t foreground_count() const;
    void validate() const;  // throws unless strictly binary and sized to dims
};

// Shape priors share the mask representation; the distinction is provenance.
using ShapePrior = Mask3D;

enum class State { stress, rest };
const char* state_name(State s);
State state_from_name(const std::string& name);

enum class Severity { normal_or_mild, moderate, severe };
const char* severity_name(Severity s);
Severity severity_from_name(const std::string& name);

constexpr int kGateCount = 8;

struct GatedStudy {
    std::string patient_id;
    State state = State::stress;
    Severity severity = Severity::normal_or_mild;
    std::array<Volume3D, kGateCount> gates;

    void validate() const;  // all gates share dims and voxel_mm
};

struct StudyEntry {
    std::string patient_id;
    State state = State::stress;
    Severity severity = Severity::normal_or_mild;
    std::vector<std::string> gate_files;                             // 8 .vol paths
    std::array<std::vector<std::string>, 3> mask_files;              // [structure][gate]
    std::array<std::vector<std::string>, 3> prior_files;             // optional, same layout
    std::string truth_file;                                          // optional analytic truth
};

struct DatasetManifest {
    std::filesystem::path root;  // paths in entries are relative to this
    std::vector<StudyEntry> entries;

    std::array<int, 3> severity_counts() const;
    void validate(bool check_files = true) const;
    std::filesystem::path resolve(const std::string& rel) const { return root / rel; }
};

// Native formats: `.vol` little-endian float32 raw + `<name>.vol.json` sidecar
// {"dims":[L,W,H],"voxel_mm":6.4,"dtype":"f32"}; `.msk` uint8 raw with the same
// sidecar schema plus "structure".
Volume3D load_volume(const std::filesystem::path& path);
void save_volume(const Volume3D& vol, const std::filesystem::path& path);
Mask3D load_mask(const std::filesystem::path& path);
void save_mask(const Mask3D& mask, const std::filesystem::path& path);

DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

GatedStudy load_study(const DatasetManifest& manifest, const StudyEntry& entry);

}  // namespace spectlv
