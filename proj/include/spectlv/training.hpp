#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "spectlv/stn.hpp"
#include "spectlv/vnet.hpp"
#include "spectlv/volume.hpp"

namespace spectlv {

enum class Variant { dp, vnet, mcvnet, dpstvnet };
const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct TrainConfig {
    int epochs = 3000;
    int batch_size = 8;
    double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    double loss_a = 1.0, loss_b = 1.0, loss_c = 1.0;  // Eq. 6 weights
    double l2_coeff = 1e-4;
    double s1_end = 0.2, s2_end = 0.3;  // stage fractions of the epoch budget
    std::uint64_t seed = 0;
    Variant variant = Variant::dpstvnet;
    Structure structure = Structure::myocardium;
    int val_every = 25;
    int checkpoint_every = 100;
    bool augment = false;
    VNetConfig vnet;  // in_channels is forced from the variant
    StnConfig stn;

    void validate() const;
    int stage_of_epoch(int epoch) const;  // 1, 2, or 3 (dp-st-v-net schedule)
};

// One training/evaluation unit: a single gate of a study.
struct TrainSample {
    std::string patient_id;
    State state = State::stress;
    int gate = 0;
    Volume3D image;    // normalized to max 1
    Mask3D target;     // the trained structure
    ShapePrior prior;  // empty (dims 0) for the single-channel variant
};

struct EpochRecord {
    int epoch = 0;
    int stage = 1;
    double loss_vnet = std::numeric_limits<double>::quiet_NaN();
    double loss_deformation = std::numeric_limits<double>::quiet_NaN();
    double loss_global = std::numeric_limits<double>::quiet_NaN();
    double val_dsc = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
    std::shared_ptr<VNet> vnet;
    std::shared_ptr<LocalizationNet> stn;  // null unless variant is dpstvnet
    std::vector<EpochRecord> record;
};

// Multi-step schedule: stage 1 trains only the V-Net on Eq. 4, stage 2 only
// the deformation module on Eq. 5, stage 3 both on Eq. 6. The single- and
// dual-channel baselines train on Eq. 4 throughout. Deterministic per seed.
// Throws on a non-finite loss, naming the epoch.
TrainResult train(const std::vector<TrainSample>& train_set,
                  const std::vector<TrainSample>& val_set, const TrainConfig& cfg,
                  const std::filesystem::path& checkpoint_dir = {},
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

// Full forward pipeline for one volume: V-Net probability map, warped by the
// STN when present (prior required for dual-channel variants).
Volume3D predict_volume(VNet& vnet, LocalizationNet* stn, const Volume3D& image,
                        const ShapePrior* prior);

// image normalization used for every network input (counts scaled to max 1)
Volume3D normalize_image(const Volume3D& vol);

// Builds per-gate samples for the given patients. Priors come from the
// manifest when present, otherwise from the DP generator on the fly.
std::vector<TrainSample> build_samples(const DatasetManifest& manifest,
                                       const std::vector<std::string>& patient_ids,
                                       Structure structure, bool with_priors);

void save_train_record(const std::vector<EpochRecord>& record,
                       const std::filesystem::path& path);

struct CrossvalRow {
    int fold = 0;
    Variant variant = Variant::dp;
    Structure structure = Structure::myocardium;
    std::string patient_id;
    State state = State::stress;
    int gate = 0;
    double dsc = 0.0;
    double hd_mm = 0.0;
};

struct CrossvalSummary {
    // [variant][structure]: mean/std over all test rows
    struct Cell {
        double dsc_mean = 0, dsc_std = 0, hd_mean = 0, hd_std = 0;
        int n = 0;
    };
    std::vector<CrossvalRow> rows;
    Cell cell(Variant v, Structure s) const;
};

// Stratified k-fold protocol over the manifest for the requested variants and
// structures. DP rows are evaluation-only.
CrossvalSummary run_crossval(const DatasetManifest& manifest, int k,
                             const std::vector<Variant>& variants,
                             const std::vector<Structure>& structures, const TrainConfig& base,
                             const std::function<void(const std::string&)>& log = {});

}  // namespace spectlv
