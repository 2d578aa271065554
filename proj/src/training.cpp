#include "spectlv/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "spectlv/adam.hpp"
#include "spectlv/checkpoint.hpp"
#include "spectlv/common.hpp"
#include "spectlv/dp_prior.hpp"
#include "spectlv/losses.hpp"
#include "spectlv/metrics.hpp"
#include "spectlv/preprocess.hpp"

namespace spectlv {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::runtime_error(msg);
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    a ^= b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2);
    return a;
}

std::vector<float> target_vector(const std::vector<const TrainSample*>& batch) {
    const std::int64_t vol = batch[0]->target.dims.count();
    std::vector<float> t(batch.size() * static_cast<std::size_t>(vol));
    for (std::size_t i = 0; i < batch.size(); ++i)
        for (std::int64_t j = 0; j < vol; ++j)
            t[i * vol + j] = static_cast<float>(batch[i]->target.data[j]);
    return t;
}

}  // namespace

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::dp: return "dp";
        case Variant::vnet: return "vnet";
        case Variant::mcvnet: return "mcvnet";
        case Variant::dpstvnet: return "dpstvnet";
    }
    return "?";
}

Variant variant_from_name(const std::string& name) {
    if (name == "dp") return Variant::dp;
    if (name == "vnet") return Variant::vnet;
    if (name == "mcvnet") return Variant::mcvnet;
    if (name == "dpstvnet") return Variant::dpstvnet;
    throw std::runtime_error("unknown variant: " + name);
}

void TrainConfig::validate() const {
    require(epochs > 0, "TrainConfig: epochs must be positive");
    require(batch_size > 0, "TrainConfig: batch_size must be positive");
    require(s1_end > 0.0 && s1_end < s2_end && s2_end < 1.0,
            "TrainConfig: need 0 < s1_end < s2_end < 1");
    require(loss_a >= 0.0 && loss_b >= 0.0 && loss_c >= 0.0,
            "TrainConfig: loss weights must be non-negative");
    require(variant != Variant::dp, "TrainConfig: the dp variant is not trained");
}

int TrainConfig::stage_of_epoch(int epoch) const {
    if (variant != Variant::dpstvnet) return 1;
    if (epoch < static_cast<int>(s1_end * epochs)) return 1;
    if (epoch < static_cast<int>(s2_end * epochs)) return 2;
    return 3;
}

Volume3D normalize_image(const Volume3D& vol) {
    Volume3D out = vol;
    const float m = vol.max_value();
    if (m > 0.0f)
        for (auto& v : out.data) v /= m;
    return out;
}

std::vector<TrainSample> build_samples(const DatasetManifest& manifest,
                                       const std::vector<std::string>& patient_ids,
                                       Structure structure, bool with_priors) {
    std::vector<TrainSample> samples;
    const int si = static_cast<int>(structure);
    for (const auto& entry : manifest.entries) {
        if (std::find(patient_ids.begin(), patient_ids.end(), entry.patient_id) ==
            patient_ids.end())
            continue;
        require(!entry.mask_files[si].empty(),
                "build_samples: no " + std::string(structure_name(structure)) +
                    " masks for " + entry.patient_id);
        std::array<ShapePrior, 3> computed;
        bool have_computed = false;
        for (int g = 0; g < kGateCount; ++g) {
            TrainSample s;
            s.patient_id = entry.patient_id;
            s.state = entry.state;
            s.gate = g;
            Volume3D raw = load_volume(manifest.resolve(entry.gate_files[g]));
            s.image = normalize_image(raw);
            s.target = load_mask(manifest.resolve(entry.mask_files[si][g]));
            if (with_priors) {
                if (!entry.prior_files[si].empty()) {
                    s.prior = load_mask(manifest.resolve(entry.prior_files[si][g]));
                } else {
                    // no stored priors: derive from the volume (deterministic)
                    computed = generate_prior(raw);
                    have_computed = true;
                    s.prior = computed[si];
                }
            }
            (void)have_computed;
            samples.push_back(std::move(s));
        }
    }
    return samples;
}

Volume3D predict_volume(VNet& vnet, LocalizationNet* stn, const Volume3D& image,
                        const ShapePrior* prior) {
    const bool dual = vnet.config().in_channels == 2;
    require(!dual || (prior && prior->dims == image.dims),
            "predict_volume: dual-channel model needs a prior");
    std::vector<const Volume3D*> imgs{&image};
    std::vector<const Mask3D*> priors;
    if (dual) priors.push_back(prior);
    Tensor<float> batch = make_input_batch(imgs, priors);

    Tape<float> tape;
    auto in = tape.leaf(&batch);
    auto logits = vnet.forward(tape, in, false, 0);
    auto out_id = logits;
    if (stn) {
        auto prob = tape.sigmoid(logits);
        Tensor<float> prior_t({1, 1, image.dims.l, image.dims.w, image.dims.h});
        for (std::int64_t i = 0; i < image.dims.count(); ++i)
            prior_t.v[i] = static_cast<float>(prior->data[i]);
        auto loc_in = tape.concat_channels(prob, tape.leaf(&prior_t));
        auto params = stn->forward(tape, loc_in);
        auto grid = tape.affine_grid(params, image.dims.l, image.dims.w, image.dims.h);
        out_id = tape.grid_sample(logits, grid);
    }
    auto prob_out = tape.sigmoid(out_id);
    Volume3D out(image.dims, image.voxel_mm);
    const auto& v = tape.val(prob_out).v;
    std::copy(v.begin(), v.end(), out.data.begin());
    return out;
}

namespace {

double validate_dsc(VNet& vnet, LocalizationNet* stn, const std::vector<TrainSample>& val_set) {
    if (val_set.empty()) return std::numeric_limits<double>::quiet_NaN();
    bool vw = vnet.parameters().front()->requires_grad;
    bool sw = stn && stn->parameters().front()->requires_grad;
    vnet.set_trainable(false);
    if (stn) stn->set_trainable(false);
    double sum = 0.0;
    for (const auto& s : val_set) {
        Volume3D prob = predict_volume(vnet, stn, s.image,
                                       s.prior.dims.count() ? &s.prior : nullptr);
        sum += dsc(prob, s.target);
    }
    vnet.set_trainable(vw);
    if (stn) stn->set_trainable(sw);
    return sum / static_cast<double>(val_set.size());
}

}  // namespace

TrainResult train(const std::vector<TrainSample>& train_set,
                  const std::vector<TrainSample>& val_set, const TrainConfig& cfg,
                  const std::filesystem::path& checkpoint_dir,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
    cfg.validate();
    require(!train_set.empty(), "train: empty dataset");
    const bool dual = cfg.variant != Variant::vnet;
    const bool with_stn = cfg.variant == Variant::dpstvnet;
    for (const auto& s : train_set)
        require(!dual || s.prior.dims.count() > 0,
                "train: variant " + std::string(variant_name(cfg.variant)) +
                    " requires shape priors (sample " + s.patient_id + ")");

    VNetConfig vc = cfg.vnet;
    vc.in_channels = dual ? 2 : 1;
    TrainResult result;
    result.vnet = std::make_shared<VNet>(vc, mix(cfg.seed, 0xA11CE));
    const Dims dims = train_set[0].image.dims;
    if (with_stn) {
        StnConfig sc = cfg.stn;
        sc.in_channels = 2;
        result.stn = std::make_shared<LocalizationNet>(sc, dims, mix(cfg.seed, 0xB0B));
    }

    auto w1 = result.vnet->parameters();
    AdamState<float> adam1;
    adam1.lr = cfg.lr;
    adam1.beta1 = cfg.beta1;
    adam1.beta2 = cfg.beta2;
    adam1.eps = cfg.eps;
    adam1.attach(w1);
    AdamState<float> adam2 = adam1;
    std::vector<Tensor<float>*> w2;
    if (with_stn) {
        w2 = result.stn->parameters();
        adam2.attach(w2);
    }

    const std::int64_t vol = dims.count();
    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const int stage = cfg.stage_of_epoch(epoch);
        const bool train_w1 = stage != 2;
        const bool train_w2 = with_stn && stage != 1;
        result.vnet->set_trainable(train_w1);
        if (with_stn) result.stn->set_trainable(train_w2);

        Rng शफल(mix(cfg.seed, 0x5EED0000ULL + static_cast<std::uint64_t>(epoch)));
        Rng shuffle_rng = शफल;
        shuffle_rng.shuffle(order);

        double sum_l1 = 0.0, sum_l2 = 0.0, sum_lg = 0.0;
        int batches = 0, n_l1 = 0, n_l2 = 0;
        for (std::size_t pos = 0; pos < order.size(); pos += cfg.batch_size) {
            std::vector<const TrainSample*> batch;
            std::vector<TrainSample> augmented;  // storage when augmenting
            for (std::size_t i = pos; i < std::min(order.size(), pos + cfg.batch_size); ++i)
                batch.push_back(&train_set[order[i]]);
            if (cfg.augment) {
                augmented.reserve(batch.size());
                for (std::size_t i = 0; i < batch.size(); ++i) {
                    TrainSample s = *batch[i];
                    std::vector<Mask3D*> masks{&s.target};
                    if (s.prior.dims.count()) masks.push_back(&s.prior);
                    augment(s.image, masks,
                            mix(cfg.seed, 0xAU * 1000003ULL + epoch * 131ULL + pos + i));
                    augmented.push_back(std::move(s));
                }
                batch.clear();
                for (auto& s : augmented) batch.push_back(&s);
            }

            std::vector<const Volume3D*> imgs;
            std::vector<const Mask3D*> priors;
            for (const auto* s : batch) {
                imgs.push_back(&s->image);
                if (dual) priors.push_back(&s->prior);
            }
            Tensor<float> input = make_input_batch(imgs, priors);
            std::vector<float> target = target_vector(batch);

            for (auto* p : w1) p->zero_grad();
            for (auto* p : w2) p->zero_grad();

            Tape<float> tape;
            auto in = tape.leaf(&input);
            auto logits = result.vnet->forward(
                tape, in, true, mix(cfg.seed, 0xD0ULL + epoch * 100003ULL + pos));

            std::vector<Tape<float>::Id> w1_ids, w2_ids;
            if (train_w1)
                for (auto* p : w1) {
                    auto id = tape.leaf(p);
                    w1_ids.push_back(id);
                }
            Tape<float>::Id loss_id;
            double bce1 = std::numeric_limits<double>::quiet_NaN();
            double bce2 = std::numeric_limits<double>::quiet_NaN();

            if (stage == 1 || !with_stn) {
                loss_id = loss_vnet(tape, logits, target, w1_ids,
                                    static_cast<float>(cfg.l2_coeff));
                bce1 = tape.val(loss_id).v[0];
            } else {
                // deformation path: lambda from (sigmoid(Y'), D), warp the logits
                auto prob = tape.sigmoid(logits);
                Tensor<float> prior_batch({static_cast<std::int64_t>(batch.size()), 1, dims.l,
                                           dims.w, dims.h});
                for (std::size_t i = 0; i < batch.size(); ++i)
                    for (std::int64_t j = 0; j < vol; ++j)
                        prior_batch.v[i * vol + j] =
                            static_cast<float>(batch[i]->prior.data[j]);
                auto loc_in = tape.concat_channels(prob, tape.leaf(&prior_batch));
                auto params = result.stn->forward(tape, loc_in);
                auto grid = tape.affine_grid(params, dims.l, dims.w, dims.h);
                auto warped = tape.grid_sample(logits, grid);
                if (train_w2)
                    for (auto* p : w2) w2_ids.push_back(tape.leaf(p));

                if (stage == 2) {
                    loss_id = loss_deformation(tape, warped, target, w2_ids,
                                               static_cast<float>(cfg.l2_coeff));
                    bce2 = tape.val(loss_id).v[0];
                } else {
                    loss_id = loss_global(tape, logits, warped, target, w1_ids, w2_ids,
                                          static_cast<float>(cfg.loss_a),
                                          static_cast<float>(cfg.loss_b),
                                          static_cast<float>(cfg.loss_c),
                                          static_cast<float>(cfg.l2_coeff));
                    Tape<float> probe;  // cheap scalar readouts for the record
                    (void)probe;
                    bce1 = tape.val(tape.bce_with_logits_sum(logits, target)).v[0];
                    bce2 = tape.val(tape.bce_with_logits_sum(warped, target)).v[0];
                }
            }

            const double loss_value = tape.val(loss_id).v[0];
            require(std::isfinite(loss_value),
                    "train: non-finite loss at epoch " + std::to_string(epoch));
            tape.backward(loss_id);
            if (train_w1) adam_step(w1, adam1);
            if (train_w2) adam_step(w2, adam2);

            if (!std::isnan(bce1)) {
                sum_l1 += bce1;
                ++n_l1;
            }
            if (!std::isnan(bce2)) {
                sum_l2 += bce2;
                ++n_l2;
            }
            sum_lg += loss_value;
            ++batches;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.stage = stage;
        if (n_l1) rec.loss_vnet = sum_l1 / n_l1;
        if (n_l2) rec.loss_deformation = sum_l2 / n_l2;
        rec.loss_global = sum_lg / batches;
        if (cfg.val_every > 0 &&
            (epoch % cfg.val_every == 0 || epoch + 1 == cfg.epochs))
            rec.val_dsc = validate_dsc(*result.vnet, with_stn ? result.stn.get() : nullptr,
                                       val_set);
        result.record.push_back(rec);
        if (on_epoch) on_epoch(rec);

        if (!checkpoint_dir.empty() && cfg.checkpoint_every > 0 &&
            ((epoch + 1) % cfg.checkpoint_every == 0 || epoch + 1 == cfg.epochs)) {
            std::filesystem::create_directories(checkpoint_dir);
            std::vector<Tensor<float>*> all = w1;
            all.insert(all.end(), w2.begin(), w2.end());
            save_checkpoint(all, checkpoint_dir / ("epoch_" + std::to_string(epoch + 1) +
                                                   ".ckpt"));
        }
    }
    result.vnet->set_trainable(true);
    if (result.stn) result.stn->set_trainable(true);
    return result;
}

void save_train_record(const std::vector<EpochRecord>& record,
                       const std::filesystem::path& path) {
    std::ofstream out(path);
    require(out.good(), "cannot write train record: " + path.string());
    out << "epoch,stage,loss_vnet,loss_deformation,loss_global,val_dsc\n";
    char buf[160];
    for (const auto& r : record) {
        auto num = [](double v, char* dst, std::size_t cap) {
            if (std::isnan(v)) {
                dst[0] = '\0';
                return;
            }
            std::snprintf(dst, cap, "%.6f", v);
        };
        char l1[32], l2[32], lg[32], vd[32];
        num(r.loss_vnet, l1, sizeof(l1));
        num(r.loss_deformation, l2, sizeof(l2));
        num(r.loss_global, lg, sizeof(lg));
        num(r.val_dsc, vd, sizeof(vd));
        std::snprintf(buf, sizeof(buf), "%d,%d,%s,%s,%s,%s\n", r.epoch, r.stage, l1, l2, lg,
                      vd);
        out << buf;
    }
}

CrossvalSummary::Cell CrossvalSummary::cell(Variant v, Structure s) const {
    Cell c;
    double sum_d = 0, sum_h = 0;
    for (const auto& r : rows)
        if (r.variant == v && r.structure == s) {
            sum_d += r.dsc;
            sum_h += r.hd_mm;
            ++c.n;
        }
    if (!c.n) return c;
    c.dsc_mean = sum_d / c.n;
    c.hd_mean = sum_h / c.n;
    double ssd = 0, ssh = 0;
    for (const auto& r : rows)
        if (r.variant == v && r.structure == s) {
            ssd += (r.dsc - c.dsc_mean) * (r.dsc - c.dsc_mean);
            ssh += (r.hd_mm - c.hd_mean) * (r.hd_mm - c.hd_mean);
        }
    c.dsc_std = c.n > 1 ? std::sqrt(ssd / (c.n - 1)) : 0.0;
    c.hd_std = c.n > 1 ? std::sqrt(ssh / (c.n - 1)) : 0.0;
    return c;
}

CrossvalSummary run_crossval(const DatasetManifest& manifest, int k,
                             const std::vector<Variant>& variants,
                             const std::vector<Structure>& structures, const TrainConfig& base,
                             const std::function<void(const std::string&)>& log) {
    CrossvalSummary summary;
    auto folds = stratified_folds(manifest, k, base.seed);
    auto say = [&](const std::string& m) {
        if (log) log(m);
    };
    for (int f = 0; f < k; ++f) {
        for (Structure s : structures) {
            std::vector<TrainSample> train_s =
                build_samples(manifest, folds[f].train_ids, s, true);
            std::vector<TrainSample> test_s =
                build_samples(manifest, folds[f].test_ids, s, true);
            for (Variant v : variants) {
                say("fold " + std::to_string(f) + " " + variant_name(v) + " " +
                    structure_name(s));
                std::shared_ptr<VNet> net;
                std::shared_ptr<LocalizationNet> stn;
                if (v != Variant::dp) {
                    TrainConfig cfg = base;
                    cfg.variant = v;
                    cfg.structure = s;
                    cfg.seed = mix(base.seed, f * 101ULL + static_cast<int>(v) * 13ULL +
                                                  static_cast<int>(s));
                    TrainResult res = train(train_s, {}, cfg);
                    net = res.vnet;
                    stn = res.stn;
                }
                for (const auto& t : test_s) {
                    CrossvalRow row;
                    row.fold = f;
                    row.variant = v;
                    row.structure = s;
                    row.patient_id = t.patient_id;
                    row.state = t.state;
                    row.gate = t.gate;
                    Mask3D pred(t.target.dims, t.target.voxel_mm, s);
                    if (v == Variant::dp) {
                        pred = t.prior;
                    } else {
                        Volume3D prob = predict_volume(
                            *net, stn.get(), t.image,
                            t.prior.dims.count() ? &t.prior : nullptr);
                        pred = binarize(prob, 0.5, s);
                    }
                    row.dsc = dsc(pred, t.target);
                    row.hd_mm = (pred.foreground_count() && t.target.foreground_count())
                                    ? hausdorff_mm(pred, t.target)
                                    : std::numeric_limits<double>::quiet_NaN();
                    summary.rows.push_back(std::move(row));
                }
            }
        }
    }
    return summary;
}

}  // namespace spectlv
