// Copyright (c) 2026 the wbcdetect authors
// SPDX-License-Identifier: Apache-2.0

#include "core/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <stdexcept>
#include <utility>

#include "core/head.hpp"
#include "core/layers.hpp"
#include "core/rng.hpp"

namespace wbc {

namespace {

double now_seconds() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

LossConfig resolve_loss(const TrainingConfig& cfg, int anchor_locations) {
    LossConfig loss = cfg.loss;
    if (loss.n_cls <= 0) loss.n_cls = cfg.minibatch;
    if (loss.n_reg <= 0) loss.n_reg = anchor_locations;
    return loss;
}

void check_finite(double loss, const std::string& stage, int epoch) {
    if (!std::isfinite(loss))
        throw std::runtime_error("training diverged in " + stage + " at epoch " +
                                 std::to_string(epoch) + ": non-finite loss");
}

Checkpoint snapshot(const std::string& stage, const ModelConfig& model_cfg,
                    std::vector<Parameter*> params) {
    Checkpoint ckpt;
    ckpt.stage = stage;
    ckpt.config = model_cfg.to_kv();
    for (const Parameter* p : params) ckpt.params.push_back(*p);
    return ckpt;
}

void restore_params(const Checkpoint& ckpt, std::vector<Parameter*> params) {
    for (Parameter* p : params) {
        const Parameter* src = ckpt.find(p->name);
        if (!src) throw std::runtime_error("checkpoint: missing parameter " + p->name);
        if (!src->value.same_shape(p->value))
            throw std::runtime_error("checkpoint: shape mismatch for " + p->name);
        p->value = src->value;
    }
}

// Per-image, per-stage-constant data for RPN steps.
struct RpnImageState {
    std::vector<BBox> anchors;
    std::vector<AnchorLabel> labels;
    std::vector<std::optional<RegressionTarget>> targets;
    int feat_w = 0, feat_h = 0;
};

std::vector<RpnImageState> prepare_rpn_states(const std::vector<Sample>& samples,
                                              const TrainingConfig& cfg) {
    std::vector<RpnImageState> states;
    states.reserve(samples.size());
    for (const auto& sample : samples) {
        RpnImageState st;
        // backbone downsampling: two 2x pools
        st.feat_h = sample.image.dim(1) / kFeatStride;
        st.feat_w = sample.image.dim(2) / kFeatStride;
        st.anchors = generate_anchors(st.feat_w, st.feat_h, cfg.model.anchor_spec);
        const auto gts = sample.annotation.wbc_boxes();
        st.labels = label_anchors(st.anchors, gts, cfg.pos_iou, cfg.neg_iou);
        st.targets = make_rpn_targets(st.anchors, gts, st.labels);
        states.push_back(std::move(st));
    }
    return states;
}

StageReport train_rpn_stage(Sequential& backbone, RpnHead& rpn,
                            const std::vector<Sample>& samples,
                            const std::vector<RpnImageState>& states,
                            const TrainingConfig& cfg, bool backbone_frozen,
                            const std::string& stage_name, std::uint64_t stage_salt) {
    StageReport report;
    report.name = stage_name;
    const double t0 = now_seconds();

    backbone.set_frozen(backbone_frozen);
    std::vector<ParamGroup> groups{{rpn.params(), cfg.lr_rpn}};
    if (!backbone_frozen) groups.push_back({backbone.params(), cfg.lr_cnn});

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        double epoch_loss = 0.0;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const RpnImageState& st = states[i];
            const Tensor feature = backbone.forward(samples[i].image);
            const auto out = rpn.forward(feature);

            const std::uint64_t step_seed =
                Rng::mix(cfg.seed, stage_salt * 1000003ULL +
                                        static_cast<std::uint64_t>(epoch) * 1009ULL + i);
            const auto batch =
                sample_minibatch(st.labels, cfg.minibatch, cfg.pos_fraction, step_seed);
            const LossConfig loss_cfg = resolve_loss(cfg, st.feat_w * st.feat_h);

            const auto grad = rpn_loss_from_logits(out.per_anchor_logits(),
                                                   out.per_anchor_deltas(), st.labels,
                                                   st.targets, loss_cfg, batch);
            epoch_loss += grad.terms.total;

            const Tensor d_feature = rpn.backward(grad.d_logits, grad.d_deltas);
            if (!backbone_frozen) backbone.backward(d_feature);
            sgd_update(groups);
        }
        epoch_loss /= static_cast<double>(samples.size());
        check_finite(epoch_loss, stage_name, epoch + 1);
        report.epoch_losses.push_back(epoch_loss);
    }
    report.diverged = has_divergent_run(report.epoch_losses);
    report.seconds = now_seconds() - t0;
    return report;
}

std::vector<std::vector<ScoredBox>> precompute_proposals(Sequential& backbone, RpnHead& rpn,
                                                         const std::vector<Sample>& samples,
                                                         const TrainingConfig& cfg) {
    std::vector<std::vector<ScoredBox>> proposals;
    proposals.reserve(samples.size());
    for (const auto& sample : samples) {
        const Tensor feature = backbone.forward(sample.image);
        const auto out = rpn.forward(feature);
        const auto anchors = generate_anchors(out.feat_w, out.feat_h, cfg.model.anchor_spec);
        proposals.push_back(generate_proposals(out.to_rpn_output(), anchors,
                                               sample.image.dim(2), sample.image.dim(1),
                                               cfg.proposals));
    }
    return proposals;
}

struct RoiExample {
    BBox box;
    int label = 0;        // 0 background, 1 WBC
    int matched_gt = -1;
};

StageReport train_head_stage(Sequential& backbone, DetectorHead& head,
                             const std::vector<Sample>& samples,
                             const std::vector<std::vector<ScoredBox>>& proposals,
                             const TrainingConfig& cfg, bool backbone_frozen,
                             const std::string& stage_name, std::uint64_t stage_salt) {
    StageReport report;
    report.name = stage_name;
    const double t0 = now_seconds();

    backbone.set_frozen(backbone_frozen);
    std::vector<ParamGroup> groups{{head.params(), cfg.lr_head}};
    if (!backbone_frozen) groups.push_back({backbone.params(), cfg.lr_cnn});

    const double scale = 1.0 / cfg.model.anchor_spec.stride;

    // ROI candidates are stage-constant: proposals plus the ground-truth
    // boxes themselves, labeled by best IoU against the ground truth.
    std::vector<std::vector<RoiExample>> rois(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto gts = samples[i].annotation.wbc_boxes();
        std::vector<RoiExample> list;
        const auto add = [&](const BBox& box) {
            RoiExample roi;
            roi.box = box;
            double best = 0.0;
            for (std::size_t g = 0; g < gts.size(); ++g) {
                const double v = iou(box, gts[g]);
                if (v > best) {
                    best = v;
                    roi.matched_gt = static_cast<int>(g);
                }
            }
            roi.label = (roi.matched_gt >= 0 && best >= cfg.roi_fg_iou) ? 1 : 0;
            if (roi.label == 0) roi.matched_gt = -1;
            list.push_back(roi);
        };
        for (const auto& p : proposals[i]) add(p.box);
        for (const auto& g : gts) add(g);
        rois[i] = std::move(list);
    }

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        double epoch_loss = 0.0;
        int steps = 0;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            if (rois[i].empty()) continue;
            const auto gts = samples[i].annotation.wbc_boxes();

            std::vector<int> fg, bg;
            for (std::size_t r = 0; r < rois[i].size(); ++r)
                (rois[i][r].label == 1 ? fg : bg).push_back(static_cast<int>(r));

            Rng rng(Rng::mix(cfg.seed, stage_salt * 1000033ULL +
                                           static_cast<std::uint64_t>(epoch) * 1013ULL + i));
            rng.shuffle(fg);
            rng.shuffle(bg);
            const int want_fg =
                static_cast<int>(std::floor(cfg.roi_batch * cfg.roi_fg_fraction));
            const int n_fg = std::min<int>(want_fg, static_cast<int>(fg.size()));
            const int n_bg = std::min<int>(cfg.roi_batch - n_fg, static_cast<int>(bg.size()));
            std::vector<int> batch(fg.begin(), fg.begin() + n_fg);
            batch.insert(batch.end(), bg.begin(), bg.begin() + n_bg);
            if (batch.empty()) continue;

            const Tensor feature = backbone.forward(samples[i].image);
            Tensor feature_grad(feature.shape());
            const double inv_n = 1.0 / static_cast<double>(batch.size());

            double image_loss = 0.0;
            for (int r : batch) {
                const RoiExample& roi = rois[i][static_cast<std::size_t>(r)];
                const auto pooled = roi_pool(feature, roi.box, scale, kPooledSide);
                const auto out = head.forward(pooled.feature);

                std::vector<double> d_logits;
                image_loss += inv_n * softmax_cross_entropy(out.logits, roi.label, &d_logits);
                for (auto& g : d_logits) g *= inv_n;

                std::vector<RegressionTarget> d_deltas(1);
                if (roi.label == 1) {
                    const RegressionTarget target =
                        encode_box(roi.box, gts[static_cast<std::size_t>(roi.matched_gt)]);
                    const RegressionTarget& d = out.deltas[0];
                    image_loss += inv_n * (smooth_l1(d.tx - target.tx) + smooth_l1(d.ty - target.ty) +
                                           smooth_l1(d.tw - target.tw) + smooth_l1(d.th - target.th));
                    d_deltas[0] = {inv_n * smooth_l1_grad(d.tx - target.tx),
                                   inv_n * smooth_l1_grad(d.ty - target.ty),
                                   inv_n * smooth_l1_grad(d.tw - target.tw),
                                   inv_n * smooth_l1_grad(d.th - target.th)};
                }

                const Tensor d_roi = head.backward(d_logits, d_deltas);
                if (!backbone_frozen) roi_pool_backward(d_roi, pooled.argmax, feature_grad);
            }
            if (!backbone_frozen) backbone.backward(feature_grad);
            sgd_update(groups);
            epoch_loss += image_loss;
            ++steps;
        }
        if (steps == 0) throw std::runtime_error(stage_name + ": no usable training examples");
        epoch_loss /= static_cast<double>(steps);
        check_finite(epoch_loss, stage_name, epoch + 1);
        report.epoch_losses.push_back(epoch_loss);
    }
    report.diverged = has_divergent_run(report.epoch_losses);
    report.seconds = now_seconds() - t0;
    return report;
}

}  // namespace

bool has_divergent_run(const std::vector<double>& losses, int run_length) {
    int run = 0;
    for (std::size_t i = 1; i < losses.size(); ++i) {
        run = losses[i] > losses[i - 1] ? run + 1 : 0;
        if (run + 1 >= run_length) return true;
    }
    return false;
}

// ---------------------------------------------------------------------------
// pretraining

PatchSet extract_patches(const std::vector<Sample>& samples, std::uint64_t seed) {
    PatchSet set;
    Rng rng(Rng::mix(seed, 0x9a7c4));
    for (const auto& sample : samples) {
        const int h = sample.image.dim(1), w = sample.image.dim(2);
        if (h < kPooledSide || w < kPooledSide) continue;
        const auto gts = sample.annotation.wbc_boxes();

        const auto crop = [&](int x0, int y0) {
            Tensor patch({3, kPooledSide, kPooledSide});
            for (int c = 0; c < 3; ++c)
                for (int y = 0; y < kPooledSide; ++y)
                    for (int x = 0; x < kPooledSide; ++x)
                        patch.at(c, y, x) = sample.image.at(c, y0 + y, x0 + x);
            return patch;
        };

        int positives = 0;
        for (const auto& gt : gts) {
            const int x0 = std::clamp(static_cast<int>(std::lround(gt.cx())) - kPooledSide / 2,
                                      0, w - kPooledSide);
            const int y0 = std::clamp(static_cast<int>(std::lround(gt.cy())) - kPooledSide / 2,
                                      0, h - kPooledSide);
            set.patches.push_back(crop(x0, y0));
            set.labels.push_back(1);
            ++positives;
        }

        const int negatives = std::max(positives, 1);
        for (int n = 0; n < negatives; ++n) {
            for (int attempt = 0; attempt < 50; ++attempt) {
                const int x0 = static_cast<int>(rng.uniform_int(
                    static_cast<std::uint64_t>(w - kPooledSide + 1)));
                const int y0 = static_cast<int>(rng.uniform_int(
                    static_cast<std::uint64_t>(h - kPooledSide + 1)));
                const BBox patch_box{static_cast<double>(x0), static_cast<double>(y0),
                                     static_cast<double>(x0 + kPooledSide),
                                     static_cast<double>(y0 + kPooledSide)};
                bool clear = true;
                for (const auto& gt : gts)
                    if (iou(patch_box, gt) > 0.02) {
                        clear = false;
                        break;
                    }
                if (clear) {
                    set.patches.push_back(crop(x0, y0));
                    set.labels.push_back(0);
                    break;
                }
            }
        }
    }
    return set;
}

PretrainResult pretrain_backbone(const PatchSet& patches, const TrainingConfig& cfg) {
    if (patches.patches.empty())
        throw std::invalid_argument("pretrain_backbone: empty patch set");

    Rng init_rng(Rng::mix(cfg.seed, 1));  // same backbone init stream as DetectorModel
    Sequential backbone = make_backbone(init_rng);
    const int feat_side = kPooledSide / kFeatStride;
    Rng fc_rng(Rng::mix(cfg.seed, 0xfc));
    FullyConnected classifier(kFeatChannels * feat_side * feat_side, 2, "pretrain.fc");
    classifier.init_xavier(fc_rng);

    // seeded 80/20 holdout split
    std::vector<int> order(static_cast<int>(patches.patches.size()));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    Rng split_rng(Rng::mix(cfg.seed, 0x401d));
    split_rng.shuffle(order);
    const int holdout_count = static_cast<int>(order.size()) / 5;
    std::vector<int> holdout(order.begin(), order.begin() + holdout_count);
    std::vector<int> train(order.begin() + holdout_count, order.end());

    std::vector<ParamGroup> groups{{backbone.params(), cfg.lr_pretrain},
                                   {classifier.params(), cfg.lr_pretrain}};

    PretrainResult result;
    result.report.name = "pretrain";
    const double t0 = now_seconds();
    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        Rng epoch_rng(Rng::mix(cfg.seed, 0xe90c4 + static_cast<std::uint64_t>(epoch)));
        epoch_rng.shuffle(train);
        double epoch_loss = 0.0;
        for (int idx : train) {
            const Tensor feature = backbone.forward(patches.patches[static_cast<std::size_t>(idx)]);
            const Tensor logits = classifier.forward(feature);
            std::vector<double> d_logits;
            epoch_loss += softmax_cross_entropy(logits.values(),
                                                patches.labels[static_cast<std::size_t>(idx)],
                                                &d_logits);
            backbone.backward(classifier.backward(Tensor({2}, d_logits)));
            sgd_update(groups);
        }
        epoch_loss /= static_cast<double>(train.size());
        check_finite(epoch_loss, "pretrain", epoch + 1);
        result.report.epoch_losses.push_back(epoch_loss);
    }
    result.report.diverged = has_divergent_run(result.report.epoch_losses);
    result.report.seconds = now_seconds() - t0;

    const auto accuracy_on = [&](const std::vector<int>& indices) {
        if (indices.empty()) return 0.0;
        int correct = 0;
        for (int idx : indices) {
            const Tensor feature = backbone.forward(patches.patches[static_cast<std::size_t>(idx)]);
            const Tensor logits = classifier.forward(feature);
            const int predicted = logits[1] > logits[0] ? 1 : 0;
            if (predicted == patches.labels[static_cast<std::size_t>(idx)]) ++correct;
        }
        return static_cast<double>(correct) / static_cast<double>(indices.size());
    };
    result.train_accuracy = accuracy_on(train);
    result.holdout_accuracy = holdout.empty() ? result.train_accuracy : accuracy_on(holdout);

    if (result.holdout_accuracy < 0.6)
        throw std::runtime_error("pretraining failed: held-out patch accuracy " +
                                 std::to_string(result.holdout_accuracy) + " is below 0.6");

    result.backbone = snapshot("pretrain", cfg.model, backbone.params());
    return result;
}

// ---------------------------------------------------------------------------
// alternating training

TrainRunResult alternating_train(const std::vector<Sample>& train_set,
                                 const Checkpoint& pretrained_backbone,
                                 const TrainingConfig& cfg) {
    if (train_set.empty())
        throw std::invalid_argument("alternating_train: empty training set");

    DetectorModel model(cfg.model, cfg.seed);  // shared backbone + both heads
    restore_params(pretrained_backbone, model.backbone_params());

    // stage 1 trains the RPN against its own copy of the pretrained backbone
    Rng aux_rng(Rng::mix(cfg.seed, 1));
    Sequential rpn_backbone = make_backbone(aux_rng);
    restore_params(pretrained_backbone, rpn_backbone.params());

    const auto states = prepare_rpn_states(train_set, cfg);

    TrainRunResult result;
    const auto head_params_of = [&](DetectorModel& m) {
        std::vector<Parameter*> all = m.rpn_params();
        for (Parameter* p : m.head_params()) all.push_back(p);
        return all;
    };

    // 1) RPN from the pretrained model
    result.stages.push_back(train_rpn_stage(rpn_backbone, model.rpn_head(), train_set, states,
                                            cfg, cfg.freeze_backbone[0], "stage1_rpn", 1));
    {
        std::vector<Parameter*> params = rpn_backbone.params();
        for (Parameter* p : head_params_of(model)) params.push_back(p);
        result.stage_checkpoints[0] = snapshot("stage1", cfg.model, params);
    }

    // 2) separate detection network from the pretrained model, fed by
    //    stage-1 proposals
    const auto stage1_proposals =
        precompute_proposals(rpn_backbone, model.rpn_head(), train_set, cfg);
    result.stages.push_back(train_head_stage(model.backbone(), model.det_head(), train_set,
                                             stage1_proposals, cfg, cfg.freeze_backbone[1],
                                             "stage2_head", 2));
    result.stage_checkpoints[1] = snapshot("stage2", cfg.model, model.all_params());

    // 3) RPN retrained over the now-shared backbone, backbone fixed
    result.stages.push_back(train_rpn_stage(model.backbone(), model.rpn_head(), train_set,
                                            states, cfg, cfg.freeze_backbone[2], "stage3_rpn",
                                            3));
    result.stage_checkpoints[2] = snapshot("stage3", cfg.model, model.all_params());

    // 4) detector head fine-tuned, backbone still fixed
    const auto stage3_proposals =
        precompute_proposals(model.backbone(), model.rpn_head(), train_set, cfg);
    result.stages.push_back(train_head_stage(model.backbone(), model.det_head(), train_set,
                                             stage3_proposals, cfg, cfg.freeze_backbone[3],
                                             "stage4_head", 4));
    result.stage_checkpoints[3] = snapshot("stage4", cfg.model, model.all_params());

    result.final_checkpoint = snapshot("final", cfg.model, model.all_params());
    return result;
}

TransferResult transfer_learn(const Checkpoint& checkpoint,
                              const std::vector<Sample>& train_set,
                              const TrainingConfig& cfg) {
    if (train_set.empty()) throw std::invalid_argument("transfer_learn: empty training set");

    DetectorModel model = DetectorModel::from_checkpoint(checkpoint);
    model.backbone().set_frozen(true);

    const auto states = prepare_rpn_states(train_set, cfg);

    TransferResult result;
    result.stages.push_back(train_rpn_stage(model.backbone(), model.rpn_head(), train_set,
                                            states, cfg, true, "transfer_rpn", 5));
    const auto proposals =
        precompute_proposals(model.backbone(), model.rpn_head(), train_set, cfg);
    result.stages.push_back(train_head_stage(model.backbone(), model.det_head(), train_set,
                                             proposals, cfg, true, "transfer_head", 6));
    result.checkpoint = model.to_checkpoint("transfer");
    return result;
}

std::vector<Sample> load_samples(const std::vector<ManifestEntry>& entries) {
    std::vector<Sample> samples;
    samples.reserve(entries.size());
    for (const auto& e : entries) {
        Sample s;
        s.image = load_image(e.image_file);
        s.annotation = load_annotation(e.annotation_file);
        s.annotation.filename = e.image_path;
        if (s.annotation.width != s.image.dim(2) || s.annotation.height != s.image.dim(1))
            throw std::runtime_error("annotation " + e.annotation_file +
                                     " does not match the image dimensions of " + e.image_file);
        samples.push_back(std::move(s));
    }
    return samples;
}

}  // namespace wbc
