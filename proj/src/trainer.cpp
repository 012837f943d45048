#include "ism/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "ism/errors.hpp"

namespace ism {

void validate(const TrainConfig& config) {
    if (config.batch == 0) throw ConfigError("train config: batch must be >= 1");
    if (!(config.lr > 0.0)) throw ConfigError("train config: learning rate must be > 0");
    if (!(config.decay > 0.0 && config.decay < 1.0))
        throw ConfigError("train config: decay must be in (0,1)");
    double prev = 0.0;
    for (double m : config.milestones) {
        if (!(m > prev && m < 1.0))
            throw ConfigError("train config: milestones must be strictly increasing in (0,1)");
        prev = m;
    }
    if (!(config.disc_lr_scale > 0.0))
        throw ConfigError("train config: disc_lr_scale must be > 0");
    validate(config.weights);
}

double lr_at(size_t epoch, const TrainConfig& config) {
    double lr = config.lr;
    for (double m : config.milestones) {
        const auto milestone_epoch =
            static_cast<size_t>(std::floor(m * static_cast<double>(config.epochs)));
        if (epoch >= milestone_epoch) lr *= config.decay;
    }
    return lr;
}

void write_runlog(const RunLog& log, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IngestionError("runlog: cannot open for write: " + path.string());
    for (const auto& e : log.epochs) {
        nlohmann::json j = {{"epoch", e.epoch},
                            {"lr", e.lr},
                            {"ce", e.ce},
                            {"isl", e.isl},
                            {"idkl", e.idkl},
                            {"disc", e.disc},
                            {"total", e.total},
                            {"teacher_checksum", e.teacher_checksum},
                            {"student_checksum", e.student_checksum}};
        out << j.dump() << '\n';
    }
}

Checkpoint pretrain(const DatasetSplit& source, const TrainConfig& config, RunLog* log) {
    validate(config);
    if (source.samples.empty()) throw ConfigError("pretrain: empty source split");
    const auto classes = class_index_map(source);
    if (classes.size() < 2) throw ConfigError("pretrain: need at least 2 identities");

    ExtractorConfig xcfg = config.extractor;
    xcfg.init_seed = config.model_seed;
    Mlp extractor = Mlp::init(xcfg);
    ClassifierHead head =
        ClassifierHead::init(xcfg.feature_dim, classes.size(), mix_seed(config.model_seed, 0x4ead));

    std::vector<Tensor> params = extractor.parameters();
    for (const Tensor& p : head.parameters()) params.push_back(p);
    AdamConfig acfg;
    acfg.lr = config.lr;
    Adam opt(params, acfg);

    BatchSampler sampler(source.samples.size(), std::min(config.batch, source.samples.size()),
                         config.data_seed);
    for (size_t epoch = 0; epoch < config.epochs; ++epoch) {
        opt.set_lr(lr_at(epoch, config));
        double ce_sum = 0.0;
        size_t batches = 0;
        for (const auto& indices : sampler.epoch_batches()) {
            const Tensor x = batch_pixels(source, indices);
            const auto y = batch_classes(source, indices, classes);
            const Tensor targets = smooth_target_rows(y, classes.size(), config.weights.epsilon);
            const Tensor loss = ce_smoothed(head.forward(extract(extractor, x)), targets);
            opt.zero_grad();
            backward(loss);
            opt.step();
            ce_sum += loss.item();
            ++batches;
        }
        if (log) {
            EpochRecord rec;
            rec.epoch = epoch;
            rec.lr = opt.lr();
            rec.ce = ce_sum / static_cast<double>(batches);
            rec.total = rec.ce;
            rec.student_checksum = extractor.checksum();
            log->epochs.push_back(rec);
        }
    }
    Checkpoint ckpt = Checkpoint::from_model(extractor, &head);
    if (log) log->final_checksum = ckpt.checksum();
    return ckpt;
}

RoundLosses adversarial_round(const Mlp& teacher, Mlp& student, Discriminator& disc,
                              const Tensor& clear_batch, const Tensor& hazy_batch,
                              const TrainConfig& config, Adam& disc_opt, Adam& student_opt,
                              const Tensor* replay_pixels, const Tensor* replay_targets,
                              const ClassifierHead* replay_head) {
    if (teacher.trainable()) throw ContractError("adversarial_round: teacher must be frozen");
    if (clear_batch.shape() != hazy_batch.shape())
        throw ContractError("adversarial_round: clear/hazy batches must be index-paired");
    const size_t b = clear_batch.extent(0);

    RoundLosses out;
    const Tensor teacher_feats = extract(teacher, clear_batch).detach();
    Tensor student_feats = extract(student, hazy_batch);

    // Discriminator step: teacher features labeled clear, detached student
    // features labeled hazy.
    {
        std::vector<int> labels(2 * b, 0);
        for (size_t i = b; i < 2 * b; ++i) labels[i] = 1;
        const Tensor logits = disc.logits(concat_rows(teacher_feats, student_feats.detach()));
        const Tensor loss = disc_ce(logits, labels);
        disc_opt.zero_grad();
        backward(loss);
        disc_opt.step();
        out.disc = loss.item();
    }

    // Student step against the refreshed discriminator; D receives no update.
    const bool replay = replay_pixels != nullptr;
    if (config.use_isl || config.use_idkl || replay) {
        Tensor loss = Tensor::scalar(0.0);
        if (config.use_isl) {
            const Tensor mc = pairwise_l2_matrix(teacher_feats);
            const Tensor mh = pairwise_l2_matrix(student_feats);
            const Tensor isl = isl_loss(mc, mh);
            out.isl = isl.item();
            loss = add(loss, scale(isl, config.weights.lambda1));
        }
        if (config.use_idkl) {
            const Tensor ht = disc.logits(teacher_feats).detach();
            const Tensor hs = disc.logits(student_feats);
            const Tensor idkl = idkl_loss(ht, hs, config.weights.delta);
            out.idkl = idkl.item();
            loss = add(loss, scale(idkl, config.weights.lambda2));
        }
        if (replay) {
            if (replay_targets == nullptr || replay_head == nullptr || !replay_head->valid())
                throw ContractError("adversarial_round: replay requires targets and a head");
            const Tensor logits = replay_head->forward(extract(student, *replay_pixels));
            const Tensor ce = ce_smoothed(logits, *replay_targets);
            out.ce = ce.item();
            loss = add(loss, ce);
        }
        student_opt.zero_grad();
        disc_opt.zero_grad();  // idkl leaks grads into D; discard them
        backward(loss);
        student_opt.step();
        disc_opt.zero_grad();
    }
    return out;
}

AdaptResult adapt(const Checkpoint& pretrained, const DatasetSplit& target_clear,
                  const DepthSource& depth, const HazeParams& haze, const TrainConfig& config,
                  const DatasetSplit* source_for_replay, const Checkpoint* student_init) {
    validate(config);
    validate(haze);
    if (target_clear.samples.empty()) throw ConfigError("adapt: empty target split");
    if (config.source_ce_replay && source_for_replay == nullptr)
        throw ConfigError("adapt: source_ce_replay needs a labeled source split");

    HazeParams hp = haze;
    hp.seed = config.haze_seed;
    const HazyDataset hazy = hazify_dataset(target_clear, depth, hp);

    const Mlp teacher = pretrained.extractor(false);
    if (student_init != nullptr) {
        ExtractorConfig a = pretrained.config, b = student_init->config;
        a.init_seed = b.init_seed = 0;  // architecture parity, seeds may differ
        if (!(a == b))
            throw ContractError("adapt: student checkpoint architecture differs from the teacher");
    }
    Mlp student = (student_init ? *student_init : pretrained).extractor(true);
    Discriminator disc = Discriminator::init(pretrained.config.feature_dim,
                                             config.discriminator_hidden, 0.1,
                                             mix_seed(config.model_seed, 0xd15c));

    // Replay pulls the pretrained classifier head along and trains it with
    // the student, realizing the combined-objective reading.
    ClassifierHead head;
    std::map<int, size_t> replay_classes;
    std::optional<BatchSampler> replay_sampler;
    std::vector<std::vector<size_t>> replay_batches;
    size_t replay_cursor = 0;
    if (config.source_ce_replay) {
        head = pretrained.head(true);
        replay_classes = class_index_map(*source_for_replay);
        if (replay_classes.size() != head.num_classes())
            throw ConfigError("adapt: replay split identity count does not match the head");
        replay_sampler.emplace(source_for_replay->samples.size(),
                               std::min(config.batch, source_for_replay->samples.size()),
                               mix_seed(config.data_seed, 0x3e91a7));
    }

    std::vector<Tensor> student_params = student.parameters();
    if (config.source_ce_replay)
        for (const Tensor& p : head.parameters()) student_params.push_back(p);
    AdamConfig acfg;
    acfg.lr = config.lr;
    Adam student_opt(student_params, acfg);
    AdamConfig dcfg = acfg;
    dcfg.lr = config.lr * config.disc_lr_scale;
    Adam disc_opt(disc.parameters(), dcfg);

    const uint64_t teacher_checksum0 = teacher.checksum();
    RunLog log;
    BatchSampler sampler(target_clear.samples.size(),
                         std::min(config.batch, target_clear.samples.size()), config.data_seed);
    for (size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const double lr = lr_at(epoch, config);
        student_opt.set_lr(lr);
        disc_opt.set_lr(lr * config.disc_lr_scale);

        double disc_sum = 0.0, isl_sum = 0.0, idkl_sum = 0.0, ce_sum = 0.0;
        size_t rounds = 0;
        for (const auto& indices : sampler.epoch_batches()) {
            const Tensor clear_batch = batch_pixels(target_clear, indices);
            const Tensor hazy_batch = batch_pixels(hazy.split, indices);

            Tensor replay_px, replay_targets;
            const Tensor* ppx = nullptr;
            const Tensor* ptg = nullptr;
            if (config.source_ce_replay) {
                if (replay_cursor >= replay_batches.size()) {
                    replay_batches = replay_sampler->epoch_batches();
                    replay_cursor = 0;
                }
                const auto& ridx = replay_batches[replay_cursor++];
                replay_px = batch_pixels(*source_for_replay, ridx);
                replay_targets =
                    smooth_target_rows(batch_classes(*source_for_replay, ridx, replay_classes),
                                       head.num_classes(), config.weights.epsilon);
                ppx = &replay_px;
                ptg = &replay_targets;
            }

            const RoundLosses losses =
                adversarial_round(teacher, student, disc, clear_batch, hazy_batch, config,
                                  disc_opt, student_opt, ppx, ptg,
                                  config.source_ce_replay ? &head : nullptr);
            disc_sum += losses.disc;
            isl_sum += losses.isl;
            idkl_sum += losses.idkl;
            ce_sum += losses.ce;
            ++rounds;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = lr;
        const double n = static_cast<double>(rounds);
        rec.disc = disc_sum / n;
        rec.isl = isl_sum / n;
        rec.idkl = idkl_sum / n;
        rec.ce = ce_sum / n;
        rec.total = rec.ce + config.weights.lambda1 * rec.isl + config.weights.lambda2 * rec.idkl;
        rec.teacher_checksum = teacher.checksum();
        rec.student_checksum = student.checksum();
        if (rec.teacher_checksum != teacher_checksum0)
            throw ContractError("adapt: frozen teacher parameters changed");
        log.epochs.push_back(rec);
    }

    AdaptResult result;
    result.student = Checkpoint::from_model(student, config.source_ce_replay ? &head : nullptr);
    result.log = log;
    result.log.final_checksum = result.student.checksum();
    return result;
}

}  // namespace ism
