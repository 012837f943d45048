// Command-line surface for the haze-robust re-identification laboratory:
// dataset generation, haze synthesis, two-phase training, retrieval
// evaluation, and the four-way ablation harness.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "ism/ablation.hpp"
#include "ism/data.hpp"
#include "ism/errors.hpp"
#include "ism/eval.hpp"
#include "ism/haze.hpp"
#include "ism/models.hpp"
#include "ism/trainer.hpp"

namespace fs = std::filesystem;
using namespace ism;

namespace {

// Claims an output directory: refuses a non-empty one unless --force,
// which replaces it wholesale so no stale outputs survive.
void prepare_out_dir(const fs::path& dir, bool force) {
    if (fs::exists(dir) && fs::is_directory(dir) && !fs::is_empty(dir)) {
        if (!force)
            throw ConfigError("output directory " + dir.string() +
                              " is not empty (pass --force to overwrite)");
        fs::remove_all(dir);
    }
    fs::create_directories(dir);
}

void echo_config(CLI::App* cmd, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    std::ofstream out(out_dir / "effective-config.ini");
    out << cmd->config_to_str(true, false);
}

// A dataset argument may point at the image folder itself or at a dataset
// root containing a train/ subfolder.
fs::path resolve_images_dir(const fs::path& dir) {
    if (fs::is_directory(dir / "train")) return dir / "train";
    return dir;
}

DepthSource depth_source_from(const std::string& depth, double level) {
    if (depth == "ramp" || depth == "radial" || depth == "constant")
        return DepthSource::generator(parse_depth_kind(depth), level);
    return DepthSource::folder(depth);
}

struct SeedFlags {
    uint64_t master = 1;
    uint64_t model = 0;  // 0 = derive from master
    uint64_t data = 0;
    uint64_t haze = 0;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--seed", master, "Master seed; per-stream seeds derive from it");
        cmd->add_option("--model-seed", model, "Override the model init stream");
        cmd->add_option("--data-seed", data, "Override the batch order stream");
        cmd->add_option("--haze-seed", haze, "Override the haze beta stream");
    }
    void apply(TrainConfig& cfg) const {
        cfg.model_seed = model ? model : mix_seed(master, 0x01);
        cfg.data_seed = data ? data : mix_seed(master, 0x02);
        cfg.haze_seed = haze ? haze : mix_seed(master, 0x03);
    }
};

void add_train_flags(CLI::App* cmd, TrainConfig& cfg) {
    cmd->add_option("--epochs", cfg.epochs, "Training epochs");
    cmd->add_option("--batch", cfg.batch, "Batch size");
    cmd->add_option("--lr", cfg.lr, "Initial learning rate");
    cmd->add_option("--milestones", cfg.milestones,
                    "LR decay points as fractions of the epoch count");
    cmd->add_option("--decay", cfg.decay, "LR decay factor at each milestone");
    cmd->add_option("--epsilon", cfg.weights.epsilon, "Label smoothing");
}

void add_haze_flags(CLI::App* cmd, HazeParams& haze) {
    cmd->add_option("--A", haze.atmospheric_light, "Atmospheric light");
    cmd->add_option("--beta-lo", haze.beta_lo, "Density range lower bound");
    cmd->add_option("--beta-hi", haze.beta_hi, "Density range upper bound");
}

// ---------------------------------------------------------------------------
// gen-data
// ---------------------------------------------------------------------------

void setup_gen_data(CLI::App& app) {
    auto* cmd = app.add_subcommand("gen-data", "Generate a synthetic identity dataset");
    auto cfg = std::make_shared<SyntheticConfig>();
    auto out = std::make_shared<fs::path>();
    auto queries_per_id = std::make_shared<size_t>(0);
    auto force = std::make_shared<bool>(false);

    cmd->set_config("--config", "", "Config file (key=value)");
    cmd->add_option("--ids", cfg->n_ids, "Number of identities");
    cmd->add_option("--per-id", cfg->imgs_per_id, "Images per identity");
    cmd->add_option("--cams", cfg->n_cams, "Number of cameras");
    cmd->add_option("--height", cfg->height, "Image height");
    cmd->add_option("--width", cfg->width, "Image width");
    cmd->add_option("--id-offset", cfg->id_offset, "First person id minus one");
    cmd->add_option("--seed", cfg->seed, "Generator seed")->required();
    cmd->add_option("--queries-per-id", *queries_per_id,
                    "Also write query/ and gallery/ folders with this many queries per id");
    cmd->add_option("--out", *out, "Output dataset folder")->required();
    cmd->add_flag("--force", *force, "Overwrite a non-empty output folder");

    cmd->callback([cmd, cfg, out, queries_per_id, force] {
        prepare_out_dir(*out, *force);
        const DatasetSplit split = generate_synthetic_identities(*cfg);
        echo_config(cmd, *out);
        save_split(split, *out / "train");
        write_manifest(*out / "manifest.json", *cfg, split);
        if (*queries_per_id > 0) {
            const QueryGallerySplit qg =
                split_query_gallery(split, *queries_per_id, mix_seed(cfg->seed, 0x59));
            save_split(qg.query, *out / "query");
            save_split(qg.gallery, *out / "gallery");
            if (qg.single_camera_ids > 0)
                std::cerr << "warning: " << qg.single_camera_ids
                          << " identities lacked a second camera and were left out of the query set\n";
        }
        std::cout << "wrote " << split.size() << " images to " << (*out / "train").string() << '\n';
    });
}

// ---------------------------------------------------------------------------
// haze
// ---------------------------------------------------------------------------

void hazify_folder(const fs::path& in_dir, const fs::path& out_dir, const DepthSource& depth,
                   const HazeParams& params) {
    const DatasetSplit clear = load_split(in_dir, SplitRole::train);
    const HazyDataset hazy = hazify_dataset(clear, depth, params);
    save_split(hazy.split, out_dir);
    std::ofstream log(out_dir / "beta_log.csv");
    log << "file,beta\n";
    for (size_t i = 0; i < hazy.split.size(); ++i)
        log << hazy.split.samples[i].filename << ',' << hazy.betas[i] << '\n';
    std::cout << "hazified " << hazy.split.size() << " images into " << out_dir.string() << '\n';
}

void setup_haze(CLI::App& app) {
    auto* cmd = app.add_subcommand("haze", "Synthesize hazy copies of a clear image folder");
    auto in = std::make_shared<fs::path>();
    auto out = std::make_shared<fs::path>();
    auto depth = std::make_shared<std::string>("ramp");
    auto level = std::make_shared<double>(0.5);
    auto haze = std::make_shared<HazeParams>();
    auto force = std::make_shared<bool>(false);

    cmd->set_config("--config", "", "Config file (key=value)");
    cmd->add_option("--in", *in, "Clear image folder, or a dataset root with subfolders")
        ->required();
    cmd->add_option("--depth", *depth, "Depth source: ramp|radial|constant or a folder of PNGs");
    cmd->add_option("--level", *level, "Depth value for --depth constant");
    add_haze_flags(cmd, *haze);
    cmd->add_option("--seed", haze->seed, "Beta stream seed")->required();
    cmd->add_option("--out", *out, "Output folder")->required();
    cmd->add_flag("--force", *force, "Overwrite a non-empty output folder");

    cmd->callback([cmd, in, out, depth, level, haze, force] {
        validate(*haze);
        prepare_out_dir(*out, *force);
        const DepthSource source = depth_source_from(*depth, *level);
        echo_config(cmd, *out);

        bool any_sub = false;
        for (const char* sub : {"train", "query", "gallery"}) {
            if (!fs::is_directory(*in / sub)) continue;
            any_sub = true;
            hazify_folder(*in / sub, *out / sub, source, *haze);
        }
        if (!any_sub) hazify_folder(*in, *out, source, *haze);
    });
}

// ---------------------------------------------------------------------------
// pretrain
// ---------------------------------------------------------------------------

void setup_pretrain(CLI::App& app) {
    auto* cmd = app.add_subcommand("pretrain", "Supervised pretraining on a labeled source set");
    auto train_dir = std::make_shared<fs::path>();
    auto out = std::make_shared<fs::path>();
    auto cfg = std::make_shared<TrainConfig>();
    auto seeds = std::make_shared<SeedFlags>();
    auto force = std::make_shared<bool>(false);

    cmd->set_config("--config", "", "Config file (key=value)");
    cmd->add_option("--train", *train_dir, "Source training images")->required();
    add_train_flags(cmd, *cfg);
    cmd->add_option("--hidden", cfg->extractor.hidden, "Hidden layer widths");
    cmd->add_option("--feature-dim", cfg->extractor.feature_dim, "Feature dimension");
    cmd->add_option("--slope", cfg->extractor.leaky_slope, "Leaky ReLU slope");
    seeds->add_to(cmd);
    cmd->add_option("--out", *out, "Output folder")->required();
    cmd->add_flag("--force", *force, "Overwrite a non-empty output folder");

    cmd->callback([cmd, train_dir, out, cfg, seeds, force] {
        prepare_out_dir(*out, *force);
        const DatasetSplit source = load_split(resolve_images_dir(*train_dir), SplitRole::train);
        if (source.samples.empty()) throw IngestionError("pretrain: no images found");
        seeds->apply(*cfg);
        cfg->extractor.input_dim = source.samples.front().pixels.px.size();
        echo_config(cmd, *out);

        RunLog log;
        const Checkpoint ckpt = pretrain(source, *cfg, &log);
        save_checkpoint(ckpt, *out / "teacher.ckpt");
        write_runlog(log, *out / "pretrain_log.jsonl");
        std::cout << "pretrained on " << source.size() << " images over " << cfg->epochs
                  << " epochs; final ce "
                  << (log.epochs.empty() ? 0.0 : log.epochs.back().ce) << '\n'
                  << "checkpoint: " << (*out / "teacher.ckpt").string() << '\n';
    });
}

// ---------------------------------------------------------------------------
// adapt
// ---------------------------------------------------------------------------

void setup_adapt(CLI::App& app) {
    auto* cmd = app.add_subcommand("adapt", "Target-domain adaptation with the frozen teacher");
    auto ckpt_path = std::make_shared<fs::path>();
    auto target_dir = std::make_shared<fs::path>();
    auto source_dir = std::make_shared<fs::path>();
    auto out = std::make_shared<fs::path>();
    auto depth = std::make_shared<std::string>("ramp");
    auto level = std::make_shared<double>(0.5);
    auto haze = std::make_shared<HazeParams>();
    auto cfg = std::make_shared<TrainConfig>();
    auto seeds = std::make_shared<SeedFlags>();
    auto no_isl = std::make_shared<bool>(false);
    auto no_idkl = std::make_shared<bool>(false);
    auto force = std::make_shared<bool>(false);

    cfg->epochs = 20;
    cfg->milestones.clear();  // constant rate unless --milestones is given
    cmd->set_config("--config", "", "Config file (key=value)");
    cmd->add_option("--ckpt", *ckpt_path, "Pretrained checkpoint")->required();
    cmd->add_option("--target", *target_dir, "Clear target training images")->required();
    add_train_flags(cmd, *cfg);
    cmd->add_option("--lambda1", cfg->weights.lambda1, "Similarity loss weight");
    cmd->add_option("--lambda2", cfg->weights.lambda2, "Distillation KL weight");
    cmd->add_option("--delta", cfg->weights.delta, "Distillation temperature");
    cmd->add_option("--disc-hidden", cfg->discriminator_hidden, "Discriminator hidden width");
    cmd->add_option("--disc-lr-scale", cfg->disc_lr_scale,
                    "Discriminator learning-rate multiple of the student rate");
    cmd->add_option("--depth", *depth, "Depth source: ramp|radial|constant or a folder of PNGs");
    cmd->add_option("--level", *level, "Depth value for --depth constant");
    add_haze_flags(cmd, *haze);
    cmd->add_flag("--no-isl", *no_isl, "Disable the similarity-matrix loss");
    cmd->add_flag("--no-idkl", *no_idkl, "Disable the distillation KL loss");
    cmd->add_flag("--replay", cfg->source_ce_replay,
                  "Interleave labeled source batches (needs --source)");
    cmd->add_option("--source", *source_dir, "Labeled source images for --replay");
    auto student_ckpt = std::make_shared<fs::path>();
    cmd->add_option("--student-ckpt", *student_ckpt,
                    "Initialize the student from this checkpoint instead of the teacher");
    seeds->add_to(cmd);
    cmd->add_option("--out", *out, "Output folder")->required();
    cmd->add_flag("--force", *force, "Overwrite a non-empty output folder");

    cmd->callback([cmd, ckpt_path, target_dir, source_dir, out, depth, level, haze, cfg, seeds,
                   no_isl, no_idkl, force, student_ckpt] {
        prepare_out_dir(*out, *force);
        const Checkpoint ckpt = load_checkpoint(*ckpt_path);
        const DatasetSplit target = load_split(resolve_images_dir(*target_dir), SplitRole::train);
        if (target.samples.empty()) throw IngestionError("adapt: no target images found");
        seeds->apply(*cfg);
        cfg->use_isl = !*no_isl;
        cfg->use_idkl = !*no_idkl;
        echo_config(cmd, *out);

        DatasetSplit source;
        const DatasetSplit* source_ptr = nullptr;
        if (cfg->source_ce_replay) {
            if (source_dir->empty()) throw ConfigError("adapt: --replay requires --source");
            source = load_split(resolve_images_dir(*source_dir), SplitRole::train);
            source_ptr = &source;
        }

        Checkpoint student_from;
        const Checkpoint* student_ptr = nullptr;
        if (!student_ckpt->empty()) {
            student_from = load_checkpoint(*student_ckpt);
            student_ptr = &student_from;
        }
        const AdaptResult res = adapt(ckpt, target, depth_source_from(*depth, *level), *haze,
                                      *cfg, source_ptr, student_ptr);
        save_checkpoint(res.student, *out / "student.ckpt");
        write_runlog(res.log, *out / "adapt_log.jsonl");
        std::cout << "adapted on " << target.size() << " clear/hazy pairs over " << cfg->epochs
                  << " epochs\ncheckpoint: " << (*out / "student.ckpt").string() << '\n';
    });
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

void setup_eval(CLI::App& app) {
    auto* cmd = app.add_subcommand("eval", "Retrieval evaluation of a checkpoint");
    auto ckpt_path = std::make_shared<fs::path>();
    auto query_dir = std::make_shared<fs::path>();
    auto gallery_dir = std::make_shared<fs::path>();
    auto out = std::make_shared<fs::path>();
    auto ranks = std::make_shared<std::vector<size_t>>(std::vector<size_t>{1, 5, 10});
    auto topk = std::make_shared<size_t>(8);
    auto dump_rankings = std::make_shared<bool>(false);
    auto dump_hist = std::make_shared<bool>(false);
    auto force = std::make_shared<bool>(false);

    cmd->set_config("--config", "", "Config file (key=value)");
    cmd->add_option("--ckpt", *ckpt_path, "Checkpoint to evaluate")->required();
    cmd->add_option("--query", *query_dir, "Query image folder")->required();
    cmd->add_option("--gallery", *gallery_dir, "Gallery image folder")->required();
    cmd->add_option("--ranks", *ranks, "CMC ranks to report");
    cmd->add_option("--topk", *topk, "Columns in the ranking-list dump");
    cmd->add_flag("--ranking-dump", *dump_rankings, "Write per-query ranking lists (CSV)");
    cmd->add_flag("--hist-dump", *dump_hist, "Write similarity histograms (two-column text)");
    cmd->add_option("--out", *out, "Output folder")->required();
    cmd->add_flag("--force", *force, "Overwrite a non-empty output folder");

    cmd->callback([cmd, ckpt_path, query_dir, gallery_dir, out, ranks, topk, dump_rankings,
                   dump_hist, force] {
        prepare_out_dir(*out, *force);
        const Checkpoint ckpt = load_checkpoint(*ckpt_path);
        const DatasetSplit query = load_split(*query_dir, SplitRole::query);
        const DatasetSplit gallery = load_split(*gallery_dir, SplitRole::gallery);
        echo_config(cmd, *out);

        const EvalOutput result = evaluate_full(ckpt.extractor(false), query, gallery, *ranks);
        write_report(result.report, *out / "eval_report.json");
        if (*dump_rankings)
            dump_ranking_lists(result.results, query, gallery, *topk, *out / "ranking_lists.csv");
        if (*dump_hist) dump_histograms(result.report, *out / "histograms.txt");
        std::cout << format_report(result.report);
    });
}

// ---------------------------------------------------------------------------
// run-ablation
// ---------------------------------------------------------------------------

void setup_run_ablation(CLI::App& app) {
    auto* cmd = app.add_subcommand(
        "run-ablation", "Baseline/+ISL/+IDKL/+both grid from one shared pretrain per seed");
    auto cfg = std::make_shared<AblationConfig>(default_ablation_config());
    auto depth = std::make_shared<std::string>("ramp");

    cmd->set_config("--config", "", "Config file (key=value)");
    cmd->add_option("--source", cfg->source_dir, "Source dataset root (train/)")->required();
    cmd->add_option("--target", cfg->target_dir, "Target dataset root (train/, query/, gallery/)")
        ->required();
    cmd->add_option("--seeds", cfg->seeds, "Seeds to run and average over");
    cmd->add_option("--pre-epochs", cfg->pretrain_cfg.epochs, "Pretraining epochs");
    cmd->add_option("--adapt-epochs", cfg->adapt_cfg.epochs, "Adaptation epochs");
    cmd->add_option("--batch", cfg->pretrain_cfg.batch, "Batch size for both phases");
    cmd->add_option("--lr", cfg->pretrain_cfg.lr, "Initial learning rate for both phases");
    cmd->add_option("--lambda1", cfg->adapt_cfg.weights.lambda1, "Similarity loss weight");
    cmd->add_option("--lambda2", cfg->adapt_cfg.weights.lambda2, "Distillation KL weight");
    cmd->add_option("--delta", cfg->adapt_cfg.weights.delta, "Distillation temperature");
    cmd->add_option("--epsilon", cfg->pretrain_cfg.weights.epsilon, "Label smoothing");
    cmd->add_option("--disc-lr-scale", cfg->adapt_cfg.disc_lr_scale,
                    "Discriminator learning-rate multiple of the student rate");
    add_haze_flags(cmd, cfg->haze);
    cmd->add_option("--depth", *depth, "Synthetic depth kind: ramp|radial|constant");
    cmd->add_option("--level", cfg->depth_level, "Depth value for --depth constant");
    cmd->add_option("--out", cfg->out_dir, "Output folder")->required();
    cmd->add_flag("--force", cfg->force, "Overwrite a non-empty output folder");

    cmd->callback([cmd, cfg, depth] {
        cfg->depth_kind = parse_depth_kind(*depth);
        cfg->adapt_cfg.batch = cfg->pretrain_cfg.batch;
        cfg->adapt_cfg.lr = cfg->pretrain_cfg.lr;
        cfg->adapt_cfg.weights.epsilon = cfg->pretrain_cfg.weights.epsilon;
        const AblationTable table = run_ablation(*cfg);  // checks force semantics itself
        echo_config(cmd, cfg->out_dir);
        std::cout << format_table(table);
    });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Haze-robust person re-identification laboratory"};
    app.require_subcommand(1);

    setup_gen_data(app);
    setup_haze(app);
    setup_pretrain(app);
    setup_adapt(app);
    setup_eval(app);
    setup_run_ablation(app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
