#include "ism/ablation.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ism/errors.hpp"

namespace ism {

AblationConfig default_ablation_config() {
    AblationConfig cfg;
    cfg.seeds = {2, 5, 9};
    cfg.pretrain_cfg.epochs = 40;
    cfg.pretrain_cfg.batch = 32;
    cfg.adapt_cfg.epochs = 20;
    cfg.adapt_cfg.batch = 32;
    cfg.adapt_cfg.milestones.clear();  // adaptation runs at a constant rate
    return cfg;
}

const std::vector<std::string>& ablation_variants() {
    static const std::vector<std::string> variants = {"baseline", "isl", "idkl", "both"};
    return variants;
}

namespace {

AblationRow row_from_report(const std::string& variant, uint64_t seed, const EvalReport& r) {
    AblationRow row;
    row.variant = variant;
    row.seed = seed;
    row.rank1 = r.cmc.at(1);
    row.rank5 = r.cmc.at(5);
    row.rank10 = r.cmc.at(10);
    row.map = r.map;
    row.overlap = r.overlap;
    return row;
}

void claim_out_dir(const std::filesystem::path& dir, bool force) {
    if (std::filesystem::exists(dir) && !std::filesystem::is_empty(dir)) {
        if (!force)
            throw ConfigError("output directory " + dir.string() +
                              " is not empty (pass --force to overwrite)");
        std::filesystem::remove_all(dir);  // no stale outputs survive a forced rerun
    }
}

}  // namespace

AblationTable run_ablation(const AblationConfig& config) {
    if (config.seeds.empty()) throw ConfigError("ablation: need at least one seed");
    claim_out_dir(config.out_dir, config.force);
    std::filesystem::create_directories(config.out_dir);

    const DatasetSplit source = load_split(config.source_dir / "train", SplitRole::train);
    const DatasetSplit target = load_split(config.target_dir / "train", SplitRole::train);
    const DatasetSplit query_clear = load_split(config.target_dir / "query", SplitRole::query);
    const DatasetSplit gallery_clear =
        load_split(config.target_dir / "gallery", SplitRole::gallery);
    if (source.samples.empty() || target.samples.empty() || query_clear.samples.empty() ||
        gallery_clear.samples.empty())
        throw IngestionError("ablation: source/target datasets are missing or empty");

    const DepthSource depth = DepthSource::generator(config.depth_kind, config.depth_level);

    AblationTable table;
    for (uint64_t seed : config.seeds) {
        const auto seed_dir = config.out_dir / ("seed_" + std::to_string(seed));
        std::filesystem::create_directories(seed_dir);

        // Hazy evaluation sets: written as 8-bit PNGs and read back, the
        // same data the standalone haze + eval commands would see.
        HazeParams eval_haze = config.haze;
        eval_haze.seed = mix_seed(seed, 0xe7a1);
        const HazyDataset hazy_query = hazify_dataset(query_clear, depth, eval_haze);
        HazeParams eval_haze_gallery = config.haze;
        eval_haze_gallery.seed = mix_seed(seed, 0xe7a2);
        const HazyDataset hazy_gallery = hazify_dataset(gallery_clear, depth, eval_haze_gallery);
        save_split(hazy_query.split, seed_dir / "query_hazy");
        save_split(hazy_gallery.split, seed_dir / "gallery_hazy");
        const DatasetSplit query = load_split(seed_dir / "query_hazy", SplitRole::query, Domain::hazy);
        const DatasetSplit gallery =
            load_split(seed_dir / "gallery_hazy", SplitRole::gallery, Domain::hazy);

        TrainConfig pre = config.pretrain_cfg;
        pre.model_seed = mix_seed(seed, 0x01);
        pre.data_seed = mix_seed(seed, 0x02);
        RunLog pre_log;
        const Checkpoint teacher_ckpt = pretrain(source, pre, &pre_log);
        save_checkpoint(teacher_ckpt, seed_dir / "teacher.ckpt");
        write_runlog(pre_log, seed_dir / "pretrain_log.jsonl");

        for (const std::string& variant : ablation_variants()) {
            Checkpoint eval_ckpt = teacher_ckpt;
            if (variant != "baseline") {
                TrainConfig ad = config.adapt_cfg;
                ad.model_seed = mix_seed(seed, 0x01);
                ad.data_seed = mix_seed(seed, 0x03);
                ad.haze_seed = mix_seed(seed, 0x04);
                ad.use_isl = variant == "isl" || variant == "both";
                ad.use_idkl = variant == "idkl" || variant == "both";
                AdaptResult res = adapt(teacher_ckpt, target, depth, config.haze, ad);
                save_checkpoint(res.student, seed_dir / ("student_" + variant + ".ckpt"));
                write_runlog(res.log, seed_dir / ("adapt_" + variant + "_log.jsonl"));
                eval_ckpt = std::move(res.student);
            }
            const EvalReport report = evaluate(eval_ckpt.extractor(false), query, gallery);
            write_report(report, seed_dir / ("eval_" + variant + ".json"));
            table.rows.push_back(row_from_report(variant, seed, report));
        }
    }

    for (const std::string& variant : ablation_variants()) {
        AblationRow avg;
        avg.variant = variant;
        size_t n = 0;
        for (const auto& row : table.rows) {
            if (row.variant != variant) continue;
            avg.rank1 += row.rank1;
            avg.rank5 += row.rank5;
            avg.rank10 += row.rank10;
            avg.map += row.map;
            avg.overlap += row.overlap;
            ++n;
        }
        avg.rank1 /= static_cast<double>(n);
        avg.rank5 /= static_cast<double>(n);
        avg.rank10 /= static_cast<double>(n);
        avg.map /= static_cast<double>(n);
        avg.overlap /= static_cast<double>(n);
        table.averages.push_back(avg);
    }

    {
        std::ofstream out(config.out_dir / "ablation_table.json");
        out << table_to_json(table) << '\n';
    }
    {
        std::ofstream out(config.out_dir / "ablation_table.txt");
        out << format_table(table);
    }
    return table;
}

namespace {

nlohmann::json row_to_json(const AblationRow& row, bool with_seed) {
    nlohmann::json j = {{"variant", row.variant}, {"rank1", row.rank1},   {"rank5", row.rank5},
                        {"rank10", row.rank10},   {"map", row.map},       {"overlap", row.overlap}};
    if (with_seed) j["seed"] = row.seed;
    return j;
}

AblationRow row_from_json(const nlohmann::json& j, bool with_seed) {
    AblationRow row;
    row.variant = j.at("variant").get<std::string>();
    if (with_seed) row.seed = j.at("seed").get<uint64_t>();
    row.rank1 = j.at("rank1").get<double>();
    row.rank5 = j.at("rank5").get<double>();
    row.rank10 = j.at("rank10").get<double>();
    row.map = j.at("map").get<double>();
    row.overlap = j.at("overlap").get<double>();
    return row;
}

}  // namespace

std::string table_to_json(const AblationTable& table) {
    nlohmann::json j;
    j["rows"] = nlohmann::json::array();
    for (const auto& row : table.rows) j["rows"].push_back(row_to_json(row, true));
    j["averages"] = nlohmann::json::array();
    for (const auto& row : table.averages) j["averages"].push_back(row_to_json(row, false));
    return j.dump(2);
}

AblationTable table_from_json(const std::string& text) {
    AblationTable table;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("ablation table: malformed JSON: ") + e.what());
    }
    for (const auto& row : j.at("rows")) table.rows.push_back(row_from_json(row, true));
    for (const auto& row : j.at("averages")) table.averages.push_back(row_from_json(row, false));
    return table;
}

std::string format_table(const AblationTable& table) {
    std::ostringstream os;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-10s %-6s %8s %8s %8s %8s %9s\n", "variant", "seed", "R-1",
                  "R-5", "R-10", "mAP", "overlap");
    os << buf;
    for (const auto& row : table.rows) {
        std::snprintf(buf, sizeof(buf), "%-10s %-6llu %7.2f%% %7.2f%% %7.2f%% %7.2f%% %9.4f\n",
                      row.variant.c_str(), static_cast<unsigned long long>(row.seed),
                      100.0 * row.rank1, 100.0 * row.rank5, 100.0 * row.rank10, 100.0 * row.map,
                      row.overlap);
        os << buf;
    }
    os << '\n';
    for (const auto& row : table.averages) {
        std::snprintf(buf, sizeof(buf), "%-10s %-6s %7.2f%% %7.2f%% %7.2f%% %7.2f%% %9.4f\n",
                      row.variant.c_str(), "avg", 100.0 * row.rank1, 100.0 * row.rank5,
                      100.0 * row.rank10, 100.0 * row.map, row.overlap);
        os << buf;
    }
    return os.str();
}

}  // namespace ism
