#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ism/eval.hpp"
#include "ism/haze.hpp"
#include "ism/trainer.hpp"

namespace ism {

// Ablation grid {baseline, +isl, +idkl, +both} from one shared pretrain per
// seed, evaluated on the hazy target query/gallery.
struct AblationConfig {
    std::filesystem::path source_dir;  // expects train/
    std::filesystem::path target_dir;  // expects train/, query/, gallery/
    std::filesystem::path out_dir;
    std::vector<uint64_t> seeds = {1, 2, 3};
    TrainConfig pretrain_cfg;  // epochs default 40
    TrainConfig adapt_cfg;     // epochs default 20
    HazeParams haze;
    DepthKind depth_kind = DepthKind::ramp;
    double depth_level = 0.5;
    bool force = false;
};

AblationConfig default_ablation_config();

struct AblationRow {
    std::string variant;  // baseline | isl | idkl | both
    uint64_t seed = 0;
    double rank1 = 0.0, rank5 = 0.0, rank10 = 0.0, map = 0.0, overlap = 0.0;
};

struct AblationTable {
    std::vector<AblationRow> rows;      // one per variant per seed
    std::vector<AblationRow> averages;  // one per variant, seed field unused
};

const std::vector<std::string>& ablation_variants();

// Runs the grid, writes per-seed reports plus ablation_table.json and
// ablation_table.txt under out_dir.
AblationTable run_ablation(const AblationConfig& config);

std::string table_to_json(const AblationTable& table);
AblationTable table_from_json(const std::string& text);
std::string format_table(const AblationTable& table);

}  // namespace ism
