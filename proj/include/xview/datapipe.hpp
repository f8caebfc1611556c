#pragma once
// Synthetic paired-view dataset: scene sampling, paired rendering, filtering,
// scene-level splitting and JSON-lines serialization.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "xview/dit.hpp"
#include "xview/flowmatch.hpp"
#include "xview/geometry.hpp"

namespace xview {

enum class Split { kUnassigned, kTrain, kVal, kEval };

std::string_view to_string(Split s);
Split parse_split(std::string_view name);

struct SampleRecord {
  std::string id;
  int frames = 0;  // T
  int grid = 0;    // G
  int order = 0;   // K
  int scene = 0;
  int path_index = 0;
  BoxSequence b_ref;
  BoxSequence b_tgt;
  std::vector<double> dct_tokens;  // G^2 x 2K
  int context_res = 0;
  std::vector<double> context0;    // R x R inverse depth
  std::optional<DepthGrid> depth0;
  PathKind kind = PathKind::kStatic;
  double magnitude = 0.0;
  std::uint64_t scene_seed = 0;
  std::uint64_t path_seed = 0;
  Split split = Split::kUnassigned;
  std::vector<CameraPose> poses;
  Intrinsics intrinsics;
  std::optional<TrackGrid> tracks;
  std::vector<double> object_depth_ref;
  std::vector<double> object_depth_tgt;

  // Whether any camera pose differs from the frame-0 pose.
  bool camera_moves() const;
};

nlohmann::json to_json(const SampleRecord& r, bool include_tracks = true);
SampleRecord record_from_json(const nlohmann::json& j);

// Conditioning and target for one transformation direction. f2v maps b_ref to
// b_tgt; v2f maps b_tgt to b_ref. Both share the track and context streams.
Conditions make_conditions(const SampleRecord& r, Direction d);
FlowExample to_flow_example(const SampleRecord& r, Direction d);
const BoxSequence& source_boxes(const SampleRecord& r, Direction d);
const BoxSequence& target_boxes(const SampleRecord& r, Direction d);

struct FilterResult {
  bool accepted = true;
  std::string reason;  // static_object | size | offscreen
};

struct FilterThresholds {
  double min_displacement = 0.05;  // fraction of the frame diagonal
  double min_area = 0.002;
  double max_area = 0.6;
  double center_lo = -0.2;
  double center_hi = 1.2;
};

FilterResult filter(const SampleRecord& r, const FilterThresholds& th = {});

struct GenerateConfig {
  int n_scenes = 500;
  int paths_per_scene = 10;
  int frames = 24;
  int grid = 12;
  int order = 20;
  int context_res = 16;
  int depth_res = 32;
  double stationary_probability = 0.1;
  double eval_fraction = 0.02;
  double val_fraction = 0.0;
  std::uint64_t seed = 0;
  int threads = 0;  // 0: hardware concurrency

  void validate() const;
  nlohmann::json to_json() const;
};

struct GenerateStats {
  int candidates = 0;
  std::map<std::string, int> rejected;  // includes not_visible
};

// Renders and filters every (scene, path) candidate; records come back in
// (scene, path) order without split labels. Depth, tracks and object depths
// are kept only for scenes where `keep_full` holds (all scenes when empty).
std::vector<SampleRecord> generate_records(const GenerateConfig& cfg, GenerateStats* stats = nullptr,
                                           const std::function<bool(int)>& keep_full = {});

// Seeded shuffle of the distinct scene ids; the first round(eval_fraction * n)
// (at least one) go to eval, the next round(val_fraction * n) to val.
std::map<int, Split> assign_scene_splits(std::vector<int> scene_ids, double eval_fraction,
                                         std::uint64_t seed, double val_fraction = 0.0);

// Labels every record with its scene's split.
void split(std::vector<SampleRecord>& records, double eval_fraction, std::uint64_t seed,
           double val_fraction = 0.0);

// generate_records + split + files (train/val/eval .jsonl and manifest.json).
nlohmann::json generate(const GenerateConfig& cfg, const std::filesystem::path& out_dir);

struct Dataset {
  nlohmann::json manifest;
  std::vector<SampleRecord> train;
  std::vector<SampleRecord> val;
  std::vector<SampleRecord> eval;

  const SampleRecord* find(std::string_view id) const;
};

std::vector<SampleRecord> load_split(const std::filesystem::path& dir, Split s);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace xview
