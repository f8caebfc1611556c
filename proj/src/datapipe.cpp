#include "xview/datapipe.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "xview/errors.hpp"
#include "xview/signal.hpp"

namespace xview {

using nlohmann::json;

std::string_view to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kEval: return "eval";
    case Split::kUnassigned: break;
  }
  return "unassigned";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "eval") return Split::kEval;
  if (name == "unassigned") return Split::kUnassigned;
  raise(ErrorCode::kFormat, "unknown split: " + std::string(name));
}

bool SampleRecord::camera_moves() const {
  for (const CameraPose& p : poses) {
    if (!(p == poses.front())) return true;
  }
  return false;
}

namespace {

double round6(double x) { return std::round(x * 1e6) / 1e6; }

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

json boxes_json(const BoxSequence& seq) {
  json out = json::array();
  for (const Box2D& b : seq) out.push_back({b.cx, b.cy, b.w, b.h});
  return out;
}

BoxSequence boxes_from_json(const json& j) {
  BoxSequence out;
  out.reserve(j.size());
  for (const json& b : j) {
    if (b.size() != 4) raise(ErrorCode::kFormat, "box must have 4 components");
    out.push_back({b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()});
  }
  return out;
}

json matrix_json(std::span<const double> v, std::size_t rows, std::size_t cols) {
  if (v.size() != rows * cols) raise(ErrorCode::kShapeMismatch, "matrix size mismatch");
  json out = json::array();
  for (std::size_t r = 0; r < rows; ++r) {
    out.push_back(std::vector<double>(v.begin() + r * cols, v.begin() + (r + 1) * cols));
  }
  return out;
}

std::vector<double> matrix_from_json(const json& j, std::size_t rows, std::size_t cols) {
  if (j.size() != rows) raise(ErrorCode::kFormat, "matrix row count mismatch");
  std::vector<double> out;
  out.reserve(rows * cols);
  for (const json& row : j) {
    if (row.size() != cols) raise(ErrorCode::kFormat, "matrix column count mismatch");
    for (const json& v : row) out.push_back(v.get<double>());
  }
  return out;
}

json pose_json(const CameraPose& p) {
  json r = json::array();
  for (int i = 0; i < 3; ++i) r.push_back({p.rotation(i, 0), p.rotation(i, 1), p.rotation(i, 2)});
  return {{"R", r}, {"t", {p.translation.x(), p.translation.y(), p.translation.z()}}};
}

CameraPose pose_from_json(const json& j) {
  CameraPose p;
  for (int i = 0; i < 3; ++i)
    for (int c = 0; c < 3; ++c) p.rotation(i, c) = j.at("R").at(i).at(c).get<double>();
  for (int i = 0; i < 3; ++i) p.translation(i) = j.at("t").at(i).get<double>();
  return p;
}

void round_record(SampleRecord& r) {
  auto rb = [](BoxSequence& s) {
    for (Box2D& b : s) {
      b.cx = round6(b.cx);
      b.cy = round6(b.cy);
      b.w = round6(b.w);
      b.h = round6(b.h);
    }
  };
  auto rv = [](std::vector<double>& v) {
    for (double& x : v) x = round6(x);
  };
  rb(r.b_ref);
  rb(r.b_tgt);
  rv(r.dct_tokens);
  rv(r.context0);
  if (r.depth0) rv(r.depth0->values);
  if (r.tracks) rv(r.tracks->xy);
  rv(r.object_depth_ref);
  rv(r.object_depth_tgt);
  for (CameraPose& p : r.poses) {
    for (int i = 0; i < 9; ++i) p.rotation.data()[i] = round6(p.rotation.data()[i]);
    for (int i = 0; i < 3; ++i) p.translation(i) = round6(p.translation(i));
  }
  r.magnitude = round6(r.magnitude);
}

}  // namespace

json to_json(const SampleRecord& r, bool include_tracks) {
  json j;
  j["id"] = r.id;
  j["T"] = r.frames;
  j["G"] = r.grid;
  j["K"] = r.order;
  j["split"] = to_string(r.split);
  j["scene"] = r.scene;
  j["path_index"] = r.path_index;
  j["camera_path_kind"] = to_string(r.kind);
  j["magnitude"] = r.magnitude;
  j["seeds"] = {{"scene", r.scene_seed}, {"path", r.path_seed}};
  j["b_ref"] = boxes_json(r.b_ref);
  j["b_tgt"] = boxes_json(r.b_tgt);
  j["dct_tokens"] = matrix_json(r.dct_tokens, static_cast<std::size_t>(r.grid) * r.grid,
                                2 * static_cast<std::size_t>(r.order));
  j["context0"] = matrix_json(r.context0, r.context_res, r.context_res);
  j["intrinsics"] = {{"fx", r.intrinsics.fx}, {"fy", r.intrinsics.fy}, {"cx", r.intrinsics.cx},
                     {"cy", r.intrinsics.cy}};
  json poses = json::array();
  for (const CameraPose& p : r.poses) poses.push_back(pose_json(p));
  j["poses"] = std::move(poses);
  if (r.depth0) j["depth0"] = matrix_json(r.depth0->values, r.depth0->height, r.depth0->width);
  if (!r.object_depth_ref.empty()) j["object_depth_ref"] = r.object_depth_ref;
  if (!r.object_depth_tgt.empty()) j["object_depth_tgt"] = r.object_depth_tgt;
  if (include_tracks && r.tracks) {
    const TrackGrid& tg = *r.tracks;
    json xy = json::array();
    json vis = json::array();
    for (int gy = 0; gy < tg.grid_size; ++gy) {
      json xrow = json::array();
      json vrow = json::array();
      for (int gx = 0; gx < tg.grid_size; ++gx) {
        json pts = json::array();
        json flags = json::array();
        for (int t = 0; t < tg.frames; ++t) {
          pts.push_back({tg.x(gy, gx, t), tg.y(gy, gx, t)});
          flags.push_back(tg.is_visible(gy, gx, t));
        }
        xrow.push_back(std::move(pts));
        vrow.push_back(std::move(flags));
      }
      xy.push_back(std::move(xrow));
      vis.push_back(std::move(vrow));
    }
    j["tracks"] = std::move(xy);
    j["visibility"] = std::move(vis);
  }
  return j;
}

SampleRecord record_from_json(const json& j) {
  try {
    SampleRecord r;
    r.id = j.at("id").get<std::string>();
    r.frames = j.at("T").get<int>();
    r.grid = j.at("G").get<int>();
    r.order = j.at("K").get<int>();
    r.split = parse_split(j.at("split").get<std::string>());
    r.scene = j.at("scene").get<int>();
    r.path_index = j.at("path_index").get<int>();
    r.kind = parse_path_kind(j.at("camera_path_kind").get<std::string>());
    r.magnitude = j.at("magnitude").get<double>();
    r.scene_seed = j.at("seeds").at("scene").get<std::uint64_t>();
    r.path_seed = j.at("seeds").at("path").get<std::uint64_t>();
    r.b_ref = boxes_from_json(j.at("b_ref"));
    r.b_tgt = boxes_from_json(j.at("b_tgt"));
    if (static_cast<int>(r.b_ref.size()) != r.frames || static_cast<int>(r.b_tgt.size()) != r.frames) {
      raise(ErrorCode::kFormat, "box sequence length differs from T in " + r.id);
    }
    r.dct_tokens = matrix_from_json(j.at("dct_tokens"), static_cast<std::size_t>(r.grid) * r.grid,
                                    2 * static_cast<std::size_t>(r.order));
    r.context_res = static_cast<int>(j.at("context0").size());
    r.context0 = matrix_from_json(j.at("context0"), r.context_res, r.context_res);
    const json& k = j.at("intrinsics");
    r.intrinsics = {k.at("fx").get<double>(), k.at("fy").get<double>(), k.at("cx").get<double>(),
                    k.at("cy").get<double>()};
    for (const json& p : j.at("poses")) r.poses.push_back(pose_from_json(p));
    if (j.contains("depth0")) {
      DepthGrid d;
      d.height = static_cast<int>(j["depth0"].size());
      d.width = d.height ? static_cast<int>(j["depth0"][0].size()) : 0;
      d.values = matrix_from_json(j["depth0"], d.height, d.width);
      r.depth0 = std::move(d);
    }
    if (j.contains("object_depth_ref")) r.object_depth_ref = j["object_depth_ref"].get<std::vector<double>>();
    if (j.contains("object_depth_tgt")) r.object_depth_tgt = j["object_depth_tgt"].get<std::vector<double>>();
    if (j.contains("tracks")) {
      TrackGrid tg(r.grid, r.frames);
      const json& xy = j["tracks"];
      const json& vis = j.at("visibility");
      for (int gy = 0; gy < r.grid; ++gy)
        for (int gx = 0; gx < r.grid; ++gx)
          for (int t = 0; t < r.frames; ++t) {
            tg.x(gy, gx, t) = xy.at(gy).at(gx).at(t).at(0).get<double>();
            tg.y(gy, gx, t) = xy.at(gy).at(gx).at(t).at(1).get<double>();
            tg.visible[tg.index(gy, gx, t)] = vis.at(gy).at(gx).at(t).get<bool>() ? 1 : 0;
          }
      r.tracks = std::move(tg);
    }
    return r;
  } catch (const json::exception& e) {
    raise(ErrorCode::kFormat, std::string("malformed record: ") + e.what());
  }
}

namespace {

std::vector<double> flatten(const BoxSequence& seq) { return boxes_to_tokens(seq); }

}  // namespace

const BoxSequence& source_boxes(const SampleRecord& r, Direction d) {
  return d == Direction::kFirstToVideo ? r.b_ref : r.b_tgt;
}

const BoxSequence& target_boxes(const SampleRecord& r, Direction d) {
  return d == Direction::kFirstToVideo ? r.b_tgt : r.b_ref;
}

Conditions make_conditions(const SampleRecord& r, Direction d) {
  Conditions c;
  c.b_ref = flatten(source_boxes(r, d));
  c.dct_tokens = r.dct_tokens;
  c.context = r.context0;
  return c;
}

FlowExample to_flow_example(const SampleRecord& r, Direction d) {
  return FlowExample{r.id, make_conditions(r, d), flatten(target_boxes(r, d))};
}

FilterResult filter(const SampleRecord& r, const FilterThresholds& th) {
  double travel = 0.0;
  for (std::size_t t = 1; t < r.b_ref.size(); ++t) {
    travel += std::hypot(r.b_ref[t].cx - r.b_ref[t - 1].cx, r.b_ref[t].cy - r.b_ref[t - 1].cy);
  }
  if (travel < th.min_displacement * std::sqrt(2.0)) return {false, "static_object"};
  for (const BoxSequence* seq : {&r.b_ref, &r.b_tgt}) {
    for (const Box2D& b : *seq) {
      if (b.area() < th.min_area || b.area() > th.max_area) return {false, "size"};
    }
  }
  for (const BoxSequence* seq : {&r.b_ref, &r.b_tgt}) {
    for (const Box2D& b : *seq) {
      if (b.cx < th.center_lo || b.cx > th.center_hi || b.cy < th.center_lo || b.cy > th.center_hi) {
        return {false, "offscreen"};
      }
    }
  }
  return {};
}

void GenerateConfig::validate() const {
  if (n_scenes < 1) raise(ErrorCode::kInvalidArgument, "n_scenes must be >= 1");
  if (paths_per_scene < 1) raise(ErrorCode::kInvalidArgument, "paths_per_scene must be >= 1");
  if (frames < 2) raise(ErrorCode::kInvalidArgument, "T must be >= 2");
  if (grid < 1) raise(ErrorCode::kInvalidArgument, "G must be >= 1");
  if (order < 1 || order > frames) raise(ErrorCode::kInvalidOrder, "K must lie in [1, T]");
  if (context_res < 1 || depth_res < 2) raise(ErrorCode::kInvalidArgument, "resolutions too small");
  if (eval_fraction < 0 || val_fraction < 0 || eval_fraction + val_fraction > 1) {
    raise(ErrorCode::kInvalidArgument, "split fractions must be non-negative and sum to <= 1");
  }
  if (stationary_probability < 0 || stationary_probability > 1) {
    raise(ErrorCode::kInvalidArgument, "stationary_probability must lie in [0, 1]");
  }
}

json GenerateConfig::to_json() const {
  return {{"n_scenes", n_scenes},
          {"paths_per_scene", paths_per_scene},
          {"T", frames},
          {"G", grid},
          {"K", order},
          {"context_res", context_res},
          {"depth_res", depth_res},
          {"stationary_probability", stationary_probability},
          {"eval_fraction", eval_fraction},
          {"val_fraction", val_fraction},
          {"seed", seed}};
}

namespace {

struct Candidate {
  std::optional<SampleRecord> record;
  std::string rejected;
};

std::vector<Candidate> render_scene(const GenerateConfig& cfg, int s, bool keep_full) {
  const std::uint64_t scene_seed = splitmix64(cfg.seed * 1000003ULL + static_cast<std::uint64_t>(s));
  const Scene scene = make_scene(cfg.frames, scene_seed, cfg.stationary_probability);
  RenderOptions opts;
  opts.grid = cfg.grid;
  opts.context_res = cfg.context_res;
  opts.depth_res = cfg.depth_res;

  std::vector<Candidate> out;
  for (int p = 0; p < cfg.paths_per_scene; ++p) {
    const std::uint64_t path_seed = splitmix64(scene_seed ^ (0x5bd1e995ULL * (p + 1)));
    std::mt19937_64 rng(path_seed);
    const PathKind kind =
        p == 0 ? PathKind::kStatic : kDynamicPathKinds[(p - 1) % kDynamicPathKinds.size()];
    const double magnitude = std::uniform_real_distribution<double>(0.5, 1.5)(rng);
    const CameraPath path = make_camera_path(kind, cfg.frames, magnitude, path_seed);

    RenderedPair pair;
    try {
      pair = render_pair(scene, path, opts);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kObjectNotVisible) throw;
      out.push_back({std::nullopt, "not_visible"});
      continue;
    }

    SampleRecord r;
    r.id = "s" + std::to_string(s) + "_p" + std::to_string(p);
    r.frames = cfg.frames;
    r.grid = cfg.grid;
    r.order = cfg.order;
    r.scene = s;
    r.path_index = p;
    r.b_ref = std::move(pair.b_ref);
    r.b_tgt = std::move(pair.b_tgt);
    const std::vector<DctTrack> dct = encode_trackgrid(pair.tracks, cfg.order);
    r.dct_tokens = dct_token_matrix(dct);
    r.context_res = cfg.context_res;
    r.context0 = std::move(pair.context0.values);
    r.kind = kind;
    r.magnitude = magnitude;
    r.scene_seed = scene_seed;
    r.path_seed = path_seed;
    r.poses = path.poses;
    r.intrinsics = path.intrinsics;
    if (keep_full) {
      r.depth0 = std::move(pair.depth0);
      r.tracks = std::move(pair.tracks);
      r.object_depth_ref = std::move(pair.object_depth_ref);
      r.object_depth_tgt = std::move(pair.object_depth_tgt);
    }
    round_record(r);
    FilterResult f = filter(r);
    if (f.accepted) {
      out.push_back({std::move(r), {}});
    } else {
      out.push_back({std::nullopt, f.reason});
    }
  }
  return out;
}

}  // namespace

std::vector<SampleRecord> generate_records(const GenerateConfig& cfg, GenerateStats* stats,
                                           const std::function<bool(int)>& keep_full) {
  cfg.validate();
  std::vector<std::vector<Candidate>> per_scene(cfg.n_scenes);
  int workers = cfg.threads > 0 ? cfg.threads : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, cfg.n_scenes);
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto work = [&] {
    for (int s = next++; s < cfg.n_scenes; s = next++) {
      try {
        per_scene[s] = render_scene(cfg, s, !keep_full || keep_full(s));
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);

  GenerateStats local;
  std::vector<SampleRecord> records;
  for (auto& scene : per_scene) {
    for (Candidate& c : scene) {
      ++local.candidates;
      if (c.record) {
        records.push_back(std::move(*c.record));
      } else {
        ++local.rejected[c.rejected];
      }
    }
  }
  if (stats) *stats = std::move(local);
  return records;
}

std::map<int, Split> assign_scene_splits(std::vector<int> scene_ids, double eval_fraction,
                                         std::uint64_t seed, double val_fraction) {
  if (!(eval_fraction > 0.0 && eval_fraction < 1.0)) {
    raise(ErrorCode::kInvalidArgument, "eval_fraction must lie in (0, 1)");
  }
  if (!(val_fraction >= 0.0 && eval_fraction + val_fraction < 1.0)) {
    raise(ErrorCode::kInvalidArgument, "val_fraction must be >= 0 and leave training scenes");
  }
  std::sort(scene_ids.begin(), scene_ids.end());
  scene_ids.erase(std::unique(scene_ids.begin(), scene_ids.end()), scene_ids.end());
  const int n = static_cast<int>(scene_ids.size());
  if (n < 2) raise(ErrorCode::kTooFewScenes, "need at least two scenes to split");
  std::mt19937_64 rng(seed);
  std::shuffle(scene_ids.begin(), scene_ids.end(), rng);
  const int n_eval = std::clamp(static_cast<int>(std::lround(eval_fraction * n)), 1, n - 1);
  const int n_val = std::clamp(static_cast<int>(std::lround(val_fraction * n)), 0, n - 1 - n_eval);
  std::map<int, Split> out;
  for (int i = 0; i < n; ++i) {
    out[scene_ids[i]] = i < n_eval ? Split::kEval : (i < n_eval + n_val ? Split::kVal : Split::kTrain);
  }
  return out;
}

void split(std::vector<SampleRecord>& records, double eval_fraction, std::uint64_t seed,
           double val_fraction) {
  std::vector<int> ids;
  for (const SampleRecord& r : records) ids.push_back(r.scene);
  const auto assignment = assign_scene_splits(std::move(ids), eval_fraction, seed, val_fraction);
  for (SampleRecord& r : records) r.split = assignment.at(r.scene);
}

namespace {

std::filesystem::path split_file(const std::filesystem::path& dir, Split s) {
  return dir / (std::string(to_string(s)) + ".jsonl");
}

}  // namespace

json generate(const GenerateConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  std::vector<int> all(cfg.n_scenes);
  for (int s = 0; s < cfg.n_scenes; ++s) all[s] = s;
  const auto assignment = assign_scene_splits(all, cfg.eval_fraction, cfg.seed, cfg.val_fraction);

  GenerateStats stats;
  std::vector<SampleRecord> records = generate_records(
      cfg, &stats, [&](int s) { return assignment.at(s) == Split::kEval; });
  for (SampleRecord& r : records) r.split = assignment.at(r.scene);

  std::filesystem::create_directories(out_dir);
  std::map<Split, int> counts{{Split::kTrain, 0}, {Split::kVal, 0}, {Split::kEval, 0}};
  for (Split s : {Split::kTrain, Split::kVal, Split::kEval}) {
    std::ofstream out(split_file(out_dir, s), std::ios::binary | std::ios::trunc);
    if (!out) raise(ErrorCode::kIo, "cannot write " + split_file(out_dir, s).string());
    for (const SampleRecord& r : records) {
      if (r.split != s) continue;
      out << to_json(r).dump() << '\n';
      ++counts[s];
    }
  }

  json rejected = json::object();
  for (const char* reason : {"static_object", "size", "offscreen", "not_visible"}) {
    const auto it = stats.rejected.find(reason);
    rejected[reason] = it == stats.rejected.end() ? 0 : it->second;
  }
  json manifest = {{"format_version", 1},
                   {"counts",
                    {{"train", counts[Split::kTrain]},
                     {"val", counts[Split::kVal]},
                     {"eval", counts[Split::kEval]}}},
                   {"candidates", stats.candidates},
                   {"accepted", static_cast<int>(records.size())},
                   {"rejected", rejected},
                   {"params", cfg.to_json()}};
  std::ofstream mf(out_dir / "manifest.json", std::ios::binary | std::ios::trunc);
  if (!mf) raise(ErrorCode::kIo, "cannot write manifest");
  mf << manifest.dump(2) << '\n';
  return manifest;
}

const SampleRecord* Dataset::find(std::string_view id) const {
  for (const auto* split : {&eval, &val, &train}) {
    for (const SampleRecord& r : *split) {
      if (r.id == id) return &r;
    }
  }
  return nullptr;
}

std::vector<SampleRecord> load_split(const std::filesystem::path& dir, Split s) {
  const auto path = split_file(dir, s);
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::kIo, "cannot read " + path.string());
  std::vector<SampleRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      raise(ErrorCode::kFormat, path.string() + ": " + e.what());
    }
    out.push_back(record_from_json(j));
  }
  return out;
}

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset ds;
  std::ifstream mf(dir / "manifest.json", std::ios::binary);
  if (!mf) raise(ErrorCode::kIo, "cannot read " + (dir / "manifest.json").string());
  try {
    ds.manifest = json::parse(mf);
  } catch (const json::exception& e) {
    raise(ErrorCode::kFormat, std::string("manifest: ") + e.what());
  }
  if (ds.manifest.value("format_version", 0) != 1) raise(ErrorCode::kFormat, "unsupported format_version");
  ds.train = load_split(dir, Split::kTrain);
  ds.val = load_split(dir, Split::kVal);
  ds.eval = load_split(dir, Split::kEval);
  return ds;
}

}  // namespace xview
