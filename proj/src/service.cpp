#include "xview/service.hpp"

#include <algorithm>
#include <cmath>

#include "xview/baselines.hpp"
#include "xview/errors.hpp"

namespace xview {

using nlohmann::json;

RequestError::RequestError(int status, std::string reason, const std::string& detail)
    : std::runtime_error(detail.empty() ? reason : reason + ": " + detail),
      status_(status),
      reason_(std::move(reason)) {}

bool is_known_method(std::string_view name) {
  return std::find(std::begin(kMethods), std::end(kMethods), name) != std::end(kMethods);
}

namespace {

[[noreturn]] void bad_request(std::string reason, const std::string& detail = {}) {
  throw RequestError(400, std::move(reason), detail);
}

Box2D box_from_json(const json& j) {
  if (j.is_array() && j.size() == 4) {
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
  }
  if (j.is_object()) {
    return {j.at("cx").get<double>(), j.at("cy").get<double>(), j.at("w").get<double>(),
            j.at("h").get<double>()};
  }
  bad_request("invalid_box", "expected [cx, cy, w, h]");
}

std::vector<double> flat_matrix(const json& j, std::size_t* rows, std::size_t* cols) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) bad_request("invalid_field", "expected a nested array");
  *rows = j.size();
  *cols = j[0].size();
  std::vector<double> out;
  for (const json& row : j) {
    if (!row.is_array() || row.size() != *cols) bad_request("shape_mismatch", "ragged matrix");
    for (const json& v : row) out.push_back(v.get<double>());
  }
  return out;
}

json boxes_json(const BoxSequence& seq) {
  json out = json::array();
  for (const Box2D& b : seq) out.push_back({b.cx, b.cy, b.w, b.h});
  return out;
}

}  // namespace

TransformRequest parse_transform_request(const json& j) {
  if (!j.is_object()) bad_request("invalid_json", "request body must be a JSON object");
  TransformRequest req;
  try {
    if (j.contains("record_id")) req.record_id = j["record_id"].get<std::string>();
    if (j.contains("method")) req.method = j["method"].get<std::string>();
    if (!is_known_method(req.method)) bad_request("unknown_method", req.method);
    if (j.contains("direction")) {
      const auto name = j["direction"].get<std::string>();
      if (name != "f2v" && name != "v2f") bad_request("unknown_direction", name);
      req.direction = parse_direction(name);
    }
    if (j.contains("sampler")) {
      const json& s = j["sampler"];
      req.sampler.num_steps = s.value("num_steps", req.sampler.num_steps);
      req.sampler.seed = s.value("seed", req.sampler.seed);
      req.sampler.clamp_output = s.value("clamp_output", req.sampler.clamp_output);
    }
    if (j.contains("seed")) req.sampler.seed = j["seed"].get<std::uint64_t>();
    if (req.sampler.num_steps < 1) bad_request("invalid_sampler", "num_steps must be >= 1");
    if (j.contains("drop")) {
      for (const json& s : j["drop"]) {
        const auto name = s.get<std::string>();
        try {
          req.drop.push_back(parse_stream(name));
        } catch (const Error&) {
          bad_request("unknown_stream", name);
        }
      }
    }
    if (j.contains("keyframes")) {
      for (const json& k : j["keyframes"]) {
        Keyframe kf;
        kf.frame_index = k.contains("frame_index") ? k["frame_index"].get<int>() : k.at("frame").get<int>();
        kf.box = box_from_json(k.at("box"));
        if (!kf.box.valid()) bad_request("invalid_box", "boxes need finite centers and w, h >= 0");
        req.keyframes.push_back(kf);
      }
    }
    if (!req.record_id) {
      req.frames = j.value("T", 0);
      if (j.contains("dct_tokens")) {
        std::size_t r = 0, c = 0;
        req.dct_tokens = flat_matrix(j["dct_tokens"], &r, &c);
      }
      if (j.contains("context0")) {
        std::size_t r = 0, c = 0;
        req.context = flat_matrix(j["context0"], &r, &c);
        if (r != c) bad_request("shape_mismatch", "context0 must be square");
      }
    }
  } catch (const json::exception& e) {
    bad_request("invalid_field", e.what());
  }
  return req;
}

json TransformResponse::to_json() const {
  json j;
  j["method"] = method;
  j["direction"] = xview::to_string(direction);
  j["checkpoint"] = checkpoint;
  j["T"] = b_tgt.size();
  j["b_ref"] = boxes_json(b_ref);
  j["b_tgt"] = boxes_json(b_tgt);
  if (per_frame_iou) {
    j["per_frame_iou"] = *per_frame_iou;
    double acc = 0.0;
    for (double v : *per_frame_iou) acc += v;
    j["mean_iou"] = per_frame_iou->empty() ? 0.0 : acc / per_frame_iou->size();
  }
  return j;
}

BoxSequence predict(const SampleRecord& r, Direction d, std::string_view method,
                    const Dit<float>* model, const SampleConfig& sampler,
                    const std::vector<Stream>& drop, const BoxSequence* source) {
  const BoxSequence& src = source ? *source : source_boxes(r, d);
  if (method == "interpolation") return interpolation_baseline(src);
  if (method == "model") {
    if (model == nullptr) raise(ErrorCode::kInvalidArgument, "no model loaded");
    if (model->config().direction != d) {
      raise(ErrorCode::kConfigMismatch, "checkpoint direction differs from the request");
    }
    Conditions c = make_conditions(r, d);
    c.b_ref = boxes_to_tokens(src);
    for (Stream s : drop) c = drop_condition(s, std::move(c));
    return sample(*model, c, sampler);
  }
  if (!is_warp_method(method)) raise(ErrorCode::kInvalidArgument, "unknown method");
  if (r.poses.size() != src.size()) raise(ErrorCode::kInvalidArgument, "warp needs camera poses");
  WarpConfig cfg = warp_preset(method);
  cfg.seed = sampler.seed;
  const std::vector<CameraPose> frozen(r.poses.size(), r.poses.front());
  if (d == Direction::kFirstToVideo) {
    DepthSource depth;
    if (!source && !r.object_depth_ref.empty()) {
      depth.object_depth = r.object_depth_ref;
    } else if (r.depth0) {
      depth.grid = &*r.depth0;
    } else {
      raise(ErrorCode::kInvalidArgument, "warp needs depth");
    }
    return warp_boxes(src, frozen, r.poses, depth, r.intrinsics, cfg);
  }
  if (source || r.object_depth_tgt.empty()) {
    raise(ErrorCode::kInvalidArgument, "video-to-first warp needs the object depth");
  }
  DepthSource depth;
  depth.object_depth = r.object_depth_tgt;
  return warp_boxes(src, r.poses, frozen, depth, r.intrinsics, cfg);
}

Service::Service(Dataset dataset, std::vector<LoadedModel> models)
    : dataset_(std::move(dataset)), models_(std::move(models)) {}

const LoadedModel* Service::model(Direction d) const {
  for (const LoadedModel& m : models_) {
    if (m.checkpoint.model.config().direction == d) return &m;
  }
  return nullptr;
}

TransformResponse Service::transform(const TransformRequest& req) const {
  if (!is_known_method(req.method)) bad_request("unknown_method", req.method);
  SampleRecord inline_record;
  const SampleRecord* rec = nullptr;
  if (req.record_id) {
    rec = dataset_.find(*req.record_id);
    if (!rec) throw RequestError(404, "unknown_record", *req.record_id);
  } else {
    if (req.frames < 2) bad_request("missing_conditions", "inline requests need T >= 2");
    inline_record.id = "inline";
    inline_record.frames = req.frames;
    inline_record.dct_tokens = req.dct_tokens;
    inline_record.context0 = req.context;
    inline_record.context_res = static_cast<int>(std::lround(std::sqrt(req.context.size())));
    rec = &inline_record;
  }
  const int frames = rec->frames;

  BoxSequence dense;
  const BoxSequence* source = nullptr;
  if (!req.keyframes.empty()) {
    if (req.keyframes.front().frame_index != 0) bad_request("keyframes_must_start_at_zero");
    for (std::size_t i = 1; i < req.keyframes.size(); ++i) {
      if (req.keyframes[i].frame_index <= req.keyframes[i - 1].frame_index) {
        bad_request("keyframes_unsorted");
      }
    }
    if (req.keyframes.back().frame_index >= frames) bad_request("keyframe_out_of_range");
    dense = interpolate_keyframes(req.keyframes, frames);
    source = &dense;
  } else if (!req.record_id) {
    bad_request("missing_keyframes", "inline requests need keyframes");
  }

  const LoadedModel* lm = nullptr;
  if (req.method == "model") {
    lm = model(req.direction);
    if (!lm) throw RequestError(409, "no_checkpoint_loaded", std::string(to_string(req.direction)));
    const DitConfig& cfg = lm->checkpoint.model.config();
    if (cfg.frames != frames || cfg.trajectory_tokens() * 2 * cfg.dct_order !=
                                    static_cast<int>(rec->dct_tokens.size()) ||
        cfg.context_res * cfg.context_res != static_cast<int>(rec->context0.size())) {
      bad_request("shape_mismatch", "conditions do not match the loaded checkpoint");
    }
  } else if (is_warp_method(req.method)) {
    const bool f2v = req.direction == Direction::kFirstToVideo;
    const bool have_depth = f2v ? (source ? rec->depth0.has_value()
                                          : !rec->object_depth_ref.empty() || rec->depth0.has_value())
                                : (!source && !rec->object_depth_tgt.empty());
    if (rec->poses.empty() || !have_depth) bad_request("warp_requires_depth");
  }

  TransformResponse resp;
  resp.method = req.method;
  resp.direction = req.direction;
  resp.checkpoint = lm ? lm->id : std::string();
  resp.b_ref = source ? dense : source_boxes(*rec, req.direction);
  try {
    resp.b_tgt = predict(*rec, req.direction, req.method, lm ? &lm->checkpoint.model : nullptr,
                         req.sampler, req.drop, source);
  } catch (const Error& e) {
    switch (e.code()) {
      case ErrorCode::kDepthLookupOutOfRange: bad_request("depth_lookup_out_of_range", e.what());
      case ErrorCode::kNonPositiveDepth: bad_request("non_positive_depth", e.what());
      case ErrorCode::kShapeMismatch:
      case ErrorCode::kConfigMismatch: bad_request("shape_mismatch", e.what());
      default: throw;
    }
  }
  if (!source && req.record_id) {
    resp.per_frame_iou = per_frame_iou(resp.b_tgt, target_boxes(*rec, req.direction));
  }
  return resp;
}

json Service::list_scenes() const {
  json scenes = json::array();
  for (const SampleRecord& r : dataset_.eval) {
    json ctx = json::array();
    for (int j = 0; j < r.context_res; ++j) {
      ctx.push_back(std::vector<double>(r.context0.begin() + j * r.context_res,
                                        r.context0.begin() + (j + 1) * r.context_res));
    }
    scenes.push_back({{"id", r.id},
                      {"T", r.frames},
                      {"camera_path_kind", to_string(r.kind)},
                      {"context0", std::move(ctx)}});
  }
  return {{"scenes", std::move(scenes)}};
}

json Service::scene(std::string_view id, bool include_tracks) const {
  const SampleRecord* r = dataset_.find(id);
  if (!r) throw RequestError(404, "unknown_record", std::string(id));
  return to_json(*r, include_tracks);
}

}  // namespace xview
