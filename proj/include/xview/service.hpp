#pragma once
// Transformation requests, split evaluation and the HTTP front end shared by
// the command-line tool and the path designer.

#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "xview/checkpoint.hpp"
#include "xview/datapipe.hpp"
#include "xview/flowmatch.hpp"
#include "xview/metrics.hpp"
#include "xview/signal.hpp"

namespace xview {

// Request failure carrying the HTTP status and a machine-readable reason.
class RequestError : public std::runtime_error {
 public:
  RequestError(int status, std::string reason, const std::string& detail = {});
  int status() const noexcept { return status_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  int status_;
  std::string reason_;
};

inline constexpr std::string_view kMethods[] = {"model",     "interpolation", "warp_corners",
                                                "warp_center", "noisy-high",  "noisy-low"};
bool is_known_method(std::string_view name);

struct TransformRequest {
  std::optional<std::string> record_id;
  // Inline conditioning, used when record_id is absent.
  int frames = 0;
  std::vector<double> dct_tokens;
  std::vector<double> context;
  // Sparse boxes in the source view; empty means the record's own source boxes.
  std::vector<Keyframe> keyframes;
  Direction direction = Direction::kFirstToVideo;
  SampleConfig sampler;
  std::string method = "model";
  std::vector<Stream> drop;
};

TransformRequest parse_transform_request(const nlohmann::json& j);

struct TransformResponse {
  BoxSequence b_tgt;
  BoxSequence b_ref;  // dense source-view boxes actually used
  std::string method;
  Direction direction = Direction::kFirstToVideo;
  std::string checkpoint;  // empty for non-learned methods
  std::optional<std::vector<double>> per_frame_iou;

  nlohmann::json to_json() const;
};

struct LoadedModel {
  std::string id;
  ModelCheckpoint checkpoint;
};

// Prediction of `method` for one record. `source` overrides the record's
// source-view boxes; warping then reads depth0 instead of the object depth.
BoxSequence predict(const SampleRecord& r, Direction d, std::string_view method,
                    const Dit<float>* model, const SampleConfig& sampler,
                    const std::vector<Stream>& drop = {}, const BoxSequence* source = nullptr);

struct EvalOptions {
  std::vector<std::string> methods{"model", "interpolation", "warp_corners", "warp_center",
                                   "noisy-high", "noisy-low"};
  std::vector<Direction> directions{Direction::kFirstToVideo, Direction::kVideoToFirst};
  SampleConfig sampler;  // per-record seed is sampler.seed + record position
  std::vector<Stream> drop;
  std::size_t limit = 0;  // 0: every record
  bool moving_only = false;
  int threads = 0;
};

struct MethodReports {
  std::string method;
  std::map<Direction, EvalReport> reports;
};

// Methods without a usable model or depth for a direction are skipped.
std::vector<MethodReports> evaluate(const std::vector<SampleRecord>& records,
                                    const std::map<Direction, const Dit<float>*>& models,
                                    const EvalOptions& opts);
nlohmann::json eval_json(const std::vector<MethodReports>& results, bool include_rows = true);
// Plain-text table: Model | IoU_f2v | mAP_f2v | IoU_v2f | mAP_v2f
std::string eval_table(const std::vector<MethodReports>& results);

class Service {
 public:
  Service(Dataset dataset, std::vector<LoadedModel> models);

  TransformResponse transform(const TransformRequest& req) const;
  nlohmann::json list_scenes() const;
  nlohmann::json scene(std::string_view id, bool include_tracks) const;
  const Dataset& dataset() const { return dataset_; }
  const LoadedModel* model(Direction d) const;

 private:
  Dataset dataset_;
  std::vector<LoadedModel> models_;
};

// JSON routes: GET /health, GET /scenes, GET /scenes/{id}[?tracks=1],
// POST /transform.
class HttpServer {
 public:
  explicit HttpServer(const Service& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds without serving; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  void listen();  // blocks until stop()
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace xview
