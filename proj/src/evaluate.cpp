#include <atomic>
#include <cstdio>
#include <mutex>
#include <sstream>
#include <thread>

#include "xview/baselines.hpp"
#include "xview/errors.hpp"
#include "xview/service.hpp"

namespace xview {

using nlohmann::json;

namespace {

bool method_supported(std::string_view method, Direction d, const SampleRecord& r,
                      const std::map<Direction, const Dit<float>*>& models) {
  if (method == "interpolation") return true;
  if (method == "model") {
    const auto it = models.find(d);
    return it != models.end() && it->second != nullptr;
  }
  if (r.poses.empty()) return false;
  return d == Direction::kFirstToVideo ? (!r.object_depth_ref.empty() || r.depth0.has_value())
                                       : !r.object_depth_tgt.empty();
}

template <typename F>
void parallel_for(std::size_t n, int threads, F&& fn) {
  int workers = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min<int>(workers, static_cast<int>(n)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

std::vector<MethodReports> evaluate(const std::vector<SampleRecord>& records,
                                    const std::map<Direction, const Dit<float>*>& models,
                                    const EvalOptions& opts) {
  std::vector<const SampleRecord*> subset;
  for (const SampleRecord& r : records) {
    if (opts.moving_only && !r.camera_moves()) continue;
    subset.push_back(&r);
    if (opts.limit && subset.size() == opts.limit) break;
  }
  if (subset.empty()) raise(ErrorCode::kEmptyDataset, "no records to evaluate");

  std::vector<MethodReports> out;
  for (const std::string& method : opts.methods) {
    if (!is_known_method(method)) raise(ErrorCode::kInvalidArgument, "unknown method: " + method);
    MethodReports mr{method, {}};
    for (Direction d : opts.directions) {
      if (!method_supported(method, d, *subset.front(), models)) continue;
      const auto it = models.find(d);
      const Dit<float>* model = it == models.end() ? nullptr : it->second;
      std::vector<SequenceScores> rows(subset.size());
      parallel_for(subset.size(), opts.threads, [&](std::size_t i) {
        const SampleRecord& r = *subset[i];
        SampleConfig sc = opts.sampler;
        sc.seed = opts.sampler.seed + i;
        const BoxSequence pred = predict(r, d, method, model, sc, opts.drop);
        rows[i] = score_sequence(r.id, pred, target_boxes(r, d));
      });
      mr.reports.emplace(d, make_report(method, d, std::move(rows)));
    }
    out.push_back(std::move(mr));
  }
  return out;
}

json eval_json(const std::vector<MethodReports>& results, bool include_rows) {
  json methods = json::object();
  for (const MethodReports& mr : results) {
    json entry = json::object();
    for (const auto& [d, report] : mr.reports) entry[std::string(to_string(d))] = report.to_json(include_rows);
    methods[mr.method] = std::move(entry);
  }
  return {{"methods", std::move(methods)}};
}

std::string eval_table(const std::vector<MethodReports>& results) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-14s | %-7s | %-7s | %-7s | %-7s\n", "Model", "IoU_f2v",
                "mAP_f2v", "IoU_v2f", "mAP_v2f");
  os << line;
  auto cell = [](const MethodReports& mr, Direction d, bool map) {
    const auto it = mr.reports.find(d);
    if (it == mr.reports.end()) return std::string("-");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", map ? it->second.map50 : it->second.mean_iou);
    return std::string(buf);
  };
  for (const MethodReports& mr : results) {
    std::snprintf(line, sizeof line, "%-14s | %-7s | %-7s | %-7s | %-7s\n", mr.method.c_str(),
                  cell(mr, Direction::kFirstToVideo, false).c_str(),
                  cell(mr, Direction::kFirstToVideo, true).c_str(),
                  cell(mr, Direction::kVideoToFirst, false).c_str(),
                  cell(mr, Direction::kVideoToFirst, true).c_str());
    os << line;
  }
  return os.str();
}

}  // namespace xview
