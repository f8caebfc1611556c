#include "xview/metrics.hpp"

#include <algorithm>
#include <sstream>

#include "xview/errors.hpp"

namespace xview {

double intersection_area(const Box2D& a, const Box2D& b) {
  const double w = std::min(a.x1(), b.x1()) - std::max(a.x0(), b.x0());
  const double h = std::min(a.y1(), b.y1()) - std::max(a.y0(), b.y0());
  return (w > 0.0 && h > 0.0) ? w * h : 0.0;
}

namespace {

// Area from the same corner arithmetic as the intersection, so a box overlaps
// itself with IoU exactly 1.
double corner_area(const Box2D& b) {
  const double w = b.x1() - b.x0();
  const double h = b.y1() - b.y0();
  return (w > 0.0 && h > 0.0) ? w * h : 0.0;
}

}  // namespace

double union_area(const Box2D& a, const Box2D& b) {
  return corner_area(a) + corner_area(b) - intersection_area(a, b);
}

double iou(const Box2D& a, const Box2D& b) {
  const double u = union_area(a, b);
  if (!(u > 0.0)) return 0.0;
  return std::clamp(intersection_area(a, b) / u, 0.0, 1.0);
}

namespace {

void check_lengths(const BoxSequence& pred, const BoxSequence& gt) {
  if (pred.size() != gt.size()) {
    raise(ErrorCode::kLengthMismatch, "prediction has " + std::to_string(pred.size()) +
                                          " frames, ground truth " + std::to_string(gt.size()));
  }
}

}  // namespace

std::vector<double> per_frame_iou(const BoxSequence& pred, const BoxSequence& gt) {
  check_lengths(pred, gt);
  std::vector<double> out(pred.size());
  for (std::size_t t = 0; t < pred.size(); ++t) out[t] = iou(pred[t], gt[t]);
  return out;
}

double mean_iou(const BoxSequence& pred, const BoxSequence& gt) {
  const std::vector<double> v = per_frame_iou(pred, gt);
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double map50(const BoxSequence& pred, const BoxSequence& gt) {
  const std::vector<double> v = per_frame_iou(pred, gt);
  if (v.empty()) return 0.0;
  const auto hits = std::count_if(v.begin(), v.end(), [](double x) { return x >= 0.5; });
  return static_cast<double>(hits) / static_cast<double>(v.size());
}

double tube_iou(const BoxSequence& pred, const BoxSequence& gt) {
  check_lengths(pred, gt);
  double inter = 0.0, uni = 0.0;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    inter += intersection_area(pred[t], gt[t]);
    uni += union_area(pred[t], gt[t]);
  }
  if (!(uni > 0.0)) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

SequenceScores score_sequence(std::string id, const BoxSequence& pred, const BoxSequence& gt) {
  return {std::move(id), mean_iou(pred, gt), map50(pred, gt), tube_iou(pred, gt)};
}

EvalReport make_report(std::string method, Direction direction, std::vector<SequenceScores> rows) {
  if (rows.empty()) raise(ErrorCode::kEmptyDataset, "no sequences to report on");
  EvalReport r;
  r.method = std::move(method);
  r.direction = direction;
  for (const auto& s : rows) {
    r.mean_iou += s.mean_iou;
    r.map50 += s.map50;
    r.tube_iou += s.tube_iou;
  }
  const double n = static_cast<double>(rows.size());
  r.mean_iou /= n;
  r.map50 /= n;
  r.tube_iou /= n;
  r.rows = std::move(rows);
  return r;
}

nlohmann::json EvalReport::to_json(bool include_rows) const {
  nlohmann::json j = {{"method", method},
                      {"direction", std::string(xview::to_string(direction))},
                      {"count", rows.size()},
                      {"mean_iou", mean_iou},
                      {"map50", map50},
                      {"tube_iou", tube_iou}};
  if (include_rows) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : rows) {
      arr.push_back({{"id", s.id}, {"mean_iou", s.mean_iou}, {"map50", s.map50}, {"tube_iou", s.tube_iou}});
    }
    j["sequences"] = std::move(arr);
  }
  return j;
}

std::string EvalReport::to_csv() const {
  std::ostringstream os;
  os.precision(9);
  os << "method,direction,id,mean_iou,map50,tube_iou\n";
  for (const auto& s : rows) {
    os << method << ',' << xview::to_string(direction) << ',' << s.id << ',' << s.mean_iou << ','
       << s.map50 << ',' << s.tube_iou << '\n';
  }
  return os.str();
}

}  // namespace xview
