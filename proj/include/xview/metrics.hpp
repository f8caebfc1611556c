#pragma once
// Box overlap metrics on raw (unclipped) normalized coordinates.

#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "xview/dit.hpp"
#include "xview/geometry.hpp"

namespace xview {

double intersection_area(const Box2D& a, const Box2D& b);
double union_area(const Box2D& a, const Box2D& b);
double iou(const Box2D& a, const Box2D& b);

std::vector<double> per_frame_iou(const BoxSequence& pred, const BoxSequence& gt);
double mean_iou(const BoxSequence& pred, const BoxSequence& gt);
// Fraction of frames with IoU >= 0.5. With one box per frame and no scores,
// average precision reduces to this hit rate.
double map50(const BoxSequence& pred, const BoxSequence& gt);
double tube_iou(const BoxSequence& pred, const BoxSequence& gt);

struct SequenceScores {
  std::string id;
  double mean_iou = 0.0;
  double map50 = 0.0;
  double tube_iou = 0.0;
};

SequenceScores score_sequence(std::string id, const BoxSequence& pred, const BoxSequence& gt);

struct EvalReport {
  std::string method;
  Direction direction = Direction::kFirstToVideo;
  std::vector<SequenceScores> rows;
  double mean_iou = 0.0;
  double map50 = 0.0;
  double tube_iou = 0.0;

  std::size_t count() const { return rows.size(); }
  nlohmann::json to_json(bool include_rows = true) const;
  std::string to_csv() const;
};

EvalReport make_report(std::string method, Direction direction, std::vector<SequenceScores> rows);

}  // namespace xview
