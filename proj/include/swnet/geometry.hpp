#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace swnet {

/// Axis-aligned box in corner form. Valid when x1 <= x2 and y1 <= y2.
struct Box {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const;
  double cx() const { return 0.5 * (x1 + x2); }
  double cy() const { return 0.5 * (y1 + y2); }
  bool valid() const { return x1 <= x2 && y1 <= y2; }

  friend bool operator==(const Box&, const Box&) = default;
};

struct Detection {
  Box box;
  int class_id = 0;
  double score = 0.0;
};

/// Annotated object. class_id 0 is reserved for background.
struct GroundTruth {
  Box box;
  int class_id = 1;
};

/// R-CNN box delta: center shift normalized by anchor size, log size ratio.
struct Offset4 {
  double dx = 0.0;
  double dy = 0.0;
  double dw = 0.0;
  double dh = 0.0;

  friend bool operator==(const Offset4&, const Offset4&) = default;
};

struct GridSpec {
  int rows = 1;
  int cols = 1;
  double cell = 1.0;
};

struct AnchorSet {
  std::vector<Box> anchors;
  GridSpec grid;
  std::vector<double> scales;
  std::vector<double> ratios;

  std::size_t size() const { return anchors.size(); }
};

double iou(const Box& a, const Box& b);

Offset4 encode_offsets(const Box& anchor, const Box& target);
Box decode_offsets(const Box& anchor, const Offset4& off);

/// Anchors centred on each grid cell. Enumeration is row-major over cells,
/// then scales, then ratios. An anchor of scale s and ratio r has width
/// s*cell*sqrt(r) and height s*cell/sqrt(r).
AnchorSet generate_anchors(const GridSpec& grid, std::span<const double> scales,
                           std::span<const double> ratios);

/// Greedy per-class NMS. Returns indices of kept detections in selection
/// order (descending score, ties by input index).
std::vector<std::size_t> nms_keep(std::span<const Detection> dets, double iou_thr);
std::vector<Detection> nms(std::span<const Detection> dets, double iou_thr);

/// Gaussian Soft-NMS within each class: s <- s * exp(-iou^2 / sigma).
/// Detections whose score falls below score_floor are dropped.
std::vector<Detection> soft_nms(std::span<const Detection> dets, double sigma, double score_floor);

// CSV rows `x1,y1,x2,y2[,class_id][,score]`, 9 significant digits.
void write_boxes_csv(std::ostream& os, std::span<const Detection> dets);
void write_boxes_csv(std::ostream& os, std::span<const GroundTruth> gts);
void write_boxes_csv(std::ostream& os, std::span<const Box> boxes);
std::vector<Detection> read_boxes_csv(std::istream& is);

}  // namespace swnet
