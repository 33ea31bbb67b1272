#include "swnet/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace swnet {

double Box::area() const { return std::max(0.0, x2 - x1) * std::max(0.0, y2 - y1); }

double iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

Offset4 encode_offsets(const Box& anchor, const Box& target) {
  const double aw = anchor.width();
  const double ah = anchor.height();
  if (!(aw > 0.0) || !(ah > 0.0)) {
    throw std::invalid_argument("encode_offsets: anchor must have positive width and height");
  }
  if (!(target.width() > 0.0) || !(target.height() > 0.0)) {
    throw std::invalid_argument("encode_offsets: target must have positive width and height");
  }
  return {(target.cx() - anchor.cx()) / aw, (target.cy() - anchor.cy()) / ah,
          std::log(target.width() / aw), std::log(target.height() / ah)};
}

Box decode_offsets(const Box& anchor, const Offset4& off) {
  const double aw = anchor.width();
  const double ah = anchor.height();
  const double cx = anchor.cx() + off.dx * aw;
  const double cy = anchor.cy() + off.dy * ah;
  const double w = aw * std::exp(off.dw);
  const double h = ah * std::exp(off.dh);
  return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
}

AnchorSet generate_anchors(const GridSpec& grid, std::span<const double> scales,
                           std::span<const double> ratios) {
  if (grid.rows <= 0 || grid.cols <= 0 || !(grid.cell > 0.0)) {
    throw std::invalid_argument("generate_anchors: grid dimensions must be positive");
  }
  if (scales.empty() || ratios.empty()) {
    throw std::invalid_argument("generate_anchors: scales and ratios must be non-empty");
  }
  for (double s : scales) {
    if (!(s > 0.0)) throw std::invalid_argument("generate_anchors: scales must be positive");
  }
  for (double r : ratios) {
    if (!(r > 0.0)) throw std::invalid_argument("generate_anchors: ratios must be positive");
  }

  AnchorSet set;
  set.grid = grid;
  set.scales.assign(scales.begin(), scales.end());
  set.ratios.assign(ratios.begin(), ratios.end());
  set.anchors.reserve(static_cast<std::size_t>(grid.rows) * grid.cols * scales.size() *
                      ratios.size());
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      const double cx = (c + 0.5) * grid.cell;
      const double cy = (r + 0.5) * grid.cell;
      for (double s : scales) {
        for (double ratio : ratios) {
          const double w = s * grid.cell * std::sqrt(ratio);
          const double h = s * grid.cell / std::sqrt(ratio);
          set.anchors.push_back({cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h});
        }
      }
    }
  }
  return set;
}

namespace {

std::vector<std::size_t> score_order(std::span<const Detection> dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].score > dets[b].score;
  });
  return order;
}

}  // namespace

std::vector<std::size_t> nms_keep(std::span<const Detection> dets, double iou_thr) {
  if (!(iou_thr >= 0.0 && iou_thr <= 1.0)) {
    throw std::invalid_argument("nms: iou threshold must lie in [0, 1]");
  }
  for (const auto& d : dets) {
    if (!std::isfinite(d.score)) throw std::invalid_argument("nms: non-finite score");
  }
  std::vector<std::size_t> kept;
  for (std::size_t idx : score_order(dets)) {
    bool suppressed = false;
    for (std::size_t k : kept) {
      if (dets[k].class_id == dets[idx].class_id && iou(dets[k].box, dets[idx].box) > iou_thr) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(idx);
  }
  return kept;
}

std::vector<Detection> nms(std::span<const Detection> dets, double iou_thr) {
  std::vector<Detection> out;
  for (std::size_t idx : nms_keep(dets, iou_thr)) out.push_back(dets[idx]);
  return out;
}

std::vector<Detection> soft_nms(std::span<const Detection> dets, double sigma, double score_floor) {
  if (!(sigma > 0.0)) throw std::invalid_argument("soft_nms: sigma must be positive");

  std::vector<Detection> pool;
  for (const auto& d : dets) {
    if (d.score >= score_floor) pool.push_back(d);
  }
  std::vector<Detection> out;
  out.reserve(pool.size());
  while (!pool.empty()) {
    // First maximum wins so that ties resolve by original order.
    std::size_t best = 0;
    for (std::size_t i = 1; i < pool.size(); ++i) {
      if (pool[i].score > pool[best].score) best = i;
    }
    const Detection top = pool[best];
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(best));
    out.push_back(top);

    std::vector<Detection> rest;
    rest.reserve(pool.size());
    for (auto d : pool) {
      if (d.class_id == top.class_id) {
        const double o = iou(top.box, d.box);
        d.score *= std::exp(-(o * o) / sigma);
      }
      if (d.score >= score_floor) rest.push_back(d);
    }
    pool = std::move(rest);
  }
  return out;
}

namespace {

void write_coords(std::ostream& os, const Box& b) {
  os << b.x1 << ',' << b.y1 << ',' << b.x2 << ',' << b.y2;
}

struct PrecisionGuard {
  explicit PrecisionGuard(std::ostream& os) : os_(os), prec_(os.precision()), flags_(os.flags()) {
    os_.unsetf(std::ios::floatfield);
    os_ << std::setprecision(9);
  }
  ~PrecisionGuard() {
    os_.precision(prec_);
    os_.flags(flags_);
  }
  std::ostream& os_;
  std::streamsize prec_;
  std::ios::fmtflags flags_;
};

}  // namespace

void write_boxes_csv(std::ostream& os, std::span<const Detection> dets) {
  PrecisionGuard guard(os);
  for (const auto& d : dets) {
    write_coords(os, d.box);
    os << ',' << d.class_id << ',' << d.score << '\n';
  }
}

void write_boxes_csv(std::ostream& os, std::span<const GroundTruth> gts) {
  PrecisionGuard guard(os);
  for (const auto& g : gts) {
    write_coords(os, g.box);
    os << ',' << g.class_id << '\n';
  }
}

void write_boxes_csv(std::ostream& os, std::span<const Box> boxes) {
  PrecisionGuard guard(os);
  for (const auto& b : boxes) {
    write_coords(os, b);
    os << '\n';
  }
}

std::vector<Detection> read_boxes_csv(std::istream& is) {
  std::vector<Detection> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() < 4 || fields.size() > 6) {
      throw std::runtime_error("read_boxes_csv: line " + std::to_string(lineno) +
                               " must have 4 to 6 fields");
    }
    try {
      Detection d;
      d.box = {std::stod(fields[0]), std::stod(fields[1]), std::stod(fields[2]),
               std::stod(fields[3])};
      if (fields.size() >= 5) d.class_id = std::stoi(fields[4]);
      d.score = fields.size() == 6 ? std::stod(fields[5]) : 1.0;
      out.push_back(d);
    } catch (const std::logic_error&) {
      throw std::runtime_error("read_boxes_csv: malformed number on line " +
                               std::to_string(lineno));
    }
  }
  return out;
}

}  // namespace swnet
