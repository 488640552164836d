#pragma once

#include <string>
#include <vector>

#include "rsnet/cloud.hpp"
#include "rsnet/common.hpp"

namespace rsnet {

// Deterministic indoor-scene generator for desk-scale experiments.
//
// Room mode: axis-aligned shell (floor z~0, ceiling z~z_span, 4 walls) plus
// table/chair/clutter primitives, each point labeled by its generating
// primitive. Context mode: a grid of 1m cells holding thin slab patches; a
// slab is "slab_paired" iff a partner slab sits 0.3-0.5m above or below it
// in the same cell, "slab_lone" otherwise, with per-point feature
// distributions matched exactly across the two classes (see build_context).
enum class SceneMode { Room, ContextTask };

struct SceneSpec {
  SceneMode mode = SceneMode::Room;
  double x_span = 4.0, y_span = 4.0, z_span = 3.0;  // meters, > 0
  bool floor = true, ceiling = true, walls = true;
  int tables = 2, chairs = 3, clutter = 4;
  double surface_density = 200.0;  // points per square meter
  double jitter_sigma = 0.005;     // 5mm Gaussian (clamped at 3 sigma)
  uint64_t seed = 0;

  // context-task knobs
  int cells_x = 3, cells_y = 3;
  double pair_fraction = 1.0 / 3.0;  // 1/3 keeps the two classes balanced

  std::vector<std::string> class_names() const {
    if (mode == SceneMode::ContextTask) return {"slab_paired", "slab_lone", "base"};
    return {"floor", "ceiling", "wall", "table", "chair", "clutter"};
  }
  int num_classes() const { return int(class_names().size()); }

  void validate() const {
    if (x_span <= 0 || y_span <= 0 || z_span <= 0)
      throw ValidationError("scene spans must be positive");
    if (mode == SceneMode::Room) {
      if (!floor && !ceiling && !walls && tables == 0 && chairs == 0 && clutter == 0)
        throw EmptySceneError("no surfaces and no objects requested");
    } else {
      if (cells_x <= 0 || cells_y <= 0) throw EmptySceneError("context grid is empty");
    }
  }
};

struct ScenePrimitive {
  int cls = 0;
  std::string kind;
};

// Scene with per-point provenance: provenance[i] indexes primitives, and
// labels[i] == primitives[provenance[i]].cls by construction.
struct DetailedScene {
  LabeledCloud cloud;
  std::vector<int> provenance;
  std::vector<ScenePrimitive> primitives;
};

namespace detail {

struct SceneBuilder {
  const SceneSpec& spec;
  Rng rng;
  std::vector<double> pts;   // flat rows of x y z r g b
  std::vector<int> labels;
  std::vector<int> prov;
  std::vector<ScenePrimitive> prims;

  explicit SceneBuilder(const SceneSpec& s) : spec(s), rng(s.seed) {}

  int begin_prim(int cls, const std::string& kind) {
    prims.push_back({cls, kind});
    return int(prims.size()) - 1;
  }

  void emit(int prim, double x, double y, double z, double r, double g, double b) {
    double s = spec.jitter_sigma;
    pts.push_back(x + rng.normal_clamped3(0.0, s));
    pts.push_back(y + rng.normal_clamped3(0.0, s));
    pts.push_back(z + rng.normal_clamped3(0.0, s));
    pts.push_back(std::clamp(r + rng.uniform(-0.06, 0.06), 0.0, 1.0));
    pts.push_back(std::clamp(g + rng.uniform(-0.06, 0.06), 0.0, 1.0));
    pts.push_back(std::clamp(b + rng.uniform(-0.06, 0.06), 0.0, 1.0));
    labels.push_back(prims[prim].cls);
    prov.push_back(prim);
  }

  int area_count(double area) const {
    return std::max(1, int(std::lround(area * spec.surface_density)));
  }

  // Horizontal rectangle at fixed z.
  void rect_xy(int prim, double x0, double x1, double y0, double y1, double z,
               const double rgb[3]) {
    int n = area_count((x1 - x0) * (y1 - y0));
    for (int i = 0; i < n; ++i)
      emit(prim, rng.uniform(x0, x1), rng.uniform(y0, y1), z, rgb[0], rgb[1], rgb[2]);
  }
  // Vertical rectangle in the xz plane (fixed y).
  void rect_xz(int prim, double x0, double x1, double z0, double z1, double y,
               const double rgb[3]) {
    int n = area_count((x1 - x0) * (z1 - z0));
    for (int i = 0; i < n; ++i)
      emit(prim, rng.uniform(x0, x1), y, rng.uniform(z0, z1), rgb[0], rgb[1], rgb[2]);
  }
  // Vertical rectangle in the yz plane (fixed x).
  void rect_yz(int prim, double y0, double y1, double z0, double z1, double x,
               const double rgb[3]) {
    int n = area_count((y1 - y0) * (z1 - z0));
    for (int i = 0; i < n; ++i)
      emit(prim, x, rng.uniform(y0, y1), rng.uniform(z0, z1), rgb[0], rgb[1], rgb[2]);
  }
  // Vertical segment (table/chair leg).
  void leg(int prim, double x, double y, double z0, double z1, const double rgb[3]) {
    int n = std::max(1, int(std::lround((z1 - z0) * spec.surface_density / 8.0)));
    for (int i = 0; i < n; ++i)
      emit(prim, x, y, rng.uniform(z0, z1), rgb[0], rgb[1], rgb[2]);
  }
  // Visible faces of an axis-aligned box, area-weighted. The bottom face is
  // skipped: a scanner never sees the underside of an object on the floor.
  void box(int prim, double cx, double cy, double cz, double hx, double hy, double hz,
           const double rgb[3]) {
    rect_xy(prim, cx - hx, cx + hx, cy - hy, cy + hy, cz + hz, rgb);
    rect_xz(prim, cx - hx, cx + hx, cz - hz, cz + hz, cy - hy, rgb);
    rect_xz(prim, cx - hx, cx + hx, cz - hz, cz + hz, cy + hy, rgb);
    rect_yz(prim, cy - hy, cy + hy, cz - hz, cz + hz, cx - hx, rgb);
    rect_yz(prim, cy - hy, cy + hy, cz - hz, cz + hz, cx + hx, rgb);
  }
};

inline void build_room(SceneBuilder& b) {
  const SceneSpec& s = b.spec;
  static const double kFloorRgb[3] = {0.30, 0.30, 0.30};
  static const double kCeilRgb[3] = {0.95, 0.95, 0.95};
  static const double kWallRgb[3] = {0.85, 0.80, 0.55};
  static const double kTableRgb[3] = {0.60, 0.35, 0.10};
  static const double kChairRgb[3] = {0.85, 0.10, 0.15};
  static const double kClutterRgb[3] = {0.10, 0.65, 0.25};

  double margin = 0.5;
  auto place = [&](double size) {
    double lo = margin + size, hix = s.x_span - margin - size, hiy = s.y_span - margin - size;
    double cx = b.rng.uniform(lo, std::max(lo, hix));
    double cy = b.rng.uniform(lo, std::max(lo, hiy));
    return std::pair<double, double>(cx, cy);
  };

  // object placements are drawn first so the floor can honor occlusion
  struct Table {
    double cx, cy, sx, sy, h;
  };
  struct Chair {
    double cx, cy, half, h;
  };
  struct Box {
    double cx, cy, hx, hy, hz;
  };
  std::vector<Table> tables;
  std::vector<Chair> chairs;
  std::vector<Box> boxes;
  for (int t = 0; t < s.tables; ++t) {
    Table tb;
    tb.sx = b.rng.uniform(0.50, 0.75);
    tb.sy = b.rng.uniform(0.50, 0.75);
    tb.h = b.rng.uniform(0.62, 0.78);
    std::tie(tb.cx, tb.cy) = place(std::max(tb.sx, tb.sy));
    tables.push_back(tb);
  }
  for (int c = 0; c < s.chairs; ++c) {
    Chair ch;
    ch.half = b.rng.uniform(0.26, 0.34);
    ch.h = b.rng.uniform(0.40, 0.50);
    std::tie(ch.cx, ch.cy) = place(ch.half);
    chairs.push_back(ch);
  }
  for (int k = 0; k < s.clutter; ++k) {
    Box bx;
    bx.hx = b.rng.uniform(0.10, 0.26);
    bx.hy = b.rng.uniform(0.10, 0.26);
    bx.hz = b.rng.uniform(0.10, 0.26);
    std::tie(bx.cx, bx.cy) = place(std::max(bx.hx, bx.hy));
    boxes.push_back(bx);
  }

  // floor points under clutter are occluded and never scanned
  auto occluded = [&](double x, double y) {
    for (const auto& bx : boxes)
      if (std::abs(x - bx.cx) <= bx.hx && std::abs(y - bx.cy) <= bx.hy) return true;
    return false;
  };
  if (s.floor) {
    int prim = b.begin_prim(0, "floor");
    int n = b.area_count(s.x_span * s.y_span);
    for (int i = 0; i < n; ++i) {
      double x = b.rng.uniform(0, s.x_span), y = b.rng.uniform(0, s.y_span);
      for (int tries = 0; occluded(x, y) && tries < 64; ++tries) {
        x = b.rng.uniform(0, s.x_span);
        y = b.rng.uniform(0, s.y_span);
      }
      b.emit(prim, x, y, 0.0, kFloorRgb[0], kFloorRgb[1], kFloorRgb[2]);
    }
  }
  if (s.ceiling)
    b.rect_xy(b.begin_prim(1, "ceiling"), 0, s.x_span, 0, s.y_span, s.z_span, kCeilRgb);
  if (s.walls) {
    b.rect_xz(b.begin_prim(2, "wall"), 0, s.x_span, 0, s.z_span, 0.0, kWallRgb);
    b.rect_xz(b.begin_prim(2, "wall"), 0, s.x_span, 0, s.z_span, s.y_span, kWallRgb);
    b.rect_yz(b.begin_prim(2, "wall"), 0, s.y_span, 0, s.z_span, 0.0, kWallRgb);
    b.rect_yz(b.begin_prim(2, "wall"), 0, s.y_span, 0, s.z_span, s.x_span, kWallRgb);
  }

  for (const auto& tb : tables) {
    int prim = b.begin_prim(3, "table");
    b.rect_xy(prim, tb.cx - tb.sx, tb.cx + tb.sx, tb.cy - tb.sy, tb.cy + tb.sy, tb.h, kTableRgb);
    double ix = tb.sx - 0.05, iy = tb.sy - 0.05;
    b.leg(prim, tb.cx - ix, tb.cy - iy, 0, tb.h, kTableRgb);
    b.leg(prim, tb.cx + ix, tb.cy - iy, 0, tb.h, kTableRgb);
    b.leg(prim, tb.cx - ix, tb.cy + iy, 0, tb.h, kTableRgb);
    b.leg(prim, tb.cx + ix, tb.cy + iy, 0, tb.h, kTableRgb);
  }
  for (const auto& ch : chairs) {
    int prim = b.begin_prim(4, "chair");
    b.rect_xy(prim, ch.cx - ch.half, ch.cx + ch.half, ch.cy - ch.half, ch.cy + ch.half, ch.h,
              kChairRgb);
    b.rect_xz(prim, ch.cx - ch.half, ch.cx + ch.half, ch.h, ch.h + 0.5, ch.cy - ch.half,
              kChairRgb);  // backrest
    b.leg(prim, ch.cx - ch.half + 0.03, ch.cy - ch.half + 0.03, 0, ch.h, kChairRgb);
    b.leg(prim, ch.cx + ch.half - 0.03, ch.cy - ch.half + 0.03, 0, ch.h, kChairRgb);
    b.leg(prim, ch.cx - ch.half + 0.03, ch.cy + ch.half - 0.03, 0, ch.h, kChairRgb);
    b.leg(prim, ch.cx + ch.half - 0.03, ch.cy + ch.half - 0.03, 0, ch.h, kChairRgb);
  }
  for (const auto& bx : boxes) {
    int prim = b.begin_prim(5, "clutter");
    b.box(prim, bx.cx, bx.cy, bx.hz, bx.hx, bx.hy, bx.hz, kClutterRgb);
  }
}

// One 1m cell of the context task. Each cell holds a small base plate at
// z=0 (anchors the per-cube z origin) and thin slab patches at two opposite
// corners. A paired cell puts both members of a vertical pair (0.3-0.5m
// apart) on opposite corners; a lone cell puts a single slab at the height
// of a random member of a phantom pair, so the per-point feature joint is
// identical across classes. Corner patches are disjoint in x, y, and z, so a
// point's own slice on any axis never contains the partner slab: the class
// is carried exclusively by slice-neighborhood occupancy along the sequence.
inline void build_context(SceneBuilder& b) {
  const SceneSpec& s = b.spec;
  static const double kSlabRgb[3] = {0.5, 0.5, 0.5};
  static const double kBaseRgb[3] = {0.5, 0.5, 0.5};
  const double kGapLo = 0.30, kGapHi = 0.50, kZPad = 0.30;
  // corner patch extents within the cell; gaps exceed the clamped jitter
  const double kPatchLo = 0.08, kPatchHi = 0.42;

  for (int cy = 0; cy < s.cells_y; ++cy) {
    for (int cx = 0; cx < s.cells_x; ++cx) {
      double gap = b.rng.uniform(kGapLo, kGapHi);
      double clo = kZPad + gap / 2.0, chi = s.z_span - kZPad - gap / 2.0;
      double center = b.rng.uniform(clo, std::max(clo, chi));
      bool paired = b.rng.uniform() < s.pair_fraction;
      bool lower_at_first = b.rng.uniform() < 0.5;
      bool lone_is_lower = b.rng.uniform() < 0.5;
      bool lone_at_first = b.rng.uniform() < 0.5;

      auto patch = [&](int prim, bool first_corner, double z) {
        double px0 = cx + (first_corner ? kPatchLo : 1.0 - kPatchHi);
        double px1 = cx + (first_corner ? kPatchHi : 1.0 - kPatchLo);
        double py0 = cy + (first_corner ? 1.0 - kPatchHi : kPatchLo);
        double py1 = cy + (first_corner ? 1.0 - kPatchLo : kPatchHi);
        b.rect_xy(prim, px0, px1, py0, py1, z, kSlabRgb);
      };

      if (paired) {
        patch(b.begin_prim(0, "slab_paired"), lower_at_first, center - gap / 2);
        patch(b.begin_prim(0, "slab_paired"), !lower_at_first, center + gap / 2);
      } else {
        double z = lone_is_lower ? center - gap / 2 : center + gap / 2;
        patch(b.begin_prim(1, "slab_lone"), lone_at_first, z);
      }
      b.rect_xy(b.begin_prim(2, "base"), cx + 0.45, cx + 0.55, cy + 0.45, cy + 0.55, 0.0,
                kBaseRgb);
    }
  }
}

}  // namespace detail

inline DetailedScene generate_scene_detailed(const SceneSpec& spec) {
  spec.validate();
  detail::SceneBuilder b(spec);
  if (spec.mode == SceneMode::Room)
    detail::build_room(b);
  else
    detail::build_context(b);

  DetailedScene out;
  int n = int(b.labels.size());
  out.cloud.points.resize(n, 6);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 6; ++j) out.cloud.points(i, j) = b.pts[size_t(i) * 6 + j];
  out.cloud.labels = std::move(b.labels);
  out.cloud.num_classes = spec.num_classes();
  out.provenance = std::move(b.prov);
  out.primitives = std::move(b.prims);
  out.cloud.validate();
  return out;
}

inline LabeledCloud generate_scene(const SceneSpec& spec) {
  return generate_scene_detailed(spec).cloud;
}

}  // namespace rsnet
