#include "geosmooth/inverse.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "geosmooth/errors.hpp"
#include "geosmooth/parallel.hpp"

namespace geosmooth {

namespace {

struct Candidate {
  int row = 0;
  int col = 0;
  // Intersections with the regions based at (i-2,j-2), (i,j-2), (i-2,j), (i,j).
  std::array<CoordBox, 4> rects;
};

constexpr std::array<std::array<int, 2>, 4> kRegionOffsets{{{-2, -2}, {0, -2}, {-2, 0}, {0, 0}}};

// Candidate lists for every pixel; identical across channels and passes.
std::vector<std::vector<Candidate>> build_candidates(const GridGeometry& g, TransformKind kind,
                                                     const ParamBox& box) {
  if (kind == TransformKind::volume_scale) throw DomainError("invert_image: volume_scale is not geometric");
  if (box.dim() != param_dim(kind)) throw DomainError("invert_image: parameter dimension mismatch");

  // Inverse boxes of all observed pixels, computed once.
  std::vector<CoordBox> src(g.plane_size());
  for (int row = 0; row < g.height; ++row) {
    for (int col = 0; col < g.width; ++col) {
      src[row * g.width + col] = inverse_coord_map(kind, box, g.x_of_col(col), g.y_of_row(row));
    }
  }

  std::vector<std::vector<Candidate>> out(g.plane_size());
  for (int row = 0; row < g.height; ++row) {
    const int j = g.y_of_row(row);
    for (int col = 0; col < g.width; ++col) {
      const int i = g.x_of_col(col);
      const CoordBox n{Interval(i - 2.0, i + 2.0), Interval(j - 2.0, j + 2.0)};
      const CoordBox fwd = forward_coord_map(kind, box, n);
      const int x0 = std::max(cell_of(fwd.x.lo()), -g.max_x());
      const int x1 = std::min(cell_of(fwd.x.hi()) + 2, g.max_x());
      const int y0 = std::max(cell_of(fwd.y.lo()), -g.max_y());
      const int y1 = std::min(cell_of(fwd.y.hi()) + 2, g.max_y());
      auto& list = out[row * g.width + col];
      for (int yp = y0; yp <= y1; yp += 2) {
        for (int xp = x0; xp <= x1; xp += 2) {
          const int orow = GridGeometry::to_index(yp, g.height);
          const int ocol = GridGeometry::to_index(xp, g.width);
          const CoordBox c = intersect(src[orow * g.width + ocol], n);
          if (c.is_empty()) continue;
          Candidate cand{orow, ocol, {}};
          for (int r = 0; r < 4; ++r) {
            const int v = i + kRegionOffsets[r][0];
            const int w = j + kRegionOffsets[r][1];
            cand.rects[r] = intersect(c, CoordBox{Interval(v, v + 2.0), Interval(w, w + 2.0)});
          }
          list.push_back(cand);
        }
      }
    }
  }
  return out;
}

double corner_weight(double x, double y, int cx, int cy) {
  return (1.0 - std::abs(x - cx) * 0.5) * (1.0 - std::abs(y - cy) * 0.5);
}

Interval widen_rel(const Interval& q) {
  const double e = 1e-12 * (1.0 + q.mag());
  return Interval(q.lo() - e, q.hi() + e);
}

// Constraint on p_{i,j} with neighbours taken from `prev`, joined over the 4
// corners of `rect` inside the region based at (v, w).
std::optional<Interval> refined_constraint(double observed, double tol, int i, int j, int v, int w,
                                           const CoordBox& rect, const IntervalImage& prev, int channel,
                                           double min_weight) {
  const Interval p(observed - tol, observed + tol);
  Interval joined = Interval::empty();
  for (double x : {rect.x.lo(), rect.x.hi()}) {
    for (double y : {rect.y.lo(), rect.y.hi()}) {
      const double omega = corner_weight(x, y, i, j);
      if (omega < min_weight) return std::nullopt;
      Interval rest(0.0);
      for (int cy : {w, w + 2}) {
        for (int cx : {v, v + 2}) {
          if (cx == i && cy == j) continue;
          rest = rest + Interval(corner_weight(x, y, cx, cy)) * prev.grid_or_zero(channel, cx, cy);
        }
      }
      joined = join(joined, widen_rel((p - rest) / Interval(omega)));
    }
  }
  return joined;
}

InverseResult run_pass(const Image& observed, const std::vector<std::vector<Candidate>>& cands,
                       const IntervalImage* prev, const InverseOptions& opts) {
  const GridGeometry& g = observed.geometry();
  InverseResult res;
  res.image = IntervalImage(g);
  const std::size_t plane = g.plane_size();

  parallel_for(plane * g.channels, opts.threads, [&](std::size_t idx) {
    const int c = static_cast<int>(idx / plane);
    const int row = static_cast<int>((idx % plane) / g.width);
    const int col = static_cast<int>(idx % g.width);
    const int i = g.x_of_col(col);
    const int j = g.y_of_row(row);
    Interval acc = prev ? prev->at(c, row, col) : Interval::unit();
    for (const Candidate& cand : cands[idx % plane]) {
      const double pv = observed.at(c, cand.row, cand.col);
      Interval joined = Interval::empty();
      bool constrained = true;
      for (int r = 0; r < 4 && constrained; ++r) {
        const CoordBox& rect = cand.rects[r];
        if (rect.is_empty()) continue;
        const int v = i + kRegionOffsets[r][0];
        const int w = j + kRegionOffsets[r][1];
        const auto q = prev ? refined_constraint(pv, opts.pixel_tolerance, i, j, v, w, rect, *prev, c,
                                                 opts.min_weight)
                            : furthest_corner_constraint(pv, opts.pixel_tolerance, i, j, rect, opts.min_weight);
        if (!q) {
          constrained = false;
        } else {
          joined = join(joined, *q);
        }
      }
      if (!constrained || joined.is_empty()) continue;
      acc = intersect(acc, joined);
      if (acc.is_empty()) break;
    }
    res.image.at(c, row, col) = acc;
  });

  for (std::size_t idx = 0; idx < res.image.data().size(); ++idx) {
    if (res.image.data()[idx].is_empty()) {
      res.feasible = false;
      res.empty_pixel = PixelIndex{static_cast<int>(idx / plane), static_cast<int>((idx % plane) / g.width),
                                   static_cast<int>(idx % g.width)};
      break;
    }
  }
  return res;
}

void check_options(const InverseOptions& opts) {
  if (opts.refinements < 0) throw DomainError("invert_image: refinements must be >= 0");
  if (!(opts.pixel_tolerance >= 0.0)) throw DomainError("invert_image: pixel tolerance must be >= 0");
}

}  // namespace

std::optional<Interval> furthest_corner_constraint(double observed, double tolerance, int i, int j,
                                                   const CoordBox& rect, double min_weight) {
  if (rect.is_empty()) return std::nullopt;
  const double x = std::abs(rect.x.lo() - i) > std::abs(rect.x.hi() - i) ? rect.x.lo() : rect.x.hi();
  const double y = std::abs(rect.y.lo() - j) > std::abs(rect.y.hi() - j) ? rect.y.lo() : rect.y.hi();
  const double omega = corner_weight(x, y, i, j);
  if (omega < min_weight) return std::nullopt;
  const double lo = (observed - tolerance - (1.0 - omega)) / omega;
  const double hi = (observed + tolerance) / omega;
  return widen_rel(Interval(lo, hi));
}

InverseResult invert_image(const Image& observed, TransformKind kind, const ParamBox& box,
                           const InverseOptions& opts) {
  check_options(opts);
  const auto cands = build_candidates(observed.geometry(), kind, box);
  InverseResult res = run_pass(observed, cands, nullptr, opts);
  for (int r = 0; r < opts.refinements && res.feasible; ++r) {
    InverseResult next = run_pass(observed, cands, &res.image, opts);
    next.refinements_applied = res.refinements_applied + 1;
    res = std::move(next);
  }
  return res;
}

InverseResult refine_once(const InverseResult& prev, const Image& observed, TransformKind kind,
                          const ParamBox& box, const InverseOptions& opts) {
  check_options(opts);
  if (!prev.feasible) throw DomainError("refine_once: previous result is infeasible");
  if (prev.image.geometry() != observed.geometry()) throw DomainError("refine_once: geometry mismatch");
  const auto cands = build_candidates(observed.geometry(), kind, box);
  InverseResult res = run_pass(observed, cands, &prev.image, opts);
  res.refinements_applied = prev.refinements_applied + 1;
  return res;
}

}  // namespace geosmooth
