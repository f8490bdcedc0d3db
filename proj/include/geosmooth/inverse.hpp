#pragma once

#include <optional>

#include "geosmooth/image.hpp"
#include "geosmooth/transform.hpp"

namespace geosmooth {

struct InverseOptions {
  int refinements = 0;
  /// Half-width of the uncertainty on every observed pixel (1/510 for 8-bit inputs).
  double pixel_tolerance = 0.0;
  /// Candidates whose weight on the pixel falls below this give no constraint.
  double min_weight = 1e-9;
  int threads = 1;
};

struct PixelIndex {
  int channel = 0;
  int row = 0;
  int col = 0;
  friend bool operator==(const PixelIndex&, const PixelIndex&) = default;
};

/// Interval image containing every x with T_gamma(x) = observed for some gamma in the box.
struct InverseResult {
  IntervalImage image;
  bool feasible = true;
  int refinements_applied = 0;
  /// First pixel whose constraints became empty.
  std::optional<PixelIndex> empty_pixel;
};

InverseResult invert_image(const Image& observed, TransformKind kind, const ParamBox& box,
                           const InverseOptions& opts = {});

/// One refinement pass: unknown neighbours take their previous intervals and
/// every corner of each intersection rectangle is evaluated.
InverseResult refine_once(const InverseResult& prev, const Image& observed, TransformKind kind,
                          const ParamBox& box, const InverseOptions& opts = {});

/// Constraint on p_{i,j} from an observed value p' interpolated somewhere in
/// `rect`, a subset of one interpolation region cornering (i, j), with the
/// other three corners unknown in [0, 1]. Evaluated at the corner of `rect`
/// furthest from (i, j). nullopt when that corner's weight is below min_weight.
std::optional<Interval> furthest_corner_constraint(double observed, double tolerance, int i, int j,
                                                   const CoordBox& rect, double min_weight = 1e-9);

}  // namespace geosmooth
