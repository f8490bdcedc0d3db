#include "geosmooth/transform.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "geosmooth/errors.hpp"

namespace geosmooth {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Absolute slack added to transcendental coordinate enclosures.
double coord_slack(double scale) { return 1e-12 * (1.0 + std::abs(scale)); }

// Slack on interpolated pixel values (all of magnitude <= 1 in practice).
constexpr double kValueSlack = 1e-12;

Interval widen(const Interval& iv, double by) { return Interval(iv.lo() - by, iv.hi() + by); }

CoordBox rotate_box(const Interval& angle_deg, double x, double y) {
  const double r = std::hypot(x, y);
  if (r == 0.0) return {Interval(0.0), Interval(0.0)};
  const double phi = std::atan2(y, x);
  const double t0 = angle_deg.lo() * kDegToRad + phi;
  const double t1 = angle_deg.hi() * kDegToRad + phi;
  const Interval c = cos_range(t0, t1);
  const Interval s = sin_range(t0, t1);
  const double slack = coord_slack(r);
  return {widen(Interval(r * c.lo(), r * c.hi()), slack), widen(Interval(r * s.lo(), r * s.hi()), slack)};
}

CoordBox join_box(const CoordBox& a, const CoordBox& b) { return {join(a.x, b.x), join(a.y, b.y)}; }

void require_geometric(TransformKind kind) {
  if (kind == TransformKind::volume_scale) {
    throw DomainError("coordinate maps are only defined for rotation and translation");
  }
}

}  // namespace

int param_dim(TransformKind kind) { return kind == TransformKind::translation ? 2 : 1; }

std::string to_string(TransformKind kind) {
  switch (kind) {
    case TransformKind::rotation:
      return "rotation";
    case TransformKind::translation:
      return "translation";
    case TransformKind::volume_scale:
      return "volume_scale";
  }
  return "unknown";
}

TransformKind parse_transform_kind(std::string_view name) {
  if (name == "rotation") return TransformKind::rotation;
  if (name == "translation") return TransformKind::translation;
  if (name == "volume_scale" || name == "volume") return TransformKind::volume_scale;
  throw DomainError("unknown transform kind '" + std::string(name) + "'");
}

ParamBox::ParamBox(std::vector<Interval> dims) : dims_(std::move(dims)) {
  if (dims_.empty()) throw DomainError("ParamBox: at least one dimension required");
  for (const auto& d : dims_) {
    if (d.is_empty()) throw DomainError("ParamBox: empty dimension");
  }
}

ParamBox ParamBox::symmetric(TransformKind kind, double pm) {
  if (!(pm >= 0.0)) throw DomainError("ParamBox::symmetric: half-width must be >= 0");
  return ParamBox(std::vector<Interval>(param_dim(kind), Interval(-pm, pm)));
}

ParamBox ParamBox::point(std::span<const double> p) {
  std::vector<Interval> dims;
  for (double v : p) dims.emplace_back(v);
  return ParamBox(std::move(dims));
}

bool ParamBox::contains(std::span<const double> p) const {
  if (static_cast<int>(p.size()) != dim()) return false;
  for (int d = 0; d < dim(); ++d) {
    if (!dims_[d].contains(p[d])) return false;
  }
  return true;
}

std::vector<ParamBox> ParamBox::split(int per_dim) const {
  if (per_dim < 1) throw DomainError("ParamBox::split: need at least one split per dimension");
  std::vector<std::vector<Interval>> pieces(dims_.size());
  for (std::size_t d = 0; d < dims_.size(); ++d) {
    const double lo = dims_[d].lo();
    const double step = dims_[d].width() / per_dim;
    for (int k = 0; k < per_dim; ++k) {
      const double a = lo + step * k;
      const double b = (k + 1 == per_dim) ? dims_[d].hi() : lo + step * (k + 1);
      pieces[d].emplace_back(a, b);
    }
  }
  std::vector<ParamBox> out;
  std::vector<int> idx(dims_.size(), 0);
  while (true) {
    std::vector<Interval> cell;
    for (std::size_t d = 0; d < dims_.size(); ++d) cell.push_back(pieces[d][idx[d]]);
    out.emplace_back(std::move(cell));
    int d = static_cast<int>(dims_.size()) - 1;
    while (d >= 0 && ++idx[d] == per_dim) idx[d--] = 0;
    if (d < 0) break;
  }
  return out;
}

double ParamBox::circumradius() const {
  double s = 0.0;
  for (const auto& d : dims_) s += d.mag() * d.mag();
  return std::sqrt(s);
}

ParamBox ParamBox::shifted(std::span<const double> offset) const {
  if (static_cast<int>(offset.size()) != dim()) throw DomainError("ParamBox::shifted: dimension mismatch");
  std::vector<Interval> dims;
  for (int d = 0; d < dim(); ++d) dims.push_back(dims_[d] + Interval(offset[d]));
  return ParamBox(std::move(dims));
}

ParamPoint ParamBox::sample_uniform(std::mt19937_64& rng) const {
  ParamPoint p(dims_.size());
  for (std::size_t d = 0; d < dims_.size(); ++d) {
    std::uniform_real_distribution<double> u(dims_[d].lo(), dims_[d].hi());
    p[d] = dims_[d].width() == 0.0 ? dims_[d].lo() : u(rng);
  }
  return p;
}

CoordBox intersect(const CoordBox& a, const CoordBox& b) {
  return {intersect(a.x, b.x), intersect(a.y, b.y)};
}

Interval cos_range(double t0, double t1) {
  if (t1 - t0 >= kTwoPi) return Interval(-1.0, 1.0);
  const double c0 = std::cos(t0);
  const double c1 = std::cos(t1);
  double lo = std::min(c0, c1);
  double hi = std::max(c0, c1);
  // Maxima of cos at 2k*pi, minima at (2k+1)*pi.
  if (std::ceil(t0 / kTwoPi) * kTwoPi <= t1) hi = 1.0;
  if (std::ceil((t0 - std::numbers::pi) / kTwoPi) * kTwoPi + std::numbers::pi <= t1) lo = -1.0;
  return Interval(lo, hi);
}

Interval sin_range(double t0, double t1) {
  return cos_range(t0 - std::numbers::pi / 2.0, t1 - std::numbers::pi / 2.0);
}

std::array<double, 2> inverse_coord_map(TransformKind kind, std::span<const double> gamma, double x,
                                        double y) {
  require_geometric(kind);
  if (static_cast<int>(gamma.size()) != param_dim(kind)) {
    throw DomainError("inverse_coord_map: parameter dimension mismatch");
  }
  if (kind == TransformKind::rotation) {
    const double g = gamma[0] * kDegToRad;
    const double c = std::cos(g);
    const double s = std::sin(g);
    return {x * c - y * s, x * s + y * c};
  }
  return {x - 2.0 * gamma[0], y - 2.0 * gamma[1]};
}

CoordBox inverse_coord_map(TransformKind kind, const ParamBox& box, double x, double y) {
  require_geometric(kind);
  if (box.dim() != param_dim(kind)) throw DomainError("inverse_coord_map: parameter dimension mismatch");
  if (kind == TransformKind::rotation) return rotate_box(box[0], x, y);
  const Interval tx = Interval(x) - Interval(2.0) * box[0];
  const Interval ty = Interval(y) - Interval(2.0) * box[1];
  return {widen(tx, coord_slack(x)), widen(ty, coord_slack(y))};
}

CoordBox forward_coord_map(TransformKind kind, const ParamBox& box, const CoordBox& region) {
  require_geometric(kind);
  if (kind == TransformKind::translation) {
    const Interval tx = region.x + Interval(2.0) * box[0];
    const Interval ty = region.y + Interval(2.0) * box[1];
    return {widen(tx, coord_slack(tx.mag())), widen(ty, coord_slack(ty.mag()))};
  }
  // The forward rotation is the inverse map with the angle negated. The image
  // of a box under one rotation is the hull of its rotated corners, so joining
  // the corner arcs bounds the union over all angles.
  const Interval neg = -box[0];
  CoordBox out{Interval::empty(), Interval::empty()};
  for (double cx : {region.x.lo(), region.x.hi()}) {
    for (double cy : {region.y.lo(), region.y.hi()}) out = join_box(out, rotate_box(neg, cx, cy));
  }
  return out;
}

double bilinear_interpolate(const Image& img, int channel, double x, double y) {
  const int v = cell_of(x);
  const int w = cell_of(y);
  const double ax = (x - v) * 0.5;
  const double ay = (y - w) * 0.5;
  const double p00 = img.grid_or_zero(channel, v, w);
  const double p02 = img.grid_or_zero(channel, v, w + 2);
  const double p20 = img.grid_or_zero(channel, v + 2, w);
  const double p22 = img.grid_or_zero(channel, v + 2, w + 2);
  const double val = p00 * (1.0 - ax) * (1.0 - ay) + p02 * (1.0 - ax) * ay + p20 * ax * (1.0 - ay) + p22 * ax * ay;
  return std::clamp(val, 0.0, 1.0);
}

Image apply_transform(const Image& img, TransformKind kind, std::span<const double> gamma) {
  if (static_cast<int>(gamma.size()) != param_dim(kind)) {
    throw DomainError("apply_transform: parameter dimension mismatch");
  }
  if (kind == TransformKind::volume_scale) {
    Image out = img;
    const double s = std::pow(10.0, gamma[0] / 20.0);
    for (double& v : out.data()) v *= s;
    return out;
  }
  const GridGeometry& g = img.geometry();
  Image out(g);
  for (int row = 0; row < g.height; ++row) {
    const int y = g.y_of_row(row);
    for (int col = 0; col < g.width; ++col) {
      const auto [sx, sy] = inverse_coord_map(kind, gamma, g.x_of_col(col), y);
      for (int c = 0; c < g.channels; ++c) out.at(c, row, col) = bilinear_interpolate(img, c, sx, sy);
    }
  }
  return out;
}

IntervalImage apply_transform_interval(const IntervalImage& img, TransformKind kind, const ParamBox& box) {
  if (box.dim() != param_dim(kind)) throw DomainError("apply_transform_interval: parameter dimension mismatch");
  if (kind == TransformKind::volume_scale) {
    const Interval scale(std::pow(10.0, box[0].lo() / 20.0) * (1.0 - 1e-15),
                         std::pow(10.0, box[0].hi() / 20.0) * (1.0 + 1e-15));
    IntervalImage out = img;
    for (auto& v : out.data()) v = v * scale;
    return out;
  }

  const GridGeometry& g = img.geometry();
  IntervalImage out(g);
  // Cells entirely outside the raster only see phantom zero pixels.
  const int vmin = -g.max_x() - 2, vmax = g.max_x();
  const int wmin = -g.max_y() - 2, wmax = g.max_y();

  for (int row = 0; row < g.height; ++row) {
    const int y = g.y_of_row(row);
    for (int col = 0; col < g.width; ++col) {
      const CoordBox src = inverse_coord_map(kind, box, g.x_of_col(col), y);
      int v0 = cell_of(src.x.lo()), v1 = cell_of(src.x.hi());
      int w0 = cell_of(src.y.lo()), w1 = cell_of(src.y.hi());
      const bool clipped = v0 < vmin || v1 > vmax || w0 < wmin || w1 > wmax;
      v0 = std::max(v0, vmin);
      v1 = std::min(v1, vmax);
      w0 = std::max(w0, wmin);
      w1 = std::min(w1, wmax);

      for (int c = 0; c < g.channels; ++c) {
        double lo = clipped ? 0.0 : std::numeric_limits<double>::infinity();
        double hi = clipped ? 0.0 : -std::numeric_limits<double>::infinity();
        bool empty = false;
        for (int v = v0; v <= v1 && !empty; v += 2) {
          const double xl = std::max(src.x.lo(), double(v)), xu = std::min(src.x.hi(), double(v + 2));
          if (xl > xu) continue;
          for (int w = w0; w <= w1; w += 2) {
            const double yl = std::max(src.y.lo(), double(w)), yu = std::min(src.y.hi(), double(w + 2));
            if (yl > yu) continue;
            const Interval p00 = img.grid_or_zero(c, v, w);
            const Interval p02 = img.grid_or_zero(c, v, w + 2);
            const Interval p20 = img.grid_or_zero(c, v + 2, w);
            const Interval p22 = img.grid_or_zero(c, v + 2, w + 2);
            if (p00.is_empty() || p02.is_empty() || p20.is_empty() || p22.is_empty()) {
              empty = true;
              break;
            }
            // Weights are non-negative, so the minimum uses lower pixel bounds;
            // a bilinear function on a rectangle peaks at a corner.
            for (double x : {xl, xu}) {
              const double ax = (x - v) * 0.5;
              for (double yy : {yl, yu}) {
                const double ay = (yy - w) * 0.5;
                const double w00 = (1.0 - ax) * (1.0 - ay), w02 = (1.0 - ax) * ay;
                const double w20 = ax * (1.0 - ay), w22 = ax * ay;
                lo = std::min(lo, p00.lo() * w00 + p02.lo() * w02 + p20.lo() * w20 + p22.lo() * w22);
                hi = std::max(hi, p00.hi() * w00 + p02.hi() * w02 + p20.hi() * w20 + p22.hi() * w22);
              }
            }
          }
        }
        if (empty) {
          out.at(c, row, col) = Interval::empty();
        } else {
          lo = std::clamp(lo - kValueSlack, 0.0, 1.0);
          hi = std::clamp(hi + kValueSlack, 0.0, 1.0);
          out.at(c, row, col) = Interval(lo, std::max(lo, hi));
        }
      }
    }
  }
  return out;
}

IntervalImage apply_transform_interval(const Image& img, TransformKind kind, const ParamBox& box) {
  return apply_transform_interval(to_interval_image(img), kind, box);
}

std::vector<double> volume_scale(std::span<const double> signal, double beta_db) {
  const double s = std::pow(10.0, beta_db / 20.0);
  std::vector<double> out(signal.begin(), signal.end());
  for (double& v : out) v *= s;
  return out;
}

}  // namespace geosmooth
