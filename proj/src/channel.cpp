#include "beamsim/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace beamsim::channel {

namespace {

using std::numbers::pi;

// Effective carrier wavelength used only to turn path length into phase.
constexpr double kWavelengthM = 0.005;

cdouble path_gain(double length_m, int bounces, double reflection_loss_db,
                  double pathloss_exponent) {
  const double amplitude = std::pow(length_m, -pathloss_exponent / 2.0) *
                           std::pow(10.0, -reflection_loss_db * bounces / 20.0);
  const double phase = -2.0 * pi * length_m / kWavelengthM;
  return std::polar(amplitude, phase);
}

double angle_from_broadside(const Vec3& from, const Vec3& to) {
  const Vec3 d = to - from;
  const double len = d.norm();
  if (len == 0.0) return 0.0;
  // Arrays lie along the road (y axis).
  const double s = std::clamp(d.y / len, -1.0, 1.0);
  return std::asin(s);
}

// True when segment a-b is blocked by any obstacle except `skip` (< 0: none).
bool blocked(const scene::Scene& sc, const Vec3& a, const Vec3& b,
             int64_t skip) {
  for (size_t i = 0; i < sc.obstacles.size(); ++i) {
    if (static_cast<int64_t>(i) == skip) continue;
    if (segment_intersects_box(a, b, sc.obstacles[i].bounding_box())) {
      return true;
    }
  }
  return false;
}

struct PlaneSpec {
  int axis;           // 0 = x, 1 = y (plane normal direction)
  double offset;      // plane coordinate along `axis`
  double u_min, u_max;  // in-plane bounds along the other horizontal axis
  double z_min, z_max;
  int64_t owner;      // obstacle index the face belongs to, -1 for walls
};

double coord(const Vec3& v, int axis) { return axis == 0 ? v.x : v.y; }

// Single-bounce specular path across `plane` via the image of the receiver.
bool reflect_path(const scene::Scene& sc, const Vec3& bs, const Vec3& rx,
                  const PlaneSpec& plane, double reflection_loss_db,
                  double pathloss_exponent, Path& out) {
  const double side_bs = coord(bs, plane.axis) - plane.offset;
  const double side_rx = coord(rx, plane.axis) - plane.offset;
  if (side_bs == 0.0 || side_rx == 0.0) return false;
  if ((side_bs > 0) != (side_rx > 0)) return false;

  Vec3 image = rx;
  if (plane.axis == 0) {
    image.x = 2.0 * plane.offset - rx.x;
  } else {
    image.y = 2.0 * plane.offset - rx.y;
  }

  const double denom = coord(image, plane.axis) - coord(bs, plane.axis);
  if (denom == 0.0) return false;
  const double t = (plane.offset - coord(bs, plane.axis)) / denom;
  if (t <= 0.0 || t >= 1.0) return false;

  const Vec3 specular = bs + (image - bs) * t;
  const double u = plane.axis == 0 ? specular.y : specular.x;
  if (u < plane.u_min || u > plane.u_max) return false;
  if (specular.z < plane.z_min || specular.z > plane.z_max) return false;

  if (blocked(sc, bs, specular, plane.owner)) return false;
  if (blocked(sc, specular, rx, plane.owner)) return false;

  const double length = distance(bs, image);
  out.gain = path_gain(length, 1, reflection_loss_db, pathloss_exponent);
  out.aod = angle_from_broadside(bs, specular);
  out.aoa = angle_from_broadside(rx, specular);
  out.is_los = false;
  return true;
}

}  // namespace

Codebook dft_codebook(int64_t element_count) {
  if (element_count < 1) {
    throw std::invalid_argument("dft_codebook: element_count < 1");
  }
  Codebook cb;
  cb.element_count = element_count;
  cb.weights.resize(element_count);
  const double scale = 1.0 / std::sqrt(static_cast<double>(element_count));
  for (int64_t beam = 0; beam < element_count; ++beam) {
    cvec w(element_count);
    for (int64_t k = 0; k < element_count; ++k) {
      const double phase = 2.0 * pi * static_cast<double>(beam * k) /
                           static_cast<double>(element_count);
      w[k] = std::polar(scale, phase);
    }
    cb.weights[beam] = std::move(w);
  }
  return cb;
}

cvec steering_vector(int64_t element_count, double angle_rad) {
  if (element_count < 1) {
    throw std::invalid_argument("steering_vector: element_count < 1");
  }
  cvec v(element_count);
  const double scale = 1.0 / std::sqrt(static_cast<double>(element_count));
  const double step = pi * std::sin(angle_rad);
  for (int64_t k = 0; k < element_count; ++k) {
    v[k] = std::polar(scale, step * static_cast<double>(k));
  }
  return v;
}

PathSet trace_paths(const scene::Scene& sc, double reflection_loss_db,
                    double pathloss_exponent, std::span<const Wall> walls) {
  const Vec3 bs = sc.bs_position;
  const Vec3 rx = sc.receiver.roof_center();

  PathSet set;
  if (classify_los(sc)) {
    Path p;
    const double length = distance(bs, rx);
    p.gain = path_gain(length, 0, reflection_loss_db, pathloss_exponent);
    p.aod = angle_from_broadside(bs, rx);
    p.aoa = angle_from_broadside(rx, bs);
    p.is_los = true;
    set.paths.push_back(p);
  }

  for (size_t i = 0; i < sc.obstacles.size(); ++i) {
    const Box box = sc.obstacles[i].bounding_box();
    const int64_t owner = static_cast<int64_t>(i);
    const PlaneSpec faces[4] = {
        {0, box.lo.x, box.lo.y, box.hi.y, box.lo.z, box.hi.z, owner},
        {0, box.hi.x, box.lo.y, box.hi.y, box.lo.z, box.hi.z, owner},
        {1, box.lo.y, box.lo.x, box.hi.x, box.lo.z, box.hi.z, owner},
        {1, box.hi.y, box.lo.x, box.hi.x, box.lo.z, box.hi.z, owner},
    };
    for (const PlaneSpec& face : faces) {
      Path p;
      if (reflect_path(sc, bs, rx, face, reflection_loss_db,
                       pathloss_exponent, p)) {
        set.paths.push_back(p);
      }
    }
  }

  for (const Wall& wall : walls) {
    const PlaneSpec plane{0, wall.x, wall.y_min, wall.y_max,
                          0.0,  wall.height, -1};
    Path p;
    if (reflect_path(sc, bs, rx, plane, reflection_loss_db, pathloss_exponent,
                     p)) {
      set.paths.push_back(p);
    }
  }

  if (set.paths.empty()) {
    throw LinkOutageError("scene " + std::to_string(sc.scene_id) +
                          ": no propagation path");
  }
  return set;
}

ChannelMatrix synth_channel(const PathSet& paths, int64_t m, int64_t n) {
  if (m < 1 || n < 1) throw std::invalid_argument("synth_channel: bad shape");
  if (paths.paths.empty()) {
    throw std::invalid_argument("synth_channel: empty path set");
  }
  ChannelMatrix h;
  h.m = m;
  h.n = n;
  h.entries.assign(m * n, cdouble{0.0, 0.0});
  for (const Path& p : paths.paths) {
    const cvec a_tx = steering_vector(m, p.aod);
    const cvec a_rx = steering_vector(n, p.aoa);
    for (int64_t i = 0; i < m; ++i) {
      const cdouble left = p.gain * a_tx[i];
      for (int64_t j = 0; j < n; ++j) {
        h.at(i, j) += left * std::conj(a_rx[j]);
      }
    }
  }
  return h;
}

PowerMatrix power_matrix(const ChannelMatrix& h, const Codebook& tx,
                         const Codebook& rx) {
  if (tx.element_count != h.m || rx.element_count != h.n) {
    throw std::invalid_argument("power_matrix: dimension mismatch");
  }
  PowerMatrix pm;
  pm.m = tx.element_count;
  pm.n = rx.element_count;
  pm.y.assign(pm.m * pm.n, 0.0);

  cvec projected(h.n);
  for (int64_t bm = 0; bm < pm.m; ++bm) {
    const cvec& wt = tx.weights[bm];
    // projected = w_tx^H H
    for (int64_t j = 0; j < h.n; ++j) {
      cdouble acc{0.0, 0.0};
      for (int64_t i = 0; i < h.m; ++i) {
        acc += std::conj(wt[i]) * h.at(i, j);
      }
      projected[j] = acc;
    }
    for (int64_t bn = 0; bn < pm.n; ++bn) {
      const cvec& wr = rx.weights[bn];
      cdouble acc{0.0, 0.0};
      for (int64_t j = 0; j < h.n; ++j) acc += projected[j] * wr[j];
      pm.y[bm * pm.n + bn] = std::norm(acc);
    }
  }

  int64_t best = 0;
  for (int64_t idx = 1; idx < pm.m * pm.n; ++idx) {
    if (pm.y[idx] > pm.y[best]) best = idx;
  }
  pm.best_pair = {best / pm.n, best % pm.n};
  return pm;
}

}  // namespace beamsim::channel
