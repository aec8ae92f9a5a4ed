#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "swformer/dual.hpp"

namespace swformer {

// Oriented 3D box: center, extents along heading (l), across (w), vertical
// (h), and yaw in radians.
struct Box3D {
  double x = 0, y = 0, z = 0;
  double l = 1, w = 1, h = 1;
  double heading = 0;
};

enum class ObjectClass : int { kVehicle = 0, kPedestrian = 1 };
constexpr int kNumClasses = 2;

std::string class_name(ObjectClass cls);
ObjectClass parse_class(const std::string& name);

struct LabeledBox {
  Box3D box;
  ObjectClass cls = ObjectClass::kVehicle;
};

// Wraps to [-pi, pi).
double wrap_angle(double theta);

bool contains_bev(const Box3D& box, double x, double y);
bool contains(const Box3D& box, double x, double y, double z);

template <typename T>
struct Vec2 {
  T x, y;
};

template <typename T>
std::array<Vec2<T>, 4> bev_corners(const T& cx, const T& cy, const T& l, const T& w, const T& heading) {
  using std::cos;
  using std::sin;
  const T c = cos(heading), s = sin(heading);
  const T hl = l * 0.5, hw = w * 0.5;
  const T lx[4] = {hl, -hl, -hl, hl};
  const T ly[4] = {hw, hw, -hw, -hw};
  std::array<Vec2<T>, 4> out;
  for (int i = 0; i < 4; ++i) out[i] = {cx + c * lx[i] - s * ly[i], cy + s * lx[i] + c * ly[i]};
  return out;
}

// Intersection area of two counter-clockwise convex polygons by clipping
// `subject` against every edge of `clip`.
template <typename T>
T convex_intersection_area(std::vector<Vec2<T>> subject, const std::vector<Vec2<T>>& clip) {
  const std::size_t n = clip.size();
  for (std::size_t e = 0; e < n && !subject.empty(); ++e) {
    const Vec2<T>& a = clip[e];
    const Vec2<T>& b = clip[(e + 1) % n];
    auto side = [&](const Vec2<T>& p) { return (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x); };
    std::vector<Vec2<T>> next;
    next.reserve(subject.size() + 2);
    for (std::size_t i = 0; i < subject.size(); ++i) {
      const Vec2<T>& p = subject[i];
      const Vec2<T>& q = subject[(i + 1) % subject.size()];
      const T sp = side(p), sq = side(q);
      const bool in_p = value_of(sp) >= 0.0, in_q = value_of(sq) >= 0.0;
      if (in_p) next.push_back(p);
      if (in_p != in_q) {
        const T t = sp / (sp - sq);
        next.push_back({p.x + (q.x - p.x) * t, p.y + (q.y - p.y) * t});
      }
    }
    subject = std::move(next);
  }
  if (subject.size() < 3) return T(0.0);
  T area(0.0);
  for (std::size_t i = 0; i < subject.size(); ++i) {
    const auto& p = subject[i];
    const auto& q = subject[(i + 1) % subject.size()];
    area += p.x * q.y - q.x * p.y;
  }
  return area * 0.5;
}

template <typename T>
struct BoxParams {
  T x, y, z, l, w, h, heading;
};

template <typename T>
T bev_intersection(const BoxParams<T>& a, const BoxParams<T>& b) {
  const auto ca = bev_corners(a.x, a.y, a.l, a.w, a.heading);
  const auto cb = bev_corners(b.x, b.y, b.l, b.w, b.heading);
  return convex_intersection_area(std::vector<Vec2<T>>(ca.begin(), ca.end()), std::vector<Vec2<T>>(cb.begin(), cb.end()));
}

// Rotated-rectangle intersection extended by the vertical overlap.
template <typename T>
T iou_3d_generic(const BoxParams<T>& a, const BoxParams<T>& b) {
  const double va = value_of(a.l) * value_of(a.w) * value_of(a.h);
  const double vb = value_of(b.l) * value_of(b.w) * value_of(b.h);
  if (!(va > 0.0) || !(vb > 0.0)) return T(0.0);
  const T a_top = a.z + a.h * 0.5, a_bot = a.z - a.h * 0.5;
  const T b_top = b.z + b.h * 0.5, b_bot = b.z - b.h * 0.5;
  const T top = value_of(a_top) < value_of(b_top) ? a_top : b_top;
  const T bot = value_of(a_bot) > value_of(b_bot) ? a_bot : b_bot;
  if (!(value_of(top) > value_of(bot))) return T(0.0);
  const T inter = bev_intersection(a, b) * (top - bot);
  if (!(value_of(inter) > 0.0)) return T(0.0);
  const T uni = a.l * a.w * a.h + b.l * b.w * b.h - inter;
  return inter / uni;
}

double bev_iou(const Box3D& a, const Box3D& b);
double iou_3d(const Box3D& a, const Box3D& b);

}  // namespace swformer
