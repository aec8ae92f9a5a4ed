#include "swformer/geometry.hpp"

#include <numbers>
#include <tuple>

#include "swformer/error.hpp"

namespace swformer {

namespace {

BoxParams<double> params_of(const Box3D& b) { return {b.x, b.y, b.z, b.l, b.w, b.h, b.heading}; }

auto key_of(const Box3D& b) { return std::tie(b.x, b.y, b.z, b.l, b.w, b.h, b.heading); }

bool identical(const Box3D& a, const Box3D& b) { return key_of(a) == key_of(b); }

}  // namespace

std::string class_name(ObjectClass cls) { return cls == ObjectClass::kVehicle ? "vehicle" : "pedestrian"; }

ObjectClass parse_class(const std::string& name) {
  if (name == "vehicle" || name == "0") return ObjectClass::kVehicle;
  if (name == "pedestrian" || name == "1") return ObjectClass::kPedestrian;
  throw ContractError("unknown object class '" + name + "'");
}

double wrap_angle(double theta) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double t = std::fmod(theta + std::numbers::pi, two_pi);
  if (t < 0) t += two_pi;
  t -= std::numbers::pi;
  if (t >= std::numbers::pi) t -= two_pi;
  return t;
}

bool contains_bev(const Box3D& box, double x, double y) {
  const double dx = x - box.x, dy = y - box.y;
  const double c = std::cos(box.heading), s = std::sin(box.heading);
  const double lx = c * dx + s * dy;
  const double ly = -s * dx + c * dy;
  return std::abs(lx) <= 0.5 * box.l && std::abs(ly) <= 0.5 * box.w;
}

bool contains(const Box3D& box, double x, double y, double z) {
  return std::abs(z - box.z) <= 0.5 * box.h && contains_bev(box, x, y);
}

// Arguments are put in a canonical order so that iou(a, b) == iou(b, a)
// bit for bit.
double bev_iou(const Box3D& a, const Box3D& b) {
  if (!(a.l > 0 && a.w > 0 && b.l > 0 && b.w > 0)) return 0.0;
  if (identical(a, b)) return 1.0;
  const bool swap = key_of(b) < key_of(a);
  const auto pa = params_of(swap ? b : a), pb = params_of(swap ? a : b);
  const double inter = bev_intersection(pa, pb);
  if (!(inter > 0.0)) return 0.0;
  return inter / (a.l * a.w + b.l * b.w - inter);
}

double iou_3d(const Box3D& a, const Box3D& b) {
  if (!(a.l > 0 && a.w > 0 && a.h > 0 && b.l > 0 && b.w > 0 && b.h > 0)) return 0.0;
  if (identical(a, b)) return 1.0;
  const bool swap = key_of(b) < key_of(a);
  return iou_3d_generic(params_of(swap ? b : a), params_of(swap ? a : b));
}

}  // namespace swformer
