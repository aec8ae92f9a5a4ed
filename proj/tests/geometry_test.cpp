#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "swformer/geometry.hpp"
#include "swformer/rng.hpp"

namespace swformer {
namespace {

TEST(WrapAngle, Range) {
  EXPECT_NEAR(wrap_angle(3 * std::numbers::pi / 2), -std::numbers::pi / 2, 1e-12);
  EXPECT_EQ(wrap_angle(std::numbers::pi), -std::numbers::pi);
  EXPECT_NEAR(wrap_angle(-7.0), -7.0 + 2 * std::numbers::pi, 1e-12);
}

TEST(Contains, RotatedBox) {
  const Box3D box{1, 1, 0, 4, 2, 2, std::numbers::pi / 2};
  EXPECT_TRUE(contains_bev(box, 1, 2.9));
  EXPECT_FALSE(contains_bev(box, 2.9, 1));
  EXPECT_TRUE(contains(box, 1, 1, 0.9));
  EXPECT_FALSE(contains(box, 1, 1, 1.1));
}

TEST(RotatedIou, IdenticalAndDisjoint) {
  const Box3D a{0, 0, 0, 4, 2, 1.5, 0.3};
  EXPECT_EQ(iou_3d(a, a), 1.0);
  EXPECT_EQ(bev_iou(a, a), 1.0);
  const Box3D b{10, 0, 0, 4, 2, 1.5, 0.3};
  EXPECT_EQ(iou_3d(a, b), 0.0);
  const Box3D above{0, 0, 3, 4, 2, 1.5, 0.3};
  EXPECT_EQ(iou_3d(a, above), 0.0);
}

TEST(RotatedIou, AlignedHalfOverlap) {
  const Box3D a{0, 0, 0, 2, 2, 2, 0};
  const Box3D b{1, 0, 0, 2, 2, 2, 0};
  EXPECT_NEAR(bev_iou(a, b), 2.0 / 6.0, 1e-12);
  const Box3D c{1, 0, 1, 2, 2, 2, 0};
  EXPECT_NEAR(iou_3d(a, c), 1.0 / 7.0, 1e-12);
}

TEST(RotatedIou, SquareAt45Degrees) {
  // Unit square against itself rotated 45 degrees: octagon of area 2(sqrt2-1).
  const Box3D a{0, 0, 0, 1, 1, 1, 0};
  const Box3D b{0, 0, 0, 1, 1, 1, std::numbers::pi / 4};
  const double inter = 2.0 * (std::sqrt(2.0) - 1.0);
  EXPECT_NEAR(bev_iou(a, b), inter / (2.0 - inter), 1e-12);
}

TEST(RotatedIou, DegenerateIsZero) {
  const Box3D a{0, 0, 0, 0, 1, 1, 0};
  EXPECT_EQ(iou_3d(a, a), 0.0);
  EXPECT_EQ(bev_iou(a, Box3D{}), 0.0);
}

TEST(RotatedIou, SymmetryAndInvariance) {
  Rng rng(17);
  for (int i = 0; i < 200; ++i) {
    Box3D a{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-0.5, 0.5), rng.uniform(0.5, 4),
            rng.uniform(0.5, 3), rng.uniform(0.5, 2), rng.uniform(-3.1, 3.1)};
    Box3D b{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-0.5, 0.5), rng.uniform(0.5, 4),
            rng.uniform(0.5, 3), rng.uniform(0.5, 2), rng.uniform(-3.1, 3.1)};
    EXPECT_EQ(iou_3d(a, b), iou_3d(b, a));
    EXPECT_EQ(bev_iou(a, b), bev_iou(b, a));
    const double base = iou_3d(a, b);
    const double tx = rng.uniform(-50, 50), ty = rng.uniform(-50, 50), rot = rng.uniform(-3, 3);
    auto move = [&](Box3D box) {
      const double c = std::cos(rot), s = std::sin(rot);
      const double x = c * box.x - s * box.y, y = s * box.x + c * box.y;
      box.x = x + tx;
      box.y = y + ty;
      box.heading += rot;
      return box;
    };
    EXPECT_NEAR(iou_3d(move(a), move(b)), base, 1e-9);
  }
}

TEST(RotatedIou, DualGradientMatchesFiniteDifference) {
  using D = Dual<7>;
  const Box3D gt{0.3, -0.2, 0.1, 4.0, 1.8, 1.6, 0.4};
  const double p[7] = {0.0, 0.1, 0.0, 3.6, 2.0, 1.5, 0.25};
  BoxParams<D> pred{D::variable(p[0], 0), D::variable(p[1], 1), D::variable(p[2], 2), D::variable(p[3], 3),
                    D::variable(p[4], 4), D::variable(p[5], 5), D::variable(p[6], 6)};
  BoxParams<D> target{gt.x, gt.y, gt.z, gt.l, gt.w, gt.h, gt.heading};
  const D iou = iou_3d_generic(pred, target);
  for (int k = 0; k < 7; ++k) {
    double up[7], dn[7];
    std::copy(p, p + 7, up);
    std::copy(p, p + 7, dn);
    up[k] += 1e-6;
    dn[k] -= 1e-6;
    auto eval = [&](const double* q) { return iou_3d(Box3D{q[0], q[1], q[2], q[3], q[4], q[5], q[6]}, gt); };
    EXPECT_NEAR(iou.d[k], (eval(up) - eval(dn)) / 2e-6, 1e-6);
  }
  EXPECT_NEAR(iou.v, iou_3d(Box3D{p[0], p[1], p[2], p[3], p[4], p[5], p[6]}, gt), 1e-15);
}

}  // namespace
}  // namespace swformer
