#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "rcmstab/geom.hpp"

using namespace rcmstab;
using rcmstab::testing::max_abs_diff;
using rcmstab::testing::random_rotation;
using rcmstab::testing::random_transform;
using rcmstab::testing::random_vec3;

TEST_CASE("rot_axis basics") {
  CHECK(max_abs_diff(rot_axis(Axis::Z, 0.0).matrix(), Eigen::Matrix3d::Identity()) == 0.0);

  const Eigen::Vector3d turned = rot_axis(Axis::Z, kPi / 2.0) * Eigen::Vector3d(1, 0, 0);
  CHECK((turned - Eigen::Vector3d(0, 1, 0)).norm() < 1e-15);

  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    CHECK(rot_axis(Axis::Y, rng.uniform(-10.0, 10.0)).is_orthonormal());
  }
}

TEST_CASE("compose and invert") {
  Rng rng(12);
  const Transform t = random_transform(rng);

  const Transform ti = t * Transform::identity();
  CHECK(max_abs_diff(ti.rotation().matrix(), t.rotation().matrix()) == 0.0);

  const Transform id = t * invert(t);
  CHECK(max_abs_diff(id.rotation().matrix(), Eigen::Matrix3d::Identity()) < 1e-10);
  CHECK(id.translation().norm() < 1e-10);

  for (int i = 0; i < 100; ++i) {
    const Transform a = random_transform(rng);
    const Transform b = random_transform(rng);
    const Transform lhs = invert(a * b);
    const Transform rhs = invert(b) * invert(a);
    CHECK(max_abs_diff(lhs.rotation().matrix(), rhs.rotation().matrix()) < 1e-12);
    CHECK((lhs.translation() - rhs.translation()).norm() < 1e-12);
  }
}

TEST_CASE("frame labels chain and mismatches throw") {
  Rng rng(13);
  const Transform ab = random_transform(rng, "a", "b");
  const Transform bc = random_transform(rng, "b", "c");
  const Transform ac = ab * bc;
  CHECK(ac.target_frame() == "a");
  CHECK(ac.source_frame() == "c");

  const Transform inv = invert(ab);
  CHECK(inv.target_frame() == "b");
  CHECK(inv.source_frame() == "a");

  CHECK_THROWS_AS(bc * ab, FrameMismatch);
}

TEST_CASE("log_so3 trivial values") {
  CHECK(log_so3(Rotation::identity()).norm() == 0.0);

  const Eigen::Vector3d w = log_so3(rot_axis(Axis::Z, 0.3));
  CHECK((w - Eigen::Vector3d(0, 0, 0.3)).norm() < 1e-14);
}

TEST_CASE("log_so3 matches the trace identity") {
  Rng rng(14);
  for (int i = 0; i < 500; ++i) {
    const Rotation r = random_rotation(rng);
    const double expected =
        std::acos(std::clamp((r.matrix().trace() - 1.0) / 2.0, -1.0, 1.0));
    CHECK(std::abs(log_so3(r).norm() - expected) < 1e-9);
  }
}

TEST_CASE("exp/log round trip") {
  Rng rng(15);
  for (int i = 0; i < 500; ++i) {
    Eigen::Vector3d axis = random_vec3(rng);
    if (axis.norm() < 1e-9) axis = Eigen::Vector3d::UnitZ();
    axis.normalize();
    const Eigen::Vector3d w = rng.uniform(0.0, 3.0) * axis;
    CHECK((log_so3(exp_so3(w)) - w).norm() < 1e-8);
  }
}

TEST_CASE("log_so3 is stable near pi") {
  Rng rng(16);
  for (int i = 0; i < 200; ++i) {
    Eigen::Vector3d axis = random_vec3(rng);
    if (axis.norm() < 1e-9) axis = Eigen::Vector3d::UnitX();
    axis.normalize();
    const Eigen::Vector3d w = rng.uniform(kPi - 0.05, kPi - 1.001e-3) * axis;
    CHECK((log_so3(exp_so3(w)) - w).norm() < 1e-8);
  }
  // At pi exactly the sign is conventional and acos conditioning limits the
  // recovered angle to ~sqrt(eps); the rotation itself must round-trip.
  const Eigen::Vector3d w = kPi * Eigen::Vector3d(1, 2, -1).normalized();
  const Eigen::Vector3d back = log_so3(exp_so3(w));
  CHECK(std::abs(back.norm() - kPi) < 1e-7);
  CHECK(max_abs_diff(exp_so3(back).matrix(), exp_so3(w).matrix()) < 1e-7);
}

TEST_CASE("adjoint structure") {
  CHECK(max_abs_diff(adjoint(Transform::identity()), Matrix6d::Identity()) == 0.0);

  Rng rng(17);
  const Transform rot_only(random_rotation(rng), Eigen::Vector3d::Zero());
  CHECK(adjoint(rot_only).topRightCorner<3, 3>().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("adjoint matches the velocity-field frame change") {
  Rng rng(18);
  for (int i = 0; i < 100; ++i) {
    const Transform t = random_transform(rng);
    const Twist xi = Twist::from_vector((Vector6d() << random_vec3(rng), random_vec3(rng)).finished());
    const Vector6d mapped = adjoint(t) * xi.vector();
    const Eigen::Vector3d v_a = mapped.head<3>();
    const Eigen::Vector3d w_a = mapped.tail<3>();
    for (int k = 0; k < 5; ++k) {
      const Eigen::Vector3d p_b = random_vec3(rng);
      const Eigen::Vector3d vel_direct =
          t.rotation() * (xi.linear + xi.angular.cross(p_b));
      const Eigen::Vector3d vel_mapped = v_a + w_a.cross(t * p_b);
      CHECK((vel_direct - vel_mapped).norm() < 1e-10);
    }
  }
}

TEST_CASE("adjoint is a homomorphism") {
  Rng rng(19);
  for (int i = 0; i < 100; ++i) {
    const Transform a = random_transform(rng);
    const Transform b = random_transform(rng);
    CHECK(max_abs_diff(adjoint(a * b), adjoint(a) * adjoint(b)) < 1e-9);
  }
}

TEST_CASE("interpolate_pose endpoints and geodesic midpoint") {
  Rng rng(20);
  const Transform a = random_transform(rng, "cam", "tool");
  const Transform b(a.rotation() * rot_axis(Axis::Z, deg2rad(0.4)),
                    a.translation() + Eigen::Vector3d(0.01, 0, 0), "cam", "tool");

  const Transform at0 = interpolate_pose(a, b, 0.0);
  CHECK(max_abs_diff(at0.rotation().matrix(), a.rotation().matrix()) < 1e-15);
  CHECK((at0.translation() - a.translation()).norm() < 1e-15);

  const Transform at1 = interpolate_pose(a, b, 1.0);
  CHECK(max_abs_diff(at1.rotation().matrix(), b.rotation().matrix()) < 1e-12);
  CHECK((at1.translation() - b.translation()).norm() < 1e-15);

  const Transform mid = interpolate_pose(a, b, 0.5);
  CHECK(mid.rotation().angle_to(a.rotation()) == Catch::Approx(deg2rad(0.2)).margin(1e-12));
  CHECK(mid.rotation().angle_to(b.rotation()) == Catch::Approx(deg2rad(0.2)).margin(1e-12));

  const Transform other = random_transform(rng, "cam", "x");
  CHECK_THROWS_AS(interpolate_pose(a, other, 0.5), FrameMismatch);
}

TEST_CASE("rotations produced stay orthonormal") {
  Rng rng(21);
  for (int i = 0; i < 300; ++i) {
    const Rotation r = random_rotation(rng) * random_rotation(rng);
    CHECK((r.matrix().transpose() * r.matrix() - Eigen::Matrix3d::Identity())
              .cwiseAbs()
              .maxCoeff() < 1e-10);
  }
}
