#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "splat/core/covariance.hpp"
#include "splat/core/gaussian_cloud.hpp"
#include "splat/core/projection.hpp"
#include "splat/core/sh.hpp"

using namespace splat;

namespace {

Vec4 random_unit_quat(std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Vec4 q(g(rng), g(rng), g(rng), g(rng));
    return q / q.norm();
}

Mat3 quat_matrix_oracle(const Vec4& q) {
    // independent construction through Eigen's quaternion type
    Quat eq(q[0], q[1], q[2], q[3]);
    eq.normalize();
    return eq.toRotationMatrix();
}

}  // namespace

TEST_CASE("covariance_3d identity rotation gives squared-scale diagonal") {
    Mat3 cov = covariance_3d(Vec3(0.0, std::log(2.0), std::log(3.0)), Vec4(1, 0, 0, 0));
    Mat3 expect = Vec3(1, 4, 9).asDiagonal();
    CHECK((cov - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("covariance_3d 90 degree z rotation matches a numeric multiply oracle") {
    double c = std::cos(M_PI / 4), s = std::sin(M_PI / 4);
    Vec4 q(c, 0, 0, s);
    Vec3 log_scale(std::log(2.0), 0.0, 0.0);
    Mat3 cov = covariance_3d(log_scale, q);

    Mat3 R = quat_matrix_oracle(q);
    Mat3 D = Vec3(4, 1, 1).asDiagonal();
    Mat3 expect = R * D * R.transpose();
    CHECK((cov - expect).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((cov - Mat3(Vec3(1, 4, 1).asDiagonal())).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("covariance_3d isotropic scale is rotation invariant") {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 20; ++i) {
        Mat3 cov = covariance_3d(Vec3::Zero(), random_unit_quat(rng));
        CHECK((cov - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("covariance_3d rejects badly non-unit quaternions") {
    CHECK_THROWS_AS(covariance_3d(Vec3::Zero(), Vec4(2, 0, 0, 0)), InputError);
}

TEST_CASE("covariance_3d symmetry, PSD, determinant over random inputs") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> uls(-2.0, 0.7);
    for (int i = 0; i < 10000; ++i) {
        Vec3 ls(uls(rng), uls(rng), uls(rng));
        Vec4 q = random_unit_quat(rng);
        Mat3 cov = covariance_3d(ls, q);
        CHECK((cov - cov.transpose()).cwiseAbs().maxCoeff() < 1e-12);
        Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
        CHECK(eig.eigenvalues().minCoeff() > -1e-9);
        double det_expect = std::exp(2.0 * ls.sum());
        CHECK(cov.determinant() == doctest::Approx(det_expect).epsilon(1e-9));
    }
}

TEST_CASE("gaussian_density_3d values match direct formula evaluation") {
    Vec3 m(0.3, -0.2, 1.0);
    double norm3 = std::pow(2.0 * M_PI, -1.5);
    CHECK(gaussian_density_3d(m, m, Mat3::Identity()) == doctest::Approx(norm3).epsilon(1e-12));
    CHECK(gaussian_density_3d(m + Vec3(1, 0, 0), m, Mat3::Identity()) ==
          doctest::Approx(norm3 * std::exp(-0.5)).epsilon(1e-12));
    CHECK(gaussian_density_3d(m, m, 4.0 * Mat3::Identity()) ==
          doctest::Approx(norm3 / 8.0).epsilon(1e-12));
}

TEST_CASE("gaussian_density_3d rejects singular covariance") {
    Mat3 cov = Mat3::Zero();
    CHECK_THROWS_AS(gaussian_density_3d(Vec3::Zero(), Vec3::Zero(), cov), NumericalError);
}

TEST_CASE("gaussian_density_3d integrates to one under Monte Carlo quadrature") {
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> ueig(0.1, 2.0);
    for (int trial = 0; trial < 3; ++trial) {
        Vec3 eigs(ueig(rng), ueig(rng), ueig(rng));
        Mat3 R = quat_matrix_oracle(random_unit_quat(rng));
        Mat3 cov = R * Mat3(eigs.asDiagonal()) * R.transpose();
        Vec3 mean(0.3, -1.0, 0.5);

        // uniform samples in the +-5 sigma eigen-aligned box
        Vec3 half = 5.0 * eigs.cwiseSqrt();
        double volume = 8.0 * half.prod();
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        double acc = 0.0;
        const int n = 1000000;
        for (int i = 0; i < n; ++i) {
            Vec3 local(u(rng) * half[0], u(rng) * half[1], u(rng) * half[2]);
            acc += gaussian_density_3d(mean + R * local, mean, cov);
        }
        double integral = acc / n * volume;
        CHECK(integral == doctest::Approx(1.0).epsilon(0.01));
    }
}

TEST_CASE("world_to_camera applies the rigid pose") {
    Camera cam;
    cam.width = cam.height = 10;
    cam.cx = cam.cy = 5;
    Vec3 p(0.4, -1.0, 2.0);
    CHECK((world_to_camera(cam, p) - p).norm() == 0.0);

    cam.world_to_camera_translation = Vec3(0, 0, 5);
    CHECK((world_to_camera(cam, Vec3::Zero()) - Vec3(0, 0, 5)).norm() == 0.0);

    // 180 degree yaw, checked against an independently built matrix
    Mat3 yaw = Eigen::AngleAxisd(M_PI, Vec3::UnitY()).toRotationMatrix();
    cam.world_to_camera_rotation = yaw;
    cam.world_to_camera_translation = Vec3::Zero();
    Vec3 got = world_to_camera(cam, Vec3(1, 0, 1));
    CHECK((got - Vec3(-1, 0, -1)).norm() < 1e-12);
}

TEST_CASE("projection_jacobian formula values") {
    Camera cam;
    cam.width = cam.height = 100;
    cam.cx = cam.cy = 50;

    cam.fx = cam.fy = 1;
    Mat23 J = projection_jacobian(cam, Vec3(0, 0, 1));
    Mat23 expect;
    expect << 1, 0, 0, 0, 1, 0;
    CHECK((J - expect).cwiseAbs().maxCoeff() < 1e-12);

    cam.fx = cam.fy = 100;
    J = projection_jacobian(cam, Vec3(0, 0, 2));
    expect << 50, 0, 0, 0, 50, 0;
    CHECK((J - expect).cwiseAbs().maxCoeff() < 1e-12);

    cam.fx = cam.fy = 1;
    J = projection_jacobian(cam, Vec3(1, 0, 1));
    expect << 1, 0, -1, 0, 1, 0;
    CHECK((J - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("projection_jacobian rejects points behind the near plane") {
    Camera cam;
    cam.width = cam.height = 10;
    cam.cx = cam.cy = 5;
    CHECK_THROWS_AS(projection_jacobian(cam, Vec3(0, 0, 0.0)), NumericalError);
    CHECK_THROWS_AS(projection_jacobian(cam, Vec3(0, 0, -1.0)), NumericalError);
}

TEST_CASE("project_covariance matches a matrix product oracle") {
    double f = 7.0, eps = 0.01;
    Mat23 J;
    J << f, 0, 0, 0, f, 0;
    Mat2 out = project_covariance(J, Mat3::Identity(), eps * Mat3::Identity(), 0.0);
    CHECK((out - f * f * eps * Mat2::Identity()).cwiseAbs().maxCoeff() < 1e-12);

    // blur is purely additive
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    for (int i = 0; i < 10; ++i) {
        Mat23 Jr;
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 3; ++c) Jr(r, c) = g(rng);
        Mat3 R = quat_matrix_oracle(random_unit_quat(rng));
        Mat3 cov3 = covariance_3d(Vec3(g(rng) * 0.2, g(rng) * 0.2, g(rng) * 0.2),
                                  random_unit_quat(rng));
        Mat2 a = project_covariance(Jr, R, cov3, 0.0);
        Mat2 b = project_covariance(Jr, R, cov3, 0.7);
        CHECK((b - a - 0.7 * Mat2::Identity()).cwiseAbs().maxCoeff() < 1e-12);

        // full product oracle
        Mat2 oracle = (Jr * R) * cov3 * (Jr * R).transpose();
        oracle = 0.5 * (oracle + oracle.transpose());
        CHECK((a - oracle).cwiseAbs().maxCoeff() < 1e-10);
    }

    Mat2 zero_case = project_covariance(J, Mat3::Identity(), Mat3::Zero(), 0.3);
    CHECK((zero_case - 0.3 * Mat2::Identity()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("project_covariance is consistent under optical-axis frame rotation") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> g;
    for (int i = 0; i < 20; ++i) {
        Mat23 J;
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 3; ++c) J(r, c) = g(rng);
        Mat3 W = quat_matrix_oracle(random_unit_quat(rng));
        Mat3 cov3 = covariance_3d(Vec3(g(rng) * 0.3, g(rng) * 0.3, g(rng) * 0.3),
                                  random_unit_quat(rng));
        Mat3 Rz = Eigen::AngleAxisd(g(rng), Vec3::UnitZ()).toRotationMatrix();
        Mat2 a = project_covariance(J, W, cov3, 0.0);
        Mat2 b = project_covariance(J * Rz.transpose(), Rz * W, cov3, 0.0);
        CHECK((a - b).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("eval_sh band 0 and offset conventions") {
    std::vector<Vec3> coeffs(4, Vec3::Zero());
    CHECK((eval_sh(coeffs, Vec3(0, 0, 1), 1) - Vec3(0.5, 0.5, 0.5)).norm() == 0.0);

    coeffs[0] = Vec3(0.7, -0.3, 0.1);
    const double c0 = 0.28209479177387814;
    Vec3 expect = (0.28209479177387814 * coeffs[0].array() + 0.5).cwiseMax(0.0).cwiseMin(1.0);
    (void)c0;
    Vec3 a = eval_sh(coeffs, Vec3(0, 0, 1), 1);
    Vec3 b = eval_sh(coeffs, Vec3(1, 0, 0).normalized(), 0);
    CHECK((a - expect).norm() < 1e-12);
    CHECK((b - expect).norm() < 1e-12);
}

TEST_CASE("eval_sh degree 0 is direction independent, bit exact") {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> g;
    std::vector<Vec3> coeffs(1, Vec3(0.2, 0.4, -0.1));
    Vec3 ref = eval_sh(coeffs, Vec3(0, 0, 1), 0);
    for (int i = 0; i < 100; ++i) {
        Vec3 d(g(rng), g(rng), g(rng));
        d.normalize();
        CHECK((eval_sh(coeffs, d, 0) - ref).norm() == 0.0);
    }
}

TEST_CASE("eval_sh degree 1 depends on view direction through the z coefficients") {
    std::vector<Vec3> coeffs(4, Vec3::Zero());
    coeffs[0] = Vec3(0.1, 0.1, 0.1);
    coeffs[2] = Vec3(0.3, 0.0, 0.0);  // the z-linear band-1 term
    Vec3 up = eval_sh(coeffs, Vec3(0, 0, 1), 1);
    Vec3 down = eval_sh(coeffs, Vec3(0, 0, -1), 1);
    CHECK((up - down).norm() > 1e-3);

    coeffs[2] = Vec3::Zero();
    up = eval_sh(coeffs, Vec3(0, 0, 1), 1);
    down = eval_sh(coeffs, Vec3(0, 0, -1), 1);
    CHECK((up - down).norm() == 0.0);
}

TEST_CASE("eval_sh rejects a degree beyond the stored block") {
    std::vector<Vec3> coeffs(4, Vec3::Zero());
    CHECK_THROWS_AS(eval_sh(coeffs, Vec3(0, 0, 1), 2), InputError);
}

TEST_CASE("sh basis matches closed-form low-order values") {
    // degree-1 real SH at +z: Y00 = 0.2821, Y1(-1,0,1) = c1 * (-y, z, -x)
    double basis[4];
    sh_basis(1, Vec3(0, 0, 1), basis);
    CHECK(basis[0] == doctest::Approx(0.28209479177387814).epsilon(1e-12));
    CHECK(basis[1] == doctest::Approx(0.0));
    CHECK(std::abs(basis[2]) == doctest::Approx(0.4886025119029199).epsilon(1e-10));
    CHECK(basis[3] == doctest::Approx(0.0));
}

TEST_CASE("camera validation catches bad intrinsics and poses") {
    Camera cam;
    cam.width = cam.height = 10;
    cam.cx = cam.cy = 5;
    CHECK_NOTHROW(cam.validate());

    Camera bad = cam;
    bad.fx = 0;
    CHECK_THROWS_AS(bad.validate(), InputError);
    bad = cam;
    bad.cx = 10;
    CHECK_THROWS_AS(bad.validate(), InputError);
    bad = cam;
    bad.world_to_camera_rotation(0, 0) = 2.0;
    CHECK_THROWS_AS(bad.validate(), InputError);
    bad = cam;
    bad.world_to_camera_rotation = -Mat3::Identity();  // det -1
    CHECK_THROWS_AS(bad.validate(), InputError);
}

TEST_CASE("camera center inverts the pose") {
    std::mt19937_64 rng(41);
    std::normal_distribution<double> g;
    Camera cam;
    cam.width = cam.height = 10;
    cam.cx = cam.cy = 5;
    cam.world_to_camera_rotation = quat_matrix_oracle(random_unit_quat(rng));
    cam.world_to_camera_translation = Vec3(g(rng), g(rng), g(rng));
    CHECK(world_to_camera(cam, cam.center()).norm() < 1e-12);
}

TEST_CASE("gaussian cloud row operations keep sequences aligned") {
    GaussianCloud c;
    c.sh_degree = 1;
    c.resize(5);
    for (size_t i = 0; i < 5; ++i) {
        c.positions[i] = Vec3(static_cast<double>(i), 0, 0);
        c.damage_label[i] = static_cast<uint8_t>(i);
        c.frozen[i] = i % 2;
    }
    c.remove_indices({1, 3});
    REQUIRE(c.count == 3);
    CHECK(c.positions[0][0] == 0);
    CHECK(c.positions[1][0] == 2);
    CHECK(c.positions[2][0] == 4);
    CHECK(c.damage_label[1] == 2);
    CHECK(c.frozen[2] == 0);

    c.append_from(c, 1);
    REQUIRE(c.count == 4);
    CHECK(c.positions[3][0] == 2);
    CHECK(c.damage_label[3] == 2);
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("gaussian cloud validate flags broken invariants") {
    GaussianCloud c;
    c.resize(2);
    c.rotations[1] = Vec4(1, 1, 0, 0);  // non-unit
    CHECK_THROWS(c.validate());
    c.renormalize_rotations();
    CHECK_NOTHROW(c.validate());
    c.positions.pop_back();
    CHECK_THROWS_AS(c.validate(), ConsistencyError);
}

TEST_CASE("rotation and covariance backward match finite differences") {
    std::mt19937_64 rng(53);
    std::normal_distribution<double> g;
    const double h = 1e-5;
    for (int trial = 0; trial < 10; ++trial) {
        Vec4 q = random_unit_quat(rng);
        Vec3 ls(0.3 * g(rng), 0.3 * g(rng), 0.3 * g(rng));
        Mat3 G;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) G(r, c) = g(rng);

        Vec3 d_ls = Vec3::Zero();
        Vec4 d_q = Vec4::Zero();
        covariance_3d_backward(ls, q, G, d_ls, d_q);

        auto f = [&](const Vec3& l, const Vec4& qq) {
            return (G.array() * covariance_3d(l, qq).array()).sum();
        };
        for (int k = 0; k < 3; ++k) {
            Vec3 lp = ls, lm = ls;
            lp[k] += h;
            lm[k] -= h;
            double fd = (f(lp, q) - f(lm, q)) / (2 * h);
            CHECK(d_ls[k] == doctest::Approx(fd).epsilon(1e-5));
        }
        for (int k = 0; k < 4; ++k) {
            Vec4 qp = q, qm = q;
            qp[k] += h;
            qm[k] -= h;
            double fd = (f(ls, qp) - f(ls, qm)) / (2 * h);
            CHECK(d_q[k] == doctest::Approx(fd).epsilon(1e-5));
        }
    }
}
