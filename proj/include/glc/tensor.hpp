#pragma once

// Symmetric second-order tensors restricted to the plane-strain subspace,
// stored in Mandel notation: (xx, yy, zz, sqrt(2)*xy). The xz and yz
// components are identically zero in every state this library produces.
// With this basis the double contraction A:B is the plain dot product and
// fourth-order tensors with minor symmetry are 4x4 matrices.

#include <Eigen/Core>

#include <cmath>

namespace glc {

using Vec4 = Eigen::Matrix<double, 4, 1>;
using Mat4 = Eigen::Matrix<double, 4, 4>;

inline constexpr double kSqrt2 = 1.41421356237309504880;

inline double trace(const Vec4& a) { return a[0] + a[1] + a[2]; }

inline Vec4 deviator(const Vec4& a)
{
    const double m = trace(a) / 3.0;
    return {a[0] - m, a[1] - m, a[2] - m, a[3]};
}

/// von Mises equivalent value sqrt(3/2 dev(a):dev(a)).
inline double von_mises(const Vec4& a)
{
    const Vec4 d = deviator(a);
    return std::sqrt(1.5 * d.dot(d));
}

inline Vec4 identity2() { return {1.0, 1.0, 1.0, 0.0}; }

inline Mat4 deviatoric_projector()
{
    Mat4 p = Mat4::Identity();
    p.topLeftCorner<3, 3>().array() -= 1.0 / 3.0;
    return p;
}

/// Mandel vector from tensor components.
inline Vec4 from_components(double xx, double yy, double zz, double xy)
{
    return {xx, yy, zz, kSqrt2 * xy};
}

inline double xy_component(const Vec4& a) { return a[3] / kSqrt2; }

/// Plane-strain kinematics: engineering strain (exx, eyy, gxy) to Mandel.
inline Vec4 strain_from_engineering(double exx, double eyy, double gxy)
{
    return {exx, eyy, 0.0, gxy / kSqrt2};
}

/// Full-index component C_ijkl of a minor-symmetric fourth-order tensor held as
/// a Mandel matrix. Indices run over {0,1,2}; components coupling to z-shear
/// are zero for plane-strain states.
double tensor4_component(const Mat4& c, int i, int j, int k, int l);

}  // namespace glc
