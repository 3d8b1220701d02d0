#pragma once

// Polytopes and polyhedral cones: vertex/facet conversion, duals, membership, volume.

#include "gptomo/error.hpp"
#include "gptomo/linalg.hpp"

#include <optional>
#include <vector>

namespace gptomo::poly {

/// Tolerance for incidence and deduplication, relative to unit diameter.
inline constexpr double kTol = 1e-9;

/// Convex hull of the rows of `vertices`.
struct VPolytope {
    Matrix vertices;
    Eigen::Index dimension() const { return vertices.cols(); }
    Eigen::Index size() const { return vertices.rows(); }
};

/// {x : a x <= b}.
struct HPolytope {
    Matrix a;
    Vector b;
    Eigen::Index dimension() const { return a.cols(); }
    Eigen::Index size() const { return a.rows(); }
};

/// Raised by h_to_v for an unbounded region; `ray()` is a recession direction.
class UnboundedPolytope : public Error {
public:
    UnboundedPolytope(const std::string& what, Vector ray) : Error(what), ray_(std::move(ray)) {}
    const Vector& ray() const { return ray_; }

private:
    Vector ray_;
};

/// Extreme rays of the pointed cone {x : a x >= 0} by double description, as unit-norm rows.
/// Rows of `a` are inserted in order; throws DegenerateGeometry if a lacks full column rank.
Matrix extreme_rays(const Matrix& a, double tol = kTol);

/// Indices of points that are not convex combinations of the remaining ones.
/// Points are tested in order and removed as soon as they are found redundant.
std::vector<Eigen::Index> extreme_point_indices(const Matrix& points, double tol = kTol);

/// The surviving points of extreme_point_indices, order preserved.
VPolytope remove_interior(const Matrix& points, double tol = kTol);

VPolytope h_to_v(const HPolytope& h, double tol = kTol);

/// Facets of a full-dimensional V-polytope, unit normals, sorted lexicographically.
/// Throws DegenerateGeometry when the points do not span the ambient space affinely.
HPolytope v_to_h(const VPolytope& v, double tol = kTol);

/// Unit-normalize rows, drop duplicates and sort lexicographically.
HPolytope canonicalize(const HPolytope& h, double tol = kTol);

/// {x : 0 <= g.x <= 1 for all generator rows g}, intersected with {u.x = 1} when u is given.
/// Vertices are returned in the ambient R^k coordinates.
VPolytope consistent_dual(const Matrix& generators, const std::optional<Vector>& normalization = std::nullopt,
                          double tol = kTol);

/// True when x is within L1 distance tol of conv(vertices).
bool contains(const VPolytope& p, const Vector& x, double tol = 1e-9);

/// Dimension of the affine hull of the rows.
int affine_dimension(const Matrix& points, double tol = kTol);

/// Volume of conv(vertices) in the ambient dimension; 0 when the hull is lower dimensional.
double volume(const VPolytope& v, double tol = kTol);

struct ConeFacets {
    /// Rows h with h.g >= 0 for every generator, unit norm, sorted.
    Matrix facets;
    /// Orthonormal basis (columns) of the generator span; identity when full dimensional.
    Matrix span;
    bool full_dimensional = true;
};

/// Facet description of cone{generator rows}; within the span when the generators do not span R^k.
ConeFacets cone_facets(const Matrix& generators, double tol = kTol);

}  // namespace gptomo::poly
